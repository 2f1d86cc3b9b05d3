// SPDX-License-Identifier: Apache-2.0
#include "oransim/e2lite.hpp"

#include <cmath>
#include <limits>

#include "oransim/errors.hpp"

namespace oransim::ric {

std::string to_string(MsgType t) {
  switch (t) {
    case MsgType::kSetup: return "SETUP";
    case MsgType::kIndIq: return "IND_IQ";
    case MsgType::kIndKpm: return "IND_KPM";
    case MsgType::kControl: return "CONTROL";
    case MsgType::kAck: return "ACK";
  }
  return "UNKNOWN";
}

namespace {

bool known_type(std::uint8_t t) { return t <= static_cast<std::uint8_t>(MsgType::kAck); }

// Required payload size for fixed-size types, 0 meaning "any".
std::optional<std::size_t> fixed_length(MsgType t) {
  switch (t) {
    case MsgType::kIndIq: return kIqPayloadBytes;
    case MsgType::kIndKpm: return kKpmPayloadBytes;
    case MsgType::kControl: return kControlPayloadBytes;
    default: return std::nullopt;
  }
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void validate_header(std::uint8_t type, std::uint32_t length) {
  if (!known_type(type)) throw ProtocolError("unknown E2-lite message type " + std::to_string(type));
  auto fixed = fixed_length(static_cast<MsgType>(type));
  if (fixed && *fixed != length) {
    throw ProtocolError(to_string(static_cast<MsgType>(type)) + " payload must be " + std::to_string(*fixed) +
                        " bytes, header says " + std::to_string(length));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_message(const E2Message& msg) {
  if (msg.payload.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("E2-lite payload exceeds 2^32 - 1 bytes");
  }
  if (!known_type(static_cast<std::uint8_t>(msg.type))) throw InvalidArgument("unknown message type");
  if (auto fixed = fixed_length(msg.type); fixed && *fixed != msg.payload.size()) {
    throw InvalidArgument(to_string(msg.type) + " payload must be " + std::to_string(*fixed) + " bytes");
  }
  const auto len = static_cast<std::uint32_t>(msg.payload.size());
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + len);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(len >> shift));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

E2Message decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw ProtocolError("E2-lite message shorter than its header");
  const std::uint32_t len = read_be32(bytes.data() + 1);
  validate_header(bytes[0], len);
  if (bytes.size() - kHeaderBytes < len) throw ProtocolError("E2-lite payload truncated");
  if (bytes.size() - kHeaderBytes > len) throw ProtocolError("trailing bytes after E2-lite message");
  return {static_cast<MsgType>(bytes[0]), {bytes.begin() + kHeaderBytes, bytes.end()}};
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  while (buffered() >= kHeaderBytes) {
    const std::uint8_t* h = buf_.data() + pos_;
    const std::uint32_t len = read_be32(h + 1);
    validate_header(h[0], len);
    if (buffered() - kHeaderBytes < len) break;
    const auto* p = h + kHeaderBytes;
    ready_.push_back({static_cast<MsgType>(h[0]), {p, p + len}});
    pos_ += kHeaderBytes + len;
  }
  // Compact once the consumed prefix dominates.
  if (pos_ > 0 && pos_ >= buf_.size() / 2) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(pos_));
    pos_ = 0;
  }
}

std::optional<E2Message> StreamDecoder::next() {
  if (ready_.empty()) return std::nullopt;
  E2Message m = std::move(ready_.front());
  ready_.pop_front();
  return m;
}

void StreamDecoder::finish() const {
  if (buffered() != 0) throw ProtocolError("stream ended inside an E2-lite message");
}

// ------------------------------------------------------------- payloads

namespace {

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

std::int32_t to_i32(double v) {
  const double r = std::round(v);
  if (!(r >= std::numeric_limits<std::int32_t>::min() && r <= std::numeric_limits<std::int32_t>::max())) {
    throw InvalidArgument("KPM value does not fit in i32");
  }
  return static_cast<std::int32_t>(r);
}

}  // namespace

KpmReport KpmReport::from_sample(const simnet::KpmSample& s, std::uint32_t seq) {
  return {to_i32(s.ul_sinr_db * 100.0), to_i32(s.bitrate_mbps * 1000.0), to_i32(s.bler * 1000.0), s.mcs, seq};
}

simnet::KpmSample KpmReport::to_sample() const {
  return {sinr_cdb / 100.0, bitrate_kbps / 1000.0, bler_permille / 1000.0, mcs};
}

std::vector<std::uint8_t> KpmReport::encode() const {
  std::vector<std::uint8_t> out;
  out.reserve(kKpmPayloadBytes);
  put_le32(out, static_cast<std::uint32_t>(sinr_cdb));
  put_le32(out, static_cast<std::uint32_t>(bitrate_kbps));
  put_le32(out, static_cast<std::uint32_t>(bler_permille));
  put_le32(out, static_cast<std::uint32_t>(mcs));
  put_le32(out, seq);
  return out;
}

KpmReport KpmReport::decode(std::span<const std::uint8_t> payload) {
  if (payload.size() != kKpmPayloadBytes) throw ProtocolError("KPM payload must be 20 bytes");
  const auto* p = payload.data();
  KpmReport r{static_cast<std::int32_t>(get_le32(p)), static_cast<std::int32_t>(get_le32(p + 4)),
              static_cast<std::int32_t>(get_le32(p + 8)), static_cast<std::int32_t>(get_le32(p + 12)),
              get_le32(p + 16)};
  if (r.mcs < 0 || r.mcs > simnet::kMaxMcs) throw ProtocolError("KPM report carries an invalid MCS");
  if (r.bler_permille < 0 || r.bler_permille > 1000) throw ProtocolError("KPM report carries an invalid BLER");
  return r;
}

E2Message make_control(ControlAction action) { return {MsgType::kControl, {static_cast<std::uint8_t>(action)}}; }

ControlAction parse_control(const E2Message& msg) {
  if (msg.type != MsgType::kControl || msg.payload.size() != 1) throw ProtocolError("not a CONTROL message");
  if (msg.payload[0] > 1) throw ProtocolError("unknown control action " + std::to_string(msg.payload[0]));
  return static_cast<ControlAction>(msg.payload[0]);
}

E2Message make_ack() { return {MsgType::kAck, {}}; }

}  // namespace oransim::ric
