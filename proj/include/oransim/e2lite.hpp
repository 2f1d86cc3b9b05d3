// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oransim/link.hpp"

namespace oransim::ric {

// Wire unit: [type u8][length u32 big-endian][payload].
enum class MsgType : std::uint8_t { kSetup = 0, kIndIq = 1, kIndKpm = 2, kControl = 3, kAck = 4 };

inline constexpr std::size_t kHeaderBytes = 5;
inline constexpr std::size_t kIqPayloadBytes = 614400;
inline constexpr std::size_t kKpmPayloadBytes = 20;
inline constexpr std::size_t kControlPayloadBytes = 1;

std::string to_string(MsgType t);

struct E2Message {
  MsgType type = MsgType::kAck;
  std::vector<std::uint8_t> payload;
  bool operator==(const E2Message&) const = default;
};

/// Throws InvalidArgument for payloads over u32 or with the wrong fixed size
/// for IND_IQ / IND_KPM / CONTROL.
std::vector<std::uint8_t> encode_message(const E2Message& msg);

/// Decodes exactly one message. ProtocolError on unknown type, bad fixed
/// length, truncation or trailing bytes.
E2Message decode_message(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream carrying back-to-back messages.
class StreamDecoder {
 public:
  /// Appends bytes; throws ProtocolError as soon as a header is invalid.
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<E2Message> next();
  std::size_t buffered() const noexcept { return buf_.size() - pos_; }
  /// Call at end of stream: ProtocolError if a message was cut off.
  void finish() const;

 private:
  void check_header();
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::deque<E2Message> ready_;
};

// ------------------------------------------------------------- payloads

/// IND_KPM payload: four i32 little-endian metrics then a u32 sequence number.
struct KpmReport {
  std::int32_t sinr_cdb = 0;       // centi-dB
  std::int32_t bitrate_kbps = 0;
  std::int32_t bler_permille = 0;
  std::int32_t mcs = 0;
  std::uint32_t seq = 0;
  bool operator==(const KpmReport&) const = default;

  static KpmReport from_sample(const simnet::KpmSample& s, std::uint32_t seq);
  simnet::KpmSample to_sample() const;
  std::vector<std::uint8_t> encode() const;
  static KpmReport decode(std::span<const std::uint8_t> payload);
};

enum class ControlAction : std::uint8_t { kFixedMaxMcs = 0, kAdaptiveMcs = 1 };

E2Message make_control(ControlAction action);
ControlAction parse_control(const E2Message& msg);
E2Message make_ack();

}  // namespace oransim::ric
