// SPDX-License-Identifier: Apache-2.0
#include "oransim/ricdb.hpp"

#include <atomic>
#include <bit>
#include <mutex>
#include <random>

#include "oransim/errors.hpp"

namespace oransim::ric {

namespace {

std::atomic<std::uint64_t> g_next_db_id{1};

}  // namespace

RicDatabase::RicDatabase() : id_(g_next_db_id.fetch_add(1)) {
  // Tokens start at an unpredictable offset so a handle cannot be guessed.
  std::random_device rd;
  next_token_ = (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

SdlHandle RicDatabase::open(std::string client, std::uint8_t caps) {
  if (caps == 0 || caps > kReadWrite) throw InvalidArgument("SDL capabilities must be read, write or both");
  std::unique_lock lock(mu_);
  const std::uint64_t token = next_token_++;
  grants_[token] = caps;
  return SdlHandle(std::move(client), caps, id_, token);
}

void RicDatabase::authorize(const SdlHandle& h, std::uint8_t need) const {
  auto it = grants_.find(h.token_);
  if (h.db_id_ != id_ || it == grants_.end() || it->second != h.caps_) {
    throw PermissionError("SDL handle of '" + h.client_ + "' was not issued by this database");
  }
  if ((h.caps_ & need) != need) {
    throw PermissionError("client '" + h.client_ + "' lacks " + (need == kWrite ? "write" : "read") +
                          " capability");
  }
}

std::uint64_t RicDatabase::put(const SdlHandle& h, const std::string& key, std::vector<std::uint8_t> value,
                               std::uint64_t timestamp_ms) {
  std::unique_lock lock(mu_);
  authorize(h, kWrite);
  Slot& slot = data_[key];
  auto entry = std::make_shared<DbEntry>(DbEntry{key, slot.next_version++, timestamp_ms, std::move(value)});
  slot.versions.push_back(std::move(entry));
  if (slot.versions.size() > kHistoryDepth) slot.versions.pop_front();
  return slot.versions.back()->version;
}

DbEntry RicDatabase::get_latest(const SdlHandle& h, const std::string& key) const {
  std::shared_ptr<const DbEntry> e;
  {
    std::shared_lock lock(mu_);
    authorize(h, kRead);
    auto it = data_.find(key);
    if (it == data_.end() || it->second.versions.empty()) throw NotFound("no database entry for key '" + key + "'");
    e = it->second.versions.back();
  }
  return *e;  // entries are immutable once published
}

std::uint64_t RicDatabase::latest_version(const SdlHandle& h, const std::string& key) const {
  std::shared_lock lock(mu_);
  authorize(h, kRead);
  auto it = data_.find(key);
  return it == data_.end() || it->second.versions.empty() ? 0 : it->second.versions.back()->version;
}

std::vector<DbEntry> RicDatabase::history(const SdlHandle& h, const std::string& key) const {
  std::shared_lock lock(mu_);
  authorize(h, kRead);
  std::vector<DbEntry> out;
  auto it = data_.find(key);
  if (it == data_.end()) return out;
  for (const auto& e : it->second.versions) out.push_back(*e);
  return out;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.shape().size() > 255) throw InvalidArgument("tensor rank exceeds 255");
  std::vector<std::uint8_t> out;
  out.reserve(1 + 4 * t.shape().size() + 8 * t.size());
  out.push_back(static_cast<std::uint8_t>(t.shape().size()));
  for (auto d : t.shape()) {
    if (d > UINT32_MAX) throw InvalidArgument("tensor dimension exceeds u32");
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(d >> (8 * i)));
  }
  for (double v : t.data()) {
    auto u = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw ProtocolError("empty tensor value");
  const std::size_t rank = bytes[0];
  if (bytes.size() < 1 + 4 * rank) throw ProtocolError("tensor value truncated in header");
  Shape shape(rank);
  for (std::size_t r = 0; r < rank; ++r) {
    std::uint32_t d = 0;
    for (int i = 0; i < 4; ++i) d |= std::uint32_t{bytes[1 + 4 * r + i]} << (8 * i);
    if (d == 0 || d > bytes.size()) throw ProtocolError("tensor value has an invalid dimension");
    shape[r] = d;
  }
  const std::size_t off = 1 + 4 * rank;
  std::size_t vol = rank ? 1 : 0;
  for (auto d : shape) {
    if (__builtin_mul_overflow(vol, d, &vol) || vol > bytes.size()) {
      throw ProtocolError("tensor value size does not match its shape");
    }
  }
  if (bytes.size() != off + 8 * vol) throw ProtocolError("tensor value size does not match its shape");
  std::vector<double> data(vol);
  for (std::size_t k = 0; k < vol; ++k) {
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t{bytes[off + 8 * k + i]} << (8 * i);
    data[k] = std::bit_cast<double>(u);
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace oransim::ric
