// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "oransim/tensor.hpp"

namespace oransim::ric {

struct DbEntry {
  std::string key;
  std::uint64_t version = 0;
  std::uint64_t timestamp_ms = 0;
  std::vector<std::uint8_t> value;
};

enum Capability : std::uint8_t { kRead = 1, kWrite = 2, kReadWrite = 3 };

class RicDatabase;

/// Issued only by RicDatabase::open; copies share the same grant.
class SdlHandle {
 public:
  const std::string& client() const noexcept { return client_; }
  bool can_read() const noexcept { return caps_ & kRead; }
  bool can_write() const noexcept { return caps_ & kWrite; }

 private:
  friend class RicDatabase;
  SdlHandle(std::string client, std::uint8_t caps, std::uint64_t db_id, std::uint64_t token)
      : client_(std::move(client)), caps_(caps), db_id_(db_id), token_(token) {}
  std::string client_;
  std::uint8_t caps_;
  std::uint64_t db_id_;
  std::uint64_t token_;
};

/// In-memory versioned key-value store behind the SDL API. Puts to one key
/// are linearizable; readers never observe a partially written value.
class RicDatabase {
 public:
  static constexpr std::size_t kHistoryDepth = 16;

  RicDatabase();
  RicDatabase(const RicDatabase&) = delete;
  RicDatabase& operator=(const RicDatabase&) = delete;

  SdlHandle open(std::string client, std::uint8_t caps);

  std::uint64_t put(const SdlHandle& h, const std::string& key, std::vector<std::uint8_t> value,
                    std::uint64_t timestamp_ms = 0);
  DbEntry get_latest(const SdlHandle& h, const std::string& key) const;
  /// Latest version number of `key`, or 0 when absent.
  std::uint64_t latest_version(const SdlHandle& h, const std::string& key) const;
  /// Retained versions, oldest first (at most kHistoryDepth).
  std::vector<DbEntry> history(const SdlHandle& h, const std::string& key) const;

 private:
  void authorize(const SdlHandle& h, std::uint8_t need) const;

  struct Slot {
    std::uint64_t next_version = 1;
    std::deque<std::shared_ptr<const DbEntry>> versions;
  };
  std::uint64_t id_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Slot> data_;
  std::unordered_map<std::uint64_t, std::uint8_t> grants_;  // token -> caps
  std::uint64_t next_token_;
};

// Tensor value codec used for database entries:
// [rank u8][dims u32 LE x rank][float64 LE x volume].
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

}  // namespace oransim::ric
