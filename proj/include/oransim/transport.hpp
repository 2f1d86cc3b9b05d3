// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>

#include "oransim/e2lite.hpp"

namespace oransim::ric {

/// Reliable ordered message channel carrying E2-lite framing.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws IoError when the peer is gone.
  virtual void send(const E2Message& msg) = 0;
  /// Blocks for the next message; nullopt once the peer closed cleanly.
  virtual std::optional<E2Message> receive() = 0;
  virtual void close() = 0;
  virtual std::uint64_t bytes_sent() const = 0;
};

/// Two connected in-process endpoints. Messages still pass through
/// encode_message / StreamDecoder.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_pipe();

/// TCP on 127.0.0.1. The listener binds an ephemeral port when port == 0.
class LoopbackListener {
 public:
  explicit LoopbackListener(std::uint16_t port = 0);
  ~LoopbackListener();
  LoopbackListener(const LoopbackListener&) = delete;
  LoopbackListener& operator=(const LoopbackListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::unique_ptr<Transport> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<Transport> connect_loopback(std::uint16_t port);

}  // namespace oransim::ric
