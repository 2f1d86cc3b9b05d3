// SPDX-License-Identifier: Apache-2.0
#include "oransim/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>

#include "oransim/errors.hpp"
#include "oransim/mailbox.hpp"

namespace oransim::ric {

namespace {

using Bytes = std::vector<std::uint8_t>;

class MemoryEnd : public Transport {
 public:
  MemoryEnd(std::shared_ptr<Mailbox<Bytes>> out, std::shared_ptr<Mailbox<Bytes>> in)
      : out_(std::move(out)), in_(std::move(in)) {}
  ~MemoryEnd() override { close(); }

  void send(const E2Message& msg) override {
    if (closed_) throw IoError("send on closed in-memory transport");
    auto bytes = encode_message(msg);
    sent_ += bytes.size();
    out_->push(std::move(bytes));
  }

  std::optional<E2Message> receive() override {
    while (true) {
      if (auto m = decoder_.next()) return m;
      auto chunk = in_->pop();
      if (!chunk) {
        decoder_.finish();
        return std::nullopt;
      }
      decoder_.feed(*chunk);
    }
  }

  void close() override {
    if (!closed_.exchange(true)) out_->close();
  }

  std::uint64_t bytes_sent() const override { return sent_; }

 private:
  std::shared_ptr<Mailbox<Bytes>> out_, in_;
  StreamDecoder decoder_;
  std::atomic<bool> closed_{false};
  std::atomic<std::uint64_t> sent_{0};
};

class SocketTransport : public Transport {
 public:
  explicit SocketTransport(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~SocketTransport() override {
    close();
    ::close(fd_);
  }

  void send(const E2Message& msg) override {
    auto bytes = encode_message(msg);
    std::lock_guard lock(send_mu_);  // whole frames only, even with several senders
    std::size_t off = 0;
    while (off < bytes.size()) {
      ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("socket send failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
    sent_ += bytes.size();
  }

  std::optional<E2Message> receive() override {
    std::uint8_t buf[65536];
    while (true) {
      if (auto m = decoder_.next()) return m;
      ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
      if (n == 0) {
        decoder_.finish();
        return std::nullopt;
      }
      if (n < 0) {
        if (errno == EINTR) continue;
        if (shut_) return std::nullopt;
        throw IoError(std::string("socket receive failed: ") + std::strerror(errno));
      }
      decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
    }
  }

  void close() override {
    if (!shut_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
  }

  std::uint64_t bytes_sent() const override { return sent_; }

 private:
  int fd_;
  std::mutex send_mu_;
  StreamDecoder decoder_;
  std::atomic<bool> shut_{false};
  std::atomic<std::uint64_t> sent_{0};
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_pipe() {
  auto a = std::make_shared<Mailbox<Bytes>>();
  auto b = std::make_shared<Mailbox<Bytes>>();
  return {std::make_unique<MemoryEnd>(a, b), std::make_unique<MemoryEnd>(b, a)};
}

LoopbackListener::LoopbackListener(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw IoError(std::string("socket() failed: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(fd_, 4) < 0) {
    int err = errno;
    ::close(fd_);
    throw IoError(std::string("cannot listen on loopback: ") + std::strerror(err),
                  "127.0.0.1:" + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

LoopbackListener::~LoopbackListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Transport> LoopbackListener::accept() {
  while (true) {
    int c = ::accept(fd_, nullptr, nullptr);
    if (c >= 0) return std::make_unique<SocketTransport>(c);
    if (errno != EINTR) throw IoError(std::string("accept failed: ") + std::strerror(errno));
  }
}

std::unique_ptr<Transport> connect_loopback(std::uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError(std::string("socket() failed: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    int err = errno;
    ::close(fd);
    throw IoError(std::string("connect failed: ") + std::strerror(err), "127.0.0.1:" + std::to_string(port));
  }
  return std::make_unique<SocketTransport>(fd);
}

}  // namespace oransim::ric
