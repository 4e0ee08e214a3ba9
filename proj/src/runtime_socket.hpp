#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <string>
#include <vector>

#include "coinfer/runtime.hpp"

namespace coinfer::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept {
    close_fd();
    fd_ = o.fd_;
    o.fd_ = -1;
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close_fd(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void close_fd() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

  // Returns false on clean EOF at a frame boundary; throws on partial reads.
  bool read_exact(void* buf, std::size_t n) {
    auto* p = static_cast<std::uint8_t*>(buf);
    std::size_t got = 0;
    while (got < n) {
      ssize_t r = ::recv(fd_, p + got, n - got, 0);
      if (r == 0) {
        if (got == 0) return false;
        throw ProtocolError("connection closed mid-frame");
      }
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
      }
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  void write_all(const void* buf, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(buf);
    std::size_t sent = 0;
    while (sent < n) {
      ssize_t r = ::send(fd_, p + sent, n - sent, MSG_NOSIGNAL);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(r);
    }
  }

 private:
  int fd_ = -1;
};

inline Socket listen_on(const std::string& host, int port, int* bound_port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ProtocolError("socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw ProtocolError("bad listen address: " + host);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw ProtocolError("bind failed on " + host + ":" + std::to_string(port));
  }
  if (::listen(fd, 16) < 0) {
    ::close(fd);
    throw ProtocolError("listen failed");
  }
  if (bound_port) {
    sockaddr_in got{};
    socklen_t len = sizeof(got);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&got), &len);
    *bound_port = ntohs(got.sin_port);
  }
  return Socket(fd);
}

inline Socket connect_to(const std::string& host, int port, int retries,
                         int retry_gap_ms = 300) {
  for (int attempt = 0; attempt <= retries; ++attempt) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      throw ProtocolError("bad address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    ::close(fd);
    if (attempt < retries)
      std::this_thread::sleep_for(std::chrono::milliseconds(retry_gap_ms));
  }
  throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port));
}

// Blocking frame read; false on clean EOF.
inline bool read_frame(Socket& sock, Frame& out) {
  std::uint8_t header[kHeaderBytes];
  if (!sock.read_exact(header, sizeof(header))) return false;
  MessageHeader h = decode_header(std::span<const std::uint8_t>(header, sizeof(header)));
  std::vector<std::uint8_t> body(h.size);
  if (h.size > 0 && !sock.read_exact(body.data(), body.size()))
    throw ProtocolError("connection closed mid-frame");
  out.header = h;
  out.payload = decode_body(h, body);
  return true;
}

}  // namespace coinfer::net
