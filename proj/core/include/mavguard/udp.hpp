// Thin RAII wrapper over nonblocking IPv4 UDP sockets.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <netinet/in.h>

namespace mavguard {

struct Endpoint {
  sockaddr_in addr{};

  static Endpoint of(const std::string& host, std::uint16_t port);
  std::uint16_t port() const;
  std::string to_string() const;
  bool operator==(const Endpoint& other) const;
  bool valid() const { return addr.sin_family == AF_INET; }
};

class UdpSocket {
 public:
  UdpSocket() = default;
  ~UdpSocket();
  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  // Bound nonblocking socket; port 0 picks a free port. Throws on failure.
  static UdpSocket bind(const std::string& host, std::uint16_t port);

  std::uint16_t local_port() const;
  bool send_to(std::span<const std::uint8_t> data, const Endpoint& dest);
  // >0 bytes received, 0 = would block. Source endpoint written when given.
  std::size_t recv_from(std::span<std::uint8_t> buf, Endpoint* src = nullptr);
  void set_recv_buffer(int bytes);
  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

}  // namespace mavguard
