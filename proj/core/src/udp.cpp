#include "mavguard/udp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace mavguard {

Endpoint Endpoint::of(const std::string& host, std::uint16_t port) {
  Endpoint ep;
  ep.addr.sin_family = AF_INET;
  ep.addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &ep.addr.sin_addr) != 1)
    throw std::runtime_error("bad IPv4 address: " + host);
  return ep;
}

std::uint16_t Endpoint::port() const { return ntohs(addr.sin_port); }

std::string Endpoint::to_string() const {
  char buf[INET_ADDRSTRLEN] = {0};
  inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return std::string(buf) + ":" + std::to_string(port());
}

bool Endpoint::operator==(const Endpoint& other) const {
  return addr.sin_family == other.addr.sin_family &&
         addr.sin_port == other.addr.sin_port &&
         addr.sin_addr.s_addr == other.addr.sin_addr.s_addr;
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

UdpSocket UdpSocket::bind(const std::string& host, std::uint16_t port) {
  UdpSocket s;
  s.fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (s.fd_ < 0) throw std::runtime_error("socket(): " + std::string(strerror(errno)));

  int flags = ::fcntl(s.fd_, F_GETFL, 0);
  ::fcntl(s.fd_, F_SETFL, flags | O_NONBLOCK);

  Endpoint ep = Endpoint::of(host, port);
  if (::bind(s.fd_, reinterpret_cast<const sockaddr*>(&ep.addr), sizeof ep.addr) != 0)
    throw std::runtime_error("bind(" + ep.to_string() +
                             "): " + std::string(strerror(errno)));
  return s;
}

std::uint16_t UdpSocket::local_port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return 0;
  return ntohs(addr.sin_port);
}

bool UdpSocket::send_to(std::span<const std::uint8_t> data, const Endpoint& dest) {
  ssize_t n = ::sendto(fd_, data.data(), data.size(), 0,
                       reinterpret_cast<const sockaddr*>(&dest.addr), sizeof dest.addr);
  return n == static_cast<ssize_t>(data.size());
}

std::size_t UdpSocket::recv_from(std::span<std::uint8_t> buf, Endpoint* src) {
  sockaddr_in from{};
  socklen_t len = sizeof from;
  ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                         reinterpret_cast<sockaddr*>(&from), &len);
  if (n <= 0) return 0;
  if (src != nullptr) src->addr = from;
  return static_cast<std::size_t>(n);
}

void UdpSocket::set_recv_buffer(int bytes) {
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &bytes, sizeof bytes);
}

}  // namespace mavguard
