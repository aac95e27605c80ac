#include "fedsim/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace fedsim {
namespace {

std::pair<std::string, int> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("address must be host:port, got '" + address + "'");
  }
  const std::string host = address.substr(0, colon);
  const int port = std::stoi(address.substr(colon + 1));
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range in '" + address + "'");
  return {host.empty() ? "0.0.0.0" : host, port};
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

// --- in-process --------------------------------------------------------------

void LocalEndpoint::send(const Message& message) {
  auto frame = message_encode(message);
  count_sent(frame.size(), static_cast<std::int64_t>(message.round_index));
  std::lock_guard<std::mutex> lock(outbox_->mutex);
  outbox_->frames.push_back(std::move(frame));
}

std::optional<Message> LocalEndpoint::recv(double) {
  for (int pass = 0; pass < 2; ++pass) {
    {
      std::lock_guard<std::mutex> lock(inbox_->mutex);
      if (!inbox_->frames.empty()) {
        auto frame = std::move(inbox_->frames.front());
        inbox_->frames.pop_front();
        Message message = message_decode(frame);
        count_received(frame.size(), static_cast<std::int64_t>(message.round_index));
        return message;
      }
    }
    if (pass == 0 && on_empty_) {
      on_empty_();
    } else {
      break;
    }
  }
  return std::nullopt;
}

std::pair<std::shared_ptr<LocalEndpoint>, std::shared_ptr<LocalEndpoint>> in_process_transport() {
  auto a = std::make_shared<LocalEndpoint>();
  auto b = std::make_shared<LocalEndpoint>();
  auto ab = std::make_shared<LocalEndpoint::Queue>();
  auto ba = std::make_shared<LocalEndpoint::Queue>();
  a->outbox_ = ab;
  a->inbox_ = ba;
  b->outbox_ = ba;
  b->inbox_ = ab;
  return {std::move(a), std::move(b)};
}

// --- tcp ----------------------------------------------------------------------

TcpEndpoint::TcpEndpoint(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpEndpoint::~TcpEndpoint() { close(); }

void TcpEndpoint::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  closed_ = true;
}

void TcpEndpoint::send(const Message& message) {
  const auto frame = message_encode(message);
  std::lock_guard<std::mutex> lock(send_mutex_);
  if (closed_) throw std::runtime_error("send on closed endpoint");
  std::size_t written = 0;
  while (written < frame.size()) {
    const ssize_t n = ::write(fd_, frame.data() + written, frame.size() - written);
    if (n <= 0) {
      closed_ = true;
      throw std::runtime_error("tcp send failed to " + peer_);
    }
    written += static_cast<std::size_t>(n);
  }
  count_sent(frame.size(), static_cast<std::int64_t>(message.round_index));
}

bool TcpEndpoint::read_exact(std::uint8_t* out, std::size_t n, double timeout_seconds) {
  const double deadline = timeout_seconds > 0 ? now_seconds() + timeout_seconds : 0;
  std::size_t got = 0;
  while (got < n) {
    int wait_ms = 200;
    if (deadline > 0) {
      const double left = deadline - now_seconds();
      if (left <= 0) return false;
      wait_ms = static_cast<int>(std::min(left * 1000.0, 200.0)) + 1;
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      closed_ = true;
      return false;
    }
    if (ready == 0) continue;
    const ssize_t r = ::read(fd_, out + got, n - got);
    if (r <= 0) {
      closed_ = true;
      return false;
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::optional<Message> TcpEndpoint::recv(double timeout_seconds) {
  if (closed_) return std::nullopt;
  std::vector<std::uint8_t> frame(kFrameHeaderBytes);
  if (!read_exact(frame.data(), kFrameHeaderBytes, timeout_seconds)) return std::nullopt;
  const std::uint64_t length = frame_payload_length(frame);
  frame.resize(kFrameOverheadBytes + length);
  if (!read_exact(frame.data() + kFrameHeaderBytes, length + 4, timeout_seconds)) {
    return std::nullopt;
  }
  Message message = message_decode(frame);
  count_received(frame.size(), static_cast<std::int64_t>(message.round_index));
  return message;
}

TcpListener::TcpListener(const std::string& address) : fd_(-1), port_(0) {
  const auto [host, port] = split_address(address);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("cannot create listener socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::invalid_argument("cannot parse listen host '" + host + "'");
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    throw std::runtime_error("cannot bind " + address);
  }
  if (::listen(fd_, 64) != 0) {
    ::close(fd_);
    throw std::runtime_error("cannot listen on " + address);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::shared_ptr<TcpEndpoint> TcpListener::accept(double timeout_seconds) {
  const double deadline = timeout_seconds > 0 ? now_seconds() + timeout_seconds : 0;
  for (;;) {
    int wait_ms = 200;
    if (deadline > 0) {
      const double left = deadline - now_seconds();
      if (left <= 0) return nullptr;
      wait_ms = static_cast<int>(std::min(left * 1000.0, 200.0)) + 1;
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) throw std::runtime_error("listener poll failed");
    if (ready == 0) continue;
    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    const int fd = ::accept(fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) continue;
    char host[64];
    ::inet_ntop(AF_INET, &peer.sin_addr, host, sizeof(host));
    return std::make_shared<TcpEndpoint>(
        fd, std::string(host) + ":" + std::to_string(ntohs(peer.sin_port)));
  }
}

std::shared_ptr<TcpEndpoint> tcp_connect(const std::string& address) {
  const auto [host, port] = split_address(address);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  const std::string target = host == "0.0.0.0" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, target.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("cannot parse host '" + target + "'");
  }
  // Brief retry window so a just-starting server is not a hard failure.
  for (int attempt = 0;; ++attempt) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("cannot create socket");
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      return std::make_shared<TcpEndpoint>(fd, address);
    }
    ::close(fd);
    if (attempt >= 50) throw std::runtime_error("cannot connect to " + address);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

}  // namespace fedsim
