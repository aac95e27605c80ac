#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "fedsim/message.hpp"

namespace fedsim {

// Cumulative encoded-frame bytes per (round, direction). Socket-level
// overhead is not counted, so the in-process and TCP paths meter
// identically.
struct TrafficMeter {
  struct Counters {
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
  };
  std::map<std::int64_t, Counters> per_round;
  std::uint64_t total_sent = 0;
  std::uint64_t total_received = 0;
};

// One side of a bidirectional message channel. Safe for one sender and one
// receiver concurrently.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual void send(const Message& message) = 0;
  // timeout_seconds <= 0 waits without limit. Returns nullopt on timeout or
  // when the peer is gone.
  virtual std::optional<Message> recv(double timeout_seconds) = 0;
  virtual bool closed() const = 0;
  virtual std::string peer_address() const = 0;

  TrafficMeter meter() const {
    std::lock_guard<std::mutex> lock(meter_mutex_);
    return meter_;
  }

 protected:
  void count_sent(std::size_t bytes, std::int64_t round) {
    std::lock_guard<std::mutex> lock(meter_mutex_);
    meter_.per_round[round].sent += bytes;
    meter_.total_sent += bytes;
  }
  void count_received(std::size_t bytes, std::int64_t round) {
    std::lock_guard<std::mutex> lock(meter_mutex_);
    meter_.per_round[round].received += bytes;
    meter_.total_received += bytes;
  }

 private:
  mutable std::mutex meter_mutex_;
  TrafficMeter meter_;
};

inline TrafficMeter traffic_meter(const Endpoint& endpoint) { return endpoint.meter(); }

// Paired queue-backed endpoints. Delivery is lossless and ordered, and every
// message still passes through encode/decode so byte accounting matches the
// networked path. An on-empty hook lets a single-threaded driver pump a
// co-scheduled peer when it would otherwise block.
class LocalEndpoint : public Endpoint {
 public:
  void send(const Message& message) override;
  std::optional<Message> recv(double timeout_seconds) override;
  bool closed() const override { return false; }
  std::string peer_address() const override { return "local"; }

  void set_on_empty(std::function<void()> hook) { on_empty_ = std::move(hook); }

 private:
  friend std::pair<std::shared_ptr<LocalEndpoint>, std::shared_ptr<LocalEndpoint>>
  in_process_transport();

  struct Queue {
    std::mutex mutex;
    std::deque<std::vector<std::uint8_t>> frames;
  };

  std::shared_ptr<Queue> outbox_;  // frames this side wrote
  std::shared_ptr<Queue> inbox_;   // frames the peer wrote
  std::function<void()> on_empty_;
};

std::pair<std::shared_ptr<LocalEndpoint>, std::shared_ptr<LocalEndpoint>> in_process_transport();

// Framed messages over a connected TCP stream.
class TcpEndpoint : public Endpoint {
 public:
  explicit TcpEndpoint(int fd, std::string peer);
  ~TcpEndpoint() override;

  TcpEndpoint(const TcpEndpoint&) = delete;
  TcpEndpoint& operator=(const TcpEndpoint&) = delete;

  void send(const Message& message) override;
  std::optional<Message> recv(double timeout_seconds) override;
  bool closed() const override { return closed_; }
  std::string peer_address() const override { return peer_; }

  void close();

 private:
  bool read_exact(std::uint8_t* out, std::size_t n, double timeout_seconds);

  int fd_;
  std::string peer_;
  bool closed_ = false;
  std::mutex send_mutex_;
};

class TcpListener {
 public:
  // address is "host:port"; empty host binds every interface; port 0 picks
  // an ephemeral port (see bound_port).
  explicit TcpListener(const std::string& address);
  ~TcpListener();

  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::shared_ptr<TcpEndpoint> accept(double timeout_seconds);
  int bound_port() const { return port_; }

 private:
  int fd_;
  int port_;
};

// Connects to "host:port".
std::shared_ptr<TcpEndpoint> tcp_connect(const std::string& address);

}  // namespace fedsim
