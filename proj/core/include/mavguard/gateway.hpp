// The two partition proxies. net-ingress is the untrusted side: it validates
// framing only and shuttles whole frames between the GCS socket and the
// rings. fcs-ingress is the trusted side: it decodes uplink frames, consults
// the attestor, forwards accepted bytes verbatim to the FCS endpoint and
// relays downlink telemetry (updating the state mirror) unconditionally.
#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "mavguard/attestor.hpp"
#include "mavguard/kv_log.hpp"
#include "mavguard/mavlink.hpp"
#include "mavguard/ring_channel.hpp"
#include "mavguard/udp.hpp"

namespace mavguard {

struct GatewayConfig {
  std::string gcs_listen_host = "127.0.0.1";
  std::uint16_t gcs_listen_port = 14550;
  std::string fcs_host = "127.0.0.1";
  std::uint16_t fcs_port = 14551;
  std::uint16_t fcs_local_port = 0;  // trusted-side source port, 0 = ephemeral

  std::uint32_t ring_capacity = 1024;
  std::uint32_t ring_slot_size = kDefaultSlotSize;
  std::uint32_t spin_count = 1000;
  std::uint32_t sleep_us = 50;

  bool default_deny = false;
  bool feedback_command_ack = true;  // COMMAND_ACK(DENIED) for rejected COMMAND_LONG
  bool feedback_statustext = false;  // STATUSTEXT naming the violated rule
  // false = isolation-only relay: frames cross the rings whole but are
  // neither decoded nor attested on the trusted side (no verdict logs)
  bool attest_enabled = true;
  std::uint32_t stale_window_ms = 5000;
  std::uint32_t session_timeout_ms = 10000;

  std::string log_dir;  // empty disables verdict/forwarded logs
  std::uint8_t gw_sysid = 1;
  std::uint8_t gw_compid = 1;

  SpinBackoff backoff() const {
    return SpinBackoff{spin_count, std::chrono::microseconds(sleep_us)};
  }
  std::string verdict_log_path() const;
  std::string forwarded_log_path() const;
};

struct CountersSnapshot {
  std::uint64_t uplink_frames = 0;    // frames pushed by net-ingress
  std::uint64_t malformed = 0;        // junk / bad-checksum bytes dropped untrusted-side
  std::uint64_t forwarded = 0;        // frames sent to the FCS endpoint
  std::uint64_t rejected = 0;         // attestor rejections
  std::uint64_t downlink_frames = 0;  // FCS frames relayed toward the GCS
  std::uint64_t feedback_sent = 0;    // COMMAND_ACK/STATUSTEXT rejections reported
  std::uint64_t integrity_alarms = 0; // trusted-side decode failures (should be 0)
};

struct GatewayCounters {
  std::atomic<std::uint64_t> uplink_frames{0};
  std::atomic<std::uint64_t> malformed{0};
  std::atomic<std::uint64_t> forwarded{0};
  std::atomic<std::uint64_t> rejected{0};
  std::atomic<std::uint64_t> downlink_frames{0};
  std::atomic<std::uint64_t> feedback_sent{0};
  std::atomic<std::uint64_t> integrity_alarms{0};

  CountersSnapshot snapshot() const;
};

// Untrusted partition proxy: GCS socket <-> rings, framing checks only.
class NetIngress {
 public:
  NetIngress(UdpSocket sock, RingProducer uplink, RingConsumer downlink,
             SpinBackoff backoff, GatewayCounters& counters,
             std::atomic<bool>& stop);

  void run();

  // One scan step over a received datagram; returns frames pushed. Blocks
  // (spin-then-sleep) while the uplink ring is full.
  std::size_t handle_datagram(std::span<const std::uint8_t> data);

  std::uint16_t local_port() const { return sock_.local_port(); }
  const Endpoint& gcs_endpoint() const { return gcs_; }

 private:
  UdpSocket sock_;
  RingProducer uplink_;
  RingConsumer downlink_;
  SpinBackoff backoff_;
  GatewayCounters& counters_;
  std::atomic<bool>& stop_;
  mav::StreamDecoder decoder_;
  Endpoint gcs_{};  // learned from the last GCS datagram

  void push_blocking(std::span<const std::uint8_t> frame);
};

// Trusted partition proxy: rings <-> attestor <-> FCS socket.
class FcsIngress {
 public:
  FcsIngress(UdpSocket sock, Endpoint fcs, RingConsumer uplink,
             RingProducer downlink, std::unique_ptr<Attestor> attestor,
             const GatewayConfig& cfg, GatewayCounters& counters,
             std::atomic<bool>& stop);

  void run();

  // Attests one uplink frame; forwards on Accept. Exposed for tests.
  Verdict handle_uplink_frame(std::span<const std::uint8_t> frame);
  // Telemetry decode + downlink relay for one FCS datagram.
  void handle_fcs_datagram(std::span<const std::uint8_t> data);
  // Framing-only downlink relay used when attestation is disabled.
  void relay_fcs_datagram(std::span<const std::uint8_t> data);

  const Attestor& attestor() const { return *attestor_; }
  std::uint16_t local_port() const { return sock_.local_port(); }

 private:
  UdpSocket sock_;
  Endpoint fcs_;
  RingConsumer uplink_;
  RingProducer downlink_;
  std::unique_ptr<Attestor> attestor_;
  const GatewayConfig& cfg_;
  GatewayCounters& counters_;
  std::atomic<bool>& stop_;
  SpinBackoff backoff_;
  mav::StreamDecoder fcs_decoder_;
  KvLogWriter verdict_log_;
  KvLogWriter forwarded_log_;
  std::uint8_t feedback_seq_ = 0;

  void log_verdict(const Verdict& v);
  void send_feedback(const Verdict& v, const mav::MavMessage& msg);
  void push_downlink_blocking(std::span<const std::uint8_t> frame);
};

// Both proxies wired through a pair of rings, each in its own thread.
class Gateway {
 public:
  Gateway(GatewayConfig cfg, std::shared_ptr<const dsl::ProtocolSpec> spec);
  ~Gateway();

  void start();
  void stop();

  std::uint16_t gcs_bound_port() const;
  std::uint16_t fcs_bound_port() const;
  CountersSnapshot counters() const { return counters_.snapshot(); }
  const Attestor& attestor() const;
  const GatewayConfig& config() const { return cfg_; }

 private:
  GatewayConfig cfg_;
  GatewayCounters counters_;
  std::atomic<bool> stop_{false};
  std::unique_ptr<NetIngress> net_;
  std::unique_ptr<FcsIngress> fcs_;
  std::thread net_thread_;
  std::thread fcs_thread_;
  bool running_ = false;
};

// Baseline for the evaluation matrix: a plain bidirectional UDP forwarder
// with no rings and no attestor.
class PassthroughRelay {
 public:
  PassthroughRelay(const std::string& listen_host, std::uint16_t listen_port,
                   Endpoint fcs);
  ~PassthroughRelay();

  void start();
  void stop();
  std::uint16_t gcs_bound_port() const;
  std::uint16_t fcs_side_port() const;

 private:
  UdpSocket gcs_sock_;
  UdpSocket fcs_sock_;
  Endpoint fcs_;
  Endpoint gcs_{};
  std::atomic<bool> stop_{false};
  std::thread thread_;
  bool running_ = false;

  void run();
};

}  // namespace mavguard
