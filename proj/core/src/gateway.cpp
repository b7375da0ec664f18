#include "mavguard/gateway.hpp"

#include <array>
#include <chrono>

namespace mavguard {

namespace {

std::string join_path(const std::string& dir, const char* file) {
  if (dir.empty()) return {};
  return dir.back() == '/' ? dir + file : dir + "/" + file;
}

std::uint64_t to_us(TimePoint tp) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(tp.time_since_epoch())
          .count());
}

}  // namespace

std::string GatewayConfig::verdict_log_path() const {
  return join_path(log_dir, "verdicts.log");
}

std::string GatewayConfig::forwarded_log_path() const {
  return join_path(log_dir, "forwarded.log");
}

CountersSnapshot GatewayCounters::snapshot() const {
  CountersSnapshot s;
  s.uplink_frames = uplink_frames.load(std::memory_order_relaxed);
  s.malformed = malformed.load(std::memory_order_relaxed);
  s.forwarded = forwarded.load(std::memory_order_relaxed);
  s.rejected = rejected.load(std::memory_order_relaxed);
  s.downlink_frames = downlink_frames.load(std::memory_order_relaxed);
  s.feedback_sent = feedback_sent.load(std::memory_order_relaxed);
  s.integrity_alarms = integrity_alarms.load(std::memory_order_relaxed);
  return s;
}

// ---- NetIngress ----

NetIngress::NetIngress(UdpSocket sock, RingProducer uplink, RingConsumer downlink,
                       SpinBackoff backoff, GatewayCounters& counters,
                       std::atomic<bool>& stop)
    : sock_(std::move(sock)),
      uplink_(std::move(uplink)),
      downlink_(std::move(downlink)),
      backoff_(backoff),
      counters_(counters),
      stop_(stop) {}

void NetIngress::push_blocking(std::span<const std::uint8_t> frame) {
  std::uint32_t spins = 0;
  while (!stop_.load(std::memory_order_relaxed)) {
    switch (uplink_.push(frame)) {
      case PushResult::Ok:
        counters_.uplink_frames.fetch_add(1, std::memory_order_relaxed);
        return;
      case PushResult::FrameTooLarge:
        counters_.malformed.fetch_add(1, std::memory_order_relaxed);
        return;
      case PushResult::Full:
        backoff_.wait(spins);
        break;
    }
  }
}

std::size_t NetIngress::handle_datagram(std::span<const std::uint8_t> data) {
  decoder_.feed(data);
  std::size_t pushed = 0;
  while (auto item = decoder_.next()) {
    switch (item->status) {
      case mav::DecodeStatus::Ok:
      case mav::DecodeStatus::UnknownMsgId:
        // framing-valid frames cross the boundary whole; payload semantics
        // are checked on the trusted side only
        push_blocking(item->frame);
        ++pushed;
        break;
      case mav::DecodeStatus::BadChecksum:
      case mav::DecodeStatus::Junk:
        counters_.malformed.fetch_add(1, std::memory_order_relaxed);
        break;
      default:
        break;
    }
  }
  return pushed;
}

void NetIngress::run() {
  std::array<std::uint8_t, 2048> buf;
  std::uint32_t spins = 0;
  while (!stop_.load(std::memory_order_relaxed)) {
    bool busy = false;

    for (int i = 0; i < 64; ++i) {
      Endpoint src;
      std::size_t n = sock_.recv_from(buf, &src);
      if (n == 0) break;
      gcs_ = src;
      handle_datagram(std::span(buf.data(), n));
      busy = true;
    }

    for (int i = 0; i < 64; ++i) {
      auto frame = downlink_.pop();
      if (!frame) break;
      if (gcs_.valid()) sock_.send_to(*frame, gcs_);
      busy = true;
    }

    if (busy) {
      SpinBackoff::reset(spins);
    } else {
      backoff_.wait(spins);
    }
  }
}

// ---- FcsIngress ----

FcsIngress::FcsIngress(UdpSocket sock, Endpoint fcs, RingConsumer uplink,
                       RingProducer downlink, std::unique_ptr<Attestor> attestor,
                       const GatewayConfig& cfg, GatewayCounters& counters,
                       std::atomic<bool>& stop)
    : sock_(std::move(sock)),
      fcs_(fcs),
      uplink_(std::move(uplink)),
      downlink_(std::move(downlink)),
      attestor_(std::move(attestor)),
      cfg_(cfg),
      counters_(counters),
      stop_(stop),
      backoff_(cfg.backoff()),
      verdict_log_(cfg.verdict_log_path()),
      forwarded_log_(cfg.forwarded_log_path()) {}

void FcsIngress::log_verdict(const Verdict& v) {
  if (!verdict_log_.enabled()) return;
  verdict_log_.write({
      {"idx", std::to_string(v.uplink_index)},
      {"t_us", std::to_string(to_us(v.timestamp))},
      {"msgid", std::to_string(v.msgid)},
      {"decision", v.accepted() ? "accept" : "reject"},
      {"rule", v.rule},
      {"reason", v.reason},
  });
}

void FcsIngress::push_downlink_blocking(std::span<const std::uint8_t> frame) {
  std::uint32_t spins = 0;
  while (!stop_.load(std::memory_order_relaxed)) {
    PushResult r = downlink_.push(frame);
    if (r == PushResult::Ok || r == PushResult::FrameTooLarge) return;
    backoff_.wait(spins);
  }
}

void FcsIngress::send_feedback(const Verdict& v, const mav::MavMessage& msg) {
  const auto* cmd = std::get_if<mav::CommandLong>(&msg);
  if (cmd != nullptr && cfg_.feedback_command_ack) {
    mav::CommandAck ack;
    ack.command = cmd->command;
    ack.result = mav::kResultDenied;
    auto frame = mav::frame_encode(ack, feedback_seq_++, cfg_.gw_sysid, cfg_.gw_compid);
    push_downlink_blocking(frame);
    counters_.feedback_sent.fetch_add(1, std::memory_order_relaxed);
  }
  if (cfg_.feedback_statustext) {
    mav::StatusText st;
    st.severity = 4;  // MAV_SEVERITY_WARNING
    st.text = ("guard rejected: " + v.rule).substr(0, 50);
    auto frame = mav::frame_encode(st, feedback_seq_++, cfg_.gw_sysid, cfg_.gw_compid);
    push_downlink_blocking(frame);
    counters_.feedback_sent.fetch_add(1, std::memory_order_relaxed);
  }
}

Verdict FcsIngress::handle_uplink_frame(std::span<const std::uint8_t> frame) {
  mav::DecodeResult res = mav::frame_decode(frame);
  Verdict verdict;

  if (res.status == mav::DecodeStatus::Ok) {
    verdict = attestor_->attest(*res.message);
  } else if (res.status == mav::DecodeStatus::UnknownMsgId) {
    verdict = attestor_->attest_unknown(res.msgid);
  } else {
    // net-ingress only pushes framing-valid frames; anything else here means
    // the boundary was corrupted
    counters_.integrity_alarms.fetch_add(1, std::memory_order_relaxed);
    verdict.decision = Decision::Reject;
    verdict.rule = "integrity";
    verdict.reason = "trusted-side decode failure";
    verdict.msgid = res.msgid;
    verdict.uplink_index = attestor_->allocate_index();
    log_verdict(verdict);
    return verdict;
  }

  for (const Verdict& ev : attestor_->drain_events()) log_verdict(ev);

  log_verdict(verdict);
  if (verdict.accepted()) {
    sock_.send_to(frame, fcs_);
    counters_.forwarded.fetch_add(1, std::memory_order_relaxed);
    if (forwarded_log_.enabled()) {
      forwarded_log_.write({
          {"idx", std::to_string(verdict.uplink_index)},
          {"msgid", std::to_string(verdict.msgid)},
          {"len", std::to_string(frame.size())},
      });
    }
  } else {
    counters_.rejected.fetch_add(1, std::memory_order_relaxed);
    if (res.message) send_feedback(verdict, *res.message);
  }
  return verdict;
}

void FcsIngress::handle_fcs_datagram(std::span<const std::uint8_t> data) {
  fcs_decoder_.feed(data);
  while (auto item = fcs_decoder_.next()) {
    switch (item->status) {
      case mav::DecodeStatus::Ok:
        attestor_->observe_telemetry(*item->message);
        push_downlink_blocking(item->frame);
        counters_.downlink_frames.fetch_add(1, std::memory_order_relaxed);
        break;
      case mav::DecodeStatus::UnknownMsgId:
        // downlink is relayed unconditionally; only commands are attested
        push_downlink_blocking(item->frame);
        counters_.downlink_frames.fetch_add(1, std::memory_order_relaxed);
        break;
      default:
        counters_.malformed.fetch_add(1, std::memory_order_relaxed);
        break;
    }
  }
}

void FcsIngress::run() {
  std::array<std::uint8_t, 2048> buf;
  std::uint32_t spins = 0;
  const bool attest = cfg_.attest_enabled;
  while (!stop_.load(std::memory_order_relaxed)) {
    bool busy = false;

    for (int i = 0; i < 64; ++i) {
      auto frame = uplink_.pop();
      if (!frame) break;
      if (attest) {
        handle_uplink_frame(*frame);
      } else {
        // isolation-only relay: net-ingress already validated framing
        sock_.send_to(*frame, fcs_);
        counters_.forwarded.fetch_add(1, std::memory_order_relaxed);
      }
      busy = true;
    }

    for (int i = 0; i < 64; ++i) {
      std::size_t n = sock_.recv_from(buf);
      if (n == 0) break;
      if (attest) {
        handle_fcs_datagram(std::span(buf.data(), n));
      } else {
        relay_fcs_datagram(std::span(buf.data(), n));
      }
      busy = true;
    }

    if (busy) {
      SpinBackoff::reset(spins);
    } else {
      backoff_.wait(spins);
    }
  }
  verdict_log_.flush();
  forwarded_log_.flush();
}

void FcsIngress::relay_fcs_datagram(std::span<const std::uint8_t> data) {
  fcs_decoder_.feed(data);
  while (auto item = fcs_decoder_.next()) {
    switch (item->status) {
      case mav::DecodeStatus::Ok:
      case mav::DecodeStatus::UnknownMsgId:
        push_downlink_blocking(item->frame);
        counters_.downlink_frames.fetch_add(1, std::memory_order_relaxed);
        break;
      default:
        counters_.malformed.fetch_add(1, std::memory_order_relaxed);
        break;
    }
  }
}

// ---- Gateway ----

Gateway::Gateway(GatewayConfig cfg, std::shared_ptr<const dsl::ProtocolSpec> spec)
    : cfg_(std::move(cfg)) {
  auto [up_prod, up_cons] = ring_create(cfg_.ring_capacity, cfg_.ring_slot_size);
  auto [down_prod, down_cons] = ring_create(cfg_.ring_capacity, cfg_.ring_slot_size);

  UdpSocket gcs_sock = UdpSocket::bind(cfg_.gcs_listen_host, cfg_.gcs_listen_port);
  gcs_sock.set_recv_buffer(1 << 20);
  UdpSocket fcs_sock = UdpSocket::bind("127.0.0.1", cfg_.fcs_local_port);
  fcs_sock.set_recv_buffer(1 << 20);

  AttestorOptions aopts;
  aopts.default_deny = cfg_.default_deny;
  aopts.stale_window = std::chrono::milliseconds(cfg_.stale_window_ms);
  aopts.session_timeout = std::chrono::milliseconds(cfg_.session_timeout_ms);
  auto attestor = std::make_unique<Attestor>(std::move(spec), aopts);

  net_ = std::make_unique<NetIngress>(std::move(gcs_sock), std::move(up_prod),
                                      std::move(down_cons), cfg_.backoff(), counters_,
                                      stop_);
  fcs_ = std::make_unique<FcsIngress>(std::move(fcs_sock),
                                      Endpoint::of(cfg_.fcs_host, cfg_.fcs_port),
                                      std::move(up_cons), std::move(down_prod),
                                      std::move(attestor), cfg_, counters_, stop_);
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (running_) return;
  stop_.store(false);
  net_thread_ = std::thread([this] { net_->run(); });
  fcs_thread_ = std::thread([this] { fcs_->run(); });
  running_ = true;
}

void Gateway::stop() {
  if (!running_) return;
  stop_.store(true);
  if (net_thread_.joinable()) net_thread_.join();
  if (fcs_thread_.joinable()) fcs_thread_.join();
  running_ = false;
}

std::uint16_t Gateway::gcs_bound_port() const { return net_->local_port(); }
std::uint16_t Gateway::fcs_bound_port() const { return fcs_->local_port(); }
const Attestor& Gateway::attestor() const { return fcs_->attestor(); }

// ---- PassthroughRelay ----

PassthroughRelay::PassthroughRelay(const std::string& listen_host,
                                   std::uint16_t listen_port, Endpoint fcs)
    : gcs_sock_(UdpSocket::bind(listen_host, listen_port)),
      fcs_sock_(UdpSocket::bind("127.0.0.1", 0)),
      fcs_(fcs) {
  gcs_sock_.set_recv_buffer(1 << 20);
  fcs_sock_.set_recv_buffer(1 << 20);
}

PassthroughRelay::~PassthroughRelay() { stop(); }

void PassthroughRelay::start() {
  if (running_) return;
  stop_.store(false);
  thread_ = std::thread([this] { run(); });
  running_ = true;
}

void PassthroughRelay::stop() {
  if (!running_) return;
  stop_.store(true);
  if (thread_.joinable()) thread_.join();
  running_ = false;
}

std::uint16_t PassthroughRelay::gcs_bound_port() const {
  return gcs_sock_.local_port();
}

std::uint16_t PassthroughRelay::fcs_side_port() const {
  return fcs_sock_.local_port();
}

void PassthroughRelay::run() {
  std::array<std::uint8_t, 2048> buf;
  SpinBackoff backoff;
  std::uint32_t spins = 0;
  while (!stop_.load(std::memory_order_relaxed)) {
    bool busy = false;
    for (int i = 0; i < 64; ++i) {
      Endpoint src;
      std::size_t n = gcs_sock_.recv_from(buf, &src);
      if (n == 0) break;
      gcs_ = src;
      fcs_sock_.send_to(std::span(buf.data(), n), fcs_);
      busy = true;
    }
    for (int i = 0; i < 64; ++i) {
      std::size_t n = fcs_sock_.recv_from(buf);
      if (n == 0) break;
      if (gcs_.valid()) gcs_sock_.send_to(std::span(buf.data(), n), gcs_);
      busy = true;
    }
    if (busy) {
      SpinBackoff::reset(spins);
    } else {
      backoff.wait(spins);
    }
  }
}

}  // namespace mavguard
