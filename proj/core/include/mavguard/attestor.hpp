// Runtime monitor for the trusted partition. Every uplink message is checked
// against the compiled refinement spec and the mirrored vehicle state before
// it may be forwarded; mission uploads are tracked as bounded-iteration
// sessions. Rejection is fail-closed: evaluation errors and stale telemetry
// both reject.
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "mavguard/mavlink.hpp"
#include "mavguard/spec_dsl.hpp"
#include "mavguard/vehicle_state.hpp"

namespace mavguard {

enum class Decision : std::uint8_t { Accept, Reject };

struct Verdict {
  Decision decision = Decision::Accept;
  std::string rule;    // rule/session name; empty when no rule matched
  std::string reason;
  std::uint32_t msgid = 0;
  std::uint64_t uplink_index = 0;
  TimePoint timestamp{};

  bool accepted() const { return decision == Decision::Accept; }
};

enum class SessionStatus : std::uint8_t { Idle, Uploading, Complete };
std::string_view session_status_name(SessionStatus s);

struct MissionSession {
  SessionStatus status = SessionStatus::Idle;
  std::uint16_t expected_count = 0;
  std::set<std::uint16_t> received_seqs;
  TimePoint opened_at{};
};

struct AttestorOptions {
  bool default_deny = false;
  std::chrono::milliseconds stale_window{5000};
  std::chrono::milliseconds session_timeout{10000};
  std::function<TimePoint()> clock;  // defaults to the monotonic clock
};

class Attestor {
 public:
  explicit Attestor(std::shared_ptr<const dsl::ProtocolSpec> spec,
                    AttestorOptions opts = {});

  // Verdict for one uplink message; accepted PARAM_SETs update the state
  // mirror. Assigns consecutive uplink indices across attest/attest_unknown.
  Verdict attest(const mav::MavMessage& msg);

  // Policy-only verdict for frames whose msgid the codec does not know.
  Verdict attest_unknown(std::uint32_t msgid);

  // Downlink observation (telemetry); never produces a verdict.
  void observe_telemetry(const mav::MavMessage& msg);

  // Reserves an uplink index without a verdict (trusted-side decode failures
  // still occupy a position in the uplink order).
  std::uint64_t allocate_index() { return next_index_++; }

  // Sessions cleared, state re-initialized from spec defaults, indices reset.
  void reset();

  const VehicleState& state() const { return state_; }
  const MissionSession& session() const { return session_; }
  const dsl::ProtocolSpec& spec() const { return *spec_; }

  // Session-timeout transitions and similar non-message events, for logging.
  std::vector<Verdict> drain_events();

 private:
  std::shared_ptr<const dsl::ProtocolSpec> spec_;
  AttestorOptions opts_;
  VehicleState state_;
  MissionSession session_;
  std::uint64_t next_index_ = 0;
  std::vector<Verdict> events_;
  std::vector<bool> rule_needs_telemetry_;  // parallel to spec_->rules
  const dsl::IterationDecl* iteration_ = nullptr;  // at most one supported

  Verdict make_verdict(Decision d, std::string rule, std::string reason,
                       std::uint32_t msgid, TimePoint now);
  void expire_session(TimePoint now);
  bool pattern_matches(const dsl::MsgPattern& pat, const mav::MavMessage& msg,
                       std::map<std::string, dsl::Value>& binders) const;
};

}  // namespace mavguard
