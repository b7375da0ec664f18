// Deterministic scripted GCS and FCS simulators plus the scenario runner and
// the three-configuration evaluation matrix (passthrough / gateway /
// gateway+spec). Scenarios are JSON files; reports carry per-message
// verdicts, conservation counts and latency statistics.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mavguard/attestor.hpp"
#include "mavguard/gateway.hpp"
#include "mavguard/mavlink.hpp"

namespace mavguard::sim {

struct TelemetryPhase {
  int duration_ms = 1000;
  bool armed = false;
  std::string mode = "STABILIZE";
  double altitude_start_m = 0.0;
  double climb_rate_mps = 0.0;  // altitude ramps at this rate through the phase
};

struct FcsScript {
  std::vector<TelemetryPhase> phases;
  double telemetry_hz = 50.0;
  bool auto_ack = true;
};

struct ScriptEntry {
  int delay_ms = 0;  // wait before sending this message
  mav::MavMessage msg;
};

struct ExpectedVerdict {
  std::size_t index = 0;  // uplink script index (after padding expansion)
  Decision decision = Decision::Accept;
  std::string rule;  // optional: rejecting rule name must match
};

struct UplinkPadding {
  std::uint64_t count = 0;   // HEARTBEAT entries appended to the script
  int burst = 100;           // entries per burst
  int gap_ms = 1;            // delay between bursts
};

struct Scenario {
  std::string name;
  std::string description;
  std::vector<ScriptEntry> gcs_script;
  FcsScript fcs_script;
  std::vector<ExpectedVerdict> expected;
  bool expect_zero_rejects = false;
  bool expect_session_complete = false;
  std::uint64_t message_volume = 0;  // minimum uplink messages the run must pump
  UplinkPadding padding;
  int timeout_s = 120;
};

// Message <-> JSON (type-tagged objects) for scenario files and reports.
std::string message_to_json(const mav::MavMessage& msg);
mav::MavMessage message_from_json(const std::string& json_text);

Scenario load_scenario(const std::string& path);      // throws on malformed input
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);

// Appends `padding.count` HEARTBEAT entries to the script (burst pacing).
void expand_padding(Scenario& s);

struct LatencyStats {
  std::size_t n = 0;
  double mean_ms = 0.0;
  double sd_ms = 0.0;
  double ci95_ms = 0.0;

  // "3.420 ± 0.340" (milliseconds, three decimals)
  std::string format() const;
};

// Mean, sample standard deviation and 1.96*sd/sqrt(n); throws on empty input.
LatencyStats latency_stats(const std::vector<std::uint64_t>& samples_us);
double median_us(std::vector<std::uint64_t> samples_us);  // 0 when empty

enum class HarnessConfig : std::uint8_t { Passthrough, Gateway, GatewaySpec };
std::string_view harness_config_name(HarnessConfig c);

struct RunReport {
  std::string scenario;
  std::string config;
  std::uint64_t sent = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t rejected = 0;
  std::uint64_t dropped = 0;
  std::vector<Verdict> verdicts;  // in uplink order (empty for passthrough)
  std::vector<std::uint64_t> latency_us;
  LatencyStats latency;
  double median_latency_us = 0.0;
  bool attack_detected = false;
  SessionStatus final_session = SessionStatus::Idle;
  bool assertions_checked = false;
  bool assertions_passed = true;
  std::vector<std::string> failures;
  AuditResult audit;  // non-bypass audit (gateway configs only)

  bool conservation_holds() const {
    return sent == forwarded + rejected + dropped;
  }
  std::string to_json() const;
  std::string text_table() const;
};

struct RunOptions {
  HarnessConfig config = HarnessConfig::GatewaySpec;
  GatewayConfig gateway;                 // ports 0 = auto-assign
  bool check_expectations = true;        // per-index assertions need verdicts
  bool record_streams = false;           // keep raw sent/received bytes
  unsigned seed = 0;                     // starting sequence number for the GCS sim
  std::vector<std::uint8_t>* gcs_sent_bytes = nullptr;
  std::vector<std::uint8_t>* fcs_received_bytes = nullptr;
};

RunReport run_scenario(const Scenario& scenario,
                       std::shared_ptr<const dsl::ProtocolSpec> spec,
                       const RunOptions& opts);

// Offline replay on a virtual clock: no sockets, no threads. Telemetry and
// uplink events are interleaved by their scripted times, so verdict
// sequences are exactly reproducible.
RunReport replay_scenario(const Scenario& scenario,
                          std::shared_ptr<const dsl::ProtocolSpec> spec,
                          const AttestorOptions& base_opts = {});

struct MatrixReport {
  // detection[scenario][config] = attack detected (any rejection)
  std::map<std::string, std::map<std::string, bool>> detection;
  std::map<std::string, RunReport> benign_runs;  // keyed by config name
  std::vector<RunReport> all_runs;
  bool detection_ok = false;      // attacks: caught by gateway+spec, missed by passthrough
  bool benign_clean = false;      // zero rejects on the benign scenario
  bool audits_ok = false;         // non-bypass audit on every attested run
  double added_median_us = 0.0;   // gateway+spec minus passthrough, benign medians
  bool median_ordered = false;    // passthrough <= gateway <= gateway+spec

  std::string to_json() const;
  std::string latency_table() const;    // Table of per-config latency
  std::string detection_table() const;  // Table of per-attack detection
};

MatrixReport run_matrix(const std::vector<Scenario>& attack_scenarios,
                        const Scenario& benign_scenario,
                        std::shared_ptr<const dsl::ProtocolSpec> spec,
                        const GatewayConfig& base_config);

}  // namespace mavguard::sim
