#include "mavguard/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <json.hpp>

namespace mavguard::sim {

using json = nlohmann::json;
using namespace std::chrono;

// ---- message <-> json ----

namespace {

json message_json_obj(const mav::MavMessage& msg) {
  json j;
  j["type"] = std::string(mav::message_name(mav::message_id(msg)));
  if (const auto* m = std::get_if<mav::Heartbeat>(&msg)) {
    j["custom_mode"] = m->custom_mode;
    j["base_mode"] = m->base_mode;
    j["mav_type"] = m->type;
    j["autopilot"] = m->autopilot;
    j["system_status"] = m->system_status;
    j["mavlink_version"] = m->mavlink_version;
  } else if (const auto* m = std::get_if<mav::ParamValue>(&msg)) {
    j["param_id"] = m->param_id;
    j["param_value"] = m->param_value;
    j["param_type"] = m->param_type;
    j["param_count"] = m->param_count;
    j["param_index"] = m->param_index;
  } else if (const auto* m = std::get_if<mav::ParamSet>(&msg)) {
    j["target_system"] = m->target_system;
    j["target_component"] = m->target_component;
    j["param_id"] = m->param_id;
    j["param_value"] = m->param_value;
    j["param_type"] = m->param_type;
  } else if (const auto* m = std::get_if<mav::GlobalPositionInt>(&msg)) {
    j["time_boot_ms"] = m->time_boot_ms;
    j["lat"] = m->lat;
    j["lon"] = m->lon;
    j["alt"] = m->alt;
    j["relative_alt"] = m->relative_alt;
    j["vx"] = m->vx;
    j["vy"] = m->vy;
    j["vz"] = m->vz;
    j["hdg"] = m->hdg;
  } else if (const auto* m = std::get_if<mav::MissionCount>(&msg)) {
    j["target_system"] = m->target_system;
    j["target_component"] = m->target_component;
    j["count"] = m->count;
    j["mission_type"] = m->mission_type;
  } else if (const auto* m = std::get_if<mav::MissionAck>(&msg)) {
    j["target_system"] = m->target_system;
    j["target_component"] = m->target_component;
    j["ack_type"] = m->type;
    j["mission_type"] = m->mission_type;
  } else if (const auto* m = std::get_if<mav::MissionItemInt>(&msg)) {
    j["target_system"] = m->target_system;
    j["target_component"] = m->target_component;
    j["seq"] = m->seq;
    j["frame"] = m->frame;
    j["command"] = m->command;
    j["current"] = m->current;
    j["autocontinue"] = m->autocontinue;
    j["param1"] = m->param1;
    j["param2"] = m->param2;
    j["param3"] = m->param3;
    j["param4"] = m->param4;
    j["x"] = m->x;
    j["y"] = m->y;
    j["z"] = m->z;
    j["mission_type"] = m->mission_type;
  } else if (const auto* m = std::get_if<mav::CommandLong>(&msg)) {
    j["target_system"] = m->target_system;
    j["target_component"] = m->target_component;
    j["command"] = m->command;
    j["confirmation"] = m->confirmation;
    j["param1"] = m->param1;
    j["param2"] = m->param2;
    j["param3"] = m->param3;
    j["param4"] = m->param4;
    j["param5"] = m->param5;
    j["param6"] = m->param6;
    j["param7"] = m->param7;
  } else if (const auto* m = std::get_if<mav::CommandAck>(&msg)) {
    j["command"] = m->command;
    j["result"] = m->result;
  } else if (const auto* m = std::get_if<mav::StatusText>(&msg)) {
    j["severity"] = m->severity;
    j["text"] = m->text;
  }
  return j;
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<T>();
}

mav::MavMessage message_from_json_obj(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "HEARTBEAT") {
    mav::Heartbeat m;
    m.custom_mode = field_or<std::uint32_t>(j, "custom_mode", 0);
    m.base_mode = field_or<std::uint8_t>(j, "base_mode", 0);
    m.type = field_or<std::uint8_t>(j, "mav_type", 6);  // MAV_TYPE_GCS
    m.autopilot = field_or<std::uint8_t>(j, "autopilot", 8);
    m.system_status = field_or<std::uint8_t>(j, "system_status", 4);
    m.mavlink_version = field_or<std::uint8_t>(j, "mavlink_version", 3);
    return m;
  }
  if (type == "PARAM_VALUE") {
    mav::ParamValue m;
    m.param_id = field_or<std::string>(j, "param_id", "");
    m.param_value = field_or<float>(j, "param_value", 0.0f);
    m.param_type = field_or<std::uint8_t>(j, "param_type", 9);
    m.param_count = field_or<std::uint16_t>(j, "param_count", 0);
    m.param_index = field_or<std::uint16_t>(j, "param_index", 0);
    return m;
  }
  if (type == "PARAM_SET") {
    mav::ParamSet m;
    m.target_system = field_or<std::uint8_t>(j, "target_system", 1);
    m.target_component = field_or<std::uint8_t>(j, "target_component", 1);
    m.param_id = field_or<std::string>(j, "param_id", "");
    m.param_value = field_or<float>(j, "param_value", 0.0f);
    m.param_type = field_or<std::uint8_t>(j, "param_type", 9);
    return m;
  }
  if (type == "GLOBAL_POSITION_INT") {
    mav::GlobalPositionInt m;
    m.time_boot_ms = field_or<std::uint32_t>(j, "time_boot_ms", 0);
    m.lat = field_or<std::int32_t>(j, "lat", 0);
    m.lon = field_or<std::int32_t>(j, "lon", 0);
    m.alt = field_or<std::int32_t>(j, "alt", 0);
    m.relative_alt = field_or<std::int32_t>(j, "relative_alt", 0);
    m.vx = field_or<std::int16_t>(j, "vx", 0);
    m.vy = field_or<std::int16_t>(j, "vy", 0);
    m.vz = field_or<std::int16_t>(j, "vz", 0);
    m.hdg = field_or<std::uint16_t>(j, "hdg", 0);
    return m;
  }
  if (type == "MISSION_COUNT") {
    mav::MissionCount m;
    m.target_system = field_or<std::uint8_t>(j, "target_system", 1);
    m.target_component = field_or<std::uint8_t>(j, "target_component", 1);
    m.count = field_or<std::uint16_t>(j, "count", 0);
    m.mission_type = field_or<std::uint8_t>(j, "mission_type", 0);
    return m;
  }
  if (type == "MISSION_ACK") {
    mav::MissionAck m;
    m.target_system = field_or<std::uint8_t>(j, "target_system", 0);
    m.target_component = field_or<std::uint8_t>(j, "target_component", 0);
    m.type = field_or<std::uint8_t>(j, "ack_type", 0);
    m.mission_type = field_or<std::uint8_t>(j, "mission_type", 0);
    return m;
  }
  if (type == "MISSION_ITEM_INT") {
    mav::MissionItemInt m;
    m.target_system = field_or<std::uint8_t>(j, "target_system", 1);
    m.target_component = field_or<std::uint8_t>(j, "target_component", 1);
    m.seq = field_or<std::uint16_t>(j, "seq", 0);
    m.frame = field_or<std::uint8_t>(j, "frame", 6);
    m.command = field_or<std::uint16_t>(j, "command", 16);
    m.current = field_or<std::uint8_t>(j, "current", 0);
    m.autocontinue = field_or<std::uint8_t>(j, "autocontinue", 1);
    m.param1 = field_or<float>(j, "param1", 0.0f);
    m.param2 = field_or<float>(j, "param2", 0.0f);
    m.param3 = field_or<float>(j, "param3", 0.0f);
    m.param4 = field_or<float>(j, "param4", 0.0f);
    m.x = field_or<std::int32_t>(j, "x", 0);
    m.y = field_or<std::int32_t>(j, "y", 0);
    m.z = field_or<float>(j, "z", 0.0f);
    m.mission_type = field_or<std::uint8_t>(j, "mission_type", 0);
    return m;
  }
  if (type == "COMMAND_LONG") {
    mav::CommandLong m;
    m.target_system = field_or<std::uint8_t>(j, "target_system", 1);
    m.target_component = field_or<std::uint8_t>(j, "target_component", 1);
    m.command = field_or<std::uint16_t>(j, "command", 0);
    m.confirmation = field_or<std::uint8_t>(j, "confirmation", 0);
    m.param1 = field_or<float>(j, "param1", 0.0f);
    m.param2 = field_or<float>(j, "param2", 0.0f);
    m.param3 = field_or<float>(j, "param3", 0.0f);
    m.param4 = field_or<float>(j, "param4", 0.0f);
    m.param5 = field_or<float>(j, "param5", 0.0f);
    m.param6 = field_or<float>(j, "param6", 0.0f);
    m.param7 = field_or<float>(j, "param7", 0.0f);
    return m;
  }
  if (type == "COMMAND_ACK") {
    mav::CommandAck m;
    m.command = field_or<std::uint16_t>(j, "command", 0);
    m.result = field_or<std::uint8_t>(j, "result", 0);
    return m;
  }
  if (type == "STATUSTEXT") {
    mav::StatusText m;
    m.severity = field_or<std::uint8_t>(j, "severity", 6);
    m.text = field_or<std::string>(j, "text", "");
    return m;
  }
  throw std::runtime_error("unknown message type in scenario: " + type);
}

}  // namespace

std::string message_to_json(const mav::MavMessage& msg) {
  return message_json_obj(msg).dump();
}

mav::MavMessage message_from_json(const std::string& text) {
  return message_from_json_obj(json::parse(text));
}

// ---- scenario io ----

Scenario scenario_from_json(const std::string& text) {
  json j = json::parse(text);
  Scenario s;
  s.name = field_or<std::string>(j, "name", "unnamed");
  s.description = field_or<std::string>(j, "description", "");
  if (j.contains("gcs_script")) {
    for (const auto& e : j["gcs_script"]) {
      ScriptEntry entry;
      entry.delay_ms = field_or<int>(e, "delay_ms", 0);
      entry.msg = message_from_json_obj(e.at("msg"));
      s.gcs_script.push_back(std::move(entry));
    }
  }
  if (j.contains("fcs_script")) {
    const auto& f = j["fcs_script"];
    s.fcs_script.telemetry_hz = field_or<double>(f, "telemetry_hz", 50.0);
    s.fcs_script.auto_ack = field_or<bool>(f, "auto_ack", true);
    if (f.contains("phases")) {
      for (const auto& p : f["phases"]) {
        TelemetryPhase ph;
        ph.duration_ms = field_or<int>(p, "duration_ms", 1000);
        ph.armed = field_or<bool>(p, "armed", false);
        ph.mode = field_or<std::string>(p, "mode", "STABILIZE");
        ph.altitude_start_m = field_or<double>(p, "altitude_start_m", 0.0);
        ph.climb_rate_mps = field_or<double>(p, "climb_rate_mps", 0.0);
        s.fcs_script.phases.push_back(std::move(ph));
      }
    }
  }
  if (j.contains("expected")) {
    for (const auto& e : j["expected"]) {
      ExpectedVerdict ev;
      ev.index = e.at("index").get<std::size_t>();
      ev.decision = e.at("decision").get<std::string>() == "accept"
                        ? Decision::Accept
                        : Decision::Reject;
      ev.rule = field_or<std::string>(e, "rule", "");
      s.expected.push_back(std::move(ev));
    }
  }
  s.expect_zero_rejects = field_or<bool>(j, "expect_zero_rejects", false);
  s.expect_session_complete = field_or<bool>(j, "expect_session_complete", false);
  s.message_volume = field_or<std::uint64_t>(j, "message_volume", 0);
  if (j.contains("padding")) {
    const auto& p = j["padding"];
    s.padding.count = field_or<std::uint64_t>(p, "count", 0);
    s.padding.burst = field_or<int>(p, "burst", 100);
    s.padding.gap_ms = field_or<int>(p, "gap_ms", 1);
  }
  s.timeout_s = field_or<int>(j, "timeout_s", 120);
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["description"] = s.description;
  j["gcs_script"] = json::array();
  for (const auto& e : s.gcs_script) {
    j["gcs_script"].push_back({{"delay_ms", e.delay_ms}, {"msg", message_json_obj(e.msg)}});
  }
  json phases = json::array();
  for (const auto& p : s.fcs_script.phases) {
    phases.push_back({{"duration_ms", p.duration_ms},
                      {"armed", p.armed},
                      {"mode", p.mode},
                      {"altitude_start_m", p.altitude_start_m},
                      {"climb_rate_mps", p.climb_rate_mps}});
  }
  j["fcs_script"] = {{"telemetry_hz", s.fcs_script.telemetry_hz},
                     {"auto_ack", s.fcs_script.auto_ack},
                     {"phases", phases}};
  j["expected"] = json::array();
  for (const auto& e : s.expected) {
    json je = {{"index", e.index},
               {"decision", e.decision == Decision::Accept ? "accept" : "reject"}};
    if (!e.rule.empty()) je["rule"] = e.rule;
    j["expected"].push_back(je);
  }
  j["expect_zero_rejects"] = s.expect_zero_rejects;
  j["expect_session_complete"] = s.expect_session_complete;
  j["message_volume"] = s.message_volume;
  j["padding"] = {{"count", s.padding.count},
                  {"burst", s.padding.burst},
                  {"gap_ms", s.padding.gap_ms}};
  j["timeout_s"] = s.timeout_s;
  return j.dump(2);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return scenario_from_json(os.str());
}

void expand_padding(Scenario& s) {
  if (s.padding.count == 0) return;
  mav::Heartbeat hb;
  hb.type = 6;  // MAV_TYPE_GCS
  hb.autopilot = 8;  // MAV_AUTOPILOT_INVALID, as GCS heartbeats carry
  hb.system_status = 4;
  for (std::uint64_t i = 0; i < s.padding.count; ++i) {
    ScriptEntry e;
    const bool burst_edge = s.padding.burst > 0 &&
                            i % static_cast<std::uint64_t>(s.padding.burst) == 0;
    e.delay_ms = burst_edge ? s.padding.gap_ms : 0;
    e.msg = hb;
    s.gcs_script.push_back(std::move(e));
  }
  s.padding.count = 0;
}

// ---- latency statistics ----

LatencyStats latency_stats(const std::vector<std::uint64_t>& samples_us) {
  if (samples_us.empty())
    throw std::invalid_argument("latency_stats: empty sample list");
  LatencyStats st;
  st.n = samples_us.size();
  const double n = static_cast<double>(st.n);
  double sum = 0;
  for (auto v : samples_us) sum += static_cast<double>(v);
  const double mean_us = sum / n;
  double ss = 0;
  for (auto v : samples_us) {
    const double d = static_cast<double>(v) - mean_us;
    ss += d * d;
  }
  const double sd_us = st.n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  st.mean_ms = mean_us / 1000.0;
  st.sd_ms = sd_us / 1000.0;
  st.ci95_ms = 1.96 * st.sd_ms / std::sqrt(n);
  return st;
}

std::string LatencyStats::format() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", mean_ms, ci95_ms);
  return buf;
}

double median_us(std::vector<std::uint64_t> samples_us) {
  if (samples_us.empty()) return 0.0;
  std::sort(samples_us.begin(), samples_us.end());
  const std::size_t n = samples_us.size();
  if (n % 2 == 1) return static_cast<double>(samples_us[n / 2]);
  return (static_cast<double>(samples_us[n / 2 - 1]) +
          static_cast<double>(samples_us[n / 2])) /
         2.0;
}

std::string_view harness_config_name(HarnessConfig c) {
  switch (c) {
    case HarnessConfig::Passthrough:
      return "passthrough";
    case HarnessConfig::Gateway:
      return "gateway";
    case HarnessConfig::GatewaySpec:
      return "gateway+spec";
  }
  return "?";
}

// ---- simulators ----

namespace {

class FcsSim {
 public:
  FcsSim(const FcsScript& script, bool record)
      : script_(script), record_(record), sock_(UdpSocket::bind("127.0.0.1", 0)) {
    sock_.set_recv_buffer(1 << 20);
  }

  void start(Endpoint gateway_side) {
    gateway_ = gateway_side;
    stop_.store(false);
    thread_ = std::thread([this] { run(); });
  }

  void stop() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
  }

  std::uint16_t port() const { return sock_.local_port(); }
  std::uint64_t received() const { return received_.load(std::memory_order_relaxed); }

  // post-stop accessors
  const std::vector<TimePoint>& recv_times() const { return recv_times_; }
  const std::vector<std::uint8_t>& received_bytes() const { return received_bytes_; }

 private:
  FcsScript script_;
  bool record_;
  UdpSocket sock_;
  Endpoint gateway_{};
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> received_{0};
  std::thread thread_;
  std::vector<TimePoint> recv_times_;
  std::vector<std::uint8_t> received_bytes_;
  mav::StreamDecoder decoder_;
  std::uint8_t seq_ = 0;
  std::uint16_t mission_expected_ = 0;
  std::uint16_t mission_items_ = 0;

  void send_msg(const mav::MavMessage& m) {
    auto frame = mav::frame_encode(m, seq_++, 1, 1);
    sock_.send_to(frame, gateway_);
  }

  void auto_ack(const mav::MavMessage& m) {
    if (const auto* cmd = std::get_if<mav::CommandLong>(&m)) {
      mav::CommandAck ack;
      ack.command = cmd->command;
      ack.result = mav::kResultAccepted;
      send_msg(ack);
      return;
    }
    if (const auto* ps = std::get_if<mav::ParamSet>(&m)) {
      mav::ParamValue pv;
      pv.param_id = ps->param_id;
      pv.param_value = ps->param_value;
      pv.param_type = ps->param_type;
      pv.param_count = 1;
      send_msg(pv);
      return;
    }
    if (const auto* mc = std::get_if<mav::MissionCount>(&m)) {
      mission_expected_ = mc->count;
      mission_items_ = 0;
      return;
    }
    if (std::get_if<mav::MissionItemInt>(&m) != nullptr) {
      if (++mission_items_ == mission_expected_ && mission_expected_ > 0) {
        mav::MissionAck ack;
        ack.type = 0;  // MAV_MISSION_ACCEPTED
        send_msg(ack);
      }
      return;
    }
  }

  void run() {
    const TimePoint t0 = MonotonicClock::now();
    const auto period = script_.telemetry_hz > 0
                            ? microseconds(static_cast<std::int64_t>(
                                  1e6 / script_.telemetry_hz))
                            : microseconds(0);
    TimePoint next_telemetry = t0;
    std::array<std::uint8_t, 2048> buf;
    SpinBackoff backoff{200, microseconds(50)};
    std::uint32_t spins = 0;

    while (!stop_.load(std::memory_order_relaxed)) {
      bool busy = false;

      for (int i = 0; i < 64; ++i) {
        std::size_t n = sock_.recv_from(buf);
        if (n == 0) break;
        const TimePoint now = MonotonicClock::now();
        busy = true;
        decoder_.feed(std::span(buf.data(), n));
        while (auto item = decoder_.next()) {
          if (item->status != mav::DecodeStatus::Ok &&
              item->status != mav::DecodeStatus::UnknownMsgId)
            continue;
          recv_times_.push_back(now);
          received_.fetch_add(1, std::memory_order_relaxed);
          if (record_)
            received_bytes_.insert(received_bytes_.end(), item->frame.begin(),
                                   item->frame.end());
          if (script_.auto_ack && item->message) auto_ack(*item->message);
        }
      }

      if (period.count() > 0 && MonotonicClock::now() >= next_telemetry) {
        emit_telemetry(t0);
        next_telemetry += period;
        busy = true;
      }

      if (busy) {
        SpinBackoff::reset(spins);
      } else {
        backoff.wait(spins);
      }
    }
  }

  void emit_telemetry(TimePoint t0) {
    const auto elapsed_ms =
        duration_cast<milliseconds>(MonotonicClock::now() - t0).count();
    // locate the active phase
    std::int64_t acc = 0;
    const TelemetryPhase* phase = nullptr;
    double altitude = 0;
    for (const auto& p : script_.phases) {
      if (elapsed_ms < acc + p.duration_ms) {
        phase = &p;
        altitude = p.altitude_start_m +
                   p.climb_rate_mps * static_cast<double>(elapsed_ms - acc) / 1000.0;
        break;
      }
      acc += p.duration_ms;
    }
    if (phase == nullptr) {
      if (script_.phases.empty()) return;
      phase = &script_.phases.back();
      altitude = phase->altitude_start_m +
                 phase->climb_rate_mps * phase->duration_ms / 1000.0;
    }

    mav::Heartbeat hb;
    hb.type = 2;       // MAV_TYPE_QUADROTOR
    hb.autopilot = 3;  // MAV_AUTOPILOT_ARDUPILOTMEGA
    hb.base_mode = static_cast<std::uint8_t>(0x10 | (phase->armed ? mav::kBaseModeArmed : 0));
    hb.custom_mode = flight_mode_number(phase->mode).value_or(kModeStabilize);
    hb.system_status = 4;  // MAV_STATE_ACTIVE
    send_msg(hb);

    mav::GlobalPositionInt pos;
    pos.time_boot_ms = static_cast<std::uint32_t>(elapsed_ms);
    pos.relative_alt = static_cast<std::int32_t>(altitude * 1000.0);
    pos.alt = pos.relative_alt;
    pos.vz = static_cast<std::int16_t>(-phase->climb_rate_mps * 100.0);
    send_msg(pos);
  }
};

class GcsSim {
 public:
  GcsSim(const std::vector<ScriptEntry>& script, bool record, std::uint8_t seq0 = 0)
      : script_(script), record_(record), seq0_(seq0),
        sock_(UdpSocket::bind("127.0.0.1", 0)) {
    sock_.set_recv_buffer(1 << 20);
  }

  void start(Endpoint gateway_side) {
    gateway_ = gateway_side;
    stop_.store(false);
    thread_ = std::thread([this] { run(); });
  }

  void stop() {
    stop_.store(true);
    if (thread_.joinable()) thread_.join();
  }

  bool script_done() const { return script_done_.load(std::memory_order_relaxed); }
  std::uint64_t sent() const { return sent_.load(std::memory_order_relaxed); }

  // post-stop accessors
  const std::vector<TimePoint>& send_times() const { return send_times_; }
  const std::vector<std::uint8_t>& sent_bytes() const { return sent_bytes_; }
  std::uint64_t downlink_received() const { return downlink_received_; }
  std::uint64_t denied_acks() const { return denied_acks_; }

 private:
  std::vector<ScriptEntry> script_;
  bool record_;
  std::uint8_t seq0_;
  UdpSocket sock_;
  Endpoint gateway_{};
  std::atomic<bool> stop_{false};
  std::atomic<bool> script_done_{false};
  std::atomic<std::uint64_t> sent_{0};
  std::thread thread_;
  std::vector<TimePoint> send_times_;
  std::vector<std::uint8_t> sent_bytes_;
  std::uint64_t downlink_received_ = 0;
  std::uint64_t denied_acks_ = 0;
  mav::StreamDecoder decoder_;

  void drain_downlink() {
    std::array<std::uint8_t, 2048> buf;
    for (int i = 0; i < 64; ++i) {
      std::size_t n = sock_.recv_from(buf);
      if (n == 0) return;
      decoder_.feed(std::span(buf.data(), n));
      while (auto item = decoder_.next()) {
        if (item->status != mav::DecodeStatus::Ok &&
            item->status != mav::DecodeStatus::UnknownMsgId)
          continue;
        ++downlink_received_;
        if (item->message) {
          if (const auto* ack = std::get_if<mav::CommandAck>(&*item->message)) {
            if (ack->result == mav::kResultDenied) ++denied_acks_;
          }
        }
      }
    }
  }

  void run() {
    send_times_.reserve(script_.size());
    std::uint8_t seq = seq0_;
    for (const auto& entry : script_) {
      if (stop_.load(std::memory_order_relaxed)) break;
      if (entry.delay_ms > 0)
        std::this_thread::sleep_for(milliseconds(entry.delay_ms));
      auto frame = mav::frame_encode(entry.msg, seq++, 255, 190);
      send_times_.push_back(MonotonicClock::now());
      sock_.send_to(frame, gateway_);
      sent_.fetch_add(1, std::memory_order_relaxed);
      if (record_) sent_bytes_.insert(sent_bytes_.end(), frame.begin(), frame.end());
      drain_downlink();
    }
    script_done_.store(true);
    while (!stop_.load(std::memory_order_relaxed)) {
      drain_downlink();
      std::this_thread::sleep_for(microseconds(200));
    }
  }
};

std::string make_run_log_dir(const std::string& base, const std::string& scenario,
                             std::string_view config) {
  namespace fs = std::filesystem;
  fs::path dir;
  if (!base.empty()) {
    dir = fs::path(base) / (scenario + "_" + std::string(config));
  } else {
    static std::atomic<int> counter{0};
    dir = fs::temp_directory_path() /
          ("mavguard-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter.fetch_add(1)));
  }
  fs::create_directories(dir);
  return dir.string();
}

std::vector<Verdict> verdicts_from_log(const std::string& path) {
  std::vector<Verdict> out;
  for (const auto& rec : read_kv_log(path)) {
    auto idx = rec.find("idx");
    auto dec = rec.find("decision");
    if (idx == rec.end() || dec == rec.end()) continue;
    Verdict v;
    v.uplink_index = std::stoull(idx->second);
    v.decision = dec->second == "accept" ? Decision::Accept : Decision::Reject;
    auto rule = rec.find("rule");
    if (rule != rec.end()) v.rule = rule->second;
    auto reason = rec.find("reason");
    if (reason != rec.end()) v.reason = reason->second;
    auto msgid = rec.find("msgid");
    if (msgid != rec.end()) v.msgid = static_cast<std::uint32_t>(std::stoul(msgid->second));
    out.push_back(std::move(v));
  }
  std::sort(out.begin(), out.end(), [](const Verdict& a, const Verdict& b) {
    return a.uplink_index < b.uplink_index;
  });
  return out;
}

void check_expectations(const Scenario& sc, RunReport& report) {
  report.assertions_checked = true;
  auto fail = [&](const std::string& msg) {
    report.assertions_passed = false;
    report.failures.push_back(msg);
  };
  for (const auto& e : sc.expected) {
    if (e.index >= report.verdicts.size()) {
      fail("expected verdict index " + std::to_string(e.index) +
           " beyond verdict count " + std::to_string(report.verdicts.size()));
      continue;
    }
    const Verdict& v = report.verdicts[e.index];
    if (v.decision != e.decision) {
      fail("message " + std::to_string(e.index) + ": expected " +
           (e.decision == Decision::Accept ? "accept" : "reject") + ", got " +
           (v.accepted() ? "accept" : "reject") + " (" + v.rule + ": " + v.reason + ")");
    } else if (!e.rule.empty() && v.rule != e.rule) {
      fail("message " + std::to_string(e.index) + ": expected rule '" + e.rule +
           "', got '" + v.rule + "'");
    }
  }
  if (sc.expect_zero_rejects && report.rejected != 0)
    fail("expected zero rejects, got " + std::to_string(report.rejected));
  if (sc.expect_session_complete && report.final_session != SessionStatus::Complete)
    fail("expected mission session complete, got " +
         std::string(session_status_name(report.final_session)));
  if (sc.message_volume > 0 && report.sent < sc.message_volume)
    fail("expected >= " + std::to_string(sc.message_volume) + " uplink messages, sent " +
         std::to_string(report.sent));
}

}  // namespace

// ---- run_scenario ----

RunReport run_scenario(const Scenario& scenario,
                       std::shared_ptr<const dsl::ProtocolSpec> spec,
                       const RunOptions& opts) {
  Scenario sc = scenario;
  expand_padding(sc);

  RunReport report;
  report.scenario = sc.name;
  report.config = std::string(harness_config_name(opts.config));

  const bool uses_gateway = opts.config != HarnessConfig::Passthrough;
  const bool attested = opts.config == HarnessConfig::GatewaySpec;
  auto effective_spec = spec;
  if (!attested || !effective_spec) {
    effective_spec = std::make_shared<const dsl::ProtocolSpec>();
  }

  GatewayConfig cfg = opts.gateway;
  cfg.gcs_listen_port = 0;
  cfg.fcs_local_port = 0;
  cfg.attest_enabled = attested;
  cfg.log_dir = attested
                    ? make_run_log_dir(opts.gateway.log_dir, sc.name, report.config)
                    : std::string();

  FcsSim fcs(sc.fcs_script, opts.record_streams);
  cfg.fcs_port = fcs.port();

  std::unique_ptr<Gateway> gateway;
  std::unique_ptr<PassthroughRelay> relay;
  std::uint16_t gcs_side_port = 0;
  std::uint16_t fcs_side_port = 0;

  if (uses_gateway) {
    gateway = std::make_unique<Gateway>(cfg, effective_spec);
    gateway->start();
    gcs_side_port = gateway->gcs_bound_port();
    fcs_side_port = gateway->fcs_bound_port();
  } else {
    relay = std::make_unique<PassthroughRelay>("127.0.0.1", 0,
                                               Endpoint::of("127.0.0.1", fcs.port()));
    relay->start();
    gcs_side_port = relay->gcs_bound_port();
    fcs_side_port = relay->fcs_side_port();
  }

  fcs.start(Endpoint::of("127.0.0.1", fcs_side_port));
  GcsSim gcs(sc.gcs_script, opts.record_streams,
             static_cast<std::uint8_t>(opts.seed & 0xFF));
  gcs.start(Endpoint::of("127.0.0.1", gcs_side_port));

  const auto deadline = MonotonicClock::now() + seconds(sc.timeout_s);
  bool timed_out = false;
  while (!gcs.script_done()) {
    if (MonotonicClock::now() > deadline) {
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(milliseconds(2));
  }

  // quiescence: all sent frames accounted for, or no progress for a while
  std::uint64_t last_progress = 0;
  auto last_change = MonotonicClock::now();
  while (!timed_out) {
    CountersSnapshot counters = gateway ? gateway->counters() : CountersSnapshot{};
    const std::uint64_t accounted =
        fcs.received() + counters.rejected + counters.malformed + counters.integrity_alarms;
    if (accounted >= gcs.sent()) break;
    if (accounted != last_progress) {
      last_progress = accounted;
      last_change = MonotonicClock::now();
    } else if (MonotonicClock::now() - last_change > milliseconds(500)) {
      break;  // drained as far as it will go
    }
    if (MonotonicClock::now() > deadline) {
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(milliseconds(2));
  }

  gcs.stop();
  fcs.stop();
  CountersSnapshot counters{};
  if (gateway) {
    counters = gateway->counters();
    report.final_session = gateway->attestor().session().status;
    gateway->stop();
  }
  if (relay) relay->stop();

  report.sent = gcs.sent();
  report.forwarded = fcs.received();
  report.rejected = counters.rejected;
  // drops are measured, not derived, so the conservation identity is a real
  // check: any frame lost in transit breaks it
  report.dropped = counters.malformed + counters.integrity_alarms;
  if (timed_out) report.failures.push_back("scenario timed out");

  if (uses_gateway) {
    report.verdicts = verdicts_from_log(cfg.verdict_log_path());
    report.audit = audit_non_bypass(cfg.verdict_log_path(), cfg.forwarded_log_path());
  } else {
    report.audit.ok = true;  // nothing to audit without an attestor
  }
  report.attack_detected = report.rejected > 0;

  // latency: k-th accepted uplink message pairs with k-th FCS arrival
  const auto& send_times = gcs.send_times();
  const auto& recv_times = fcs.recv_times();
  std::vector<std::size_t> accepted_idx;
  if (uses_gateway) {
    for (const auto& v : report.verdicts) {
      if (v.accepted()) accepted_idx.push_back(static_cast<std::size_t>(v.uplink_index));
    }
  } else {
    for (std::size_t i = 0; i < send_times.size(); ++i) accepted_idx.push_back(i);
  }
  const std::size_t n = std::min(accepted_idx.size(), recv_times.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (accepted_idx[k] >= send_times.size()) break;
    const auto us = duration_cast<microseconds>(recv_times[k] -
                                                send_times[accepted_idx[k]])
                        .count();
    report.latency_us.push_back(us > 0 ? static_cast<std::uint64_t>(us) : 0);
  }
  if (!report.latency_us.empty()) {
    report.latency = latency_stats(report.latency_us);
    report.median_latency_us = median_us(report.latency_us);
  }

  if (opts.record_streams) {
    if (opts.gcs_sent_bytes != nullptr) *opts.gcs_sent_bytes = gcs.sent_bytes();
    if (opts.fcs_received_bytes != nullptr) *opts.fcs_received_bytes = fcs.received_bytes();
  }

  if (opts.check_expectations && opts.config == HarnessConfig::GatewaySpec)
    check_expectations(sc, report);
  if (timed_out) report.assertions_passed = false;

  return report;
}

// ---- offline replay ----

RunReport replay_scenario(const Scenario& scenario,
                          std::shared_ptr<const dsl::ProtocolSpec> spec,
                          const AttestorOptions& base_opts) {
  Scenario sc = scenario;
  expand_padding(sc);

  RunReport report;
  report.scenario = sc.name;
  report.config = "replay";

  struct Event {
    std::int64_t t_us;
    int order;  // telemetry first on ties
    bool telemetry;
    mav::MavMessage msg;
  };
  std::vector<Event> events;

  std::int64_t t = 0;
  int ord = 0;
  for (const auto& e : sc.gcs_script) {
    t += static_cast<std::int64_t>(e.delay_ms) * 1000;
    events.push_back({t, ++ord, false, e.msg});
  }

  if (sc.fcs_script.telemetry_hz > 0 && !sc.fcs_script.phases.empty()) {
    const auto period_us =
        static_cast<std::int64_t>(1e6 / sc.fcs_script.telemetry_hz);
    std::int64_t phase_start = 0;
    for (const auto& p : sc.fcs_script.phases) {
      const std::int64_t phase_end = phase_start + static_cast<std::int64_t>(p.duration_ms) * 1000;
      for (std::int64_t tick = phase_start; tick < phase_end; tick += period_us) {
        const double dt_s = static_cast<double>(tick - phase_start) / 1e6;
        mav::Heartbeat hb;
        hb.type = 2;
        hb.autopilot = 3;
        hb.base_mode = static_cast<std::uint8_t>(0x10 | (p.armed ? mav::kBaseModeArmed : 0));
        hb.custom_mode = flight_mode_number(p.mode).value_or(kModeStabilize);
        hb.system_status = 4;
        events.push_back({tick, 0, true, hb});
        mav::GlobalPositionInt pos;
        pos.time_boot_ms = static_cast<std::uint32_t>(tick / 1000);
        pos.relative_alt = static_cast<std::int32_t>(
            (p.altitude_start_m + p.climb_rate_mps * dt_s) * 1000.0);
        pos.alt = pos.relative_alt;
        pos.vz = static_cast<std::int16_t>(-p.climb_rate_mps * 100.0);
        events.push_back({tick, 0, true, pos});
      }
      phase_start = phase_end;
    }
  }

  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    return a.order < b.order;
  });

  std::int64_t virtual_us = 0;
  AttestorOptions opts = base_opts;
  opts.clock = [&virtual_us] {
    return TimePoint(microseconds(virtual_us));
  };
  auto effective_spec = spec ? spec : std::make_shared<const dsl::ProtocolSpec>();
  Attestor attestor(effective_spec, opts);

  for (const auto& ev : events) {
    virtual_us = ev.t_us;
    if (ev.telemetry) {
      attestor.observe_telemetry(ev.msg);
      continue;
    }
    Verdict v = attestor.attest(ev.msg);
    ++report.sent;
    if (v.accepted()) {
      ++report.forwarded;
    } else {
      ++report.rejected;
    }
    report.verdicts.push_back(std::move(v));
  }

  report.final_session = attestor.session().status;
  report.attack_detected = report.rejected > 0;
  report.audit.ok = true;
  check_expectations(sc, report);
  return report;
}

// ---- reports ----

namespace {

json verdict_json(const Verdict& v) {
  return {{"idx", v.uplink_index},
          {"msgid", v.msgid},
          {"decision", v.accepted() ? "accept" : "reject"},
          {"rule", v.rule},
          {"reason", v.reason}};
}

}  // namespace

std::string RunReport::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["config"] = config;
  j["sent"] = sent;
  j["forwarded"] = forwarded;
  j["rejected"] = rejected;
  j["dropped"] = dropped;
  j["conservation_holds"] = conservation_holds();
  j["attack_detected"] = attack_detected;
  j["final_session"] = std::string(session_status_name(final_session));
  j["assertions_checked"] = assertions_checked;
  j["assertions_passed"] = assertions_passed;
  j["failures"] = failures;
  if (!latency_us.empty()) {
    j["latency"] = {{"n", latency.n},
                    {"mean_ms", latency.mean_ms},
                    {"sd_ms", latency.sd_ms},
                    {"ci95_ms", latency.ci95_ms},
                    {"median_ms", median_latency_us / 1000.0},
                    {"formatted", latency.format()}};
  }
  j["audit"] = {{"ok", audit.ok},
                {"forwarded", audit.forwarded},
                {"accepted", audit.accepted},
                {"extras", audit.extras},
                {"rejected_forwarded", audit.rejected_forwarded}};
  json rejects = json::array();
  for (const auto& v : verdicts) {
    if (!v.accepted()) rejects.push_back(verdict_json(v));
  }
  j["rejections"] = rejects;
  return j.dump(2);
}

std::string RunReport::text_table() const {
  std::ostringstream os;
  os << "scenario " << scenario << " [" << config << "]\n";
  char line[160];
  std::snprintf(line, sizeof line, "  %-10s %-10s %-10s %-10s %-14s\n", "sent",
                "forwarded", "rejected", "dropped", "conservation");
  os << line;
  std::snprintf(line, sizeof line, "  %-10llu %-10llu %-10llu %-10llu %-14s\n",
                static_cast<unsigned long long>(sent),
                static_cast<unsigned long long>(forwarded),
                static_cast<unsigned long long>(rejected),
                static_cast<unsigned long long>(dropped),
                conservation_holds() ? "exact" : "VIOLATED");
  os << line;
  if (!latency_us.empty()) {
    os << "  latency(ms): " << latency.format()
       << "  median: " << median_latency_us / 1000.0 << "\n";
  }
  for (const auto& v : verdicts) {
    if (v.accepted()) continue;
    os << "  reject idx=" << v.uplink_index << " msgid=" << v.msgid << " rule="
       << v.rule << " reason=" << v.reason << "\n";
  }
  if (!failures.empty()) {
    for (const auto& f : failures) os << "  FAIL: " << f << "\n";
  }
  return os.str();
}

// ---- matrix ----

MatrixReport run_matrix(const std::vector<Scenario>& attack_scenarios,
                        const Scenario& benign_scenario,
                        std::shared_ptr<const dsl::ProtocolSpec> spec,
                        const GatewayConfig& base_config) {
  MatrixReport mr;
  const HarnessConfig configs[] = {HarnessConfig::Passthrough, HarnessConfig::Gateway,
                                   HarnessConfig::GatewaySpec};

  bool audits_ok = true;
  for (HarnessConfig c : configs) {
    RunOptions opts;
    opts.config = c;
    opts.gateway = base_config;
    RunReport r = run_scenario(benign_scenario, spec, opts);
    audits_ok = audits_ok && r.audit.ok;
    mr.benign_runs[std::string(harness_config_name(c))] = r;
    mr.all_runs.push_back(std::move(r));
  }

  for (const Scenario& attack : attack_scenarios) {
    for (HarnessConfig c : configs) {
      RunOptions opts;
      opts.config = c;
      opts.gateway = base_config;
      RunReport r = run_scenario(attack, spec, opts);
      audits_ok = audits_ok && r.audit.ok;
      mr.detection[attack.name][std::string(harness_config_name(c))] =
          r.attack_detected;
      mr.all_runs.push_back(std::move(r));
    }
  }

  mr.audits_ok = audits_ok;
  mr.detection_ok = !attack_scenarios.empty();
  for (const auto& attack : attack_scenarios) {
    const auto& row = mr.detection[attack.name];
    if (!row.at("gateway+spec")) mr.detection_ok = false;
    if (row.at("passthrough")) mr.detection_ok = false;
  }
  const RunReport& benign_spec_run = mr.benign_runs.at("gateway+spec");
  mr.benign_clean = benign_spec_run.rejected == 0 && benign_spec_run.assertions_passed;

  const double med_pass = mr.benign_runs.at("passthrough").median_latency_us;
  const double med_gw = mr.benign_runs.at("gateway").median_latency_us;
  const double med_spec = mr.benign_runs.at("gateway+spec").median_latency_us;
  mr.added_median_us = med_spec - med_pass;
  mr.median_ordered = med_pass <= med_gw && med_gw <= med_spec;
  return mr;
}

std::string MatrixReport::latency_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %-10s %-14s %-14s\n", "Configuration",
                "Messages", "Median(ms)", "Latency(ms)");
  os << line;
  for (const char* name : {"passthrough", "gateway", "gateway+spec"}) {
    auto it = benign_runs.find(name);
    if (it == benign_runs.end()) continue;
    const RunReport& r = it->second;
    std::snprintf(line, sizeof line, "%-14s %-10llu %-14.3f %-14s\n", name,
                  static_cast<unsigned long long>(r.sent),
                  r.median_latency_us / 1000.0, r.latency.format().c_str());
    os << line;
  }
  return os.str();
}

std::string MatrixReport::detection_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %-13s %-13s %-13s\n", "Attack",
                "passthrough", "gateway", "gateway+spec");
  os << line;
  for (const auto& [name, row] : detection) {
    auto cell = [&](const char* cfg) {
      auto it = row.find(cfg);
      return it == row.end() ? "-" : (it->second ? "detected" : "missed");
    };
    std::snprintf(line, sizeof line, "%-28s %-13s %-13s %-13s\n", name.c_str(),
                  cell("passthrough"), cell("gateway"), cell("gateway+spec"));
    os << line;
  }
  return os.str();
}

std::string MatrixReport::to_json() const {
  json j;
  j["detection"] = detection;
  j["detection_ok"] = detection_ok;
  j["benign_clean"] = benign_clean;
  j["audits_ok"] = audits_ok;
  j["added_median_ms"] = added_median_us / 1000.0;
  j["median_ordered"] = median_ordered;
  json latency = json::object();
  for (const auto& [cfg, r] : benign_runs) {
    latency[cfg] = {{"median_ms", r.median_latency_us / 1000.0},
                    {"mean_ms", r.latency.mean_ms},
                    {"ci95_ms", r.latency.ci95_ms},
                    {"formatted", r.latency.format()},
                    {"messages", r.sent}};
  }
  j["latency"] = latency;
  json runs = json::array();
  for (const auto& r : all_runs) runs.push_back(json::parse(r.to_json()));
  j["runs"] = runs;
  return j.dump(2);
}

}  // namespace mavguard::sim
