#include "mavguard/vehicle_state.hpp"

namespace mavguard {

namespace {

struct ModeEntry {
  std::string_view name;
  std::uint32_t number;
};

// ArduPilot Copter flight mode numbers
constexpr ModeEntry kModes[] = {
    {"STABILIZE", 0}, {"ACRO", 1},        {"ALT_HOLD", 2},  {"AUTO", 3},
    {"GUIDED", 4},    {"LOITER", 5},      {"RTL", 6},       {"CIRCLE", 7},
    {"LAND", 9},      {"DRIFT", 11},      {"SPORT", 13},    {"FLIP", 14},
    {"AUTOTUNE", 15}, {"POSHOLD", 16},    {"BRAKE", 17},    {"THROW", 18},
    {"AVOID_ADSB", 19}, {"GUIDED_NOGPS", 20}, {"SMART_RTL", 21},
};

}  // namespace

std::optional<std::uint32_t> flight_mode_number(std::string_view name) {
  for (const auto& m : kModes) {
    if (m.name == name) return m.number;
  }
  return std::nullopt;
}

std::string_view flight_mode_name(std::uint32_t number) {
  for (const auto& m : kModes) {
    if (m.number == number) return m.name;
  }
  return "UNKNOWN";
}

const ParamEntry* VehicleState::find_param(std::string_view name) const {
  auto it = params.find(std::string(name));
  return it == params.end() ? nullptr : &it->second;
}

VehicleState state_init(const dsl::ProtocolSpec& spec) {
  VehicleState st;
  for (const auto& d : spec.state_decls) {
    ParamEntry entry;
    entry.value = d.default_value;
    entry.default_value = d.default_value;
    entry.min = d.min;
    entry.max = d.max;
    st.params[d.name] = entry;
  }
  return st;
}

void apply_telemetry(VehicleState& state, const mav::MavMessage& msg, TimePoint now) {
  if (const auto* hb = std::get_if<mav::Heartbeat>(&msg)) {
    state.armed = (hb->base_mode & mav::kBaseModeArmed) != 0;
    state.flight_mode = hb->custom_mode;
    state.last_update = now;
    state.telemetry_seen = true;
    return;
  }
  if (const auto* pos = std::get_if<mav::GlobalPositionInt>(&msg)) {
    state.altitude_m = pos->relative_alt / 1000.0;
    state.climb_rate_mps = -pos->vz / 100.0;  // vz is cm/s positive down
    state.last_update = now;
    state.telemetry_seen = true;
    return;
  }
  // other downlink traffic carries nothing the refinements consult
}

bool apply_accepted_command(VehicleState& state, const mav::MavMessage& msg) {
  const auto* ps = std::get_if<mav::ParamSet>(&msg);
  if (ps == nullptr) return false;
  auto it = state.params.find(ps->param_id);
  if (it == state.params.end()) {
    // mirrored but unbounded: the attestor must not diverge from FCS state
    // for parameters outside the spec
    ParamEntry entry;
    entry.value = ps->param_value;
    entry.default_value = ps->param_value;
    entry.declared = false;
    state.params[ps->param_id] = entry;
    return true;
  }
  it->second.value = ps->param_value;
  return true;
}

}  // namespace mavguard
