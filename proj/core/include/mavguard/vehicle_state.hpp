// Trusted-side mirror of UAV state. Parameters enter only through declared
// defaults or attestor-accepted PARAM_SET commands; armed/mode/altitude/climb
// come from observed downlink telemetry.
#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mavguard/mavlink.hpp"
#include "mavguard/spec_dsl.hpp"

namespace mavguard {

using MonotonicClock = std::chrono::steady_clock;
using TimePoint = MonotonicClock::time_point;

// Parameter values cross the wire as 32-bit floats while bounds are spec-text
// doubles; comparing at float precision keeps a bound that is not exactly
// float-representable from rejecting its own rounded value.
inline bool value_within_static_bounds(double v, const std::optional<double>& min,
                                       const std::optional<double>& max) {
  const auto f = [](double x) { return static_cast<double>(static_cast<float>(x)); };
  if (min && v < f(*min)) return false;
  if (max && v > f(*max)) return false;
  return true;
}

struct ParamEntry {
  double value = 0.0;
  double default_value = 0.0;
  std::optional<double> min;
  std::optional<double> max;
  bool declared = true;  // false for mirrored parameters outside the spec

  bool within_bounds(double v) const {
    return value_within_static_bounds(v, min, max);
  }
};

// ArduPilot Copter custom_mode numbers (STABILIZE=0, ACRO=1, FLIP=14, ...).
std::optional<std::uint32_t> flight_mode_number(std::string_view name);
std::string_view flight_mode_name(std::uint32_t number);

inline constexpr std::uint32_t kModeStabilize = 0;
inline constexpr std::uint32_t kModeAcro = 1;
inline constexpr std::uint32_t kModeFlip = 14;

struct VehicleState {
  std::map<std::string, ParamEntry> params;
  bool armed = false;
  std::uint32_t flight_mode = kModeStabilize;
  double altitude_m = 0.0;
  double climb_rate_mps = 0.0;  // positive up
  TimePoint last_update{};
  bool telemetry_seen = false;

  const ParamEntry* find_param(std::string_view name) const;
};

VehicleState state_init(const dsl::ProtocolSpec& spec);

// Downlink observation: HEARTBEAT sets armed/mode, GLOBAL_POSITION_INT sets
// altitude (relative_alt mm) and climb rate (-vz cm/s); everything else is
// ignored.
void apply_telemetry(VehicleState& state, const mav::MavMessage& msg, TimePoint now);

// Accepted-command mirroring: PARAM_SET updates the named entry. Undeclared
// names are stored unbounded. Returns false when the message is not a
// state-bearing command.
bool apply_accepted_command(VehicleState& state, const mav::MavMessage& msg);

}  // namespace mavguard
