// MAVLink v2 frame codec for the message subset the gateway and attestor
// understand. Encoding is canonical (trailing-zero payload truncation,
// little-endian fields, CRC-16/MCRF4XX with per-message crc_extra);
// decoding resynchronizes on the 0xFD magic after junk or checksum errors.
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mavguard::mav {

inline constexpr std::uint8_t kMagicV2 = 0xFD;
inline constexpr std::size_t kHeaderLen = 10;
inline constexpr std::size_t kChecksumLen = 2;
inline constexpr std::size_t kMaxFrameLen = kHeaderLen + 255 + kChecksumLen;

enum class MsgId : std::uint32_t {
  Heartbeat = 0,
  ParamValue = 22,
  ParamSet = 23,
  GlobalPositionInt = 33,
  MissionCount = 44,
  MissionAck = 47,
  MissionItemInt = 73,
  CommandLong = 76,
  CommandAck = 77,
  StatusText = 253,
};

// HEARTBEAT.base_mode flag MAV_MODE_FLAG_SAFETY_ARMED
inline constexpr std::uint8_t kBaseModeArmed = 0x80;
// MAV_CMD_DO_PARACHUTE and the PARACHUTE_RELEASE action in param1
inline constexpr std::uint16_t kCmdDoParachute = 208;
inline constexpr float kParachuteRelease = 2.0f;
// MAV_RESULT values used in COMMAND_ACK
inline constexpr std::uint8_t kResultAccepted = 0;
inline constexpr std::uint8_t kResultDenied = 2;

struct Heartbeat {
  std::uint32_t custom_mode = 0;
  std::uint8_t type = 0;
  std::uint8_t autopilot = 0;
  std::uint8_t base_mode = 0;
  std::uint8_t system_status = 0;
  std::uint8_t mavlink_version = 3;
  bool operator==(const Heartbeat&) const = default;
};

struct ParamValue {
  float param_value = 0.0f;
  std::uint16_t param_count = 0;
  std::uint16_t param_index = 0;
  std::string param_id;  // at most 16 chars, zero padded on the wire
  std::uint8_t param_type = 9;
  bool operator==(const ParamValue&) const = default;
};

struct ParamSet {
  float param_value = 0.0f;
  std::uint8_t target_system = 1;
  std::uint8_t target_component = 1;
  std::string param_id;
  std::uint8_t param_type = 9;
  bool operator==(const ParamSet&) const = default;
};

struct GlobalPositionInt {
  std::uint32_t time_boot_ms = 0;
  std::int32_t lat = 0;
  std::int32_t lon = 0;
  std::int32_t alt = 0;           // mm above MSL
  std::int32_t relative_alt = 0;  // mm above home
  std::int16_t vx = 0;            // cm/s
  std::int16_t vy = 0;
  std::int16_t vz = 0;            // cm/s, positive down
  std::uint16_t hdg = 0;
  bool operator==(const GlobalPositionInt&) const = default;
};

struct MissionCount {
  std::uint16_t count = 0;
  std::uint8_t target_system = 1;
  std::uint8_t target_component = 1;
  std::uint8_t mission_type = 0;
  bool operator==(const MissionCount&) const = default;
};

struct MissionAck {
  std::uint8_t target_system = 0;
  std::uint8_t target_component = 0;
  std::uint8_t type = 0;  // MAV_MISSION_RESULT
  std::uint8_t mission_type = 0;
  bool operator==(const MissionAck&) const = default;
};

struct MissionItemInt {
  float param1 = 0.0f;
  float param2 = 0.0f;
  float param3 = 0.0f;
  float param4 = 0.0f;
  std::int32_t x = 0;  // lat * 1e7
  std::int32_t y = 0;  // lon * 1e7
  float z = 0.0f;      // metres
  std::uint16_t seq = 0;
  std::uint16_t command = 16;  // MAV_CMD_NAV_WAYPOINT
  std::uint8_t target_system = 1;
  std::uint8_t target_component = 1;
  std::uint8_t frame = 6;  // MAV_FRAME_GLOBAL_RELATIVE_ALT_INT
  std::uint8_t current = 0;
  std::uint8_t autocontinue = 1;
  std::uint8_t mission_type = 0;
  bool operator==(const MissionItemInt&) const = default;
};

struct CommandLong {
  float param1 = 0.0f;
  float param2 = 0.0f;
  float param3 = 0.0f;
  float param4 = 0.0f;
  float param5 = 0.0f;
  float param6 = 0.0f;
  float param7 = 0.0f;
  std::uint16_t command = 0;
  std::uint8_t target_system = 1;
  std::uint8_t target_component = 1;
  std::uint8_t confirmation = 0;
  bool operator==(const CommandLong&) const = default;
};

struct CommandAck {
  std::uint16_t command = 0;
  std::uint8_t result = 0;
  bool operator==(const CommandAck&) const = default;
};

struct StatusText {
  std::uint8_t severity = 6;
  std::string text;  // at most 50 chars
  bool operator==(const StatusText&) const = default;
};

using MavMessage = std::variant<Heartbeat, ParamValue, ParamSet, GlobalPositionInt,
                                MissionCount, MissionAck, MissionItemInt, CommandLong,
                                CommandAck, StatusText>;

MsgId message_id(const MavMessage& msg);
std::string_view message_name(MsgId id);

// Field metadata consumed by the refinement DSL for validation and typing.
enum class FieldKind : std::uint8_t { U8, U16, U32, I16, I32, F32, CharArray };

struct FieldInfo {
  std::string_view name;
  FieldKind kind;
};

struct MessageInfo {
  MsgId id;
  std::string_view name;
  std::span<const FieldInfo> fields;
};

const MessageInfo* message_info(MsgId id);
const MessageInfo* message_info(std::string_view name);
const FieldInfo* field_info(const MessageInfo& info, std::string_view field);

// Numeric fields widen to double; char-array fields read as strings.
using FieldValue = std::variant<double, std::string>;
std::optional<FieldValue> message_field(const MavMessage& msg, std::string_view field);

// CRC-16/MCRF4XX as required by MAVLink framing.
std::uint16_t crc16_mcrf4xx(std::span<const std::uint8_t> data, std::uint16_t seed = 0xFFFF);
std::uint16_t crc16_mcrf4xx_accumulate(std::uint8_t byte, std::uint16_t crc);
std::uint8_t crc_extra(MsgId id);

std::vector<std::uint8_t> frame_encode(const MavMessage& msg, std::uint8_t seq,
                                       std::uint8_t sysid, std::uint8_t compid);

enum class DecodeStatus : std::uint8_t {
  Ok,
  NeedMoreData,  // nothing consumed
  BadChecksum,   // frame discarded, consumed reported
  UnknownMsgId,  // frame skipped whole, consumed reported
  Junk,          // bytes before the next 0xFD magic, consumed reported
};

struct DecodeResult {
  DecodeStatus status = DecodeStatus::NeedMoreData;
  std::size_t consumed = 0;
  std::uint32_t msgid = 0;  // valid for Ok and UnknownMsgId
  std::optional<MavMessage> message;
};

// Decodes the first frame in buf. On BadChecksum only the magic byte is
// consumed so the scan can resume at the next 0xFD.
DecodeResult frame_decode(std::span<const std::uint8_t> buf);

// Incremental wrapper for byte streams and datagram reassembly.
//
// Unknown-msgid frames cannot be checksum-verified (their crc_extra is not
// known), so before committing to one the decoder scans its claimed span for
// a checksum-valid supported frame; if one is found the candidate was junk
// and only the bytes before the real frame are discarded. Supported frames
// are therefore never swallowed by junk that mimics a header.
class StreamDecoder {
 public:
  struct Item {
    DecodeStatus status = DecodeStatus::Junk;
    std::uint32_t msgid = 0;
    std::size_t consumed = 0;
    std::optional<MavMessage> message;
    std::vector<std::uint8_t> frame;  // exact frame bytes for Ok / UnknownMsgId
  };

  void feed(std::span<const std::uint8_t> bytes);
  // Next completed item, or nullopt when the buffered bytes need more data.
  std::optional<Item> next();
  // Marks end of input: buffered bytes that would otherwise wait for more
  // data drain as junk. For file replay and tests; live streams never finish.
  void finish() { finished_ = true; }
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  bool finished_ = false;
  void compact();
};

}  // namespace mavguard::mav
