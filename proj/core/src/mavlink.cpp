#include "mavguard/mavlink.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace mavguard::mav {

namespace {

// little-endian primitives over a fixed payload buffer
void wr_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void wr_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>((v >> 8) & 0xFF);
  p[2] = static_cast<std::uint8_t>((v >> 16) & 0xFF);
  p[3] = static_cast<std::uint8_t>((v >> 24) & 0xFF);
}

void wr_f32(std::uint8_t* p, float v) { wr_u32(p, std::bit_cast<std::uint32_t>(v)); }

void wr_str(std::uint8_t* p, const std::string& s, std::size_t n) {
  std::size_t len = std::min(s.size(), n);
  std::memcpy(p, s.data(), len);
  std::memset(p + len, 0, n - len);
}

std::uint16_t rd_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t rd_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::int16_t rd_i16(const std::uint8_t* p) { return static_cast<std::int16_t>(rd_u16(p)); }
std::int32_t rd_i32(const std::uint8_t* p) { return static_cast<std::int32_t>(rd_u32(p)); }
float rd_f32(const std::uint8_t* p) { return std::bit_cast<float>(rd_u32(p)); }

std::string rd_str(const std::uint8_t* p, std::size_t n) {
  std::size_t len = 0;
  while (len < n && p[len] != 0) ++len;
  return std::string(reinterpret_cast<const char*>(p), len);
}

struct MsgDef {
  MsgId id;
  std::string_view name;
  std::uint8_t payload_len;  // known wire length incl. supported extensions
  std::uint8_t extra;        // crc_extra over base fields
};

// crc_extra constants from the common dialect; tests re-derive them from the
// dialect seed rule.
constexpr MsgDef kDefs[] = {
    {MsgId::Heartbeat, "HEARTBEAT", 9, 50},
    {MsgId::ParamValue, "PARAM_VALUE", 25, 220},
    {MsgId::ParamSet, "PARAM_SET", 23, 168},
    {MsgId::GlobalPositionInt, "GLOBAL_POSITION_INT", 28, 104},
    {MsgId::MissionCount, "MISSION_COUNT", 5, 221},
    {MsgId::MissionAck, "MISSION_ACK", 4, 153},
    {MsgId::MissionItemInt, "MISSION_ITEM_INT", 38, 38},
    {MsgId::CommandLong, "COMMAND_LONG", 33, 152},
    {MsgId::CommandAck, "COMMAND_ACK", 3, 143},
    {MsgId::StatusText, "STATUSTEXT", 51, 83},
};

const MsgDef* def_of(MsgId id) {
  for (const auto& d : kDefs) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

std::size_t write_payload(const MavMessage& msg, std::uint8_t* p) {
  if (const auto* m = std::get_if<Heartbeat>(&msg)) {
    wr_u32(p, m->custom_mode);
    p[4] = m->type;
    p[5] = m->autopilot;
    p[6] = m->base_mode;
    p[7] = m->system_status;
    p[8] = m->mavlink_version;
    return 9;
  }
  if (const auto* m = std::get_if<ParamValue>(&msg)) {
    wr_f32(p, m->param_value);
    wr_u16(p + 4, m->param_count);
    wr_u16(p + 6, m->param_index);
    wr_str(p + 8, m->param_id, 16);
    p[24] = m->param_type;
    return 25;
  }
  if (const auto* m = std::get_if<ParamSet>(&msg)) {
    wr_f32(p, m->param_value);
    p[4] = m->target_system;
    p[5] = m->target_component;
    wr_str(p + 6, m->param_id, 16);
    p[22] = m->param_type;
    return 23;
  }
  if (const auto* m = std::get_if<GlobalPositionInt>(&msg)) {
    wr_u32(p, m->time_boot_ms);
    wr_u32(p + 4, static_cast<std::uint32_t>(m->lat));
    wr_u32(p + 8, static_cast<std::uint32_t>(m->lon));
    wr_u32(p + 12, static_cast<std::uint32_t>(m->alt));
    wr_u32(p + 16, static_cast<std::uint32_t>(m->relative_alt));
    wr_u16(p + 20, static_cast<std::uint16_t>(m->vx));
    wr_u16(p + 22, static_cast<std::uint16_t>(m->vy));
    wr_u16(p + 24, static_cast<std::uint16_t>(m->vz));
    wr_u16(p + 26, m->hdg);
    return 28;
  }
  if (const auto* m = std::get_if<MissionCount>(&msg)) {
    wr_u16(p, m->count);
    p[2] = m->target_system;
    p[3] = m->target_component;
    p[4] = m->mission_type;
    return 5;
  }
  if (const auto* m = std::get_if<MissionAck>(&msg)) {
    p[0] = m->target_system;
    p[1] = m->target_component;
    p[2] = m->type;
    p[3] = m->mission_type;
    return 4;
  }
  if (const auto* m = std::get_if<MissionItemInt>(&msg)) {
    wr_f32(p, m->param1);
    wr_f32(p + 4, m->param2);
    wr_f32(p + 8, m->param3);
    wr_f32(p + 12, m->param4);
    wr_u32(p + 16, static_cast<std::uint32_t>(m->x));
    wr_u32(p + 20, static_cast<std::uint32_t>(m->y));
    wr_f32(p + 24, m->z);
    wr_u16(p + 28, m->seq);
    wr_u16(p + 30, m->command);
    p[32] = m->target_system;
    p[33] = m->target_component;
    p[34] = m->frame;
    p[35] = m->current;
    p[36] = m->autocontinue;
    p[37] = m->mission_type;
    return 38;
  }
  if (const auto* m = std::get_if<CommandLong>(&msg)) {
    wr_f32(p, m->param1);
    wr_f32(p + 4, m->param2);
    wr_f32(p + 8, m->param3);
    wr_f32(p + 12, m->param4);
    wr_f32(p + 16, m->param5);
    wr_f32(p + 20, m->param6);
    wr_f32(p + 24, m->param7);
    wr_u16(p + 28, m->command);
    p[30] = m->target_system;
    p[31] = m->target_component;
    p[32] = m->confirmation;
    return 33;
  }
  if (const auto* m = std::get_if<CommandAck>(&msg)) {
    wr_u16(p, m->command);
    p[2] = m->result;
    return 3;
  }
  const auto& m = std::get<StatusText>(msg);
  p[0] = m.severity;
  wr_str(p + 1, m.text, 50);
  return 51;
}

MavMessage read_payload(MsgId id, const std::uint8_t* p) {
  switch (id) {
    case MsgId::Heartbeat: {
      Heartbeat m;
      m.custom_mode = rd_u32(p);
      m.type = p[4];
      m.autopilot = p[5];
      m.base_mode = p[6];
      m.system_status = p[7];
      m.mavlink_version = p[8];
      return m;
    }
    case MsgId::ParamValue: {
      ParamValue m;
      m.param_value = rd_f32(p);
      m.param_count = rd_u16(p + 4);
      m.param_index = rd_u16(p + 6);
      m.param_id = rd_str(p + 8, 16);
      m.param_type = p[24];
      return m;
    }
    case MsgId::ParamSet: {
      ParamSet m;
      m.param_value = rd_f32(p);
      m.target_system = p[4];
      m.target_component = p[5];
      m.param_id = rd_str(p + 6, 16);
      m.param_type = p[22];
      return m;
    }
    case MsgId::GlobalPositionInt: {
      GlobalPositionInt m;
      m.time_boot_ms = rd_u32(p);
      m.lat = rd_i32(p + 4);
      m.lon = rd_i32(p + 8);
      m.alt = rd_i32(p + 12);
      m.relative_alt = rd_i32(p + 16);
      m.vx = rd_i16(p + 20);
      m.vy = rd_i16(p + 22);
      m.vz = rd_i16(p + 24);
      m.hdg = rd_u16(p + 26);
      return m;
    }
    case MsgId::MissionCount: {
      MissionCount m;
      m.count = rd_u16(p);
      m.target_system = p[2];
      m.target_component = p[3];
      m.mission_type = p[4];
      return m;
    }
    case MsgId::MissionAck: {
      MissionAck m;
      m.target_system = p[0];
      m.target_component = p[1];
      m.type = p[2];
      m.mission_type = p[3];
      return m;
    }
    case MsgId::MissionItemInt: {
      MissionItemInt m;
      m.param1 = rd_f32(p);
      m.param2 = rd_f32(p + 4);
      m.param3 = rd_f32(p + 8);
      m.param4 = rd_f32(p + 12);
      m.x = rd_i32(p + 16);
      m.y = rd_i32(p + 20);
      m.z = rd_f32(p + 24);
      m.seq = rd_u16(p + 28);
      m.command = rd_u16(p + 30);
      m.target_system = p[32];
      m.target_component = p[33];
      m.frame = p[34];
      m.current = p[35];
      m.autocontinue = p[36];
      m.mission_type = p[37];
      return m;
    }
    case MsgId::CommandLong: {
      CommandLong m;
      m.param1 = rd_f32(p);
      m.param2 = rd_f32(p + 4);
      m.param3 = rd_f32(p + 8);
      m.param4 = rd_f32(p + 12);
      m.param5 = rd_f32(p + 16);
      m.param6 = rd_f32(p + 20);
      m.param7 = rd_f32(p + 24);
      m.command = rd_u16(p + 28);
      m.target_system = p[30];
      m.target_component = p[31];
      m.confirmation = p[32];
      return m;
    }
    case MsgId::CommandAck: {
      CommandAck m;
      m.command = rd_u16(p);
      m.result = p[2];
      return m;
    }
    default: {
      StatusText m;
      m.severity = p[0];
      m.text = rd_str(p + 1, 50);
      return m;
    }
  }
}

}  // namespace

MsgId message_id(const MavMessage& msg) {
  return std::visit(
      [](const auto& m) -> MsgId {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Heartbeat>) return MsgId::Heartbeat;
        if constexpr (std::is_same_v<T, ParamValue>) return MsgId::ParamValue;
        if constexpr (std::is_same_v<T, ParamSet>) return MsgId::ParamSet;
        if constexpr (std::is_same_v<T, GlobalPositionInt>) return MsgId::GlobalPositionInt;
        if constexpr (std::is_same_v<T, MissionCount>) return MsgId::MissionCount;
        if constexpr (std::is_same_v<T, MissionAck>) return MsgId::MissionAck;
        if constexpr (std::is_same_v<T, MissionItemInt>) return MsgId::MissionItemInt;
        if constexpr (std::is_same_v<T, CommandLong>) return MsgId::CommandLong;
        if constexpr (std::is_same_v<T, CommandAck>) return MsgId::CommandAck;
        if constexpr (std::is_same_v<T, StatusText>) return MsgId::StatusText;
      },
      msg);
}

std::string_view message_name(MsgId id) {
  const MsgDef* d = def_of(id);
  return d ? d->name : std::string_view("UNKNOWN");
}

std::uint16_t crc16_mcrf4xx_accumulate(std::uint8_t byte, std::uint16_t crc) {
  std::uint8_t tmp = byte ^ static_cast<std::uint8_t>(crc & 0xFF);
  tmp ^= static_cast<std::uint8_t>(tmp << 4);
  return static_cast<std::uint16_t>((crc >> 8) ^ (tmp << 8) ^ (tmp << 3) ^ (tmp >> 4));
}

std::uint16_t crc16_mcrf4xx(std::span<const std::uint8_t> data, std::uint16_t seed) {
  std::uint16_t crc = seed;
  for (std::uint8_t b : data) crc = crc16_mcrf4xx_accumulate(b, crc);
  return crc;
}

std::uint8_t crc_extra(MsgId id) {
  const MsgDef* d = def_of(id);
  return d ? d->extra : 0;
}

std::vector<std::uint8_t> frame_encode(const MavMessage& msg, std::uint8_t seq,
                                       std::uint8_t sysid, std::uint8_t compid) {
  std::uint8_t payload[255] = {0};
  std::size_t full_len = write_payload(msg, payload);
  std::size_t len = full_len;
  while (len > 1 && payload[len - 1] == 0) --len;

  const std::uint32_t id = static_cast<std::uint32_t>(message_id(msg));
  std::vector<std::uint8_t> frame(kHeaderLen + len + kChecksumLen);
  frame[0] = kMagicV2;
  frame[1] = static_cast<std::uint8_t>(len);
  frame[2] = 0;  // incompat_flags (signing unsupported)
  frame[3] = 0;  // compat_flags
  frame[4] = seq;
  frame[5] = sysid;
  frame[6] = compid;
  frame[7] = static_cast<std::uint8_t>(id & 0xFF);
  frame[8] = static_cast<std::uint8_t>((id >> 8) & 0xFF);
  frame[9] = static_cast<std::uint8_t>((id >> 16) & 0xFF);
  std::memcpy(frame.data() + kHeaderLen, payload, len);

  std::uint16_t crc =
      crc16_mcrf4xx(std::span(frame.data() + 1, kHeaderLen - 1 + len));
  crc = crc16_mcrf4xx_accumulate(crc_extra(message_id(msg)), crc);
  frame[kHeaderLen + len] = static_cast<std::uint8_t>(crc & 0xFF);
  frame[kHeaderLen + len + 1] = static_cast<std::uint8_t>(crc >> 8);
  return frame;
}

DecodeResult frame_decode(std::span<const std::uint8_t> buf) {
  DecodeResult res;
  if (buf.empty()) return res;  // NeedMoreData

  if (buf[0] != kMagicV2) {
    std::size_t skip = 1;
    while (skip < buf.size() && buf[skip] != kMagicV2) ++skip;
    res.status = DecodeStatus::Junk;
    res.consumed = skip;
    return res;
  }

  if (buf.size() < kHeaderLen) return res;  // NeedMoreData
  const std::uint8_t payload_len = buf[1];
  const std::size_t total = kHeaderLen + payload_len + kChecksumLen;
  if (buf.size() < total) return res;  // NeedMoreData

  const std::uint8_t incompat = buf[2];
  if (incompat != 0) {
    // signing (bit 0) and any future incompat flags unsupported; skip the
    // magic and let the scan resume
    res.status = DecodeStatus::Junk;
    res.consumed = 1;
    return res;
  }

  const std::uint32_t msgid = static_cast<std::uint32_t>(buf[7]) |
                              (static_cast<std::uint32_t>(buf[8]) << 8) |
                              (static_cast<std::uint32_t>(buf[9]) << 16);
  res.msgid = msgid;

  const MsgDef* def = def_of(static_cast<MsgId>(msgid));
  if (def == nullptr) {
    // crc_extra unknowable; framing alone validates. Forwarded opaquely.
    res.status = DecodeStatus::UnknownMsgId;
    res.consumed = total;
    return res;
  }

  std::uint16_t crc = crc16_mcrf4xx(buf.subspan(1, kHeaderLen - 1 + payload_len));
  crc = crc16_mcrf4xx_accumulate(def->extra, crc);
  const std::uint16_t stored = rd_u16(buf.data() + kHeaderLen + payload_len);
  if (crc != stored) {
    // consume only the magic: a junk byte that mimics a header must not be
    // allowed to swallow the real frame that may start inside it
    res.status = DecodeStatus::BadChecksum;
    res.consumed = 1;
    return res;
  }

  std::uint8_t payload[255] = {0};
  std::memcpy(payload, buf.data() + kHeaderLen,
              std::min<std::size_t>(payload_len, 255));
  res.status = DecodeStatus::Ok;
  res.consumed = total;
  res.message = read_payload(def->id, payload);
  return res;
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void StreamDecoder::compact() {
  if (pos_ == 0) return;
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
  pos_ = 0;
}

namespace {

enum class ScanHit : std::uint8_t { None, ValidAt, Pending };

// First offset in [lo, hi) holding a complete, checksum-valid supported
// frame. Pending = a known-msgid header that still awaits payload bytes.
ScanHit scan_supported(std::span<const std::uint8_t> view, std::size_t lo,
                       std::size_t hi, std::size_t& at) {
  for (std::size_t i = lo; i < hi && i < view.size(); ++i) {
    if (view[i] != kMagicV2) continue;
    auto sub = view.subspan(i);
    if (sub.size() < kHeaderLen) {
      const std::uint32_t msgid =
          sub.size() > 9 ? (static_cast<std::uint32_t>(sub[7]) |
                            (static_cast<std::uint32_t>(sub[8]) << 8) |
                            (static_cast<std::uint32_t>(sub[9]) << 16))
                         : 0;
      if (sub.size() <= 9 || def_of(static_cast<MsgId>(msgid)) != nullptr) {
        at = i;
        return ScanHit::Pending;
      }
      continue;
    }
    const std::uint32_t msgid = static_cast<std::uint32_t>(sub[7]) |
                                (static_cast<std::uint32_t>(sub[8]) << 8) |
                                (static_cast<std::uint32_t>(sub[9]) << 16);
    const MsgDef* def = def_of(static_cast<MsgId>(msgid));
    if (def == nullptr || sub[2] != 0) continue;
    const std::size_t total = kHeaderLen + sub[1] + kChecksumLen;
    if (sub.size() < total) {
      at = i;
      return ScanHit::Pending;
    }
    std::uint16_t crc = crc16_mcrf4xx(sub.subspan(1, kHeaderLen - 1 + sub[1]));
    crc = crc16_mcrf4xx_accumulate(def->extra, crc);
    if (crc == rd_u16(sub.data() + kHeaderLen + sub[1])) {
      at = i;
      return ScanHit::ValidAt;
    }
  }
  return ScanHit::None;
}

}  // namespace

std::optional<StreamDecoder::Item> StreamDecoder::next() {
  while (true) {
    std::span<const std::uint8_t> view(buf_.data() + pos_, buf_.size() - pos_);
    if (view.empty()) {
      compact();
      return std::nullopt;
    }

    auto junk = [&](std::size_t n) {
      Item item;
      item.status = DecodeStatus::Junk;
      item.consumed = n;
      pos_ += n;
      compact();
      return item;
    };
    auto need_more = [&]() -> std::optional<Item> {
      if (finished_) return junk(1);
      compact();
      return std::nullopt;
    };

    DecodeResult res = frame_decode(view);
    switch (res.status) {
      case DecodeStatus::NeedMoreData:
        // a complete unknown-msgid candidate is reported as UnknownMsgId by
        // frame_decode; an incomplete one lands here and may hide a real
        // frame inside the bytes we already have
        if (view[0] == kMagicV2 && view.size() >= kHeaderLen) {
          std::size_t at = 0;
          const std::uint32_t msgid = static_cast<std::uint32_t>(view[7]) |
                                      (static_cast<std::uint32_t>(view[8]) << 8) |
                                      (static_cast<std::uint32_t>(view[9]) << 16);
          if (def_of(static_cast<MsgId>(msgid)) == nullptr &&
              scan_supported(view, 1, view.size(), at) == ScanHit::ValidAt) {
            return junk(at);
          }
        }
        return need_more();
      case DecodeStatus::Junk: {
        Item item = junk(res.consumed);
        return item;
      }
      case DecodeStatus::BadChecksum: {
        Item item;
        item.status = res.status;
        item.msgid = res.msgid;
        item.consumed = res.consumed;
        pos_ += res.consumed;
        compact();
        return item;
      }
      case DecodeStatus::UnknownMsgId: {
        // junk can mimic an unknown-msgid header; only commit to the span
        // if no checksum-valid supported frame starts inside it
        std::size_t at = 0;
        ScanHit hit = scan_supported(view, 1, res.consumed, at);
        if (hit == ScanHit::ValidAt) return junk(at);
        if (hit == ScanHit::Pending && !finished_) {
          compact();
          return std::nullopt;
        }
        Item item;
        item.status = res.status;
        item.msgid = res.msgid;
        item.consumed = res.consumed;
        item.frame.assign(view.begin(),
                          view.begin() + static_cast<std::ptrdiff_t>(res.consumed));
        pos_ += res.consumed;
        compact();
        return item;
      }
      case DecodeStatus::Ok: {
        Item item;
        item.status = res.status;
        item.msgid = res.msgid;
        item.consumed = res.consumed;
        item.message = std::move(res.message);
        item.frame.assign(view.begin(),
                          view.begin() + static_cast<std::ptrdiff_t>(res.consumed));
        pos_ += res.consumed;
        compact();
        return item;
      }
    }
  }
}

// ---- field metadata ----

namespace {

constexpr FieldInfo kHeartbeatFields[] = {
    {"custom_mode", FieldKind::U32}, {"type", FieldKind::U8},
    {"autopilot", FieldKind::U8},    {"base_mode", FieldKind::U8},
    {"system_status", FieldKind::U8}, {"mavlink_version", FieldKind::U8},
};
constexpr FieldInfo kParamValueFields[] = {
    {"param_value", FieldKind::F32}, {"param_count", FieldKind::U16},
    {"param_index", FieldKind::U16}, {"param_id", FieldKind::CharArray},
    {"param_type", FieldKind::U8},
};
constexpr FieldInfo kParamSetFields[] = {
    {"param_value", FieldKind::F32},   {"target_system", FieldKind::U8},
    {"target_component", FieldKind::U8}, {"param_id", FieldKind::CharArray},
    {"param_type", FieldKind::U8},
};
constexpr FieldInfo kGlobalPositionIntFields[] = {
    {"time_boot_ms", FieldKind::U32}, {"lat", FieldKind::I32},
    {"lon", FieldKind::I32},          {"alt", FieldKind::I32},
    {"relative_alt", FieldKind::I32}, {"vx", FieldKind::I16},
    {"vy", FieldKind::I16},           {"vz", FieldKind::I16},
    {"hdg", FieldKind::U16},
};
constexpr FieldInfo kMissionCountFields[] = {
    {"count", FieldKind::U16},
    {"target_system", FieldKind::U8},
    {"target_component", FieldKind::U8},
    {"mission_type", FieldKind::U8},
};
constexpr FieldInfo kMissionAckFields[] = {
    {"target_system", FieldKind::U8},
    {"target_component", FieldKind::U8},
    {"type", FieldKind::U8},
    {"mission_type", FieldKind::U8},
};
constexpr FieldInfo kMissionItemIntFields[] = {
    {"param1", FieldKind::F32},  {"param2", FieldKind::F32},
    {"param3", FieldKind::F32},  {"param4", FieldKind::F32},
    {"x", FieldKind::I32},       {"y", FieldKind::I32},
    {"z", FieldKind::F32},       {"seq", FieldKind::U16},
    {"command", FieldKind::U16}, {"target_system", FieldKind::U8},
    {"target_component", FieldKind::U8}, {"frame", FieldKind::U8},
    {"current", FieldKind::U8},  {"autocontinue", FieldKind::U8},
    {"mission_type", FieldKind::U8},
};
constexpr FieldInfo kCommandLongFields[] = {
    {"param1", FieldKind::F32},  {"param2", FieldKind::F32},
    {"param3", FieldKind::F32},  {"param4", FieldKind::F32},
    {"param5", FieldKind::F32},  {"param6", FieldKind::F32},
    {"param7", FieldKind::F32},  {"command", FieldKind::U16},
    {"target_system", FieldKind::U8}, {"target_component", FieldKind::U8},
    {"confirmation", FieldKind::U8},
};
constexpr FieldInfo kCommandAckFields[] = {
    {"command", FieldKind::U16},
    {"result", FieldKind::U8},
};
constexpr FieldInfo kStatusTextFields[] = {
    {"severity", FieldKind::U8},
    {"text", FieldKind::CharArray},
};

const MessageInfo kInfos[] = {
    {MsgId::Heartbeat, "HEARTBEAT", kHeartbeatFields},
    {MsgId::ParamValue, "PARAM_VALUE", kParamValueFields},
    {MsgId::ParamSet, "PARAM_SET", kParamSetFields},
    {MsgId::GlobalPositionInt, "GLOBAL_POSITION_INT", kGlobalPositionIntFields},
    {MsgId::MissionCount, "MISSION_COUNT", kMissionCountFields},
    {MsgId::MissionAck, "MISSION_ACK", kMissionAckFields},
    {MsgId::MissionItemInt, "MISSION_ITEM_INT", kMissionItemIntFields},
    {MsgId::CommandLong, "COMMAND_LONG", kCommandLongFields},
    {MsgId::CommandAck, "COMMAND_ACK", kCommandAckFields},
    {MsgId::StatusText, "STATUSTEXT", kStatusTextFields},
};

}  // namespace

const MessageInfo* message_info(MsgId id) {
  for (const auto& info : kInfos) {
    if (info.id == id) return &info;
  }
  return nullptr;
}

const MessageInfo* message_info(std::string_view name) {
  for (const auto& info : kInfos) {
    if (info.name == name) return &info;
  }
  return nullptr;
}

const FieldInfo* field_info(const MessageInfo& info, std::string_view field) {
  for (const auto& f : info.fields) {
    if (f.name == field) return &f;
  }
  return nullptr;
}

std::optional<FieldValue> message_field(const MavMessage& msg, std::string_view field) {
  auto n = [](auto v) -> FieldValue { return static_cast<double>(v); };
  if (const auto* m = std::get_if<Heartbeat>(&msg)) {
    if (field == "custom_mode") return n(m->custom_mode);
    if (field == "type") return n(m->type);
    if (field == "autopilot") return n(m->autopilot);
    if (field == "base_mode") return n(m->base_mode);
    if (field == "system_status") return n(m->system_status);
    if (field == "mavlink_version") return n(m->mavlink_version);
  } else if (const auto* m = std::get_if<ParamValue>(&msg)) {
    if (field == "param_value") return n(m->param_value);
    if (field == "param_count") return n(m->param_count);
    if (field == "param_index") return n(m->param_index);
    if (field == "param_id") return FieldValue(m->param_id);
    if (field == "param_type") return n(m->param_type);
  } else if (const auto* m = std::get_if<ParamSet>(&msg)) {
    if (field == "param_value") return n(m->param_value);
    if (field == "target_system") return n(m->target_system);
    if (field == "target_component") return n(m->target_component);
    if (field == "param_id") return FieldValue(m->param_id);
    if (field == "param_type") return n(m->param_type);
  } else if (const auto* m = std::get_if<GlobalPositionInt>(&msg)) {
    if (field == "time_boot_ms") return n(m->time_boot_ms);
    if (field == "lat") return n(m->lat);
    if (field == "lon") return n(m->lon);
    if (field == "alt") return n(m->alt);
    if (field == "relative_alt") return n(m->relative_alt);
    if (field == "vx") return n(m->vx);
    if (field == "vy") return n(m->vy);
    if (field == "vz") return n(m->vz);
    if (field == "hdg") return n(m->hdg);
  } else if (const auto* m = std::get_if<MissionCount>(&msg)) {
    if (field == "count") return n(m->count);
    if (field == "target_system") return n(m->target_system);
    if (field == "target_component") return n(m->target_component);
    if (field == "mission_type") return n(m->mission_type);
  } else if (const auto* m = std::get_if<MissionAck>(&msg)) {
    if (field == "target_system") return n(m->target_system);
    if (field == "target_component") return n(m->target_component);
    if (field == "type") return n(m->type);
    if (field == "mission_type") return n(m->mission_type);
  } else if (const auto* m = std::get_if<MissionItemInt>(&msg)) {
    if (field == "param1") return n(m->param1);
    if (field == "param2") return n(m->param2);
    if (field == "param3") return n(m->param3);
    if (field == "param4") return n(m->param4);
    if (field == "x") return n(m->x);
    if (field == "y") return n(m->y);
    if (field == "z") return n(m->z);
    if (field == "seq") return n(m->seq);
    if (field == "command") return n(m->command);
    if (field == "target_system") return n(m->target_system);
    if (field == "target_component") return n(m->target_component);
    if (field == "frame") return n(m->frame);
    if (field == "current") return n(m->current);
    if (field == "autocontinue") return n(m->autocontinue);
    if (field == "mission_type") return n(m->mission_type);
  } else if (const auto* m = std::get_if<CommandLong>(&msg)) {
    if (field == "param1") return n(m->param1);
    if (field == "param2") return n(m->param2);
    if (field == "param3") return n(m->param3);
    if (field == "param4") return n(m->param4);
    if (field == "param5") return n(m->param5);
    if (field == "param6") return n(m->param6);
    if (field == "param7") return n(m->param7);
    if (field == "command") return n(m->command);
    if (field == "target_system") return n(m->target_system);
    if (field == "target_component") return n(m->target_component);
    if (field == "confirmation") return n(m->confirmation);
  } else if (const auto* m = std::get_if<CommandAck>(&msg)) {
    if (field == "command") return n(m->command);
    if (field == "result") return n(m->result);
  } else if (const auto* m = std::get_if<StatusText>(&msg)) {
    if (field == "severity") return n(m->severity);
    if (field == "text") return FieldValue(m->text);
  }
  return std::nullopt;
}

}  // namespace mavguard::mav
