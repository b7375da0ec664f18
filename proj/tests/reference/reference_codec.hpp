// Independent reference encoder used as the oracle for the frame codec.
// Written against the MAVLink v2 wire description and the common-dialect
// message tables, deliberately sharing no serialization code with the
// implementation under test: bit-serial CRC, push_back payload building,
// and crc_extra derived from the dialect seed rule instead of pinned.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mavguard/mavlink.hpp"

namespace refcodec {

// CRC-16/MCRF4XX, bit-serial reflected form (poly 0x8408, init 0xFFFF).
std::uint16_t crc_bitwise(std::span<const std::uint8_t> data,
                          std::uint16_t seed = 0xFFFF);

// Base (non-extension) fields in wire order, as the dialect declares them.
struct SeedField {
  const char* type;  // "uint8_t", "float", "char", ...
  const char* name;
  int array_len;     // 0 = scalar
};

struct SeedMessage {
  std::uint32_t id;
  const char* name;
  std::vector<SeedField> base_fields;
};

const std::vector<SeedMessage>& seed_messages();

// Dialect rule: x25-accumulate "NAME " then "type name " per base field in
// wire order (array length byte appended for arrays); fold to one byte.
std::uint8_t derive_crc_extra(const SeedMessage& m);

std::vector<std::uint8_t> encode(const mavguard::mav::MavMessage& msg,
                                 std::uint8_t seq, std::uint8_t sysid,
                                 std::uint8_t compid);

}  // namespace refcodec
