#pragma once

#include <cstdint>

namespace mvr {

extern const std::int8_t kTriTable[256][16];
extern const std::uint8_t kEdgeCorners[12][2];
extern const std::uint8_t kCornerOffsets[8][3];

}  // namespace mvr
