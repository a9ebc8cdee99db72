#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

namespace rvcim::cim {

// Packed ternary format in weight SRAM: 2 bits per weight, codes
// 00 = 0, 01 = +1, 10 = -1, 11 = invalid. A 32-weight segment occupies two
// words; weight i sits at bits [2(i%16)+1 : 2(i%16)] of word i/16.
using PackedSegment = std::array<uint32_t, 2>;

PackedSegment pack_segment(std::span<const int8_t> weights);  // exactly 32 values

// Returns the index (0 or 1) of the first word holding a 0b11 code.
std::optional<unsigned> find_invalid_code(const PackedSegment& packed);
// Precondition: find_invalid_code(packed) is empty.
std::array<int8_t, 32> unpack_segment(const PackedSegment& packed);

}  // namespace rvcim::cim
