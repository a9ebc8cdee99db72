#include "rvcim/packing.hpp"

#include "rvcim/error.hpp"

namespace rvcim::cim {

PackedSegment pack_segment(std::span<const int8_t> weights) {
  if (weights.size() != 32) throw BoundsError("a packed segment holds exactly 32 weights");
  PackedSegment out{0, 0};
  for (unsigned i = 0; i < 32; ++i) {
    uint32_t code = 0;
    switch (weights[i]) {
      case 0: code = 0b00; break;
      case 1: code = 0b01; break;
      case -1: code = 0b10; break;
      default: throw BoundsError("weight is not ternary");
    }
    out[i / 16] |= code << (2 * (i % 16));
  }
  return out;
}

std::optional<unsigned> find_invalid_code(const PackedSegment& packed) {
  for (unsigned w = 0; w < 2; ++w) {
    // A 0b11 code has both bits of some pair set.
    if (packed[w] & (packed[w] >> 1) & 0x55555555u) return w;
  }
  return std::nullopt;
}

std::array<int8_t, 32> unpack_segment(const PackedSegment& packed) {
  std::array<int8_t, 32> out{};
  for (unsigned i = 0; i < 32; ++i) {
    const uint32_t code = (packed[i / 16] >> (2 * (i % 16))) & 0b11;
    out[i] = code == 0b01 ? 1 : code == 0b10 ? -1 : 0;
  }
  return out;
}

}  // namespace rvcim::cim
