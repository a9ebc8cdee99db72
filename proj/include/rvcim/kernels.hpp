// kernels.hpp: RV32I code generators for the high-precision pre- and
// post-processing that runs on the core.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rvcim/model.hpp"
#include "rvcim/schedule.hpp"

namespace rvcim::kernels {

// A binary feature map resident in FM SRAM. Addresses are FM word indices;
// row r, word j lives at base + r * stride + off + j.
struct FmDesc {
  uint32_t base = 0;
  uint32_t stride = 0;
  uint32_t off = 0;
  uint32_t rows = 0;
  uint32_t channels = 0;
  uint32_t words() const { return model::words_for(channels); }
  uint32_t addr(uint32_t r, uint32_t j) const { return base + r * stride + off + j; }
  uint32_t span_words() const { return rows ? (rows - 1) * stride + off + words() : 0; }
};

uint32_t fm_byte_addr(uint32_t word);

// Canonical signed-digit expansion: value == sum(sign << shift).
std::vector<std::pair<int, int>> csd(uint32_t value);

// The per-channel affine and binarization folded into one comparison on the
// filtered sample y: Const gives a fixed bit, Ge tests y >= value, Lt tests
// y < value.
struct FoldedThreshold {
  enum class Kind : uint8_t { Const, Ge, Lt };
  Kind kind = Kind::Const;
  int32_t value = 0;
  bool bit = false;  // Const only
};

FoldedThreshold fold_threshold(int32_t bn_scale, int32_t bn_shift, int32_t quant_threshold);
bool apply_threshold(const FoldedThreshold& t, int32_t y);

struct PreprocLayout {
  uint32_t audio_addr = 0;  // byte address of the PCM samples in data memory
  uint32_t table_addr = 0;  // byte address of a 32-word threshold table
  uint32_t out_word = 0;    // FM word of row 0; rows are consecutive words
  uint32_t rows = 0;
};

// One loop iteration per 32-sample row, channels unrolled.
void emit_preprocess(sched::Emitter& e, const model::PreprocParams& p, const PreprocLayout& l);

struct GapLayout {
  FmDesc fm;
  uint32_t classes = 0;
  uint32_t scores_addr = 0;  // byte address, one word per class
  uint32_t class_addr = 0;   // byte address of the predicted class
};

// Branch-free popcount per class followed by a branch-free argmax.
void emit_gap(sched::Emitter& e, const GapLayout& l);

}  // namespace rvcim::kernels
