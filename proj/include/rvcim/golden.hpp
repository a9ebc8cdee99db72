// golden.hpp: pure-software reference for the keyword-spotting network.
// Nothing here touches the ISA, the macro model or the lowering pass.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rvcim/model.hpp"

namespace rvcim::kws {

// Binary feature map, row-major, ceil(channels / 32) words per row with
// channel c of a row at bit c % 32 of word c / 32.
struct BitFm {
  uint32_t rows = 0;
  uint32_t channels = 0;
  std::vector<uint32_t> words;

  BitFm() = default;
  BitFm(uint32_t r, uint32_t c) : rows(r), channels(c), words(size_t{r} * model::words_for(c), 0) {}
  uint32_t row_words() const { return model::words_for(channels); }
  bool get(uint32_t r, uint32_t c) const { return (words[size_t{r} * row_words() + c / 32] >> (c % 32)) & 1; }
  void set(uint32_t r, uint32_t c, bool v);
  friend bool operator==(const BitFm&, const BitFm&) = default;
};

// Ternary weights of one conv layer, index (co * kernel + k) * in_channels + ci.
struct ConvWeights {
  uint32_t out_channels = 0;
  uint32_t kernel = 0;
  uint32_t in_channels = 0;
  std::vector<int8_t> w;
  int8_t at(uint32_t co, uint32_t k, uint32_t ci) const { return w[(size_t{co} * kernel + k) * in_channels + ci]; }
};

// One entry per Conv1d layer, in model order.
using ModelWeights = std::vector<ConvWeights>;

ModelWeights zero_weights(const model::ModelGraph& resolved);
// Each weight is nonzero with probability `density`, sign uniform.
ModelWeights random_weights(const model::ModelGraph& resolved, std::mt19937_64& rng, double density = 0.5);
std::vector<int16_t> random_frame(uint32_t samples, std::mt19937_64& rng);

// y[n] = x[n] - ((alpha * x[n-1]) >> 15), x[-1] = 0.
std::vector<int32_t> highpass(const std::vector<int16_t>& x, int32_t alpha_q15);
// Channel c of row r is sample 32r + c after filtering; it is 1 iff
// ((y * bn_scale[c]) >> 15) + bn_shift[c] > quant_threshold.
BitFm preprocess(const std::vector<int16_t>& x, const model::PreprocParams& p);

// Same padding: row t sees input rows t*stride - (K-1)/2 + k, zero outside.
// An output bit is 1 iff the ternary dot product is > 0.
BitFm conv1d(const BitFm& in, const ConvWeights& w, uint32_t stride);
BitFm maxpool(const BitFm& in, uint32_t width, uint32_t stride);

// Popcount of each of the first n_classes channels over all rows.
std::vector<uint32_t> gap_scores(const BitFm& fm, uint32_t n_classes);
// Lowest index wins ties.
uint32_t argmax(const std::vector<uint32_t>& scores);

struct GoldenResult {
  BitFm final_fm;  // input of global average pooling (or the last layer's output)
  std::vector<uint32_t> scores;
  uint32_t predicted = 0;
};

GoldenResult forward(const model::ModelGraph& resolved, const ModelWeights& weights, const std::vector<int16_t>& frame);

}  // namespace rvcim::kws
