#include "rvcim/golden.hpp"

#include <fmt/format.h>

#include "rvcim/error.hpp"

namespace rvcim::kws {

using model::LayerKind;

void BitFm::set(uint32_t r, uint32_t c, bool v) {
  uint32_t& w = words[size_t{r} * row_words() + c / 32];
  const uint32_t m = 1u << (c % 32);
  w = v ? (w | m) : (w & ~m);
}

ModelWeights zero_weights(const model::ModelGraph& m) {
  ModelWeights out;
  for (size_t i : model::conv_layers(m)) {
    const auto& l = m.layers[i];
    out.push_back({l.out_channels, l.kernel, l.in_channels,
                   std::vector<int8_t>(size_t{l.out_channels} * l.kernel * l.in_channels, 0)});
  }
  return out;
}

ModelWeights random_weights(const model::ModelGraph& m, std::mt19937_64& rng, double density) {
  ModelWeights out = zero_weights(m);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& cw : out)
    for (auto& v : cw.w) v = u(rng) < density ? static_cast<int8_t>((rng() & 1) ? 1 : -1) : 0;
  return out;
}

std::vector<int16_t> random_frame(uint32_t samples, std::mt19937_64& rng) {
  std::vector<int16_t> x(samples);
  for (auto& v : x) v = static_cast<int16_t>(static_cast<uint16_t>(rng()));
  return x;
}

std::vector<int32_t> highpass(const std::vector<int16_t>& x, int32_t alpha) {
  std::vector<int32_t> y(x.size());
  int64_t prev = 0;
  for (size_t n = 0; n < x.size(); ++n) {
    const int64_t p = alpha * prev;
    y[n] = static_cast<int32_t>(x[n] - (p >> 15));
    prev = x[n];
  }
  return y;
}

BitFm preprocess(const std::vector<int16_t>& x, const model::PreprocParams& p) {
  const auto y = highpass(x, p.hp_alpha);
  BitFm fm(static_cast<uint32_t>(x.size() / model::kFrameChannels), model::kFrameChannels);
  for (uint32_t r = 0; r < fm.rows; ++r) {
    for (uint32_t c = 0; c < model::kFrameChannels; ++c) {
      const int64_t v = y[size_t{r} * model::kFrameChannels + c];
      const int64_t z = ((v * p.bn_scale[c]) >> 15) + p.bn_shift[c];
      fm.set(r, c, z > p.quant_threshold);
    }
  }
  return fm;
}

BitFm conv1d(const BitFm& in, const ConvWeights& w, uint32_t stride) {
  if (w.in_channels != in.channels) throw Error("conv1d: channel mismatch");
  const uint32_t rows = model::conv_output_rows(in.rows, stride);
  const int64_t pad = (w.kernel - 1) / 2;
  BitFm out(rows, w.out_channels);
  for (uint32_t t = 0; t < rows; ++t) {
    for (uint32_t co = 0; co < w.out_channels; ++co) {
      int32_t sum = 0;
      for (uint32_t k = 0; k < w.kernel; ++k) {
        const int64_t r = int64_t{t} * stride - pad + k;
        if (r < 0 || r >= in.rows) continue;
        for (uint32_t ci = 0; ci < w.in_channels; ++ci)
          if (in.get(static_cast<uint32_t>(r), ci)) sum += w.at(co, k, ci);
      }
      out.set(t, co, sum > 0);
    }
  }
  return out;
}

BitFm maxpool(const BitFm& in, uint32_t width, uint32_t stride) {
  const uint32_t rows = model::pool_output_rows(in.rows, width, stride);
  BitFm out(rows, in.channels);
  for (uint32_t t = 0; t < rows; ++t)
    for (uint32_t c = 0; c < in.channels; ++c) {
      bool v = false;
      for (uint32_t i = 0; i < width; ++i) v = v || in.get(t * stride + i, c);
      out.set(t, c, v);
    }
  return out;
}

std::vector<uint32_t> gap_scores(const BitFm& fm, uint32_t n_classes) {
  std::vector<uint32_t> s(n_classes, 0);
  for (uint32_t c = 0; c < n_classes; ++c)
    for (uint32_t r = 0; r < fm.rows; ++r) s[c] += fm.get(r, c);
  return s;
}

uint32_t argmax(const std::vector<uint32_t>& scores) {
  uint32_t best = 0;
  for (uint32_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return best;
}

GoldenResult forward(const model::ModelGraph& m, const ModelWeights& weights, const std::vector<int16_t>& frame) {
  if (frame.size() != m.input_length) {
    throw Error(fmt::format("frame has {} samples, model expects {}", frame.size(), m.input_length));
  }
  GoldenResult res;
  BitFm fm = preprocess(frame, m.preprocess);
  size_t conv_index = 0;
  for (const auto& l : m.layers) {
    switch (l.kind) {
      case LayerKind::Conv1d: fm = conv1d(fm, weights.at(conv_index++), l.stride); break;
      case LayerKind::MaxPool: fm = maxpool(fm, l.pool_width, l.stride); break;
      case LayerKind::WeightUpdate: break;
      case LayerKind::GlobalAvgPool:
        res.scores = gap_scores(fm, l.out_channels);
        res.predicted = argmax(res.scores);
        break;
    }
  }
  res.final_fm = std::move(fm);
  return res;
}

}  // namespace rvcim::kws
