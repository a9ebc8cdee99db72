#include "rvcim/model.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rvcim/error.hpp"

namespace rvcim::model {
namespace {

LayerKind parse_kind(const std::string& s) {
  if (s == "conv1d" || s == "conv") return LayerKind::Conv1d;
  if (s == "maxpool" || s == "pool") return LayerKind::MaxPool;
  if (s == "weight_update") return LayerKind::WeightUpdate;
  if (s == "global_avg_pool" || s == "gap") return LayerKind::GlobalAvgPool;
  throw ConfigError(fmt::format("unknown layer kind '{}'", s));
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_channel_array(const nlohmann::json& j, const char* key, std::array<int32_t, kFrameChannels>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_number()) {
    out.fill(v.get<int32_t>());
    return;
  }
  const auto list = v.get<std::vector<int32_t>>();
  if (list.size() != kFrameChannels) {
    throw ConfigError(fmt::format("preprocess.{} needs {} entries, got {}", key, kFrameChannels, list.size()));
  }
  std::copy(list.begin(), list.end(), out.begin());
}

}  // namespace

std::string_view kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::WeightUpdate: return "weight_update";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
  }
  return "?";
}

uint32_t conv_output_rows(uint32_t rows, uint32_t stride) { return (rows - 1) / stride + 1; }

uint32_t pool_output_rows(uint32_t rows, uint32_t width, uint32_t stride) { return (rows - width) / stride + 1; }

FmShape preprocess_shape(const ModelGraph& m) { return {m.input_length / kFrameChannels, kFrameChannels}; }

FmShape output_shape(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv1d: return {conv_output_rows(l.input_length, l.stride), l.out_channels};
    case LayerKind::MaxPool: return {pool_output_rows(l.input_length, l.pool_width, l.stride), l.in_channels};
    case LayerKind::WeightUpdate: return {l.input_length, l.in_channels};
    case LayerKind::GlobalAvgPool: return {1, l.out_channels};
  }
  return {};
}

ModelGraph resolve(const ModelGraph& in) {
  ModelGraph m = in;
  const auto& mode = m.mode;
  if (m.input_length == 0 || m.input_length % kFrameChannels) {
    throw LoweringError(fmt::format("input_length {} must be a positive multiple of {}", m.input_length, kFrameChannels));
  }
  const int32_t a = m.preprocess.hp_alpha;
  if (a <= 0 || a >= 32768) throw LoweringError(fmt::format("hp_alpha {} must lie in (0, 32768)", a));
  for (int32_t s : m.preprocess.bn_scale) {
    if (s < -32767 || s > 32767) throw LoweringError(fmt::format("bn_scale {} outside [-32767, 32767]", s));
  }
  for (int32_t b : m.preprocess.bn_shift) {
    if (b < -(1 << 20) || b > (1 << 20)) throw LoweringError(fmt::format("bn_shift {} outside [-2^20, 2^20]", b));
  }
  if (m.layers.empty()) throw LoweringError("model has no layers");

  FmShape cur = preprocess_shape(m);
  for (size_t i = 0; i < m.layers.size(); ++i) {
    LayerSpec& l = m.layers[i];
    if (l.name.empty()) l.name = fmt::format("layer{} ({})", i, kind_name(l.kind));
    auto fail = [&](const std::string& why) { throw LoweringError(fmt::format("{}: {}", l.name, why)); };
    if (l.in_channels && l.in_channels != cur.channels) {
      fail(fmt::format("in_channels {} does not match the incoming {} channels", l.in_channels, cur.channels));
    }
    if (l.input_length && l.input_length != cur.rows) {
      fail(fmt::format("input_length {} does not match the incoming {} rows", l.input_length, cur.rows));
    }
    l.in_channels = cur.channels;
    l.input_length = cur.rows;
    switch (l.kind) {
      case LayerKind::Conv1d: {
        if (l.kernel == 0 || l.stride == 0) fail("kernel and stride must be >= 1");
        if (l.out_channels == 0) fail("out_channels must be >= 1");
        if (l.out_channels > mode.n_sa) {
          fail(fmt::format("out_channels {} exceeds n_sa {} of mode {}", l.out_channels, mode.n_sa,
                           cim::mode_tag(mode.mode)));
        }
        const uint64_t rows = uint64_t{l.kernel} * words_for(l.in_channels) * 32;
        if (rows > mode.n_wl) {
          fail(fmt::format("receptive field {} x {} channels ({} wordlines) exceeds n_wl {}", l.kernel,
                           l.in_channels, rows, mode.n_wl));
        }
        break;
      }
      case LayerKind::MaxPool:
        if (l.pool_width == 0 || l.stride == 0) fail("pool_width and stride must be >= 1");
        if (cur.rows < l.pool_width) fail(fmt::format("{} rows is shorter than the pool width {}", cur.rows, l.pool_width));
        break;
      case LayerKind::WeightUpdate:
        if (i == 0 || i + 1 == m.layers.size()) fail("weight update must sit between layers");
        if (m.layers[i - 1].kind == LayerKind::WeightUpdate) fail("consecutive weight updates");
        break;
      case LayerKind::GlobalAvgPool:
        if (i + 1 != m.layers.size()) fail("global average pooling must be the last layer");
        if (l.out_channels == 0) l.out_channels = cur.channels;
        if (l.out_channels > cur.channels) {
          fail(fmt::format("{} classes exceed the {} incoming channels", l.out_channels, cur.channels));
        }
        break;
    }
    cur = output_shape(l);
  }
  return m;
}

std::vector<size_t> conv_layers(const ModelGraph& m) {
  std::vector<size_t> out;
  for (size_t i = 0; i < m.layers.size(); ++i)
    if (m.layers[i].kind == LayerKind::Conv1d) out.push_back(i);
  return out;
}

ModelGraph model_from_json(const nlohmann::json& j) {
  ModelGraph m;
  try {
    if (j.contains("mode")) m.mode = cim::MacroMode::of(cim::parse_mode(j.at("mode").get<std::string>()));
    read_opt(j, "input_length", m.input_length);
    read_opt(j, "sample_rate", m.sample_rate);
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      read_opt(p, "hp_alpha", m.preprocess.hp_alpha);
      read_channel_array(p, "bn_scale", m.preprocess.bn_scale);
      read_channel_array(p, "bn_shift", m.preprocess.bn_shift);
      read_opt(p, "quant_threshold", m.preprocess.quant_threshold);
    }
    for (const auto& e : j.at("layers")) {
      LayerSpec l;
      l.kind = parse_kind(e.at("kind").get<std::string>());
      if (l.kind == LayerKind::MaxPool) l.stride = 2;
      read_opt(e, "name", l.name);
      read_opt(e, "in_channels", l.in_channels);
      read_opt(e, "input_length", l.input_length);
      read_opt(e, "out_channels", l.out_channels);
      read_opt(e, "classes", l.out_channels);
      read_opt(e, "kernel", l.kernel);
      read_opt(e, "stride", l.stride);
      read_opt(e, "pool_width", l.pool_width);
      m.layers.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model: ") + e.what());
  }
  return m;
}

nlohmann::json model_to_json(const ModelGraph& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json e = {{"kind", kind_name(l.kind)}};
    if (!l.name.empty()) e["name"] = l.name;
    switch (l.kind) {
      case LayerKind::Conv1d:
        e["out_channels"] = l.out_channels;
        e["kernel"] = l.kernel;
        e["stride"] = l.stride;
        break;
      case LayerKind::MaxPool:
        e["pool_width"] = l.pool_width;
        e["stride"] = l.stride;
        break;
      case LayerKind::GlobalAvgPool: e["classes"] = l.out_channels; break;
      case LayerKind::WeightUpdate: break;
    }
    layers.push_back(e);
  }
  return {
      {"mode", std::string(1, static_cast<char>(std::tolower(cim::mode_tag(m.mode.mode))))},
      {"input_length", m.input_length},
      {"sample_rate", m.sample_rate},
      {"preprocess",
       {{"hp_alpha", m.preprocess.hp_alpha},
        {"bn_scale", m.preprocess.bn_scale},
        {"bn_shift", m.preprocess.bn_shift},
        {"quant_threshold", m.preprocess.quant_threshold}}},
      {"layers", layers},
  };
}

ModelGraph load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open model '{}'", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("cannot parse model '{}': {}", path, e.what()));
  }
  return model_from_json(j);
}

ModelGraph kws_model(uint32_t channels, uint32_t classes, uint32_t input_length) {
  ModelGraph m;
  m.input_length = input_length;
  auto conv = [&] {
    LayerSpec l;
    l.kind = LayerKind::Conv1d;
    l.out_channels = channels;
    return l;
  };
  auto pool = [] {
    LayerSpec l;
    l.kind = LayerKind::MaxPool;
    l.pool_width = 2;
    l.stride = 2;
    return l;
  };
  for (int i = 0; i < 5; ++i) {
    m.layers.push_back(conv());
    m.layers.push_back(pool());
  }
  m.layers.push_back(LayerSpec{.kind = LayerKind::WeightUpdate});
  m.layers.push_back(conv());
  m.layers.push_back(pool());
  m.layers.push_back(conv());
  LayerSpec gap;
  gap.kind = LayerKind::GlobalAvgPool;
  gap.out_channels = classes;
  m.layers.push_back(gap);
  return m;
}

ModelGraph random_model(std::mt19937_64& rng, cim::Mode mode) {
  auto pick = [&](uint32_t lo, uint32_t hi) { return static_cast<uint32_t>(lo + rng() % (hi - lo + 1)); };
  for (;;) {
    ModelGraph m;
    m.mode = cim::MacroMode::of(mode);
    m.input_length = 32 * pick(8, 48);
    m.preprocess.hp_alpha = static_cast<int32_t>(pick(1, 32767));
    for (auto& s : m.preprocess.bn_scale) s = static_cast<int32_t>(pick(0, 65534)) - 32767;
    for (auto& b : m.preprocess.bn_shift) b = static_cast<int32_t>(pick(0, 200)) - 100;
    m.preprocess.quant_threshold = static_cast<int32_t>(pick(0, 20)) - 10;
    const uint32_t blocks = pick(1, 4);
    const uint32_t wu_at = pick(0, blocks);  // 0 means no weight update
    const uint32_t max_words = m.mode.n_sa / 32;
    uint32_t channels = kFrameChannels;
    for (uint32_t b = 1; b <= blocks; ++b) {
      LayerSpec c;
      c.kind = LayerKind::Conv1d;
      c.out_channels = pick(1, std::min<uint32_t>(max_words, 4)) * 32 - (rng() % 4 == 0 ? pick(1, 31) : 0);
      c.kernel = std::array<uint32_t, 4>{1, 3, 3, 5}[rng() % 4];
      c.stride = rng() % 4 == 0 ? 2 : 1;
      if (uint64_t{c.kernel} * words_for(channels) * 32 > m.mode.n_wl) c.kernel = 1;
      m.layers.push_back(c);
      channels = c.out_channels;
      if (rng() % 3) {
        LayerSpec p;
        p.kind = LayerKind::MaxPool;
        p.pool_width = pick(1, 3);
        p.stride = pick(1, 2);
        m.layers.push_back(p);
      }
      if (b == wu_at && b < blocks) m.layers.push_back(LayerSpec{.kind = LayerKind::WeightUpdate});
    }
    LayerSpec gap;
    gap.kind = LayerKind::GlobalAvgPool;
    gap.out_channels = pick(1, std::min<uint32_t>(channels, 12));
    m.layers.push_back(gap);
    try {
      return resolve(m);
    } catch (const LoweringError&) {
      // Pools can run out of rows on short inputs; draw again.
    }
  }
}

}  // namespace rvcim::model
