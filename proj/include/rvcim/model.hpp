// model.hpp: the 1-D binary CNN description consumed by the lowering pass.
//
// The network input is a raw PCM frame. Preprocessing reshapes it into rows
// of 32 consecutive samples, so the first feature map has one 32-channel
// (one-word) row per 32 samples.
#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rvcim/cim_macro.hpp"

namespace rvcim::model {

inline constexpr uint32_t kFrameChannels = 32;

enum class LayerKind : uint8_t { Conv1d, MaxPool, WeightUpdate, GlobalAvgPool };

std::string_view kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind = LayerKind::Conv1d;
  // Filled in by resolve(); may be given in the model file and is then checked.
  uint32_t in_channels = 0;
  uint32_t input_length = 0;  // rows
  uint32_t out_channels = 0;  // Conv1d; GlobalAvgPool: class count
  uint32_t kernel = 3;
  uint32_t stride = 1;
  uint32_t pool_width = 2;
  std::string name;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Pre-emphasis, per-channel affine and binarization of the PCM frame. All
// coefficients are Q15.
struct PreprocParams {
  int32_t hp_alpha = 31785;
  std::array<int32_t, kFrameChannels> bn_scale;
  std::array<int32_t, kFrameChannels> bn_shift{};
  int32_t quant_threshold = 0;
  PreprocParams() { bn_scale.fill(32767); }
  friend bool operator==(const PreprocParams&, const PreprocParams&) = default;
};

struct ModelGraph {
  cim::MacroMode mode = cim::MacroMode::x();
  uint32_t input_length = 4000;  // samples
  uint32_t sample_rate = 16000;
  PreprocParams preprocess;
  std::vector<LayerSpec> layers;
  friend bool operator==(const ModelGraph&, const ModelGraph&) = default;
};

struct FmShape {
  uint32_t rows = 0;
  uint32_t channels = 0;
  uint32_t words() const { return (channels + 31) / 32; }
  friend bool operator==(const FmShape&, const FmShape&) = default;
};

inline uint32_t words_for(uint32_t channels) { return (channels + 31) / 32; }
uint32_t conv_output_rows(uint32_t rows, uint32_t stride);
uint32_t pool_output_rows(uint32_t rows, uint32_t width, uint32_t stride);

// Validates the graph and fills every layer's in_channels, input_length and
// name. Throws LoweringError naming the offending layer.
ModelGraph resolve(const ModelGraph& m);

FmShape preprocess_shape(const ModelGraph& m);
// Output shape of a resolved layer (WeightUpdate passes its input through;
// GlobalAvgPool yields one row of class scores).
FmShape output_shape(const LayerSpec& l);

std::vector<size_t> conv_layers(const ModelGraph& m);

ModelGraph model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelGraph& m);
ModelGraph load_model(const std::string& path);

// 5 x (conv, pool), weight update, conv, pool, conv, global average pool.
ModelGraph kws_model(uint32_t channels = 256, uint32_t classes = 12, uint32_t input_length = 4000);

// A small random valid model for property tests.
ModelGraph random_model(std::mt19937_64& rng, cim::Mode mode);

}  // namespace rvcim::model
