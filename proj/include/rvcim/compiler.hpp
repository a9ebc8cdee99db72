// compiler.hpp: lowering of a ModelGraph to a CIM-extended RV32I schedule
// under the four optimization configurations, plus static latency
// prediction.
//
// Conv layers are flattened into macro columns by output channel: a layer
// with K taps over C_in channels occupies the top K * ceil(C_in/32) * 32
// wordlines of its columns, tap k at row n_wl - K*W*32 + k*W*32 + ci with
// W = ceil(C_in/32). Each output row shifts only the input words it has not
// already seen into the input buffer; the last shift of the window produces
// the row.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rvcim/cim_macro.hpp"
#include "rvcim/config.hpp"
#include "rvcim/golden.hpp"
#include "rvcim/kernels.hpp"
#include "rvcim/model.hpp"
#include "rvcim/schedule.hpp"

namespace rvcim::compiler {

struct Flags {
  bool layer_fusion = false;
  bool conv_pool_pipeline = false;
  bool weight_fusion = false;
  friend bool operator==(const Flags&, const Flags&) = default;
};

std::string config_name(const Flags& f);
// baseline, +layer fusion, +weight fusion, +conv/pool pipeline (cumulative).
std::array<Flags, 4> ladder();
std::array<Flags, 8> all_flag_combinations();

// One conv layer's slice of a macro image.
struct ColumnGroup {
  size_t layer = 0;       // index into ModelGraph::layers
  size_t conv_index = 0;  // index into ModelWeights
  uint32_t col_off = 0;
  uint32_t columns = 0;   // multiple of 32
  uint32_t row_base = 0;  // first wordline of the receptive field
};

struct ImagePlan {
  std::vector<ColumnGroup> groups;
  std::vector<uint32_t> segments;  // macro segments in write order
  uint32_t dram_addr = 0;          // core byte address of the packed stream
};

// FM SRAM words [0, kReservedFmWords) are never allocated; word 0 is the
// all-zero padding row source.
inline constexpr uint32_t kReservedFmWords = 16;

struct DataLayout {
  uint32_t dram_audio = 0;  // core byte addresses
  uint32_t audio_words = 0;
  uint32_t dmem_audio = 0;
  uint32_t dmem_table = 0;
  uint32_t dmem_scores = 0;
  uint32_t dmem_class = 0;
  uint32_t dram_end = 0;  // bytes of DRAM used, from the DRAM base
  uint32_t dmem_end = 0;  // bytes of data memory used
};

struct Schedule {
  model::ModelGraph model;  // resolved
  Flags flags;
  std::vector<sched::Item> items;
  std::vector<ImagePlan> images;
  DataLayout layout;
  kernels::FmDesc final_fm;  // where the final feature map sits at halt
  uint32_t classes = 0;      // 0 when the model has no global average pooling
  uint32_t fm_high_water_words = 0;
};

// Throws LoweringError (layer does not fit the macro) or CapacityError
// (FM SRAM overflow).
Schedule lower(const model::ModelGraph& model, const Flags& flags);

sched::LatencyBreakdown predict_latency(const Schedule& s, const SimConfig& cfg);

struct LadderRow {
  std::string name;
  Flags flags;
  sched::LatencyBreakdown latency;
  double step_reduction = 0;   // vs the previous row
  double total_reduction = 0;  // vs the baseline
};

std::vector<LadderRow> compare_configs(const model::ModelGraph& model, const SimConfig& cfg);

// Published step and total reductions the calibration experiment aims at, in percent.
inline constexpr std::array<double, 3> kTargetStepReductionPct{33.16, 62.94, 40.00};
inline constexpr double kTargetTotalReductionPct = 85.14;

// "key=value" lines.
std::string format_breakdown(const sched::LatencyBreakdown& b, const std::string& prefix);
std::string format_ladder(const std::vector<LadderRow>& rows);
// The same ladder as an aligned text table, one row per configuration.
std::string format_ladder_table(const std::vector<LadderRow>& rows);

// Human-readable listing with the static issue cycle of every item.
std::string dump_schedule(const Schedule& s, const SimConfig& cfg, bool with_instructions = true);

// Full macro images implied by the column plan and the layer weights.
std::vector<cim::TernaryWeightArray> build_images(const Schedule& s, const kws::ModelWeights& w);
// Inverse of build_images: the layer weights read back from the column plan.
kws::ModelWeights weights_from_images(const Schedule& s, const std::vector<cim::TernaryWeightArray>& images);
// Packed 2-word segments of one image in write order.
std::vector<uint32_t> image_stream(const ImagePlan& plan, const cim::TernaryWeightArray& image);

}  // namespace rvcim::compiler
