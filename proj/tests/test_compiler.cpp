#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"

#include "rvcim/cim_macro.hpp"
#include "rvcim/compiler.hpp"
#include "rvcim/config.hpp"
#include "rvcim/core.hpp"
#include "rvcim/error.hpp"
#include "rvcim/golden.hpp"
#include "rvcim/memory.hpp"
#include "rvcim/model.hpp"

using namespace rvcim;
using compiler::Flags;
using isa::Op;
using sched::Phase;

namespace {

struct Range {
  uint32_t lo = 0, hi = 0;  // byte addresses, [lo, hi)
  bool overlaps(const Range& o) const { return lo < o.hi && o.lo < hi; }
};

Range fm_words(uint32_t w, uint32_t n) { return {mem::kFmBase + 4 * w, mem::kFmBase + 4 * (w + n)}; }
Range weight_words(uint32_t w, uint32_t n) { return {mem::kWeightBase + 4 * w, mem::kWeightBase + 4 * (w + n)}; }

struct HazardReport {
  std::vector<std::string> violations;
  uint64_t convs_under_weight_dma = 0;  // cim.conv issued while weights stream in
  std::map<int, uint64_t> first_write, last_write, first_conv, last_conv;
};

// Steps the program one instruction at a time and flags every access that
// races the in-flight transfer: a read of its destination, a write to its
// destination, or a write to its source.
HazardReport check_hazards(const compiler::Schedule& s, const kws::ModelWeights& w, const std::vector<int16_t>& frame,
                           const SimConfig& cfg) {
  const auto prog = sched::link(s.items);
  mem::MemorySystem memory(cfg);
  cim::CimMacro macro(s.model.mode);
  core::Core core(memory, macro);
  auto& dram = memory.dram();
  for (size_t n = 0; n < frame.size(); ++n)
    dram.store(s.layout.dram_audio - mem::kDramBase + 2 * static_cast<uint32_t>(n), 2, static_cast<uint16_t>(frame[n]));
  const auto images = compiler::build_images(s, w);
  for (size_t i = 0; i < images.size(); ++i) {
    uint32_t at = s.images[i].dram_addr - mem::kDramBase;
    for (uint32_t word : compiler::image_stream(s.images[i], images[i])) {
      dram.write_word(at, word);
      at += 4;
    }
  }
  core.load_program(prog.words);

  HazardReport rep;
  const uint32_t out_words = s.model.mode.output_words();
  while (!core.state().halted) {
    const auto& st = core.state();
    const uint32_t index = st.pc / 4;
    const auto in = isa::decode(prog.words[index]);
    const int image = s.items[prog.item_of_word[index]].image;
    const auto reg = [&](unsigned r) { return st.regs[r]; };

    std::vector<Range> reads, writes;
    if (in.op == Op::CimConv) {
      reads.push_back(fm_words(reg(in.rs1) + in.imm_s, 1));
      writes.push_back(fm_words(reg(in.rs2) + in.imm_d, out_words));
    } else if (in.op == Op::CimWrite) {
      reads.push_back(weight_words(reg(in.rs1) + in.imm_s, 2));
    } else if (in.op == Op::CimRead) {
      writes.push_back(weight_words(reg(in.rs2) + in.imm_d, 2));
    } else if (isa::is_load(in.op) || isa::is_store(in.op)) {
      const uint32_t a = reg(in.rs1) + static_cast<uint32_t>(in.imm);
      const Range r{a, a + 4};
      if (a < mem::kDmaBase || a >= mem::kDmaBase + 0x100) (isa::is_load(in.op) ? reads : writes).push_back(r);
    }

    if (memory.dma().state() == mem::DmaState::Busy) {
      const auto& t = memory.dma().transfer();
      if (in.op == Op::CimConv && t.dst >= mem::kWeightBase && t.dst < mem::kDmaBase) ++rep.convs_under_weight_dma;
      const Range src{t.src, t.src + 4 * t.length_words};
      const Range dst{t.dst, t.dst + 4 * t.length_words};
      const auto flag = [&](const char* what, const Range& r) {
        rep.violations.push_back(std::string(what) + " at pc " + std::to_string(st.pc) + " addr " + std::to_string(r.lo) +
                                 " (" + std::string(isa::mnemonic(in.op)) + ")");
      };
      for (const auto& r : reads)
        if (r.overlaps(dst)) flag("read of in-flight destination", r);
      for (const auto& r : writes) {
        if (r.overlaps(dst)) flag("write to in-flight destination", r);
        if (r.overlaps(src)) flag("write to in-flight source", r);
      }
    }

    const uint64_t cycle = st.cycle;
    if (in.op == Op::CimWrite) {
      rep.first_write.try_emplace(image, cycle);
      rep.last_write[image] = cycle;
    }
    if (in.op == Op::CimConv) {
      rep.first_conv.try_emplace(image, cycle);
      rep.last_conv[image] = cycle;
    }
    const auto r = core.step();
    REQUIRE_FALSE(r.trap.has_value());
  }
  return rep;
}

void check_legal(const model::ModelGraph& raw, const Flags& f, std::mt19937_64& rng) {
  const auto m = model::resolve(raw);
  const auto w = kws::random_weights(m, rng);
  const auto frame = kws::random_frame(m.input_length, rng);
  const auto s = compiler::lower(m, f);
  const auto rep = check_hazards(s, w, frame, SimConfig{});
  INFO("config " << compiler::config_name(f));
  CHECK(rep.violations.empty());
  if (!rep.violations.empty()) MESSAGE(rep.violations.front());
  CHECK(rep.first_conv.size() == s.images.size());
  for (size_t k = 0; k < s.images.size(); ++k) {
    const int i = static_cast<int>(k);
    REQUIRE(rep.first_write.count(i));
    CHECK(rep.last_write.at(i) < rep.first_conv.at(i));
    if (k > 0) CHECK(rep.first_write.at(i) > rep.last_conv.at(i - 1));
  }
}

model::LayerSpec conv(uint32_t out, uint32_t k = 3, uint32_t stride = 1) {
  model::LayerSpec l;
  l.kind = model::LayerKind::Conv1d;
  l.out_channels = out;
  l.kernel = k;
  l.stride = stride;
  return l;
}

model::LayerSpec gap(uint32_t classes) {
  model::LayerSpec l;
  l.kind = model::LayerKind::GlobalAvgPool;
  l.out_channels = classes;
  return l;
}

std::vector<isa::Instruction> instructions(const compiler::Schedule& s, std::initializer_list<Phase> phases) {
  std::vector<isa::Instruction> out;
  for (const auto& it : s.items) {
    if (std::find(phases.begin(), phases.end(), it.phase) == phases.end()) continue;
    for (const auto& si : it.prologue) out.push_back(si.inst);
    for (uint32_t t = 0; t < (it.kind == sched::ItemKind::Loop ? it.trips : 1u); ++t)
      for (const auto& si : it.body) out.push_back(si.inst);
  }
  return out;
}

const std::filesystem::path kRoot = RVCIM_SOURCE_DIR;

}  // namespace

TEST_CASE("no access races an in-flight transfer") {
  std::mt19937_64 rng(21);
  for (const auto& f : compiler::all_flag_combinations()) check_legal(model::kws_model(), f, rng);
  for (int trial = 0; trial < 6; ++trial) {
    const auto m = model::random_model(rng, trial % 2 ? cim::Mode::Y : cim::Mode::X);
    for (const auto& f : compiler::ladder()) check_legal(m, f, rng);
  }
}

TEST_CASE("weight fusion overlaps transfers with compute") {
  std::mt19937_64 rng(22);
  const auto m = model::resolve(model::kws_model());
  const auto w = kws::random_weights(m, rng);
  const auto frame = kws::random_frame(m.input_length, rng);
  const auto off = check_hazards(compiler::lower(m, {true, false, false}), w, frame, SimConfig{});
  const auto on = check_hazards(compiler::lower(m, {true, false, true}), w, frame, SimConfig{});
  CHECK(off.convs_under_weight_dma == 0);
  CHECK(on.convs_under_weight_dma > 0);
}

TEST_CASE("prefetch of the next image is issued before the current image computes") {
  const auto s = compiler::lower(model::kws_model(), {true, true, true});
  REQUIRE(s.images.size() >= 2);
  for (size_t k = 1; k < s.images.size(); ++k) {
    // The item that starts the transfer of image k.
    size_t start_item = s.items.size();
    for (size_t i = 0; i < s.items.size() && start_item == s.items.size(); ++i)
      for (const auto& si : s.items[i].body)
        if (si.dma == sched::DmaEffect::Start && s.items[i].label == "image " + std::to_string(k) + " prefetch")
          start_item = i;
    REQUIRE(start_item < s.items.size());
    size_t first_conv_prev = s.items.size();
    for (size_t i = 0; i < s.items.size(); ++i)
      if (s.items[i].image == static_cast<int>(k - 1) && s.items[i].phase == Phase::Conv) {
        first_conv_prev = i;
        break;
      }
    INFO("image " << k);
    CHECK(start_item < first_conv_prev);
  }
}

TEST_CASE("layer fusion keeps the reference model inside FM SRAM") {
  for (const auto& f : compiler::all_flag_combinations()) {
    if (!f.layer_fusion) continue;
    const auto s = compiler::lower(model::kws_model(), f);
    CHECK(uint64_t{s.fm_high_water_words} * 32 <= 256u * 1024);
    CHECK(s.fm_high_water_words > compiler::kReservedFmWords);
  }
}

TEST_CASE("fusion changes nothing for a single conv layer") {
  model::ModelGraph m;
  m.layers = {conv(64), gap(12)};
  const auto base = compiler::lower(m, {});
  const auto lf = compiler::lower(m, {true, false, false});
  REQUIRE(base.images.size() == 1);
  const auto a = instructions(base, {Phase::Conv, Phase::WeightLoad});
  const auto b = instructions(lf, {Phase::Conv, Phase::WeightLoad});
  CHECK(a.size() > 0);
  CHECK(a == b);
}

TEST_CASE("lowering errors") {
  model::ModelGraph m;
  m.layers = {conv(300), gap(12)};
  CHECK_THROWS_AS(compiler::lower(m, {}), LoweringError);

  auto y = model::kws_model();
  y.mode = cim::MacroMode::y();
  CHECK_THROWS_AS(compiler::lower(y, {true, true, true}), LoweringError);

  // 64k samples: 2048 preprocess rows; the stride-1 conv output alone needs
  // 2048 rows x 8 words.
  model::ModelGraph big;
  big.input_length = 65536;
  big.layers = {conv(256), gap(12)};
  try {
    compiler::lower(big, {true, false, false});
    FAIL("expected CapacityError");
  } catch (const CapacityError& e) {
    CHECK(e.available_bits() == 256u * 1024);
    CHECK(e.required_bits() > e.available_bits());
  }
}

TEST_CASE("every single optimization never increases latency") {
  std::mt19937_64 rng(23);
  std::vector<model::ModelGraph> models = {model::kws_model()};
  for (int i = 0; i < 30; ++i) models.push_back(model::random_model(rng, i % 2 ? cim::Mode::Y : cim::Mode::X));
  const SimConfig cfg;
  for (size_t mi = 0; mi < models.size(); ++mi) {
    const auto combos = compiler::all_flag_combinations();
    std::array<uint64_t, 8> total{};
    for (size_t c = 0; c < 8; ++c) total[c] = compiler::predict_latency(compiler::lower(models[mi], combos[c]), cfg).total;
    for (size_t c = 0; c < 8; ++c)
      for (size_t bit = 0; bit < 3; ++bit) {
        if (c & (size_t{1} << bit)) continue;
        INFO("model " << mi << " from " << compiler::config_name(combos[c]) << " bit " << bit);
        CHECK(total[c | (size_t{1} << bit)] <= total[c]);
      }
  }
}

TEST_CASE("ladder rows are cumulative and non-increasing") {
  const auto rows = compiler::compare_configs(model::kws_model(), SimConfig{});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "baseline");
  CHECK(rows[3].flags == Flags{true, true, true});
  for (size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].latency.total <= rows[i - 1].latency.total);
    const double step = (1.0 - double(rows[i].latency.total) / double(rows[i - 1].latency.total));
    CHECK(rows[i].step_reduction == doctest::Approx(step));
  }
  const double total = (1.0 - double(rows[3].latency.total) / double(rows[0].latency.total));
  CHECK(rows[3].total_reduction == doctest::Approx(total));
  double keep = 1;
  for (size_t i = 1; i < 4; ++i) keep *= 1 - rows[i].step_reduction;
  CHECK(1 - keep == doctest::Approx(total));
}

TEST_CASE("free DRAM shrinks the transfer savings but not the pipeline") {
  const auto m = model::load_model((kRoot / "models/calibration.json").string());
  const auto slow = load_config((kRoot / "configs/calibration.json").string());
  auto fast = slow;
  fast.dram.latency_first_word = 0;
  fast.dram.per_burst_word = 0;
  const auto a = compiler::compare_configs(m, slow);
  const auto b = compiler::compare_configs(m, fast);
  CHECK(b[1].step_reduction < a[1].step_reduction);
  CHECK(b[2].step_reduction < a[2].step_reduction);
  CHECK(b[3].step_reduction > 0);
  CHECK(b[3].latency.total < b[2].latency.total);
}

TEST_CASE("image plans cover every receptive field") {
  std::mt19937_64 rng(24);
  std::vector<model::ModelGraph> models = {model::kws_model()};
  for (int i = 0; i < 20; ++i) models.push_back(model::random_model(rng, i % 2 ? cim::Mode::Y : cim::Mode::X));
  for (const auto& raw : models) {
    const auto s = compiler::lower(raw, {true, true, true});
    const auto& mode = s.model.mode;
    const uint32_t spc = mode.n_wl / 32;
    const auto w = kws::random_weights(s.model, rng);
    const auto imgs = compiler::build_images(s, w);
    REQUIRE(imgs.size() == s.images.size());
    for (size_t k = 0; k < s.images.size(); ++k) {
      const auto& plan = s.images[k];
      CHECK(std::is_sorted(plan.segments.begin(), plan.segments.end()));
      CHECK(std::adjacent_find(plan.segments.begin(), plan.segments.end()) == plan.segments.end());
      for (uint32_t seg : plan.segments) CHECK(seg < mode.segment_count());
      CHECK(compiler::image_stream(plan, imgs[k]).size() == 2 * plan.segments.size());
      uint32_t used = 0;
      for (const auto& g : plan.groups) {
        CHECK(g.col_off + g.columns <= mode.n_sa);
        CHECK(g.col_off >= used);
        used = g.col_off + g.columns;
        const auto& l = s.model.layers[g.layer];
        CHECK(g.row_base == mode.n_wl - l.kernel * model::words_for(l.in_channels) * 32);
        for (uint32_t c = g.col_off; c < g.col_off + g.columns; ++c)
          for (uint32_t row = g.row_base; row < mode.n_wl; row += 32)
            CHECK(std::binary_search(plan.segments.begin(), plan.segments.end(), c * spc + row / 32));
      }
    }
    const auto back = compiler::weights_from_images(s, imgs);
    REQUIRE(back.size() == w.size());
    for (size_t i = 0; i < w.size(); ++i) {
      CHECK(back[i].out_channels == w[i].out_channels);
      CHECK(back[i].kernel == w[i].kernel);
      CHECK(back[i].in_channels == w[i].in_channels);
      CHECK(back[i].w == w[i].w);
    }
  }
}

TEST_CASE("schedule dump lists items with issue cycles") {
  const auto s = compiler::lower(model::kws_model(), {true, true, true});
  const SimConfig cfg;
  const auto text = compiler::dump_schedule(s, cfg);
  const auto est = sched::estimate(s.items, cfg);
  CHECK(text.find("cim.conv") != std::string::npos);
  CHECK(text.find(std::to_string(est.item_issue_cycle.back())) != std::string::npos);
  CHECK(text.find(std::to_string(compiler::predict_latency(s, cfg).total)) != std::string::npos);
  const auto brief = compiler::dump_schedule(s, cfg, false);
  CHECK(brief.size() < text.size());
  CHECK(est.item_issue_cycle.back() + 2 == est.breakdown.total);
}

TEST_CASE("config names") {
  CHECK(compiler::config_name({}) == "baseline");
  CHECK(compiler::config_name({true, false, false}) == "lf");
  CHECK(compiler::config_name({true, false, true}) == "lf+wf");
  CHECK(compiler::config_name({true, true, true}) == "lf+wf+pipe");
  const auto all = compiler::all_flag_combinations();
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j) CHECK_FALSE(all[i] == all[j]);
}
