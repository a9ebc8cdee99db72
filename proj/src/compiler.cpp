#include "rvcim/compiler.hpp"

#include <algorithm>
#include <functional>
#include <iterator>
#include <map>

#include <fmt/format.h>

#include "rvcim/error.hpp"
#include "rvcim/memory.hpp"
#include "rvcim/packing.hpp"

namespace rvcim::compiler {

using isa::Op;
using kernels::FmDesc;
using kernels::fm_byte_addr;
using model::LayerKind;
using model::LayerSpec;
using sched::Phase;
namespace R = sched::reg;

std::string config_name(const Flags& f) {
  std::string s;
  auto add = [&](const char* p) { s += s.empty() ? p : fmt::format("+{}", p); };
  if (f.layer_fusion) add("lf");
  if (f.weight_fusion) add("wf");
  if (f.conv_pool_pipeline) add("pipe");
  return s.empty() ? "baseline" : s;
}

std::array<Flags, 4> ladder() {
  return {Flags{}, Flags{.layer_fusion = true}, Flags{.layer_fusion = true, .weight_fusion = true},
          Flags{.layer_fusion = true, .conv_pool_pipeline = true, .weight_fusion = true}};
}

std::array<Flags, 8> all_flag_combinations() {
  std::array<Flags, 8> out;
  for (unsigned i = 0; i < 8; ++i) out[i] = Flags{(i & 1) != 0, (i & 2) != 0, (i & 4) != 0};
  return out;
}

namespace {

constexpr uint32_t kFmWords = 8192;

uint32_t weight_byte_addr(uint32_t word) { return mem::kWeightBase + 4 * word; }

// First-fit allocator over FM SRAM words.
class FmAllocator {
 public:
  uint32_t alloc(uint32_t words, const std::string& what) {
    uint32_t at = kReservedFmWords;
    for (const auto& [base, size] : live_) {
      if (base >= at + words) break;
      at = std::max(at, base + size);
    }
    if (at + words > kFmWords) {
      uint64_t live = kReservedFmWords;
      for (const auto& [b, s] : live_) live += s;
      throw CapacityError((live + words) * 32, uint64_t{kFmWords} * 32,
                          fmt::format("{}: feature maps need {} bits of FM SRAM, {} available", what, (live + words) * 32,
                                      kFmWords * 32));
    }
    live_[at] = words;
    high_water_ = std::max(high_water_, at + words);
    return at;
  }
  void free(uint32_t base) { live_.erase(base); }
  uint32_t high_water() const { return high_water_; }

 private:
  std::map<uint32_t, uint32_t> live_;
  uint32_t high_water_ = kReservedFmWords;
};

std::vector<ImagePlan> plan_images(const model::ModelGraph& m) {
  const auto& mode = m.mode;
  const uint32_t spc = mode.segments_per_column();
  std::vector<ImagePlan> images;
  uint32_t cols_used = 0;
  bool new_region = true;
  size_t conv_index = 0;
  for (size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    if (l.kind == LayerKind::WeightUpdate) new_region = true;
    if (l.kind != LayerKind::Conv1d) continue;
    const uint32_t need = model::words_for(l.out_channels) * 32;
    if (images.empty() || new_region || cols_used + need > mode.n_sa) {
      images.emplace_back();
      cols_used = 0;
      new_region = false;
    }
    const uint32_t rows = l.kernel * model::words_for(l.in_channels) * 32;
    images.back().groups.push_back({i, conv_index++, cols_used, need, mode.n_wl - rows});
    cols_used += need;
  }

  // Rows of a column that may hold nonzero weights, one bit per segment.
  std::vector<uint64_t> dirty(mode.n_sa, 0);
  for (auto& img : images) {
    for (const auto& g : img.groups) {
      uint64_t field = 0;
      for (uint32_t s = g.row_base / 32; s < spc; ++s) field |= uint64_t{1} << s;
      for (uint32_t c = g.col_off; c < g.col_off + g.columns; ++c) {
        const uint64_t write = field | dirty[c];
        for (uint32_t s = 0; s < spc; ++s)
          if (write >> s & 1) img.segments.push_back(c * spc + s);
        dirty[c] = field;
      }
    }
    std::sort(img.segments.begin(), img.segments.end());
  }
  return images;
}

class Lowering {
 public:
  Lowering(const model::ModelGraph& m, const Flags& f) : m_(m), f_(f), S_(m.mode.output_words()) {}

  Schedule run();

 private:
  struct Placed {
    FmDesc fm;
    uint32_t dram = 0;  // spill address when !layer_fusion
  };

  uint32_t image_of(size_t layer) const;
  void layout();
  void ensure_image(uint32_t img);
  void write_image_burst(uint32_t img);
  void fetch_image_segments(uint32_t img);
  void start_prefetch(uint32_t img);

  FmDesc reload(const Placed& p, const std::string& what);
  Placed spill(const FmDesc& fm, const std::string& what);
  FmDesc input_of(const Placed& p, const std::string& what) { return f_.layer_fusion ? p.fm : reload(p, what); }
  Placed output(const FmDesc& fm, const std::string& what) {
    return f_.layer_fusion ? Placed{fm, 0} : spill(fm, what);
  }

  // Emits every cim.conv of a layer; out_word(t) is where row t lands and
  // after_row(t) may append code once row t is complete.
  void emit_conv(const LayerSpec& l, const FmDesc& in, int image, const std::function<uint32_t(uint32_t)>& out_word,
                 const std::function<bool(uint32_t)>& after_row);
  void emit_pool_row(const LayerSpec& p, const FmDesc& in, uint32_t ring, uint32_t u, const FmDesc& out);
  void emit_pool_loop(const LayerSpec& p, const FmDesc& in, const FmDesc& out);

  const model::ModelGraph& m_;
  Flags f_;
  uint32_t S_;
  sched::Emitter e_;
  FmAllocator alloc_;
  Schedule s_;
  uint32_t dram_cursor_ = 0;
  int loaded_image_ = -1;
  int pending_image_ = -1;
};

uint32_t Lowering::image_of(size_t layer) const {
  for (size_t i = 0; i < s_.images.size(); ++i)
    for (const auto& g : s_.images[i].groups)
      if (g.layer == layer) return static_cast<uint32_t>(i);
  throw LoweringError(fmt::format("{}: not placed in any macro image", m_.layers[layer].name));
}

void Lowering::layout() {
  auto& L = s_.layout;
  L.dram_audio = mem::kDramBase;
  L.audio_words = (m_.input_length + 1) / 2;
  uint32_t at = L.dram_audio + 4 * L.audio_words;
  for (auto& img : s_.images) {
    img.dram_addr = at;
    at += 8 * static_cast<uint32_t>(img.segments.size());
  }
  dram_cursor_ = at;
  L.dmem_audio = mem::kDmemBase;
  L.dmem_table = L.dmem_audio + 4 * L.audio_words;
  L.dmem_scores = L.dmem_table + 4 * model::kFrameChannels;
  L.dmem_class = L.dmem_scores + 4 * std::max<uint32_t>(s_.classes, 1);
  L.dmem_end = L.dmem_class + 4 - mem::kDmemBase;
}

void Lowering::start_prefetch(uint32_t img) {
  const auto& plan = s_.images[img];
  e_.dma_start(Phase::WeightLoad, plan.dram_addr, weight_byte_addr(0), 2 * static_cast<uint32_t>(plan.segments.size()),
               fmt::format("image {} prefetch", img));
  pending_image_ = static_cast<int>(img);
}

void Lowering::write_image_burst(uint32_t img) {
  const auto& segs = s_.images[img].segments;
  e_.block(Phase::WeightLoad, fmt::format("image {} write", img), static_cast<int>(img));
  for (uint32_t k = 0; k < segs.size(); ++k) {
    const int32_t is = e_.near(R::kWeightSrc, 2 * k, isa::kImmSMin, isa::kImmSMax);
    const int32_t id = e_.near(R::kSegment, segs[k], isa::kImmDMin, isa::kImmDMax);
    e_.emit(isa::cim(isa::CimOp::Write, R::kWeightSrc, R::kSegment, is, id));
  }
}

void Lowering::fetch_image_segments(uint32_t img) {
  const auto& plan = s_.images[img];
  const auto& segs = plan.segments;
  e_.dma_wait(Phase::WeightLoad);
  e_.block(Phase::WeightLoad, fmt::format("image {} fetch setup", img), static_cast<int>(img));
  e_.li(R::kDma, mem::kDmaBase);
  e_.li(R::kT0, weight_byte_addr(0));
  e_.emit(isa::s_type(Op::Sw, R::kDma, R::kT0, mem::kDmaDst));
  e_.li(R::kT0, 2);
  e_.emit(isa::s_type(Op::Sw, R::kDma, R::kT0, mem::kDmaLen));
  for (size_t k = 0; k < segs.size();) {
    size_t end = k + 1;
    while (end < segs.size() && segs[end] == segs[end - 1] + 1) ++end;
    e_.begin_loop(Phase::WeightLoad, static_cast<uint32_t>(end - k), fmt::format("image {} segments", img),
                  static_cast<int>(img));
    e_.li(R::kPtrA, plan.dram_addr + 8 * static_cast<uint32_t>(k));
    e_.li(R::kSegment, segs[k]);
    e_.loop_body();
    e_.emit(isa::s_type(Op::Sw, R::kDma, R::kPtrA, mem::kDmaSrc));
    e_.emit(isa::s_type(Op::Sw, R::kDma, R::kPtrA, mem::kDmaCtrl), sched::DmaEffect::Start, 2);
    e_.emit(isa::i_type(Op::Lw, 0, R::kDma, mem::kDmaWait), sched::DmaEffect::Wait);
    e_.emit(isa::cim(isa::CimOp::Write, 0, R::kSegment, 0, 0));
    e_.emit(isa::i_type(Op::Addi, R::kPtrA, R::kPtrA, 8));
    e_.emit(isa::i_type(Op::Addi, R::kSegment, R::kSegment, 1));
    e_.end_loop();
    k = end;
  }
}

void Lowering::ensure_image(uint32_t img) {
  if (loaded_image_ == static_cast<int>(img)) return;
  if (f_.weight_fusion) {
    if (pending_image_ != static_cast<int>(img)) start_prefetch(img);
    e_.dma_wait(Phase::WeightLoad, fmt::format("image {} ready", img));
    pending_image_ = -1;
    write_image_burst(img);
    if (img + 1 < s_.images.size()) start_prefetch(img + 1);
  } else {
    fetch_image_segments(img);
  }
  loaded_image_ = static_cast<int>(img);
}

Lowering::Placed Lowering::spill(const FmDesc& fm, const std::string& what) {
  const uint32_t words = fm.span_words();
  Placed p{fm, dram_cursor_};
  dram_cursor_ += 4 * words;
  e_.dma_start(Phase::DramFmTraffic, fm_byte_addr(fm.base), p.dram, words, fmt::format("{} spill", what));
  e_.dma_wait(Phase::DramFmTraffic);
  alloc_.free(fm.base);
  return p;
}

FmDesc Lowering::reload(const Placed& p, const std::string& what) {
  FmDesc fm = p.fm;
  fm.base = alloc_.alloc(fm.span_words(), what);
  e_.dma_start(Phase::DramFmTraffic, p.dram, fm_byte_addr(fm.base), fm.span_words(), fmt::format("{} reload", what));
  e_.dma_wait(Phase::DramFmTraffic);
  return fm;
}

void Lowering::emit_conv(const LayerSpec& l, const FmDesc& in, int image,
                         const std::function<uint32_t(uint32_t)>& out_word,
                         const std::function<bool(uint32_t)>& after_row) {
  const uint32_t rows = model::conv_output_rows(in.rows, l.stride);
  const int64_t pad = (l.kernel - 1) / 2;
  const uint32_t cw = in.words();
  bool open = false;
  for (uint32_t t = 0; t < rows; ++t) {
    if (!open) e_.block(Phase::Conv, t == 0 ? l.name : std::string{}, image);
    open = true;
    const int64_t a = int64_t{t} * l.stride - pad;
    const int64_t first = (t == 0 || l.stride >= l.kernel) ? a : a + l.kernel - l.stride;
    const uint32_t dst = out_word(t);
    for (int64_t r = first; r < a + l.kernel; ++r) {
      for (uint32_t j = 0; j < cw; ++j) {
        const int32_t id = e_.near(R::kConvDst, dst, isa::kImmDMin, isa::kImmDMax);
        if (r >= 0 && r < in.rows) {
          const int32_t is = e_.near(R::kConvSrc, in.addr(static_cast<uint32_t>(r), j), isa::kImmSMin, isa::kImmSMax);
          e_.emit(isa::cim(isa::CimOp::Conv, R::kConvSrc, R::kConvDst, is, id));
        } else {
          e_.emit(isa::cim(isa::CimOp::Conv, 0, R::kConvDst, 0, id));
        }
      }
    }
    if (after_row && after_row(t)) open = false;
  }
}

void Lowering::emit_pool_row(const LayerSpec& p, const FmDesc& ring, uint32_t slots, uint32_t u, const FmDesc& out) {
  e_.block(Phase::Pool, u == 0 ? p.name : std::string{});
  for (uint32_t j = 0; j < out.words(); ++j) {
    for (uint32_t i = 0; i < p.pool_width; ++i) {
      const uint32_t slot = (u * p.stride + i) % slots;
      const int32_t off = e_.near(R::kPtrA, fm_byte_addr(ring.addr(slot, j)), -2048, 2047);
      e_.emit(isa::i_type(Op::Lw, i ? R::kT1 : R::kT0, R::kPtrA, off));
      if (i) e_.emit(isa::r_type(Op::Or, R::kT0, R::kT0, R::kT1));
    }
    const int32_t off = e_.near(R::kPtrB, fm_byte_addr(out.addr(u, j)), -2048, 2047);
    e_.emit(isa::s_type(Op::Sw, R::kPtrB, R::kT0, off));
  }
}

void Lowering::emit_pool_loop(const LayerSpec& p, const FmDesc& in, const FmDesc& out) {
  const int64_t step_in = 4 * int64_t{p.stride} * in.stride;
  const int64_t reach = 4 * (int64_t{p.pool_width - 1} * in.stride + in.words());
  if (step_in > 2047 || reach > 2047) throw LoweringError(fmt::format("{}: pooling window out of offset range", p.name));
  e_.begin_loop(Phase::Pool, out.rows, p.name);
  e_.li(R::kPtrA, fm_byte_addr(in.addr(0, 0)));
  e_.li(R::kPtrB, fm_byte_addr(out.addr(0, 0)));
  e_.loop_body();
  for (uint32_t j = 0; j < out.words(); ++j) {
    for (uint32_t i = 0; i < p.pool_width; ++i) {
      e_.emit(isa::i_type(Op::Lw, i ? R::kT1 : R::kT0, R::kPtrA, static_cast<int32_t>(4 * (i * in.stride + j))));
      if (i) e_.emit(isa::r_type(Op::Or, R::kT0, R::kT0, R::kT1));
    }
    e_.emit(isa::s_type(Op::Sw, R::kPtrB, R::kT0, static_cast<int32_t>(4 * j)));
  }
  e_.emit(isa::i_type(Op::Addi, R::kPtrA, R::kPtrA, static_cast<int32_t>(step_in)));
  e_.emit(isa::i_type(Op::Addi, R::kPtrB, R::kPtrB, static_cast<int32_t>(4 * out.stride)));
  e_.end_loop();
}

Schedule Lowering::run() {
  s_.model = m_;
  s_.flags = f_;
  s_.images = plan_images(m_);
  if (!m_.layers.empty() && m_.layers.back().kind == LayerKind::GlobalAvgPool) s_.classes = m_.layers.back().out_channels;
  layout();
  const auto& L = s_.layout;

  e_.dma_start(Phase::PrePost, L.dram_audio, L.dmem_audio, L.audio_words, "audio");
  e_.dma_wait(Phase::PrePost);
  if (f_.weight_fusion && !s_.images.empty()) start_prefetch(0);

  const auto pre_shape = model::preprocess_shape(m_);
  FmDesc pre{alloc_.alloc(pre_shape.rows, "preprocess"), 1, 0, pre_shape.rows, pre_shape.channels};
  kernels::emit_preprocess(e_, m_.preprocess, {L.dmem_audio, L.dmem_table, pre.base, pre.rows});
  Placed cur = output(pre, "preprocess");
  bool final_reloaded = false;

  const auto& layers = m_.layers;
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::WeightUpdate: break;
      case LayerKind::Conv1d: {
        const FmDesc in = input_of(cur, l.name);
        const uint32_t img = image_of(i);
        ensure_image(img);
        const auto& g = *std::find_if(s_.images[img].groups.begin(), s_.images[img].groups.end(),
                                      [&](const ColumnGroup& c) { return c.layer == i; });
        const uint32_t rows = model::conv_output_rows(in.rows, l.stride);
        const uint32_t off = g.col_off / 32;
        const bool fuse = f_.conv_pool_pipeline && i + 1 < layers.size() && layers[i + 1].kind == LayerKind::MaxPool;
        FmDesc result;
        if (fuse) {
          const LayerSpec& p = layers[i + 1];
          const uint32_t slots = p.pool_width;
          const FmDesc ring{alloc_.alloc(slots * S_, l.name + " row ring"), S_, off, slots, l.out_channels};
          const uint32_t prow = model::pool_output_rows(rows, p.pool_width, p.stride);
          const uint32_t cw = model::words_for(l.out_channels);
          result = FmDesc{alloc_.alloc(prow * cw, p.name), cw, 0, prow, l.out_channels};
          emit_conv(
              l, in, static_cast<int>(img), [&](uint32_t t) { return ring.base + (t % slots) * S_; },
              [&](uint32_t t) {
                if (t + 1 < p.pool_width || (t + 1 - p.pool_width) % p.stride) return false;
                const uint32_t u = (t + 1 - p.pool_width) / p.stride;
                if (u >= prow) return false;
                emit_pool_row(p, ring, slots, u, result);
                return true;
              });
          alloc_.free(ring.base);
          ++i;
        } else {
          result = FmDesc{alloc_.alloc(rows * S_, l.name), S_, off, rows, l.out_channels};
          emit_conv(l, in, static_cast<int>(img), [&](uint32_t t) { return result.base + t * S_; }, {});
        }
        alloc_.free(in.base);
        cur = output(result, layers[i].name);
        break;
      }
      case LayerKind::MaxPool: {
        const FmDesc in = input_of(cur, l.name);
        const uint32_t prow = model::pool_output_rows(in.rows, l.pool_width, l.stride);
        const uint32_t cw = in.words();
        const FmDesc out{alloc_.alloc(prow * cw, l.name), cw, 0, prow, in.channels};
        emit_pool_loop(l, in, out);
        alloc_.free(in.base);
        cur = output(out, l.name);
        break;
      }
      case LayerKind::GlobalAvgPool: {
        if (!f_.layer_fusion) {
          cur = Placed{reload(cur, l.name), 0};
          final_reloaded = true;
        }
        kernels::emit_gap(e_, {cur.fm, l.out_channels, L.dmem_scores, L.dmem_class});
        break;
      }
    }
  }
  if (!f_.layer_fusion && !final_reloaded) cur = Placed{reload(cur, "final"), 0};
  e_.dma_wait(Phase::WeightLoad);
  e_.halt();

  s_.final_fm = cur.fm;
  s_.layout.dram_end = dram_cursor_ - mem::kDramBase;
  s_.fm_high_water_words = alloc_.high_water();
  s_.items = e_.take();
  return std::move(s_);
}

}  // namespace

Schedule lower(const model::ModelGraph& model, const Flags& flags) {
  const model::ModelGraph m = model::resolve(model);
  return Lowering(m, flags).run();
}

sched::LatencyBreakdown predict_latency(const Schedule& s, const SimConfig& cfg) {
  return sched::estimate(s.items, cfg).breakdown;
}

std::vector<LadderRow> compare_configs(const model::ModelGraph& model, const SimConfig& cfg) {
  static constexpr const char* kNames[] = {"baseline", "+layer_fusion", "+weight_fusion", "+pipeline"};
  std::vector<LadderRow> rows;
  const auto steps = ladder();
  for (size_t i = 0; i < steps.size(); ++i) {
    LadderRow r{kNames[i], steps[i], predict_latency(lower(model, steps[i]), cfg)};
    if (i > 0) {
      r.step_reduction = 1.0 - double(r.latency.total) / double(rows.back().latency.total);
      r.total_reduction = 1.0 - double(r.latency.total) / double(rows.front().latency.total);
    }
    rows.push_back(r);
  }
  return rows;
}

std::string format_breakdown(const sched::LatencyBreakdown& b, const std::string& prefix) {
  std::string out;
  for (size_t p = 0; p < sched::kPhaseCount; ++p)
    out += fmt::format("{}{}={}\n", prefix, sched::phase_name(static_cast<Phase>(p)), b.phase[p]);
  out += fmt::format("{}total={}\n", prefix, b.total);
  return out;
}

std::string format_ladder(const std::vector<LadderRow>& rows) {
  std::string out;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string pre = fmt::format("step{}.", i);
    out += fmt::format("{}name={}\n{}config={}\n", pre, r.name, pre, config_name(r.flags));
    out += format_breakdown(r.latency, pre);
    if (i == 0) continue;
    out += fmt::format("{}step_reduction_pct={:.2f}\n", pre, 100 * r.step_reduction);
    if (i - 1 < kTargetStepReductionPct.size())
      out += fmt::format("{}target_step_reduction_pct={:.2f}\n", pre, kTargetStepReductionPct[i - 1]);
    out += fmt::format("{}total_reduction_pct={:.2f}\n", pre, 100 * r.total_reduction);
  }
  if (rows.size() > 1) {
    out += fmt::format("total_reduction_pct={:.2f}\n", 100 * rows.back().total_reduction);
    out += fmt::format("target_total_reduction_pct={:.2f}\n", kTargetTotalReductionPct);
  }
  return out;
}

std::string format_ladder_table(const std::vector<LadderRow>& rows) {
  std::string out = fmt::format("{:<15} {:<11} {:>12}", "step", "config", "total");
  for (size_t p = 0; p < sched::kPhaseCount; ++p) out += fmt::format(" {:>15}", sched::phase_name(static_cast<Phase>(p)));
  out += fmt::format(" {:>8} {:>8} {:>8}\n", "step%", "target%", "total%");
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += fmt::format("{:<15} {:<11} {:>12}", r.name, config_name(r.flags), r.latency.total);
    for (uint64_t v : r.latency.phase) out += fmt::format(" {:>15}", v);
    if (i == 0) {
      out += fmt::format(" {:>8} {:>8} {:>8}\n", "-", "-", "-");
      continue;
    }
    const std::string target = i - 1 < kTargetStepReductionPct.size() ? fmt::format("{:.2f}", kTargetStepReductionPct[i - 1]) : "-";
    out += fmt::format(" {:>8.2f} {:>8} {:>8.2f}\n", 100 * r.step_reduction, target, 100 * r.total_reduction);
  }
  if (rows.size() > 1)
    out += fmt::format("total reduction {:.2f}% (target {:.2f}%)\n", 100 * rows.back().total_reduction, kTargetTotalReductionPct);
  return out;
}

std::string dump_schedule(const Schedule& s, const SimConfig& cfg, bool with_instructions) {
  const auto est = sched::estimate(s.items, cfg);
  std::string out = fmt::format("# config {} mode {} items {} images {} fm_high_water_words {}\n", config_name(s.flags),
                                s.model.mode.mode == cim::Mode::X ? "X" : "Y", s.items.size(), s.images.size(),
                                s.fm_high_water_words);
  auto listing = [&](const std::vector<sched::SInst>& v, const char* indent) {
    for (const auto& si : v) {
      out += fmt::format("{}{}", indent, isa::disassemble(si.inst));
      if (si.dma == sched::DmaEffect::Start) out += fmt::format("  ; dma start {} words", si.dma_words);
      if (si.dma == sched::DmaEffect::Wait) out += "  ; dma wait";
      out += '\n';
    }
  };
  for (size_t i = 0; i < s.items.size(); ++i) {
    const auto& it = s.items[i];
    const char* kind = it.kind == sched::ItemKind::Loop ? "loop" : it.kind == sched::ItemKind::Halt ? "halt" : "block";
    out += fmt::format("{:>10} {:<16} {:<5}", est.item_issue_cycle[i], sched::phase_name(it.phase), kind);
    if (it.kind == sched::ItemKind::Loop) out += fmt::format(" x{}", it.trips);
    if (it.image >= 0) out += fmt::format(" [image {}]", it.image);
    if (!it.label.empty()) out += " " + it.label;
    out += fmt::format(" ({} inst)\n", it.prologue.size() + it.body.size());
    if (!with_instructions) continue;
    listing(it.prologue, "    ");
    listing(it.body, it.kind == sched::ItemKind::Loop ? "      | " : "    ");
  }
  const auto& b = est.breakdown;
  for (size_t p = 0; p < sched::kPhaseCount; ++p)
    out += fmt::format("# {:<16} {}\n", sched::phase_name(static_cast<Phase>(p)), b.phase[p]);
  out += fmt::format("# {:<16} {}\n", "total", b.total);
  return out;
}

std::vector<cim::TernaryWeightArray> build_images(const Schedule& s, const kws::ModelWeights& w) {
  std::vector<cim::TernaryWeightArray> out;
  for (const auto& plan : s.images) {
    cim::TernaryWeightArray arr(s.model.mode);
    for (const auto& g : plan.groups) {
      const auto& cw = w.at(g.conv_index);
      const auto& l = s.model.layers[g.layer];
      if (cw.out_channels != l.out_channels || cw.in_channels != l.in_channels || cw.kernel != l.kernel) {
        throw Error(fmt::format("{}: weight shape does not match the layer", l.name));
      }
      const uint32_t kw = model::words_for(l.in_channels) * 32;
      for (uint32_t co = 0; co < cw.out_channels; ++co)
        for (uint32_t k = 0; k < cw.kernel; ++k)
          for (uint32_t ci = 0; ci < cw.in_channels; ++ci)
            arr.set(g.row_base + k * kw + ci, g.col_off + co, cw.at(co, k, ci));
    }
    out.push_back(std::move(arr));
  }
  return out;
}

kws::ModelWeights weights_from_images(const Schedule& s, const std::vector<cim::TernaryWeightArray>& images) {
  if (images.size() != s.images.size()) {
    throw Error(fmt::format("schedule uses {} macro images, {} given", s.images.size(), images.size()));
  }
  kws::ModelWeights w = kws::zero_weights(s.model);
  for (size_t i = 0; i < images.size(); ++i) {
    if (!(images[i].mode() == s.model.mode)) throw Error(fmt::format("weight image {} has the wrong macro mode", i));
    for (const auto& g : s.images[i].groups) {
      auto& cw = w.at(g.conv_index);
      const uint32_t kw = model::words_for(cw.in_channels) * 32;
      for (uint32_t co = 0; co < cw.out_channels; ++co)
        for (uint32_t k = 0; k < cw.kernel; ++k)
          for (uint32_t ci = 0; ci < cw.in_channels; ++ci)
            cw.w[(size_t{co} * cw.kernel + k) * cw.in_channels + ci] = images[i].at(g.row_base + k * kw + ci, g.col_off + co);
    }
  }
  return w;
}

std::vector<uint32_t> image_stream(const ImagePlan& plan, const cim::TernaryWeightArray& image) {
  const uint32_t spc = image.mode().segments_per_column();
  std::vector<uint32_t> out;
  out.reserve(2 * plan.segments.size());
  for (uint32_t seg : plan.segments) {
    const auto v = image.read(32 * (seg % spc), seg / spc, 32);
    const auto p = cim::pack_segment(v);
    out.push_back(p[0]);
    out.push_back(p[1]);
  }
  return out;
}

}  // namespace rvcim::compiler
