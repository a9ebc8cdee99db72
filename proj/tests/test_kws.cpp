#include <random>
#include <vector>

#include "doctest.h"

#include "rvcim/cim_macro.hpp"
#include "rvcim/compiler.hpp"
#include "rvcim/core.hpp"
#include "rvcim/error.hpp"
#include "rvcim/golden.hpp"
#include "rvcim/kernels.hpp"
#include "rvcim/kws.hpp"
#include "rvcim/memory.hpp"
#include "rvcim/model.hpp"

using namespace rvcim;
using compiler::Flags;

namespace {

void check_against_golden(const model::ModelGraph& raw, const Flags& f, std::mt19937_64& rng, double density = 0.5) {
  const auto m = model::resolve(raw);
  const auto w = kws::random_weights(m, rng, density);
  const auto frame = kws::random_frame(m.input_length, rng);
  const auto golden = kws::forward(m, w, frame);
  const auto s = compiler::lower(m, f);
  const SimConfig cfg;
  const auto out = kws::simulate(s, w, frame, cfg);
  INFO("config " << compiler::config_name(f));
  REQUIRE(out.ok());
  CHECK(out.final_fm == golden.final_fm);
  CHECK(out.scores == golden.scores);
  CHECK(out.predicted == golden.predicted);
  CHECK(compiler::predict_latency(s, cfg) == out.measured);
  CHECK(out.measured.total == out.cycles);
}

struct KernelRun {
  mem::MemorySystem memory{SimConfig{}};
  cim::CimMacro macro{cim::MacroMode::x()};
  core::Core core{memory, macro};
  sched::LatencyBreakdown estimate;
  uint64_t cycles = 0;

  void run(std::vector<sched::Item> items) {
    estimate = sched::estimate(items, SimConfig{}).breakdown;
    const auto prog = sched::link(items);
    core.load_program(prog.words);
    const auto r = core.run(100'000'000);
    REQUIRE(r.status == core::RunStatus::Halted);
    cycles = core.state().cycle;
  }
};

constexpr uint32_t kAudio = mem::kDmemBase;
constexpr uint32_t kTable = mem::kDmemBase + 0x8000;

kws::BitFm run_preprocess(const std::vector<int16_t>& frame, const model::PreprocParams& p, uint64_t* cycles = nullptr,
                          uint64_t* estimated = nullptr) {
  KernelRun k;
  const uint32_t rows = static_cast<uint32_t>(frame.size() / 32);
  for (size_t n = 0; n < frame.size(); ++n)
    k.memory.dmem().store(kAudio - mem::kDmemBase + 2 * static_cast<uint32_t>(n), 2, static_cast<uint16_t>(frame[n]));
  sched::Emitter e;
  kernels::emit_preprocess(e, p, {kAudio, kTable, 16, rows});
  e.halt();
  k.run(e.take());
  if (cycles) *cycles = k.cycles;
  if (estimated) *estimated = k.estimate.total;
  kws::BitFm out(rows, 32);
  for (uint32_t r = 0; r < rows; ++r) out.words[r] = k.memory.fm().read(16 + r);
  return out;
}

model::PreprocParams random_params(std::mt19937_64& rng) {
  model::PreprocParams p;
  p.hp_alpha = static_cast<int32_t>(rng() % 32768);
  for (uint32_t c = 0; c < model::kFrameChannels; ++c) {
    switch (rng() % 4) {
      case 0: p.bn_scale[c] = 0; break;
      case 1: p.bn_scale[c] = static_cast<int32_t>(rng() % 65536) - 32768; break;
      case 2: p.bn_scale[c] = static_cast<int32_t>(rng() % 64) - 32; break;
      default: p.bn_scale[c] = 32767; break;
    }
    p.bn_shift[c] = static_cast<int32_t>(rng() % 200001) - 100000;
    if (rng() % 3 == 0) p.bn_shift[c] = static_cast<int32_t>(rng() % 41) - 20;
  }
  p.quant_threshold = rng() % 2 ? 0 : static_cast<int32_t>(rng() % 4001) - 2000;
  return p;
}

}  // namespace

TEST_CASE("reference model matches the golden reference in every configuration") {
  std::mt19937_64 rng(11);
  for (const auto& f : compiler::all_flag_combinations()) check_against_golden(model::kws_model(), f, rng);
}

TEST_CASE("random models match the golden reference") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 24; ++trial) {
    const auto mode = trial % 2 ? cim::Mode::Y : cim::Mode::X;
    const auto m = model::random_model(rng, mode);
    for (const auto& f : compiler::all_flag_combinations()) check_against_golden(m, f, rng, trial % 3 ? 0.5 : 0.1);
  }
}

TEST_CASE("golden high-pass and preprocess on hand-computed inputs") {
  // alpha = 0.5: y[n] = x[n] - (x[n-1] * 16384 >> 15)
  const std::vector<int16_t> x = {100, -7, 32767, -32768};
  CHECK(kws::highpass(x, 16384) == std::vector<int32_t>{100, -57, 32771, -49151});
  CHECK(kws::highpass(x, 0) == std::vector<int32_t>{100, -7, 32767, -32768});

  model::PreprocParams p;
  const std::vector<int16_t> zeros(64, 0);
  const auto z = kws::preprocess(zeros, p);
  CHECK(z.rows == 2);
  CHECK(z.words == std::vector<uint32_t>{0, 0});

  // Alternating signs survive the default filter with their sign.
  std::vector<int16_t> alt(32);
  for (int n = 0; n < 32; ++n) alt[n] = static_cast<int16_t>(n % 2 ? -1000 : 1000);
  CHECK(kws::preprocess(alt, p).words[0] == 0x55555555u);
  p.bn_shift.fill(1);
  CHECK(kws::preprocess(zeros, p).words[0] == 0xFFFFFFFFu);
}

TEST_CASE("golden conv, pool and pooling oracles") {
  kws::BitFm in(4, 2);
  in.set(0, 0, true);
  in.set(1, 1, true);
  in.set(3, 0, true);
  kws::ConvWeights w{1, 3, 2, std::vector<int8_t>(6, 0)};
  w.w[0 * 2 + 0] = 1;   // tap 0 (previous row), channel 0
  w.w[2 * 2 + 1] = -1;  // tap 2 (next row), channel 1
  // Row t: in[t-1][0] - in[t+1][1]
  const auto out = kws::conv1d(in, w, 1);
  CHECK(out.rows == 4);
  CHECK_FALSE(out.get(0, 0));  // 0 - 1
  CHECK(out.get(1, 0));        // 1 - 0
  CHECK_FALSE(out.get(2, 0));  // 0 - 0
  CHECK_FALSE(out.get(3, 0));  // 0 - 0
  const auto strided = kws::conv1d(in, w, 2);
  CHECK(strided.rows == 2);
  CHECK_FALSE(strided.get(0, 0));
  CHECK_FALSE(strided.get(1, 0));

  const auto pooled = kws::maxpool(in, 2, 2);
  CHECK(pooled.rows == 2);
  CHECK(pooled.get(0, 0));
  CHECK(pooled.get(0, 1));
  CHECK(pooled.get(1, 0));
  CHECK_FALSE(pooled.get(1, 1));

  kws::BitFm one(5, 12);
  one.set(3, 7, true);
  auto scores = kws::gap_scores(one, 12);
  CHECK(scores[7] == 1);
  CHECK(kws::argmax(scores) == 7);
  CHECK(kws::argmax(kws::gap_scores(kws::BitFm(5, 12), 12)) == 0);
  CHECK(kws::argmax({3, 5, 5, 1}) == 1);
}

TEST_CASE("csd expansions") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 2000; ++i) {
    const uint32_t v = i < 100 ? static_cast<uint32_t>(i) : static_cast<uint32_t>(rng() % 32768);
    const auto terms = kernels::csd(v);
    int64_t sum = 0;
    for (const auto& [k, d] : terms) {
      CHECK((d == 1 || d == -1));
      sum += int64_t{d} << k;
    }
    CHECK(sum == v);
    for (size_t t = 1; t < terms.size(); ++t) CHECK(std::abs(terms[t].first - terms[t - 1].first) >= 2);
  }
  CHECK(kernels::csd(0).empty());
  CHECK(kernels::csd(7).size() == 2);  // 8 - 1
}

TEST_CASE("folded thresholds agree with the affine comparison") {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 3000; ++i) {
    const auto p = random_params(rng);
    const int32_t scale = p.bn_scale[i % 32], shift = p.bn_shift[i % 32];
    const auto t = kernels::fold_threshold(scale, shift, p.quant_threshold);
    for (int j = 0; j < 40; ++j) {
      // Reachable filter outputs: |y| <= 32767 + 32768.
      const int32_t y = j < 8 ? (j - 4) * 16383 : static_cast<int32_t>(rng() % 131071) - 65535;
      const bool want = ((int64_t{y} * scale) >> 15) + shift > p.quant_threshold;
      INFO("scale " << scale << " shift " << shift << " qt " << p.quant_threshold << " y " << y);
      CHECK(kernels::apply_threshold(t, y) == want);
    }
  }
}

TEST_CASE("preprocess code matches the golden model") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 60; ++trial) {
    const auto p = trial == 0 ? model::PreprocParams{} : random_params(rng);
    const uint32_t rows = 1 + static_cast<uint32_t>(rng() % 20);
    auto frame = kws::random_frame(32 * rows, rng);
    if (trial % 7 == 1)
      for (auto& v : frame) v = static_cast<int16_t>(rng() % 2 ? 32767 : -32768);
    uint64_t cycles = 0, est = 0;
    const auto got = run_preprocess(frame, p, &cycles, &est);
    INFO("trial " << trial);
    CHECK(got == kws::preprocess(frame, p));
    CHECK(cycles == est);
  }
}

TEST_CASE("preprocess of silence") {
  const std::vector<int16_t> zeros(32 * 8, 0);
  model::PreprocParams p;
  const auto got = run_preprocess(zeros, p);
  for (uint32_t word : got.words) CHECK(word == 0);
}

TEST_CASE("global average pooling code") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 40; ++trial) {
    const uint32_t rows = 1 + static_cast<uint32_t>(rng() % 9);
    const uint32_t channels = 32 * (1 + static_cast<uint32_t>(rng() % 4));
    const uint32_t classes = 1 + static_cast<uint32_t>(rng() % std::min<uint32_t>(channels, 40));
    kws::BitFm fm(rows, channels);
    if (trial == 1) {
      fm.set(rows - 1, classes - 1, true);  // one-hot
    } else if (trial > 1) {
      for (auto& w : fm.words) w = static_cast<uint32_t>(rng()) & static_cast<uint32_t>(rng());
    }
    KernelRun k;
    const kernels::FmDesc desc{16, fm.row_words() + 1, 0, rows, channels};
    for (uint32_t r = 0; r < rows; ++r)
      for (uint32_t j = 0; j < fm.row_words(); ++j) k.memory.fm().write(desc.addr(r, j), fm.words[r * fm.row_words() + j]);
    sched::Emitter e;
    kernels::emit_gap(e, {desc, classes, kAudio, kAudio + 4 * 64});
    e.halt();
    k.run(e.take());
    CHECK(k.cycles == k.estimate.total);
    const auto want = kws::gap_scores(fm, classes);
    for (uint32_t c = 0; c < classes; ++c) CHECK(k.memory.dmem().read_word(4 * c) == want[c]);
    const uint32_t cls = k.memory.dmem().read_word(4 * 64);
    CHECK(cls == kws::argmax(want));
    if (trial == 0) CHECK(cls == 0);
    if (trial == 1) CHECK(cls == classes - 1);
  }
}

TEST_CASE("zero weights give zero scores") {
  std::mt19937_64 rng(35);
  const auto m = model::resolve(model::kws_model());
  const auto w = kws::zero_weights(m);
  const auto frame = kws::random_frame(m.input_length, rng);
  const auto out = kws::simulate(compiler::lower(m, {true, true, true}), w, frame, SimConfig{});
  REQUIRE(out.ok());
  for (uint32_t v : out.scores) CHECK(v == 0);
  CHECK(out.predicted == 0);
}

TEST_CASE("simulation is deterministic") {
  std::mt19937_64 rng(36);
  const auto m = model::resolve(model::kws_model());
  const auto w = kws::random_weights(m, rng);
  const auto frame = kws::random_frame(m.input_length, rng);
  const auto s = compiler::lower(m, {true, false, true});
  const auto a = kws::simulate(s, w, frame, SimConfig{});
  const auto b = kws::simulate(s, w, frame, SimConfig{});
  CHECK(a.cycles == b.cycles);
  CHECK(a.measured == b.measured);
  CHECK(a.final_fm == b.final_fm);
  CHECK(a.scores == b.scores);
}

TEST_CASE("simulation rejects inputs that do not fit") {
  const auto m = model::resolve(model::kws_model());
  const auto s = compiler::lower(m, {});
  std::mt19937_64 rng(37);
  const auto w = kws::random_weights(m, rng);
  CHECK_THROWS_AS(kws::simulate(s, w, std::vector<int16_t>(100), SimConfig{}), Error);
  SimConfig tiny;
  tiny.memory.dram_bytes = 4096;
  CHECK_THROWS_AS(kws::simulate(s, w, kws::random_frame(m.input_length, rng), tiny), Error);
}

TEST_CASE("golden equivalence over random frames and weights") {
  std::mt19937_64 rng(38);
  const auto m = model::resolve(model::kws_model());
  const auto s = compiler::lower(m, {true, true, true});
  for (int i = 0; i < 20; ++i) {
    const auto w = kws::random_weights(m, rng, 0.05 + 0.9 * (i / 20.0));
    const auto frame = kws::random_frame(m.input_length, rng);
    const auto g = kws::forward(m, w, frame);
    const auto out = kws::simulate(s, w, frame, SimConfig{});
    REQUIRE(out.ok());
    CHECK(out.final_fm == g.final_fm);
    CHECK(out.scores == g.scores);
    CHECK(out.predicted == g.predicted);
  }
}
