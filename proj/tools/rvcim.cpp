// rvcim: command-line driver for the assembler, the simulator, the lowering
// pass and the keyword-spotting flow.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rvcim/assembler.hpp"
#include "rvcim/cim_macro.hpp"
#include "rvcim/compiler.hpp"
#include "rvcim/config.hpp"
#include "rvcim/core.hpp"
#include "rvcim/error.hpp"
#include "rvcim/golden.hpp"
#include "rvcim/kws.hpp"
#include "rvcim/memory.hpp"
#include "rvcim/model.hpp"
#include "rvcim/weight_image.hpp"

using namespace rvcim;

namespace {

enum Exit : int {
  kOk = 0,
  kError = 1,       // I/O, configuration, internal
  kBadInput = 2,    // assembly, model or lowering error
  kTrap = 3,
  kTimeout = 4,
  kMismatch = 5,    // simulated result differs from the reference
};

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path));
  out << data;
}

void write_file(const std::string& path, const std::vector<uint8_t>& data) {
  write_file(path, std::string(data.begin(), data.end()));
}

std::vector<int16_t> read_pcm(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() % 2) throw Error(fmt::format("{}: odd byte count for 16-bit PCM", path));
  std::vector<int16_t> x(bytes.size() / 2);
  for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<int16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
  return x;
}

std::vector<uint8_t> pcm_bytes(const std::vector<int16_t>& x) {
  std::vector<uint8_t> out;
  for (int16_t v : x) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>((static_cast<uint16_t>(v) >> 8) & 0xFF));
  }
  return out;
}

struct Common {
  std::string config;
  std::string mode;
  SimConfig sim() const { return config.empty() ? SimConfig{} : load_config(config); }
};

struct ModelOpts {
  std::string model;
  bool lf = false, wf = false, pipe = false;
  compiler::Flags flags() const { return {lf, pipe, wf}; }
  model::ModelGraph load(const Common& c) const {
    model::ModelGraph m = model.empty() ? model::kws_model() : model::load_model(model);
    if (!c.mode.empty()) m.mode = cim::MacroMode::of(cim::parse_mode(c.mode));
    return m;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Simulator configuration (JSON)");
  sub->add_option("--mode", c.mode, "Macro mode override: X or Y");
}

void add_model(CLI::App* sub, ModelOpts& m) {
  sub->add_option("--model", m.model, "Model description (JSON); defaults to the built-in KWS network");
  sub->add_flag("--enable-layer-fusion", m.lf, "Keep inter-layer feature maps in FM SRAM");
  sub->add_flag("--enable-weight-fusion", m.wf, "Overlap the next weight image DMA with convolution");
  sub->add_flag("--enable-pipeline", m.pipe, "Interleave max pooling with the producing convolution");
}

int status_exit(const kws::SimOutcome& o) {
  if (o.status == core::RunStatus::Timeout) return kTimeout;
  if (o.status == core::RunStatus::Trapped) return kTrap;
  return kOk;
}

void print_trap(const core::Trap& t) {
  fmt::print(stderr, "trap: {} at pc 0x{:08x} (value 0x{:08x}): {}\n", core::trap_name(t.cause), t.pc, t.value,
             t.message);
}

int cmd_info(const Common& c) {
  const auto cfg = c.sim();
  for (auto m : {cim::Mode::X, cim::Mode::Y}) {
    if (!c.mode.empty() && cim::parse_mode(c.mode) != m) continue;
    const auto mm = cim::MacroMode::of(m);
    const char* tag = m == cim::Mode::X ? "X" : "Y";
    fmt::print("mode.{}.n_wl={}\nmode.{}.n_sa={}\nmode.{}.segments={}\n", tag, mm.n_wl, tag, mm.n_sa, tag,
               mm.segment_count());
    fmt::print("mode.{}.peak_ops_per_cycle={}\n", tag, cim::peak_ops_per_cycle(mm));
    fmt::print("mode.{}.peak_tops={:.2f}\nmode.{}.peak_tops_exact={:.4f}\n", tag, cim::peak_tops(mm, cfg.clock_mhz), tag,
               cim::peak_tops(mm, cfg.clock_mhz));
  }
  fmt::print("clock_mhz={}\n", cfg.clock_mhz);
  return kOk;
}

int cmd_asm(const std::string& in, const std::string& out) {
  const auto bytes = read_file(in);
  const auto words = isa::assemble(std::string(bytes.begin(), bytes.end()));
  write_file(out, isa::to_image(words));
  fmt::print("words={}\n", words.size());
  return kOk;
}

int cmd_disasm(const std::string& in) {
  const auto bytes = read_file(in);
  fmt::print("{}", isa::disassemble_program(isa::from_image(bytes)));
  return kOk;
}

int cmd_run(const std::string& image, const Common& c, uint64_t max_cycles, const std::string& trace) {
  const auto cfg = c.sim();
  const auto words = isa::from_image(read_file(image));
  if (uint64_t{words.size()} * 4 > cfg.memory.imem_bytes) throw Error("program exceeds instruction memory");
  mem::MemorySystem memory(cfg);
  cim::CimMacro macro(cim::MacroMode::of(c.mode.empty() ? cim::Mode::X : cim::parse_mode(c.mode)));
  core::Core core(memory, macro);
  core.load_program(words);
  const auto r = core.run(max_cycles, !trace.empty());
  if (!trace.empty()) {
    std::string text;
    for (const auto& e : r.trace) text += core::format_trace_line(e) + "\n";
    write_file(trace, text);
  }
  const char* status = r.status == core::RunStatus::Halted ? "halted" : r.status == core::RunStatus::Trapped ? "trapped" : "timeout";
  fmt::print("status={}\ncycles={}\nretired={}\n", status, core.state().cycle, r.retired);
  for (unsigned i = 1; i < 32; ++i)
    if (core.state().regs[i]) fmt::print("x{}=0x{:08x}\n", i, core.state().regs[i]);
  if (r.trap) print_trap(*r.trap);
  return r.status == core::RunStatus::Halted ? kOk : r.status == core::RunStatus::Trapped ? kTrap : kTimeout;
}

int cmd_lower(const Common& c, const ModelOpts& mo, const std::string& dump, bool listing) {
  const auto cfg = c.sim();
  const auto s = compiler::lower(mo.load(c), mo.flags());
  if (!dump.empty()) write_file(dump, compiler::dump_schedule(s, cfg, listing));
  fmt::print("config={}\nitems={}\nprogram_words={}\nimages={}\nfm_high_water_bits={}\n", compiler::config_name(s.flags),
             s.items.size(), sched::link(s.items).words.size(), s.images.size(), 32 * s.fm_high_water_words);
  fmt::print("{}", compiler::format_breakdown(compiler::predict_latency(s, cfg), "predicted."));
  return kOk;
}

int cmd_report(const Common& c, const ModelOpts& mo, bool ladder, bool table, const std::string& out) {
  const auto cfg = c.sim();
  const auto m = mo.load(c);
  std::string text = fmt::format("model={}\nmode={}\ndram.latency_first_word={}\ndram.per_burst_word={}\ndram.burst_words={}\n",
                                 mo.model.empty() ? "builtin" : mo.model, m.mode.mode == cim::Mode::X ? "X" : "Y",
                                 cfg.dram.latency_first_word, cfg.dram.per_burst_word, cfg.dram.burst_words);
  if (ladder) {
    const auto rows = compiler::compare_configs(m, cfg);
    text += table ? compiler::format_ladder_table(rows) : compiler::format_ladder(rows);
  } else {
    const auto s = compiler::lower(m, mo.flags());
    text += fmt::format("config={}\n", compiler::config_name(s.flags));
    text += compiler::format_breakdown(compiler::predict_latency(s, cfg), "");
  }
  if (!out.empty()) write_file(out, text);
  fmt::print("{}", text);
  return kOk;
}

struct KwsOpts {
  std::string audio;
  std::vector<std::string> weights;
  uint64_t seed = 1;
  uint64_t max_cycles = 4'000'000'000ull;
  std::string trace, report, dump;
};

int cmd_kws(const Common& c, const ModelOpts& mo, const KwsOpts& ko) {
  const auto cfg = c.sim();
  const auto s = compiler::lower(mo.load(c), mo.flags());
  std::mt19937_64 rng(ko.seed);
  kws::ModelWeights w;
  if (ko.weights.empty()) {
    w = kws::random_weights(s.model, rng);
  } else {
    std::vector<cim::TernaryWeightArray> images;
    for (const auto& p : ko.weights) images.push_back(cim::load_weight_image(p));
    w = compiler::weights_from_images(s, images);
  }
  const auto frame = ko.audio.empty() ? kws::random_frame(s.model.input_length, rng) : read_pcm(ko.audio);

  const auto out = kws::simulate(s, w, frame, cfg, {ko.max_cycles, !ko.trace.empty()});
  if (!ko.dump.empty()) write_file(ko.dump, compiler::dump_schedule(s, cfg));
  if (!ko.trace.empty()) {
    std::string text;
    for (const auto& e : out.trace) text += core::format_trace_line(e) + "\n";
    write_file(ko.trace, text);
  }
  if (!out.ok()) {
    if (out.trap) print_trap(*out.trap);
    fmt::print("status={}\ncycles={}\n", out.status == core::RunStatus::Timeout ? "timeout" : "trapped", out.cycles);
    return status_exit(out);
  }

  const auto golden = kws::forward(s.model, w, frame);
  const auto predicted = compiler::predict_latency(s, cfg);
  std::string text = fmt::format("config={}\nstatus=halted\ncycles={}\nretired={}\n", compiler::config_name(s.flags),
                                 out.cycles, out.retired);
  if (!out.trace.empty()) {
    const auto& last = out.trace.back();
    text += fmt::format("trace_total={}\n", last.cycle + last.cycles);
  }
  text += fmt::format("latency_ms={:.4f}\n", double(out.cycles) / (cfg.clock_mhz * 1000.0));
  text += compiler::format_breakdown(out.measured, "measured.");
  text += compiler::format_breakdown(predicted, "predicted.");
  text += fmt::format("scores={}\nclass={}\n", fmt::join(out.scores, ","), out.predicted);
  const bool match = out.final_fm == golden.final_fm && out.scores == golden.scores && out.predicted == golden.predicted;
  text += fmt::format("golden_match={}\nestimate_match={}\n", match ? 1 : 0, predicted == out.measured ? 1 : 0);
  if (!ko.report.empty()) write_file(ko.report, text);
  fmt::print("{}", text);
  return match && predicted == out.measured ? kOk : kMismatch;
}

int cmd_gen(const Common& c, const ModelOpts& mo, uint64_t seed, const std::string& weights_prefix,
            const std::string& audio, double density) {
  const auto s = compiler::lower(mo.load(c), mo.flags());
  std::mt19937_64 rng(seed);
  if (!weights_prefix.empty()) {
    const auto images = compiler::build_images(s, kws::random_weights(s.model, rng, density));
    for (size_t i = 0; i < images.size(); ++i) {
      const auto path = fmt::format("{}{}.cimw", weights_prefix, i);
      cim::save_weight_image(path, images[i]);
      fmt::print("weights={}\n", path);
    }
  }
  if (!audio.empty()) {
    write_file(audio, pcm_bytes(kws::random_frame(s.model.input_length, rng)));
    fmt::print("audio={}\n", audio);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIM-extended RISC-V toolchain and simulator"};
  app.require_subcommand(1);
  int rc = kOk;

  Common common;
  ModelOpts mo;

  auto* info = app.add_subcommand("info", "Macro geometry and peak throughput");
  add_common(info, common);

  std::string asm_in, asm_out = "a.bin";
  auto* as = app.add_subcommand("asm", "Assemble a source file into a program image");
  as->add_option("input", asm_in)->required();
  as->add_option("-o,--output", asm_out);

  std::string dis_in;
  auto* dis = app.add_subcommand("disasm", "Disassemble a program image");
  dis->add_option("input", dis_in)->required();

  std::string run_in, trace;
  uint64_t max_cycles = 100'000'000;
  auto* run = app.add_subcommand("run", "Execute a program image on the core");
  run->add_option("image", run_in)->required();
  add_common(run, common);
  run->add_option("--max-cycles", max_cycles);
  run->add_option("--trace", trace, "Write an instruction trace");

  std::string dump;
  bool listing = true;
  auto* lower = app.add_subcommand("lower", "Lower a model and predict its latency");
  add_common(lower, common);
  add_model(lower, mo);
  lower->add_option("--dump", dump, "Write the schedule listing");
  lower->add_flag("!--no-listing", listing, "Omit instructions from the dump");

  bool ladder = false, table = false;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Latency report (key=value)");
  add_common(report, common);
  add_model(report, mo);
  report->add_flag("--ladder", ladder, "Compare baseline, +layer fusion, +weight fusion, +pipeline");
  report->add_flag("--table", table, "Print the ladder as a text table instead of key=value lines");
  report->add_option("-o,--output", report_out);

  KwsOpts ko;
  auto* kws_cmd = app.add_subcommand("kws", "End-to-end keyword spotting on the simulator");
  add_common(kws_cmd, common);
  add_model(kws_cmd, mo);
  kws_cmd->add_option("--audio", ko.audio, "Raw little-endian 16-bit PCM; random when omitted");
  kws_cmd->add_option("--weights", ko.weights, "Weight images, one per macro image; random when omitted");
  kws_cmd->add_option("--seed", ko.seed);
  kws_cmd->add_option("--max-cycles", ko.max_cycles);
  kws_cmd->add_option("--trace", ko.trace);
  kws_cmd->add_option("--report", ko.report);
  kws_cmd->add_option("--dump", ko.dump);

  uint64_t gen_seed = 1;
  double density = 0.5;
  std::string gen_weights, gen_audio;
  auto* gen = app.add_subcommand("gen", "Write random weight images and a random PCM frame");
  add_common(gen, common);
  add_model(gen, mo);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--density", density);
  gen->add_option("--weights-prefix", gen_weights);
  gen->add_option("--audio", gen_audio);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*info) rc = cmd_info(common);
    else if (*as) rc = cmd_asm(asm_in, asm_out);
    else if (*dis) rc = cmd_disasm(dis_in);
    else if (*run) rc = cmd_run(run_in, common, max_cycles, trace);
    else if (*lower) rc = cmd_lower(common, mo, dump, listing);
    else if (*report) rc = cmd_report(common, mo, ladder, table, report_out);
    else if (*kws_cmd) rc = cmd_kws(common, mo, ko);
    else if (*gen) rc = cmd_gen(common, mo, gen_seed, gen_weights, gen_audio, density);
  } catch (const AsmError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kBadInput;
  } catch (const LoweringError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kBadInput;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kError;
  }
  return rc;
}
