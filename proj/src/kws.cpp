#include "rvcim/kws.hpp"

#include <fmt/format.h>

#include "rvcim/cim_macro.hpp"
#include "rvcim/error.hpp"
#include "rvcim/memory.hpp"

namespace rvcim::kws {

SimOutcome simulate(const compiler::Schedule& s, const ModelWeights& weights, const std::vector<int16_t>& frame,
                    const SimConfig& cfg, const RunOptions& opt) {
  if (frame.size() != s.model.input_length) {
    throw Error(fmt::format("frame has {} samples, model expects {}", frame.size(), s.model.input_length));
  }
  const auto prog = sched::link(s.items);
  if (uint64_t{prog.words.size()} * 4 > cfg.memory.imem_bytes) {
    throw Error(fmt::format("program of {} bytes exceeds instruction memory ({} bytes)", prog.words.size() * 4,
                            cfg.memory.imem_bytes));
  }
  if (s.layout.dram_end > cfg.memory.dram_bytes) {
    throw Error(fmt::format("DRAM layout needs {} bytes, {} configured", s.layout.dram_end, cfg.memory.dram_bytes));
  }
  if (s.layout.dmem_end > cfg.memory.dmem_bytes) {
    throw Error(fmt::format("data memory layout needs {} bytes, {} configured", s.layout.dmem_end, cfg.memory.dmem_bytes));
  }

  mem::MemorySystem memory(cfg);
  cim::CimMacro macro(s.model.mode);
  core::Core core(memory, macro);

  auto& dram = memory.dram();
  const uint32_t audio = s.layout.dram_audio - mem::kDramBase;
  for (size_t n = 0; n < frame.size(); ++n)
    dram.store(audio + 2 * static_cast<uint32_t>(n), 2, static_cast<uint16_t>(frame[n]));
  const auto images = compiler::build_images(s, weights);
  for (size_t i = 0; i < images.size(); ++i) {
    const auto stream = compiler::image_stream(s.images[i], images[i]);
    uint32_t at = s.images[i].dram_addr - mem::kDramBase;
    for (uint32_t w : stream) {
      dram.write_word(at, w);
      at += 4;
    }
  }

  core.load_program(prog.words);
  core.enable_profile(true);
  auto run = core.run(opt.max_cycles, opt.trace);

  SimOutcome out;
  out.status = run.status;
  out.trap = std::move(run.trap);
  out.retired = run.retired;
  out.trace = std::move(run.trace);
  out.cycles = core.state().cycle;
  const auto prof = core.profile();
  out.measured = sched::breakdown_from_profile(prog, std::vector<uint64_t>(prof.begin(), prof.end()));
  if (!out.ok()) return out;

  const auto& f = s.final_fm;
  out.final_fm = BitFm(f.rows, f.channels);
  for (uint32_t r = 0; r < f.rows; ++r)
    for (uint32_t j = 0; j < f.words(); ++j) out.final_fm.words[size_t{r} * f.words() + j] = memory.fm().read(f.addr(r, j));
  for (uint32_t c = 0; c < s.classes; ++c)
    out.scores.push_back(memory.dmem().read_word(s.layout.dmem_scores - mem::kDmemBase + 4 * c));
  if (s.classes) out.predicted = memory.dmem().read_word(s.layout.dmem_class - mem::kDmemBase);
  return out;
}

}  // namespace rvcim::kws
