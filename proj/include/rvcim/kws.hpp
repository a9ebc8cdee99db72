// kws.hpp: runs a lowered schedule on the simulated chip and collects the
// network outputs and the measured per-phase latency.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rvcim/compiler.hpp"
#include "rvcim/config.hpp"
#include "rvcim/core.hpp"
#include "rvcim/golden.hpp"
#include "rvcim/schedule.hpp"

namespace rvcim::kws {

struct RunOptions {
  uint64_t max_cycles = 4'000'000'000ull;
  bool trace = false;
};

struct SimOutcome {
  core::RunStatus status = core::RunStatus::Halted;
  std::optional<core::Trap> trap;
  uint64_t cycles = 0;
  uint64_t retired = 0;
  sched::LatencyBreakdown measured;
  BitFm final_fm;  // read back from FM SRAM
  std::vector<uint32_t> scores;
  uint32_t predicted = 0;
  std::vector<core::TraceEntry> trace;
  bool ok() const { return status == core::RunStatus::Halted; }
};

// Places the PCM frame and the packed weight streams in DRAM, runs the
// program to completion and reads the results back. Throws Error when the
// inputs do not fit the configured memories.
SimOutcome simulate(const compiler::Schedule& s, const ModelWeights& weights, const std::vector<int16_t>& frame,
                    const SimConfig& cfg, const RunOptions& opt = {});

}  // namespace rvcim::kws
