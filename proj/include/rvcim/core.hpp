// core.hpp: two-stage in-order RV32I core with atomic single-cycle CIM
// instructions.
//
// Timing: every instruction retires in 1 cycle; taken branches and jumps add
// LatencyConfig::taken_branch_penalty refill cycles; a load from the uDMA WAIT
// register stalls until the outstanding transfer is Done. The uDMA engine is
// ticked once per consumed cycle of every instruction except the store that
// started it. An unconditional `jal` to its own address halts the core.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvcim/cim_macro.hpp"
#include "rvcim/config.hpp"
#include "rvcim/isa.hpp"
#include "rvcim/memory.hpp"

namespace rvcim::core {

struct MachineState {
  uint32_t pc = 0;
  std::array<uint32_t, 32> regs{};
  uint64_t cycle = 0;
  bool halted = false;
  friend bool operator==(const MachineState&, const MachineState&) = default;
};

enum class TrapCause : uint8_t {
  IllegalInstruction,
  MisalignedFetch,
  MisalignedAccess,
  AccessFault,
  CimBounds,
  CimInvalidWeight,
  DmaError,
  EnvironmentCall,
  Breakpoint,
};

std::string_view trap_name(TrapCause c);

struct Trap {
  TrapCause cause;
  uint32_t pc;
  uint32_t value;  // offending word or address
  std::string message;
};

struct ExecResult {
  uint64_t cycles_consumed = 0;
  std::optional<Trap> trap;
};

struct TraceEntry {
  uint64_t cycle;  // cycle at which the instruction issued
  uint32_t pc;
  isa::Instruction inst;
  uint64_t cycles;
  std::string effects;
};

// "cycle pc disassembly [effects]"
std::string format_trace_line(const TraceEntry& e);

enum class RunStatus : uint8_t { Halted, Trapped, Timeout };

struct RunResult {
  RunStatus status = RunStatus::Halted;
  std::optional<Trap> trap;
  uint64_t retired = 0;
  std::vector<TraceEntry> trace;
};

class Core {
 public:
  Core(mem::MemorySystem& memory, cim::CimMacro& macro);

  // Copies the image to instruction memory at byte 0 and resets the state.
  void load_program(std::span<const uint32_t> words);

  MachineState& state() { return state_; }
  const MachineState& state() const { return state_; }

  // Executes one instruction. When `trace` is non-null it receives the
  // retired instruction (untouched on trap).
  ExecResult step(TraceEntry* trace = nullptr);

  // Runs until halt, trap, or until the cycle counter reaches max_cycles.
  RunResult run(uint64_t max_cycles, bool record_trace = false);

  // Cycles accumulated per instruction-memory word index, when enabled.
  void enable_profile(bool on);
  std::span<const uint64_t> profile() const { return profile_; }

  // CIM instruction semantics; exposed for unit tests. They check every
  // bound before mutating anything.
  ExecResult exec_cim_conv(const isa::Instruction& in, std::string* effects = nullptr);
  ExecResult exec_cim_read(const isa::Instruction& in, std::string* effects = nullptr);
  ExecResult exec_cim_write(const isa::Instruction& in, std::string* effects = nullptr);

 private:
  Trap make_trap(TrapCause c, uint32_t value, std::string msg) const;
  std::optional<Trap> load(uint32_t addr, unsigned size, bool sign, uint32_t& out, uint64_t& cycles);
  std::optional<Trap> store(uint32_t addr, unsigned size, uint32_t value, bool& started_dma);

  mem::MemorySystem& mem_;
  cim::CimMacro& macro_;
  MachineState state_;
  std::vector<std::optional<isa::Instruction>> decoded_;
  std::vector<uint64_t> profile_;
  bool profiling_ = false;
  mem::DmaTransfer dma_regs_;
};

}  // namespace rvcim::core
