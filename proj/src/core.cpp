#include "rvcim/core.hpp"

#include <fmt/format.h>

#include "rvcim/error.hpp"
#include "rvcim/packing.hpp"

namespace rvcim::core {

using isa::Instruction;
using isa::Op;

std::string_view trap_name(TrapCause c) {
  switch (c) {
    case TrapCause::IllegalInstruction: return "illegal-instruction";
    case TrapCause::MisalignedFetch: return "misaligned-fetch";
    case TrapCause::MisalignedAccess: return "misaligned-access";
    case TrapCause::AccessFault: return "access-fault";
    case TrapCause::CimBounds: return "cim-bounds";
    case TrapCause::CimInvalidWeight: return "cim-invalid-weight";
    case TrapCause::DmaError: return "dma-error";
    case TrapCause::EnvironmentCall: return "ecall";
    case TrapCause::Breakpoint: return "ebreak";
  }
  return "?";
}

std::string format_trace_line(const TraceEntry& e) {
  std::string line = fmt::format("{} 0x{:08x} {}", e.cycle, e.pc, isa::disassemble(e.inst));
  if (!e.effects.empty()) line += fmt::format(" [{}]", e.effects);
  return line;
}

Core::Core(mem::MemorySystem& memory, cim::CimMacro& macro) : mem_(memory), macro_(macro) {}

void Core::load_program(std::span<const uint32_t> words) {
  auto& imem = mem_.imem();
  if (words.size() * 4 > imem.size()) {
    throw BoundsError(fmt::format("program of {} words exceeds instruction memory ({} bytes)", words.size(),
                                  imem.size()));
  }
  std::fill(imem.bytes().begin(), imem.bytes().end(), 0);
  decoded_.assign(imem.size() / 4, std::nullopt);
  for (size_t i = 0; i < words.size(); ++i) {
    imem.write_word(static_cast<uint32_t>(4 * i), words[i]);
    try {
      decoded_[i] = isa::decode(words[i]);
    } catch (const IllegalInstruction&) {
      // Trapped when executed.
    }
  }
  // Zero words beyond the program decode as illegal (opcode 0).
  state_ = MachineState{};
  if (profiling_) profile_.assign(decoded_.size(), 0);
}

void Core::enable_profile(bool on) {
  profiling_ = on;
  profile_.assign(on ? decoded_.size() : 0, 0);
}

Trap Core::make_trap(TrapCause c, uint32_t value, std::string msg) const {
  return Trap{c, state_.pc, value, std::move(msg)};
}

std::optional<Trap> Core::load(uint32_t addr, unsigned size, bool sign, uint32_t& out, uint64_t& cycles) {
  if (addr % size) return make_trap(TrapCause::MisalignedAccess, addr, fmt::format("misaligned load at 0x{:08X}", addr));
  uint32_t raw = 0;
  switch (mem_.region_of(addr, size)) {
    case mem::Region::Dmem:
      raw = mem_.dmem().load(addr - mem::kDmemBase, size);
      break;
    case mem::Region::Fm:
    case mem::Region::Weight: {
      const uint32_t word = mem_.read_word_at(addr & ~3u);
      raw = word >> (8 * (addr & 3));
      break;
    }
    case mem::Region::Dma: {
      if (size != 4) return make_trap(TrapCause::AccessFault, addr, "uDMA registers are word-access only");
      const uint32_t off = addr - mem::kDmaBase;
      if (off == mem::kDmaWait) {
        if (mem_.dma().state() == mem::DmaState::Busy) cycles += mem_.dma().remaining();
        raw = 0;
      } else if (off == mem::kDmaCtrl) {
        raw = static_cast<uint32_t>(mem_.dma().state());
      } else if (off == mem::kDmaSrc) {
        raw = dma_regs_.src;
      } else if (off == mem::kDmaDst) {
        raw = dma_regs_.dst;
      } else {
        raw = dma_regs_.length_words;
      }
      break;
    }
    default:
      return make_trap(TrapCause::AccessFault, addr, fmt::format("load from unmapped address 0x{:08X}", addr));
  }
  if (size == 1) raw = sign ? static_cast<uint32_t>(static_cast<int8_t>(raw)) : (raw & 0xFF);
  if (size == 2) raw = sign ? static_cast<uint32_t>(static_cast<int16_t>(raw)) : (raw & 0xFFFF);
  out = raw;
  return std::nullopt;
}

std::optional<Trap> Core::store(uint32_t addr, unsigned size, uint32_t value, bool& started_dma) {
  if (addr % size) return make_trap(TrapCause::MisalignedAccess, addr, fmt::format("misaligned store at 0x{:08X}", addr));
  switch (mem_.region_of(addr, size)) {
    case mem::Region::Dmem:
      mem_.dmem().store(addr - mem::kDmemBase, size, value);
      return std::nullopt;
    case mem::Region::Fm:
    case mem::Region::Weight: {
      const uint32_t base = addr & ~3u;
      uint32_t word = mem_.read_word_at(base);
      const unsigned shift = 8 * (addr & 3);
      const uint32_t mask = size == 4 ? 0xFFFFFFFFu : (((1u << (8 * size)) - 1) << shift);
      word = (word & ~mask) | ((value << shift) & mask);
      mem_.write_word_at(base, word);
      return std::nullopt;
    }
    case mem::Region::Dma: {
      if (size != 4) return make_trap(TrapCause::AccessFault, addr, "uDMA registers are word-access only");
      const uint32_t off = addr - mem::kDmaBase;
      if (off == mem::kDmaSrc) {
        dma_regs_.src = value;
      } else if (off == mem::kDmaDst) {
        dma_regs_.dst = value;
      } else if (off == mem::kDmaLen) {
        dma_regs_.length_words = value;
      } else if (off == mem::kDmaCtrl) {
        if (value != 0) {
          if (auto err = mem_.dma_start(dma_regs_)) return make_trap(TrapCause::DmaError, addr, *err);
          started_dma = true;
        }
      } else {
        return make_trap(TrapCause::AccessFault, addr, "uDMA WAIT register is read-only");
      }
      return std::nullopt;
    }
    default:
      return make_trap(TrapCause::AccessFault, addr, fmt::format("store to unmapped address 0x{:08X}", addr));
  }
}

ExecResult Core::exec_cim_conv(const Instruction& in, std::string* effects) {
  const auto& fm = mem_.fm();
  const uint32_t src = state_.regs[in.rs1] + static_cast<uint32_t>(static_cast<int32_t>(in.imm_s));
  const uint32_t dst = state_.regs[in.rs2] + static_cast<uint32_t>(static_cast<int32_t>(in.imm_d));
  const uint32_t out_words = macro_.mode().output_words();
  if (!fm.in_range(src)) {
    return {1, make_trap(TrapCause::CimBounds, src, fmt::format("cim.conv source word {} outside FM SRAM", src))};
  }
  if (!fm.in_range(dst, out_words)) {
    return {1, make_trap(TrapCause::CimBounds, dst,
                         fmt::format("cim.conv destination words [{}, {}) outside FM SRAM", dst, dst + out_words))};
  }
  const auto out = macro_.convolve(fm.read(src));
  mem_.fm().write_block(dst, out);
  if (effects) *effects = fmt::format("fm[{}]->buf fm[{}..{}]", src, dst, dst + out_words - 1);
  return {1, std::nullopt};
}

ExecResult Core::exec_cim_read(const Instruction& in, std::string* effects) {
  const uint32_t seg = state_.regs[in.rs1] + static_cast<uint32_t>(static_cast<int32_t>(in.imm_s));
  const uint32_t dst = state_.regs[in.rs2] + static_cast<uint32_t>(static_cast<int32_t>(in.imm_d));
  if (!macro_.segment_in_range(seg)) {
    return {1, make_trap(TrapCause::CimBounds, seg, fmt::format("cim.read macro segment {} out of range", seg))};
  }
  if (!mem_.weight().in_range(dst, 2)) {
    return {1, make_trap(TrapCause::CimBounds, dst, fmt::format("cim.read weight SRAM word {} out of range", dst))};
  }
  const auto values = macro_.read_segment(seg);
  const auto packed = cim::pack_segment(values);
  mem_.weight().write(dst, packed[0]);
  mem_.weight().write(dst + 1, packed[1]);
  if (effects) *effects = fmt::format("seg[{}]->w[{}]=0x{:08x},0x{:08x}", seg, dst, packed[0], packed[1]);
  return {1, std::nullopt};
}

ExecResult Core::exec_cim_write(const Instruction& in, std::string* effects) {
  const uint32_t src = state_.regs[in.rs1] + static_cast<uint32_t>(static_cast<int32_t>(in.imm_s));
  const uint32_t seg = state_.regs[in.rs2] + static_cast<uint32_t>(static_cast<int32_t>(in.imm_d));
  if (!mem_.weight().in_range(src, 2)) {
    return {1, make_trap(TrapCause::CimBounds, src, fmt::format("cim.write weight SRAM word {} out of range", src))};
  }
  if (!macro_.segment_in_range(seg)) {
    return {1, make_trap(TrapCause::CimBounds, seg, fmt::format("cim.write macro segment {} out of range", seg))};
  }
  const cim::PackedSegment packed{mem_.weight().read(src), mem_.weight().read(src + 1)};
  if (auto bad = cim::find_invalid_code(packed)) {
    const uint32_t word = src + *bad;
    return {1, make_trap(TrapCause::CimInvalidWeight, word,
                         fmt::format("cim.write: weight SRAM word {} holds invalid code 0b11", word))};
  }
  const auto values = cim::unpack_segment(packed);
  macro_.write_segment(seg, values);
  if (effects) *effects = fmt::format("w[{}]->seg[{}]", src, seg);
  return {1, std::nullopt};
}

ExecResult Core::step(TraceEntry* trace) {
  if (state_.halted) throw Error("step() on a halted core");
  const uint32_t pc = state_.pc;
  if (pc % 4) return {1, make_trap(TrapCause::MisalignedFetch, pc, fmt::format("misaligned pc 0x{:08X}", pc))};
  const uint32_t index = pc / 4;
  if (index >= decoded_.size()) {
    return {1, make_trap(TrapCause::AccessFault, pc, fmt::format("pc 0x{:08X} outside instruction memory", pc))};
  }
  if (!decoded_[index]) {
    const uint32_t word = mem_.imem().read_word(pc);
    return {1, make_trap(TrapCause::IllegalInstruction, word, fmt::format("illegal instruction 0x{:08X}", word))};
  }
  const Instruction& in = *decoded_[index];
  auto& r = state_.regs;
  const uint32_t a = r[in.rs1];
  const uint32_t b = r[in.rs2];
  const auto imm = static_cast<uint32_t>(in.imm);
  const uint32_t penalty = mem_.config().latency.taken_branch_penalty;

  uint64_t cycles = 1;
  uint32_t next_pc = pc + 4;
  bool started_dma = false;
  std::optional<uint32_t> rd_value;
  std::string effects;
  std::string* fx = trace ? &effects : nullptr;

  auto branch = [&](bool taken) {
    if (taken) {
      next_pc = pc + imm;
      cycles += penalty;
    }
  };

  switch (in.op) {
    case Op::Lui: rd_value = imm; break;
    case Op::Auipc: rd_value = pc + imm; break;
    case Op::Jal:
      rd_value = pc + 4;
      next_pc = pc + imm;
      cycles += penalty;
      break;
    case Op::Jalr: {
      const uint32_t target = (a + imm) & ~1u;
      if (target % 4) {
        return {1, make_trap(TrapCause::MisalignedFetch, target, fmt::format("jalr to misaligned 0x{:08X}", target))};
      }
      rd_value = pc + 4;
      next_pc = target;
      cycles += penalty;
      break;
    }
    case Op::Beq: branch(a == b); break;
    case Op::Bne: branch(a != b); break;
    case Op::Blt: branch(static_cast<int32_t>(a) < static_cast<int32_t>(b)); break;
    case Op::Bge: branch(static_cast<int32_t>(a) >= static_cast<int32_t>(b)); break;
    case Op::Bltu: branch(a < b); break;
    case Op::Bgeu: branch(a >= b); break;
    case Op::Lb:
    case Op::Lh:
    case Op::Lw:
    case Op::Lbu:
    case Op::Lhu: {
      const unsigned size = (in.op == Op::Lw) ? 4 : (in.op == Op::Lh || in.op == Op::Lhu) ? 2 : 1;
      const bool sign = in.op == Op::Lb || in.op == Op::Lh;
      uint32_t v = 0;
      if (auto t = load(a + imm, size, sign, v, cycles)) return {1, std::move(t)};
      rd_value = v;
      break;
    }
    case Op::Sb:
    case Op::Sh:
    case Op::Sw: {
      const unsigned size = in.op == Op::Sw ? 4 : in.op == Op::Sh ? 2 : 1;
      if (auto t = store(a + imm, size, b, started_dma)) return {1, std::move(t)};
      if (fx) effects = fmt::format("mem[0x{:08x}]=0x{:x}", a + imm, size == 4 ? b : b & ((1u << (8 * size)) - 1));
      break;
    }
    case Op::Addi: rd_value = a + imm; break;
    case Op::Slti: rd_value = static_cast<int32_t>(a) < in.imm ? 1u : 0u; break;
    case Op::Sltiu: rd_value = a < imm ? 1u : 0u; break;
    case Op::Xori: rd_value = a ^ imm; break;
    case Op::Ori: rd_value = a | imm; break;
    case Op::Andi: rd_value = a & imm; break;
    case Op::Slli: rd_value = a << (imm & 31); break;
    case Op::Srli: rd_value = a >> (imm & 31); break;
    case Op::Srai: rd_value = static_cast<uint32_t>(static_cast<int32_t>(a) >> (imm & 31)); break;
    case Op::Add: rd_value = a + b; break;
    case Op::Sub: rd_value = a - b; break;
    case Op::Sll: rd_value = a << (b & 31); break;
    case Op::Slt: rd_value = static_cast<int32_t>(a) < static_cast<int32_t>(b) ? 1u : 0u; break;
    case Op::Sltu: rd_value = a < b ? 1u : 0u; break;
    case Op::Xor: rd_value = a ^ b; break;
    case Op::Srl: rd_value = a >> (b & 31); break;
    case Op::Sra: rd_value = static_cast<uint32_t>(static_cast<int32_t>(a) >> (b & 31)); break;
    case Op::Or: rd_value = a | b; break;
    case Op::And: rd_value = a & b; break;
    case Op::Fence: break;
    case Op::Ecall: return {1, make_trap(TrapCause::EnvironmentCall, pc, "ecall")};
    case Op::Ebreak: return {1, make_trap(TrapCause::Breakpoint, pc, "ebreak")};
    case Op::CimConv:
    case Op::CimRead:
    case Op::CimWrite: {
      ExecResult res = in.op == Op::CimConv   ? exec_cim_conv(in, fx)
                       : in.op == Op::CimRead ? exec_cim_read(in, fx)
                                              : exec_cim_write(in, fx);
      if (res.trap) return res;
      break;
    }
  }

  if (rd_value && in.rd != 0) {
    r[in.rd] = *rd_value;
    if (fx) effects = fmt::format("x{}=0x{:08x}", in.rd, *rd_value);
  }
  r[0] = 0;
  if (in.op == Op::Jal && in.imm == 0) state_.halted = true;
  if (started_dma && fx) effects = fmt::format("dma.start len={}", dma_regs_.length_words);

  if (trace) *trace = TraceEntry{state_.cycle, pc, in, cycles, std::move(effects)};
  if (profiling_) profile_[index] += cycles;
  state_.cycle += cycles;
  state_.pc = next_pc;
  if (!started_dma) mem_.tick(cycles);
  return {cycles, std::nullopt};
}

RunResult Core::run(uint64_t max_cycles, bool record_trace) {
  RunResult result;
  while (!state_.halted) {
    if (state_.cycle >= max_cycles) {
      result.status = RunStatus::Timeout;
      return result;
    }
    TraceEntry entry;
    ExecResult res = step(record_trace ? &entry : nullptr);
    if (res.trap) {
      result.status = RunStatus::Trapped;
      result.trap = std::move(res.trap);
      return result;
    }
    ++result.retired;
    if (record_trace) result.trace.push_back(std::move(entry));
  }
  result.status = RunStatus::Halted;
  return result;
}

}  // namespace rvcim::core
