#include "rvcim/isa.hpp"

#include <array>

#include <fmt/format.h>

#include "rvcim/error.hpp"

namespace rvcim::isa {
namespace {

constexpr uint32_t kOpLui = 0b0110111;
constexpr uint32_t kOpAuipc = 0b0010111;
constexpr uint32_t kOpJal = 0b1101111;
constexpr uint32_t kOpJalr = 0b1100111;
constexpr uint32_t kOpBranch = 0b1100011;
constexpr uint32_t kOpLoad = 0b0000011;
constexpr uint32_t kOpStore = 0b0100011;
constexpr uint32_t kOpImm = 0b0010011;
constexpr uint32_t kOpReg = 0b0110011;
constexpr uint32_t kOpMiscMem = 0b0001111;
constexpr uint32_t kOpSystem = 0b1110011;

enum class Format { R, I, Shift, S, B, U, J, Fence, System, Cim };

struct OpInfo {
  Op op;
  std::string_view name;
  Format format;
  uint32_t opcode;
  uint32_t funct3;
  uint32_t funct7;
};

constexpr std::array<OpInfo, 43> kOps{{
    {Op::Lui, "lui", Format::U, kOpLui, 0, 0},
    {Op::Auipc, "auipc", Format::U, kOpAuipc, 0, 0},
    {Op::Jal, "jal", Format::J, kOpJal, 0, 0},
    {Op::Jalr, "jalr", Format::I, kOpJalr, 0b000, 0},
    {Op::Beq, "beq", Format::B, kOpBranch, 0b000, 0},
    {Op::Bne, "bne", Format::B, kOpBranch, 0b001, 0},
    {Op::Blt, "blt", Format::B, kOpBranch, 0b100, 0},
    {Op::Bge, "bge", Format::B, kOpBranch, 0b101, 0},
    {Op::Bltu, "bltu", Format::B, kOpBranch, 0b110, 0},
    {Op::Bgeu, "bgeu", Format::B, kOpBranch, 0b111, 0},
    {Op::Lb, "lb", Format::I, kOpLoad, 0b000, 0},
    {Op::Lh, "lh", Format::I, kOpLoad, 0b001, 0},
    {Op::Lw, "lw", Format::I, kOpLoad, 0b010, 0},
    {Op::Lbu, "lbu", Format::I, kOpLoad, 0b100, 0},
    {Op::Lhu, "lhu", Format::I, kOpLoad, 0b101, 0},
    {Op::Sb, "sb", Format::S, kOpStore, 0b000, 0},
    {Op::Sh, "sh", Format::S, kOpStore, 0b001, 0},
    {Op::Sw, "sw", Format::S, kOpStore, 0b010, 0},
    {Op::Addi, "addi", Format::I, kOpImm, 0b000, 0},
    {Op::Slti, "slti", Format::I, kOpImm, 0b010, 0},
    {Op::Sltiu, "sltiu", Format::I, kOpImm, 0b011, 0},
    {Op::Xori, "xori", Format::I, kOpImm, 0b100, 0},
    {Op::Ori, "ori", Format::I, kOpImm, 0b110, 0},
    {Op::Andi, "andi", Format::I, kOpImm, 0b111, 0},
    {Op::Slli, "slli", Format::Shift, kOpImm, 0b001, 0b0000000},
    {Op::Srli, "srli", Format::Shift, kOpImm, 0b101, 0b0000000},
    {Op::Srai, "srai", Format::Shift, kOpImm, 0b101, 0b0100000},
    {Op::Add, "add", Format::R, kOpReg, 0b000, 0b0000000},
    {Op::Sub, "sub", Format::R, kOpReg, 0b000, 0b0100000},
    {Op::Sll, "sll", Format::R, kOpReg, 0b001, 0b0000000},
    {Op::Slt, "slt", Format::R, kOpReg, 0b010, 0b0000000},
    {Op::Sltu, "sltu", Format::R, kOpReg, 0b011, 0b0000000},
    {Op::Xor, "xor", Format::R, kOpReg, 0b100, 0b0000000},
    {Op::Srl, "srl", Format::R, kOpReg, 0b101, 0b0000000},
    {Op::Sra, "sra", Format::R, kOpReg, 0b101, 0b0100000},
    {Op::Or, "or", Format::R, kOpReg, 0b110, 0b0000000},
    {Op::And, "and", Format::R, kOpReg, 0b111, 0b0000000},
    {Op::Fence, "fence", Format::Fence, kOpMiscMem, 0b000, 0},
    {Op::Ecall, "ecall", Format::System, kOpSystem, 0, 0},
    {Op::Ebreak, "ebreak", Format::System, kOpSystem, 0, 1},
    {Op::CimConv, "cim.conv", Format::Cim, kCimOpcode, 0b000, 0},
    {Op::CimRead, "cim.read", Format::Cim, kCimOpcode, 0b001, 0},
    {Op::CimWrite, "cim.write", Format::Cim, kCimOpcode, 0b010, 0},
}};

const OpInfo& info(Op op) {
  for (const auto& e : kOps) {
    if (e.op == op) return e;
  }
  throw Error("unknown op");
}

void check_reg(unsigned r, const char* field) {
  if (r >= 32) throw EncodingError(field, fmt::format("register {} out of range in field {}", r, field));
}

void check_range(int64_t v, int64_t lo, int64_t hi, const char* field) {
  if (v < lo || v > hi) {
    throw EncodingError(field, fmt::format("{}={} does not fit [{}, {}]", field, v, lo, hi));
  }
}

int32_t sext(uint32_t value, unsigned bits) {
  const uint32_t m = 1u << (bits - 1);
  value &= (bits == 32) ? 0xFFFFFFFFu : ((1u << bits) - 1);
  return static_cast<int32_t>((value ^ m) - m);
}

uint32_t bits(uint32_t w, unsigned hi, unsigned lo) { return (w >> lo) & ((1u << (hi - lo + 1)) - 1); }

}  // namespace

bool is_cim(Op op) { return op == Op::CimConv || op == Op::CimRead || op == Op::CimWrite; }

std::optional<CimOp> cim_op(Op op) {
  switch (op) {
    case Op::CimConv: return CimOp::Conv;
    case Op::CimRead: return CimOp::Read;
    case Op::CimWrite: return CimOp::Write;
    default: return std::nullopt;
  }
}

bool is_branch(Op op) { return info(op).format == Format::B; }
bool is_load(Op op) { return info(op).opcode == kOpLoad; }
bool is_store(Op op) { return info(op).format == Format::S; }
std::string_view mnemonic(Op op) { return info(op).name; }

uint32_t encode(const Instruction& in) {
  const OpInfo& oi = info(in.op);
  check_reg(in.rd, "rd");
  check_reg(in.rs1, "rs1");
  check_reg(in.rs2, "rs2");
  const bool uses_rd = oi.format != Format::S && oi.format != Format::B && oi.format != Format::System &&
                       oi.format != Format::Cim;
  const bool uses_rs1 = oi.format != Format::U && oi.format != Format::J && oi.format != Format::System;
  const bool uses_rs2 = oi.format == Format::R || oi.format == Format::S || oi.format == Format::B ||
                        oi.format == Format::Cim;
  if (!uses_rd && in.rd) throw EncodingError("rd", fmt::format("{} has no rd field", oi.name));
  if (!uses_rs1 && in.rs1) throw EncodingError("rs1", fmt::format("{} has no rs1 field", oi.name));
  if (!uses_rs2 && in.rs2) throw EncodingError("rs2", fmt::format("{} has no rs2 field", oi.name));
  if (oi.format != Format::Cim && (in.imm_s || in.imm_d)) {
    throw EncodingError(in.imm_s ? "imm_s" : "imm_d", "imm_s/imm_d are only valid on CIM-type instructions");
  }
  if (oi.format == Format::R && in.imm) throw EncodingError("imm", "R-type instructions take no immediate");
  const uint32_t rd = in.rd, rs1 = in.rs1, rs2 = in.rs2;
  const uint32_t f3 = oi.funct3 << 12;
  switch (oi.format) {
    case Format::R:
      return (oi.funct7 << 25) | (rs2 << 20) | (rs1 << 15) | f3 | (rd << 7) | oi.opcode;
    case Format::I:
      check_range(in.imm, -2048, 2047, "imm");
      return (static_cast<uint32_t>(in.imm & 0xFFF) << 20) | (rs1 << 15) | f3 | (rd << 7) | oi.opcode;
    case Format::Shift:
      check_range(in.imm, 0, 31, "shamt");
      return (oi.funct7 << 25) | (static_cast<uint32_t>(in.imm) << 20) | (rs1 << 15) | f3 | (rd << 7) |
             oi.opcode;
    case Format::S: {
      check_range(in.imm, -2048, 2047, "imm");
      const auto u = static_cast<uint32_t>(in.imm);
      return (bits(u, 11, 5) << 25) | (rs2 << 20) | (rs1 << 15) | f3 | (bits(u, 4, 0) << 7) | oi.opcode;
    }
    case Format::B: {
      check_range(in.imm, -4096, 4094, "imm");
      if (in.imm & 1) throw EncodingError("imm", "branch offset must be even");
      const auto u = static_cast<uint32_t>(in.imm);
      return (bits(u, 12, 12) << 31) | (bits(u, 10, 5) << 25) | (rs2 << 20) | (rs1 << 15) | f3 |
             (bits(u, 4, 1) << 8) | (bits(u, 11, 11) << 7) | oi.opcode;
    }
    case Format::U:
      if (in.imm & 0xFFF) throw EncodingError("imm", "U-type immediate must have zero low 12 bits");
      return static_cast<uint32_t>(in.imm) | (rd << 7) | oi.opcode;
    case Format::J: {
      check_range(in.imm, -(1 << 20), (1 << 20) - 2, "imm");
      if (in.imm & 1) throw EncodingError("imm", "jump offset must be even");
      const auto u = static_cast<uint32_t>(in.imm);
      return (bits(u, 20, 20) << 31) | (bits(u, 10, 1) << 21) | (bits(u, 11, 11) << 20) |
             (bits(u, 19, 12) << 12) | (rd << 7) | oi.opcode;
    }
    case Format::Fence:
      check_range(in.imm, -2048, 2047, "imm");
      return (static_cast<uint32_t>(in.imm & 0xFFF) << 20) | (rs1 << 15) | f3 | (rd << 7) | oi.opcode;
    case Format::System:
      if (rd || rs1 || rs2 || in.imm) throw EncodingError("imm", "system instructions take no operands");
      return (oi.funct7 << 20) | oi.opcode;
    case Format::Cim:
      if (in.imm) throw EncodingError("imm", "CIM-type instructions use imm_s/imm_d");
      check_range(in.imm_s, kImmSMin, kImmSMax, "imm_s");
      check_range(in.imm_d, kImmDMin, kImmDMax, "imm_d");
      return (static_cast<uint32_t>(in.imm_s & 0x7F) << 25) | (rs2 << 20) | (rs1 << 15) | f3 |
             (static_cast<uint32_t>(in.imm_d & 0x1F) << 7) | kCimOpcode;
  }
  throw Error("unreachable");
}

Instruction decode(uint32_t w) {
  const uint32_t opcode = bits(w, 6, 0);
  const uint32_t funct3 = bits(w, 14, 12);
  const uint32_t funct7 = bits(w, 31, 25);
  const auto rd = static_cast<uint8_t>(bits(w, 11, 7));
  const auto rs1 = static_cast<uint8_t>(bits(w, 19, 15));
  const auto rs2 = static_cast<uint8_t>(bits(w, 24, 20));
  auto illegal = [w](const char* why) {
    return IllegalInstruction(w, fmt::format("illegal instruction 0x{:08X}: {}", w, why));
  };

  const OpInfo* match = nullptr;
  for (const auto& e : kOps) {
    if (e.opcode != opcode) continue;
    switch (e.format) {
      case Format::U:
      case Format::J:
        match = &e;
        break;
      case Format::R:
      case Format::Shift:
        if (e.funct3 == funct3 && e.funct7 == funct7) match = &e;
        break;
      case Format::System:
        if (w == ((e.funct7 << 20) | e.opcode)) match = &e;
        break;
      default:
        if (e.funct3 == funct3) match = &e;
        break;
    }
    if (match) break;
  }
  if (!match) {
    if (opcode == kCimOpcode) throw illegal("unknown CIM funct3");
    if (opcode == kOpSystem) throw illegal("unsupported system instruction");
    throw illegal("unknown opcode/funct");
  }

  Instruction in;
  in.op = match->op;
  switch (match->format) {
    case Format::R:
      in.rd = rd, in.rs1 = rs1, in.rs2 = rs2;
      break;
    case Format::I:
    case Format::Fence:
      in.rd = rd, in.rs1 = rs1, in.imm = sext(bits(w, 31, 20), 12);
      break;
    case Format::Shift:
      in.rd = rd, in.rs1 = rs1, in.imm = static_cast<int32_t>(rs2);
      break;
    case Format::S:
      in.rs1 = rs1, in.rs2 = rs2, in.imm = sext((funct7 << 5) | rd, 12);
      break;
    case Format::B:
      in.rs1 = rs1, in.rs2 = rs2;
      in.imm = sext((bits(w, 31, 31) << 12) | (bits(w, 7, 7) << 11) | (bits(w, 30, 25) << 5) |
                        (bits(w, 11, 8) << 1),
                    13);
      break;
    case Format::U:
      in.rd = rd, in.imm = static_cast<int32_t>(w & 0xFFFFF000u);
      break;
    case Format::J:
      in.rd = rd;
      in.imm = sext((bits(w, 31, 31) << 20) | (bits(w, 19, 12) << 12) | (bits(w, 20, 20) << 11) |
                        (bits(w, 30, 21) << 1),
                    21);
      break;
    case Format::System:
      break;
    case Format::Cim:
      in.rs1 = rs1, in.rs2 = rs2;
      in.imm_s = static_cast<int8_t>(sext(funct7, 7));
      in.imm_d = static_cast<int8_t>(sext(rd, 5));
      break;
  }
  return in;
}

Instruction cim(CimOp op, unsigned rs1, unsigned rs2, int imm_s, int imm_d) {
  Instruction in;
  in.op = op == CimOp::Conv ? Op::CimConv : op == CimOp::Read ? Op::CimRead : Op::CimWrite;
  check_reg(rs1, "rs1");
  check_reg(rs2, "rs2");
  check_range(imm_s, kImmSMin, kImmSMax, "imm_s");
  check_range(imm_d, kImmDMin, kImmDMax, "imm_d");
  in.rs1 = static_cast<uint8_t>(rs1);
  in.rs2 = static_cast<uint8_t>(rs2);
  in.imm_s = static_cast<int8_t>(imm_s);
  in.imm_d = static_cast<int8_t>(imm_d);
  return in;
}

Instruction r_type(Op op, unsigned rd, unsigned rs1, unsigned rs2) {
  Instruction in;
  in.op = op;
  in.rd = static_cast<uint8_t>(rd);
  in.rs1 = static_cast<uint8_t>(rs1);
  in.rs2 = static_cast<uint8_t>(rs2);
  return in;
}

Instruction i_type(Op op, unsigned rd, unsigned rs1, int32_t imm) {
  Instruction in;
  in.op = op;
  in.rd = static_cast<uint8_t>(rd);
  in.rs1 = static_cast<uint8_t>(rs1);
  in.imm = imm;
  return in;
}

Instruction s_type(Op op, unsigned rs1_base, unsigned rs2_src, int32_t imm) {
  Instruction in;
  in.op = op;
  in.rs1 = static_cast<uint8_t>(rs1_base);
  in.rs2 = static_cast<uint8_t>(rs2_src);
  in.imm = imm;
  return in;
}

Instruction b_type(Op op, unsigned rs1, unsigned rs2, int32_t offset) {
  Instruction in;
  in.op = op;
  in.rs1 = static_cast<uint8_t>(rs1);
  in.rs2 = static_cast<uint8_t>(rs2);
  in.imm = offset;
  return in;
}

Instruction u_type(Op op, unsigned rd, int32_t value) {
  Instruction in;
  in.op = op;
  in.rd = static_cast<uint8_t>(rd);
  in.imm = value;
  return in;
}

Instruction jal(unsigned rd, int32_t offset) {
  Instruction in;
  in.op = Op::Jal;
  in.rd = static_cast<uint8_t>(rd);
  in.imm = offset;
  return in;
}

std::string disassemble(const Instruction& in) {
  const OpInfo& oi = info(in.op);
  const auto name = oi.name;
  switch (oi.format) {
    case Format::R:
      return fmt::format("{} x{}, x{}, x{}", name, in.rd, in.rs1, in.rs2);
    case Format::I:
      if (is_load(in.op) || in.op == Op::Jalr) return fmt::format("{} x{}, {}(x{})", name, in.rd, in.imm, in.rs1);
      return fmt::format("{} x{}, x{}, {}", name, in.rd, in.rs1, in.imm);
    case Format::Shift:
      return fmt::format("{} x{}, x{}, {}", name, in.rd, in.rs1, in.imm);
    case Format::S:
      return fmt::format("{} x{}, {}(x{})", name, in.rs2, in.imm, in.rs1);
    case Format::B:
      return fmt::format("{} x{}, x{}, {}", name, in.rs1, in.rs2, in.imm);
    case Format::U:
      return fmt::format("{} x{}, 0x{:X}", name, in.rd, static_cast<uint32_t>(in.imm) >> 12);
    case Format::J:
      return fmt::format("{} x{}, {}", name, in.rd, in.imm);
    case Format::Fence:
      if (in.rd == 0 && in.rs1 == 0 && in.imm == 0x0FF) return "fence";
      return fmt::format("{} x{}, {}(x{})", name, in.rd, in.imm, in.rs1);
    case Format::System:
      return std::string(name);
    case Format::Cim:
      return fmt::format("{} x{}, x{}, {}, {}", name, in.rs1, in.rs2, in.imm_s, in.imm_d);
  }
  return {};
}

}  // namespace rvcim::isa
