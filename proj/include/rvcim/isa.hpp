// isa.hpp: RV32I base subset plus the CIM-type custom instructions.
//
// CIM-type word layout (opcode 0b1111110):
//
//   31      25 24  20 19  15 14  12 11    7 6       0
//  +----------+------+------+------+-------+---------+
//  |  imm_s   | rs2  | rs1  |funct3| imm_d | 1111110 |
//  +----------+------+------+------+-------+---------+
//
// funct3 selects conv (000), read (001), write (010). Both immediates are
// signed word offsets: imm_s in [-64, 63], imm_d in [-16, 15].
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rvcim::isa {

inline constexpr uint32_t kCimOpcode = 0b1111110;

enum class Op : uint8_t {
  // U / J
  Lui, Auipc, Jal, Jalr,
  // B
  Beq, Bne, Blt, Bge, Bltu, Bgeu,
  // loads / stores
  Lb, Lh, Lw, Lbu, Lhu, Sb, Sh, Sw,
  // OP-IMM
  Addi, Slti, Sltiu, Xori, Ori, Andi, Slli, Srli, Srai,
  // OP
  Add, Sub, Sll, Slt, Sltu, Xor, Srl, Sra, Or, And,
  // system
  Fence, Ecall, Ebreak,
  // CIM-type
  CimConv, CimRead, CimWrite,
};

enum class CimOp : uint8_t { Conv = 0b000, Read = 0b001, Write = 0b010 };

inline constexpr int kImmSMin = -64, kImmSMax = 63;
inline constexpr int kImmDMin = -16, kImmDMax = 15;

// A decoded instruction. Fields a given op does not use are zero, so two
// instructions compare equal iff they encode to the same word.
struct Instruction {
  Op op = Op::Addi;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  int32_t imm = 0;    // base ops; LUI/AUIPC hold the shifted value (imm20 << 12)
  int8_t imm_s = 0;   // CIM only
  int8_t imm_d = 0;   // CIM only

  bool is_cim() const { return op == Op::CimConv || op == Op::CimRead || op == Op::CimWrite; }
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

bool is_cim(Op op);
std::optional<CimOp> cim_op(Op op);
bool is_branch(Op op);
bool is_load(Op op);
bool is_store(Op op);
std::string_view mnemonic(Op op);

// Throws EncodingError naming the offending field.
uint32_t encode(const Instruction& inst);
// Throws IllegalInstruction carrying the word.
Instruction decode(uint32_t word);

// Convenience constructors used by the code generator and tests.
Instruction cim(CimOp op, unsigned rs1, unsigned rs2, int imm_s, int imm_d);
Instruction r_type(Op op, unsigned rd, unsigned rs1, unsigned rs2);
Instruction i_type(Op op, unsigned rd, unsigned rs1, int32_t imm);
Instruction s_type(Op op, unsigned rs1_base, unsigned rs2_src, int32_t imm);
Instruction b_type(Op op, unsigned rs1, unsigned rs2, int32_t offset);
Instruction u_type(Op op, unsigned rd, int32_t value);  // value low 12 bits must be 0
Instruction jal(unsigned rd, int32_t offset);

// Single-line assembly text, e.g. "cim.conv x1, x2, 0, 4" or "lw x5, 8(x2)".
std::string disassemble(const Instruction& inst);

}  // namespace rvcim::isa
