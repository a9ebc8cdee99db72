#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvcim/isa.hpp"

namespace rvcim::isa {

// Assembles one instruction per line. `#` starts a comment, `name:` defines a
// label. Branch and jump targets may be labels (resolved PC-relative) or
// literal byte offsets. Single-word pseudo-instructions are accepted:
// nop, mv, not, neg, j, jr, ret, beqz, bnez, li (12-bit immediates only).
// Throws AsmError carrying the 1-based line number.
std::vector<Instruction> assemble_instructions(std::string_view source);
std::vector<uint32_t> assemble(std::string_view source);

// One disassembled instruction per line, no labels. The output assembles back
// to the same words.
std::string disassemble_program(std::span<const uint32_t> words);

// Flat little-endian image helpers.
std::vector<uint8_t> to_image(std::span<const uint32_t> words);
std::vector<uint32_t> from_image(std::span<const uint8_t> bytes);

}  // namespace rvcim::isa
