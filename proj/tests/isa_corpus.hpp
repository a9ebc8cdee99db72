#pragma once

#include <cstdint>

namespace rvcim::testdata {

// Words assembled field-by-field by an external script, not by encode().
struct CorpusEntry {
  const char* text;
  uint32_t word;
};

inline const CorpusEntry kCorpus[] = {
    {"add x3, x1, x2", 0x002081B3u},
    {"sub x5, x6, x7", 0x407302B3u},
    {"addi x1, x0, 5", 0x00500093u},
    {"addi x2, x2, -16", 0xFF010113u},
    {"lw x5, 8(x2)", 0x00812283u},
    {"lh x6, -2(x10)", 0xFFE51303u},
    {"sw x5, 8(x2)", 0x00512423u},
    {"sb x7, -1(x3)", 0xFE718FA3u},
    {"beq x1, x2, 8", 0x00208463u},
    {"bne x5, x0, -12", 0xFE029AE3u},
    {"bgeu x1, x2, 4094", 0x7E20FFE3u},
    {"jal x0, 0", 0x0000006Fu},
    {"jal x1, -2048", 0x801FF0EFu},
    {"jalr x0, 0(x1)", 0x00008067u},
    {"lui x5, 0x12345", 0x123452B7u},
    {"auipc x4, 0xFFFFF", 0xFFFFF217u},
    {"srai x1, x2, 3", 0x40315093u},
    {"slli x9, x9, 31", 0x01F49493u},
    {"sltiu x3, x4, -1", 0xFFF23193u},
    {"sra x8, x9, x10", 0x40A4D433u},
    {"and x1, x2, x3", 0x003170B3u},
    {"ecall", 0x00000073u},
    {"ebreak", 0x00100073u},
    {"cim.conv x1, x2, 0, 4", 0x0020827Eu},
    {"cim.read x0, x0, 0, 0", 0x0000107Eu},
    {"cim.write x3, x4, -64, -16", 0x8041A87Eu},
    {"cim.conv x31, x30, 63, 15", 0x7FEF87FEu},
};

}  // namespace rvcim::testdata
