#include "rvcim/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "rvcim/error.hpp"

namespace rvcim::isa {
namespace {

const std::map<std::string, Op, std::less<>>& op_table() {
  static const std::map<std::string, Op, std::less<>> table = [] {
    std::map<std::string, Op, std::less<>> t;
    for (int i = 0; i <= static_cast<int>(Op::CimWrite); ++i) {
      const auto op = static_cast<Op>(i);
      t.emplace(std::string(mnemonic(op)), op);
    }
    return t;
  }();
  return table;
}

std::optional<unsigned> parse_reg(std::string_view s) {
  static const char* abi[32] = {"zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0",
                                "a1",   "a2", "a3", "a4", "a5", "a6", "a7", "s2", "s3", "s4", "s5",
                                "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};
  if (s.size() >= 2 && s[0] == 'x') {
    unsigned v = 0;
    auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size() && v < 32) return v;
    return std::nullopt;
  }
  if (s == "fp") return 8;
  for (unsigned i = 0; i < 32; ++i) {
    if (s == abi[i]) return i;
  }
  return std::nullopt;
}

std::optional<int64_t> parse_int(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  } else if (s.size() > 2 && s[0] == '0' && (s[1] == 'b' || s[1] == 'B')) {
    base = 2;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size() || v > 0xFFFFFFFFull) return std::nullopt;
  return neg ? -static_cast<int64_t>(v) : static_cast<int64_t>(v);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

struct Statement {
  int line;
  uint32_t pc;
  std::string mnem;
  std::vector<std::string> operands;
};

class Parser {
 public:
  Parser(const Statement& st, const std::map<std::string, uint32_t, std::less<>>& labels)
      : st_(st), labels_(labels) {}

  [[noreturn]] void fail(const std::string& what) const { throw AsmError(st_.line, what); }

  void expect_count(size_t n) const {
    if (st_.operands.size() != n) {
      fail(fmt::format("'{}' expects {} operand(s), got {}", st_.mnem, n, st_.operands.size()));
    }
  }

  unsigned reg(size_t i) const {
    auto r = parse_reg(st_.operands.at(i));
    if (!r) fail(fmt::format("bad register '{}'", st_.operands[i]));
    return *r;
  }

  int64_t imm(size_t i) const {
    auto v = parse_int(st_.operands.at(i));
    if (!v) fail(fmt::format("bad immediate '{}'", st_.operands[i]));
    return *v;
  }

  // Label or literal offset.
  int64_t target(size_t i) const {
    const auto& s = st_.operands.at(i);
    if (auto v = parse_int(s)) return *v;
    auto it = labels_.find(s);
    if (it == labels_.end()) {
      if (is_identifier(s)) fail(fmt::format("undefined label '{}'", s));
      fail(fmt::format("bad branch target '{}'", s));
    }
    return static_cast<int64_t>(it->second) - static_cast<int64_t>(st_.pc);
  }

  // "imm(reg)" memory operand.
  std::pair<int64_t, unsigned> mem(size_t i) const {
    std::string_view s = st_.operands.at(i);
    const auto open = s.find('(');
    if (open == std::string_view::npos || s.back() != ')') fail(fmt::format("bad memory operand '{}'", s));
    const auto off_text = trim(s.substr(0, open));
    int64_t off = 0;
    if (!off_text.empty()) {
      auto v = parse_int(off_text);
      if (!v) fail(fmt::format("bad offset '{}'", off_text));
      off = *v;
    }
    auto r = parse_reg(trim(s.substr(open + 1, s.size() - open - 2)));
    if (!r) fail(fmt::format("bad base register in '{}'", s));
    return {off, *r};
  }

 private:
  const Statement& st_;
  const std::map<std::string, uint32_t, std::less<>>& labels_;
};

int32_t checked(const Parser& p, int64_t v, int64_t lo, int64_t hi, const char* what) {
  if (v < lo || v > hi) p.fail(fmt::format("{} {} out of range [{}, {}]", what, v, lo, hi));
  return static_cast<int32_t>(v);
}

Instruction build(const Statement& st, const std::map<std::string, uint32_t, std::less<>>& labels) {
  Parser p(st, labels);
  const std::string& m = st.mnem;

  // Pseudo-instructions.
  if (m == "nop") {
    p.expect_count(0);
    return i_type(Op::Addi, 0, 0, 0);
  }
  if (m == "mv") {
    p.expect_count(2);
    return i_type(Op::Addi, p.reg(0), p.reg(1), 0);
  }
  if (m == "not") {
    p.expect_count(2);
    return i_type(Op::Xori, p.reg(0), p.reg(1), -1);
  }
  if (m == "neg") {
    p.expect_count(2);
    return r_type(Op::Sub, p.reg(0), 0, p.reg(1));
  }
  if (m == "li") {
    p.expect_count(2);
    return i_type(Op::Addi, p.reg(0), 0, checked(p, p.imm(1), -2048, 2047, "li immediate"));
  }
  if (m == "j") {
    p.expect_count(1);
    return jal(0, checked(p, p.target(0), -(1 << 20), (1 << 20) - 2, "jump offset"));
  }
  if (m == "jr") {
    p.expect_count(1);
    return i_type(Op::Jalr, 0, p.reg(0), 0);
  }
  if (m == "ret") {
    p.expect_count(0);
    return i_type(Op::Jalr, 0, 1, 0);
  }
  if (m == "beqz" || m == "bnez") {
    p.expect_count(2);
    return b_type(m == "beqz" ? Op::Beq : Op::Bne, p.reg(0), 0,
                  checked(p, p.target(1), -4096, 4094, "branch offset"));
  }

  auto it = op_table().find(m);
  if (it == op_table().end()) p.fail(fmt::format("unknown mnemonic '{}'", m));
  const Op op = it->second;

  Instruction in;
  switch (op) {
    case Op::Lui:
    case Op::Auipc: {
      p.expect_count(2);
      const int64_t v = p.imm(1);
      checked(p, v, 0, 0xFFFFF, "upper immediate");
      in = u_type(op, p.reg(0), static_cast<int32_t>(static_cast<uint32_t>(v) << 12));
      break;
    }
    case Op::Jal:
      if (st.operands.size() == 1) {
        in = jal(1, checked(p, p.target(0), -(1 << 20), (1 << 20) - 2, "jump offset"));
      } else {
        p.expect_count(2);
        in = jal(p.reg(0), checked(p, p.target(1), -(1 << 20), (1 << 20) - 2, "jump offset"));
      }
      break;
    case Op::Jalr:
    case Op::Lb:
    case Op::Lh:
    case Op::Lw:
    case Op::Lbu:
    case Op::Lhu: {
      p.expect_count(2);
      auto [off, base] = p.mem(1);
      in = i_type(op, p.reg(0), base, checked(p, off, -2048, 2047, "offset"));
      break;
    }
    case Op::Sb:
    case Op::Sh:
    case Op::Sw: {
      p.expect_count(2);
      auto [off, base] = p.mem(1);
      in = s_type(op, base, p.reg(0), checked(p, off, -2048, 2047, "offset"));
      break;
    }
    case Op::Beq:
    case Op::Bne:
    case Op::Blt:
    case Op::Bge:
    case Op::Bltu:
    case Op::Bgeu:
      p.expect_count(3);
      in = b_type(op, p.reg(0), p.reg(1), checked(p, p.target(2), -4096, 4094, "branch offset"));
      break;
    case Op::Slli:
    case Op::Srli:
    case Op::Srai:
      p.expect_count(3);
      in = i_type(op, p.reg(0), p.reg(1), checked(p, p.imm(2), 0, 31, "shift amount"));
      break;
    case Op::Addi:
    case Op::Slti:
    case Op::Sltiu:
    case Op::Xori:
    case Op::Ori:
    case Op::Andi:
      p.expect_count(3);
      in = i_type(op, p.reg(0), p.reg(1), checked(p, p.imm(2), -2048, 2047, "immediate"));
      break;
    case Op::Fence:
      if (st.operands.empty()) {
        in = i_type(Op::Fence, 0, 0, 0x0FF);
      } else {
        p.expect_count(2);
        auto [off, base] = p.mem(1);
        in = i_type(Op::Fence, p.reg(0), base, checked(p, off, -2048, 2047, "fence immediate"));
      }
      break;
    case Op::Ecall:
    case Op::Ebreak:
      p.expect_count(0);
      in.op = op;
      break;
    case Op::CimConv:
    case Op::CimRead:
    case Op::CimWrite:
      p.expect_count(4);
      in = cim(*cim_op(op), p.reg(0), p.reg(1), checked(p, p.imm(2), kImmSMin, kImmSMax, "imm_s"),
               checked(p, p.imm(3), kImmDMin, kImmDMax, "imm_d"));
      break;
    default:
      p.expect_count(3);
      in = r_type(op, p.reg(0), p.reg(1), p.reg(2));
      break;
  }
  if ((is_branch(op) || op == Op::Jal) && (in.imm & 1)) p.fail("branch target must be even");
  return in;
}

std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  s = trim(s);
  if (s.empty()) return out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      out.emplace_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

std::vector<Instruction> assemble_instructions(std::string_view source) {
  std::vector<Statement> statements;
  std::map<std::string, uint32_t, std::less<>> labels;
  uint32_t pc = 0;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= source.size()) {
    size_t eol = source.find('\n', pos);
    if (eol == std::string_view::npos) eol = source.size();
    std::string_view line = source.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    // Any number of leading labels.
    while (true) {
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) break;
      const auto name = trim(line.substr(0, colon));
      if (!is_identifier(name)) throw AsmError(line_no, fmt::format("bad label '{}'", name));
      if (!labels.emplace(std::string(name), pc).second) {
        throw AsmError(line_no, fmt::format("duplicate label '{}'", name));
      }
      line = trim(line.substr(colon + 1));
    }
    if (line.empty()) continue;
    size_t sp = 0;
    while (sp < line.size() && !std::isspace(static_cast<unsigned char>(line[sp]))) ++sp;
    Statement st{line_no, pc, std::string(line.substr(0, sp)), split_operands(line.substr(sp))};
    std::transform(st.mnem.begin(), st.mnem.end(), st.mnem.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto& o : st.operands) {
      if (o.empty()) throw AsmError(line_no, "empty operand");
    }
    statements.push_back(std::move(st));
    pc += 4;
  }

  std::vector<Instruction> out;
  out.reserve(statements.size());
  for (const auto& st : statements) {
    try {
      out.push_back(build(st, labels));
    } catch (const EncodingError& e) {
      throw AsmError(st.line, e.what());
    }
  }
  return out;
}

std::vector<uint32_t> assemble(std::string_view source) {
  std::vector<uint32_t> words;
  for (const auto& in : assemble_instructions(source)) words.push_back(encode(in));
  return words;
}

std::string disassemble_program(std::span<const uint32_t> words) {
  std::string out;
  for (uint32_t w : words) {
    out += disassemble(decode(w));
    out += '\n';
  }
  return out;
}

std::vector<uint8_t> to_image(std::span<const uint32_t> words) {
  std::vector<uint8_t> bytes;
  bytes.reserve(words.size() * 4);
  for (uint32_t w : words) {
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<uint8_t>(w >> (8 * b)));
  }
  return bytes;
}

std::vector<uint32_t> from_image(std::span<const uint8_t> bytes) {
  if (bytes.size() % 4 != 0) throw Error("program image length is not a multiple of 4 bytes");
  std::vector<uint32_t> words(bytes.size() / 4);
  for (size_t i = 0; i < words.size(); ++i) {
    words[i] = static_cast<uint32_t>(bytes[4 * i]) | (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
               (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) | (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
  }
  return words;
}

}  // namespace rvcim::isa
