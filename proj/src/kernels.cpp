#include "rvcim/kernels.hpp"

#include <algorithm>

#include "rvcim/error.hpp"
#include "rvcim/memory.hpp"

namespace rvcim::kernels {

using isa::Op;
using sched::Phase;
namespace R = sched::reg;

namespace {

// Filtered samples lie in [-65535, 65535]; thresholds beyond that are clamped
// without changing any comparison.
constexpr int64_t kYLimit = 65535;

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int64_t ceil_div(int64_t a, int64_t b) { return -floor_div(-a, b); }

bool fits12(int64_t v) { return v >= -2048 && v <= 2047; }

// Preprocessing registers.
constexpr unsigned kX = 10, kOut = 11, kTab = 13, kWord = 14, kAcc = 16, kTmp = 17, kBit = 28, kT = 29;
constexpr unsigned kSample[2] = {12, 15};  // alternate so x[n-1] never needs a move

}  // namespace

uint32_t fm_byte_addr(uint32_t word) { return mem::kFmBase + 4 * word; }

std::vector<std::pair<int, int>> csd(uint32_t value) {
  std::vector<std::pair<int, int>> out;
  int64_t v = value;
  for (int k = 0; v != 0; ++k, v >>= 1) {
    if (v & 1) {
      const int d = (v & 3) == 3 ? -1 : 1;
      out.emplace_back(k, d);
      v -= d;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

FoldedThreshold fold_threshold(int32_t s, int32_t b, int32_t thr) {
  FoldedThreshold f;
  if (s == 0) {
    f.kind = FoldedThreshold::Kind::Const;
    f.bit = b > thr;
    return f;
  }
  // ((y*s) >> 15) + b > thr  <=>  y*s >= (thr - b + 1) * 2^15
  const int64_t m = (int64_t{thr} - b + 1) * 32768;
  if (s > 0) {
    f.kind = FoldedThreshold::Kind::Ge;
    f.value = static_cast<int32_t>(std::clamp<int64_t>(ceil_div(m, s), -kYLimit, kYLimit + 1));
  } else {
    f.kind = FoldedThreshold::Kind::Lt;
    f.value = static_cast<int32_t>(std::clamp<int64_t>(floor_div(m, s) + 1, -kYLimit, kYLimit + 1));
  }
  return f;
}

bool apply_threshold(const FoldedThreshold& t, int32_t y) {
  switch (t.kind) {
    case FoldedThreshold::Kind::Const: return t.bit;
    case FoldedThreshold::Kind::Ge: return y >= t.value;
    case FoldedThreshold::Kind::Lt: return y < t.value;
  }
  return false;
}

void emit_preprocess(sched::Emitter& e, const model::PreprocParams& p, const PreprocLayout& l) {
  std::array<FoldedThreshold, model::kFrameChannels> th;
  for (uint32_t c = 0; c < model::kFrameChannels; ++c) th[c] = fold_threshold(p.bn_scale[c], p.bn_shift[c], p.quant_threshold);
  const auto terms = csd(static_cast<uint32_t>(p.hp_alpha));

  e.begin_loop(Phase::PrePost, l.rows, "preprocess");
  e.li(kX, l.audio_addr);
  e.li(kOut, fm_byte_addr(l.out_word));
  e.li(kTab, l.table_addr);
  e.li(kSample[1], 0);
  for (uint32_t c = 0; c < model::kFrameChannels; ++c) {
    if (th[c].kind != FoldedThreshold::Kind::Const && !fits12(th[c].value)) {
      e.li(kT, static_cast<uint32_t>(th[c].value));
      e.emit(isa::s_type(Op::Sw, kTab, kT, static_cast<int32_t>(4 * c)));
    }
  }
  e.loop_body();
  for (uint32_t c = 0; c < model::kFrameChannels; ++c) {
    const unsigned cur = kSample[c % 2], prev = kSample[(c + 1) % 2];
    e.emit(isa::i_type(Op::Lh, cur, kX, static_cast<int32_t>(2 * c)));
    // acc = alpha * x[n-1]
    bool first = true;
    for (const auto& [k, d] : terms) {
      if (first) {
        e.emit(k ? isa::i_type(Op::Slli, kAcc, prev, k) : isa::i_type(Op::Addi, kAcc, prev, 0));
        first = false;
        continue;
      }
      unsigned src = prev;
      if (k) {
        e.emit(isa::i_type(Op::Slli, kTmp, prev, k));
        src = kTmp;
      }
      e.emit(isa::r_type(d > 0 ? Op::Add : Op::Sub, kAcc, kAcc, src));
    }
    e.emit(isa::i_type(Op::Srai, kAcc, kAcc, 15));
    e.emit(isa::r_type(Op::Sub, kAcc, cur, kAcc));

    const unsigned dst = c == 0 ? kWord : kBit;
    const auto& t = th[c];
    bool have_bit = true;
    switch (t.kind) {
      case FoldedThreshold::Kind::Const:
        if (c == 0 || t.bit) e.emit(isa::i_type(Op::Addi, dst, 0, t.bit ? 1 : 0));
        have_bit = t.bit;
        break;
      case FoldedThreshold::Kind::Ge:
      case FoldedThreshold::Kind::Lt:
        if (fits12(t.value)) {
          e.emit(isa::i_type(Op::Slti, dst, kAcc, t.value));
        } else {
          e.emit(isa::i_type(Op::Lw, kT, kTab, static_cast<int32_t>(4 * c)));
          e.emit(isa::r_type(Op::Slt, dst, kAcc, kT));
        }
        if (t.kind == FoldedThreshold::Kind::Ge) e.emit(isa::i_type(Op::Xori, dst, dst, 1));
        break;
    }
    if (c > 0 && have_bit) {
      e.emit(isa::i_type(Op::Slli, kBit, kBit, static_cast<int32_t>(c)));
      e.emit(isa::r_type(Op::Or, kWord, kWord, kBit));
    }
  }
  e.emit(isa::s_type(Op::Sw, kOut, kWord, 0));
  e.emit(isa::i_type(Op::Addi, kX, kX, 2 * static_cast<int32_t>(model::kFrameChannels)));
  e.emit(isa::i_type(Op::Addi, kOut, kOut, 4));
  e.end_loop();
}

void emit_gap(sched::Emitter& e, const GapLayout& l) {
  constexpr unsigned kSum = 16, kBest = 16, kIdx = 17, kS = 28, kTv = 29, kMask = 30, kD = R::kT2;
  const FmDesc& fm = l.fm;
  if (l.classes == 0) return;
  if (4 * l.classes + 4 > 2047 || 4 * fm.stride > 2047) throw LoweringError("global average pooling layout out of range");
  for (uint32_t c = 0; c < l.classes; ++c) {
    const uint32_t word = fm.addr(0, c / 32);
    const int32_t bit = static_cast<int32_t>(c % 32);
    auto body = [&](unsigned ptr, int32_t offset) {
      e.emit(isa::i_type(Op::Lw, R::kT0, ptr, offset));
      if (bit) e.emit(isa::i_type(Op::Srli, R::kT0, R::kT0, bit));
      e.emit(isa::i_type(Op::Andi, R::kT0, R::kT0, 1));
      e.emit(isa::r_type(Op::Add, kSum, kSum, R::kT0));
    };
    if (fm.rows <= 8) {
      e.block(Phase::PrePost, c == 0 ? "gap" : "");
      e.emit(isa::i_type(Op::Addi, kSum, 0, 0));
      for (uint32_t r = 0; r < fm.rows; ++r) {
        const int32_t off = e.near(R::kPtrA, fm_byte_addr(word + r * fm.stride), -2048, 2047);
        body(R::kPtrA, off);
      }
    } else {
      e.begin_loop(Phase::PrePost, fm.rows, "gap class");
      e.li(R::kPtrA, fm_byte_addr(word));
      e.emit(isa::i_type(Op::Addi, kSum, 0, 0));
      e.loop_body();
      body(R::kPtrA, 0);
      e.emit(isa::i_type(Op::Addi, R::kPtrA, R::kPtrA, static_cast<int32_t>(4 * fm.stride)));
      e.end_loop();
      e.block(Phase::PrePost);
    }
    e.li(R::kPtrB, l.scores_addr);
    e.emit(isa::s_type(Op::Sw, R::kPtrB, kSum, static_cast<int32_t>(4 * c)));
  }
  e.block(Phase::PrePost, "argmax");
  e.li(R::kPtrB, l.scores_addr);
  e.emit(isa::i_type(Op::Lw, kBest, R::kPtrB, 0));
  e.emit(isa::i_type(Op::Addi, kIdx, 0, 0));
  for (uint32_t c = 1; c < l.classes; ++c) {
    e.emit(isa::i_type(Op::Lw, kS, R::kPtrB, static_cast<int32_t>(4 * c)));
    e.emit(isa::r_type(Op::Sltu, kTv, kBest, kS));  // scores are non-negative
    e.emit(isa::r_type(Op::Sub, kMask, 0, kTv));
    e.emit(isa::r_type(Op::Xor, kD, kS, kBest));
    e.emit(isa::r_type(Op::And, kD, kD, kMask));
    e.emit(isa::r_type(Op::Xor, kBest, kBest, kD));
    e.emit(isa::i_type(Op::Addi, kTv, 0, static_cast<int32_t>(c)));
    e.emit(isa::r_type(Op::Xor, kD, kTv, kIdx));
    e.emit(isa::r_type(Op::And, kD, kD, kMask));
    e.emit(isa::r_type(Op::Xor, kIdx, kIdx, kD));
  }
  const int32_t off = e.near(R::kPtrB, l.class_addr, -2048, 2047);
  e.emit(isa::s_type(Op::Sw, R::kPtrB, kIdx, off));
}

}  // namespace rvcim::kernels
