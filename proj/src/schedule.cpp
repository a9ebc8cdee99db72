#include "rvcim/schedule.hpp"

#include <fmt/format.h>

#include "rvcim/error.hpp"
#include "rvcim/memory.hpp"

namespace rvcim::sched {

using isa::Instruction;
using isa::Op;

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::WeightLoad: return "weight_load";
    case Phase::Conv: return "conv";
    case Phase::Pool: return "pool";
    case Phase::PrePost: return "pre_post";
    case Phase::DramFmTraffic: return "dram_fm_traffic";
  }
  return "?";
}

namespace {

bool writes_rd(Op op) {
  return !(isa::is_branch(op) || isa::is_store(op) || op == Op::Fence || op == Op::Ecall || op == Op::Ebreak ||
           isa::is_cim(op));
}

std::array<SInst, 2> latch(const Item& it) {
  const int32_t back = -4 * static_cast<int32_t>(it.body.size() + 1);
  return {SInst{isa::i_type(Op::Addi, it.counter, it.counter, -1)},
          SInst{isa::b_type(Op::Bne, it.counter, 0, back)}};
}

// Replays the core's timing rules over annotated instructions.
class Timer {
 public:
  Timer(const SimConfig& cfg) : cfg_(cfg) {}

  uint64_t cycle() const { return cycle_; }

  uint64_t step(const SInst& s, bool taken_branch) {
    uint64_t c = 1;
    const Op op = s.inst.op;
    if (op == Op::Jal || op == Op::Jalr || taken_branch) c += cfg_.latency.taken_branch_penalty;
    if (s.dma == DmaEffect::Wait && busy_) c += remaining_;
    cycle_ += c;
    if (s.dma == DmaEffect::Start) {
      busy_ = true;
      remaining_ = mem::dram_fetch_cost(cfg_.dram, s.dma_words) + s.dma_words;
    } else {
      tick(c);
    }
    return c;
  }

  // Straight-line code without DMA effects: ticking once by the total is
  // equivalent to ticking per instruction.
  void advance(uint64_t c) {
    cycle_ += c;
    tick(c);
  }

 private:
  void tick(uint64_t c) {
    if (!busy_) return;
    if (remaining_ <= c) {
      busy_ = false;
      remaining_ = 0;
    } else {
      remaining_ -= c;
    }
  }

  const SimConfig& cfg_;
  uint64_t cycle_ = 0;
  bool busy_ = false;
  uint64_t remaining_ = 0;
};

bool has_dma(const std::vector<SInst>& v) {
  for (const auto& s : v)
    if (s.dma != DmaEffect::None) return true;
  return false;
}

uint64_t plain_cost(const std::vector<SInst>& v, uint32_t penalty) {
  uint64_t c = 0;
  for (const auto& s : v) c += 1 + ((s.inst.op == Op::Jal || s.inst.op == Op::Jalr) ? penalty : 0);
  return c;
}

}  // namespace

Program link(const std::vector<Item>& items) {
  Program p;
  auto put = [&](const SInst& s, Phase ph, uint32_t idx) {
    p.words.push_back(isa::encode(s.inst));
    p.phase_of_word.push_back(ph);
    p.item_of_word.push_back(idx);
  };
  for (uint32_t i = 0; i < items.size(); ++i) {
    const Item& it = items[i];
    p.item_start.push_back(static_cast<uint32_t>(p.words.size()));
    switch (it.kind) {
      case ItemKind::Block:
      case ItemKind::Halt:
        for (const auto& s : it.body) put(s, it.phase, i);
        break;
      case ItemKind::Loop: {
        if (it.body.size() + 1 > 1024) {
          throw LoweringError(fmt::format("loop '{}' body of {} instructions exceeds branch range", it.label,
                                          it.body.size()));
        }
        for (const auto& s : it.prologue) put(s, it.phase, i);
        for (const auto& s : it.body) put(s, it.phase, i);
        for (const auto& s : latch(it)) put(s, it.phase, i);
        break;
      }
    }
  }
  return p;
}

Estimate estimate(const std::vector<Item>& items, const SimConfig& cfg) {
  Estimate e;
  Timer t(cfg);
  const uint32_t penalty = cfg.latency.taken_branch_penalty;
  for (const Item& it : items) {
    const uint64_t start = t.cycle();
    e.item_issue_cycle.push_back(start);
    switch (it.kind) {
      case ItemKind::Block:
      case ItemKind::Halt:
        if (has_dma(it.body)) {
          for (const auto& s : it.body) t.step(s, false);
        } else {
          t.advance(plain_cost(it.body, penalty));
        }
        break;
      case ItemKind::Loop: {
        for (const auto& s : it.prologue) t.step(s, false);
        const auto l = latch(it);
        if (has_dma(it.body)) {
          for (uint32_t k = 0; k < it.trips; ++k) {
            for (const auto& s : it.body) t.step(s, false);
            t.step(l[0], false);
            t.step(l[1], k + 1 < it.trips);
          }
        } else {
          const uint64_t per = plain_cost(it.body, penalty) + 2;
          t.advance(per * it.trips + uint64_t{it.trips - 1} * penalty);
        }
        break;
      }
    }
    e.breakdown.phase[static_cast<size_t>(it.phase)] += t.cycle() - start;
  }
  e.breakdown.total = t.cycle();
  return e;
}

LatencyBreakdown breakdown_from_profile(const Program& prog, const std::vector<uint64_t>& profile) {
  LatencyBreakdown b;
  for (size_t i = 0; i < prog.words.size() && i < profile.size(); ++i) {
    b.phase[static_cast<size_t>(prog.phase_of_word[i])] += profile[i];
    b.total += profile[i];
  }
  return b;
}

Item& Emitter::cur() {
  if (items_.empty() || items_.back().kind == ItemKind::Halt ||
      (items_.back().kind == ItemKind::Loop && !loop_open_)) {
    const Phase p = items_.empty() ? Phase::PrePost : items_.back().phase;
    items_.push_back(Item{.kind = ItemKind::Block, .phase = p});
  }
  return items_.back();
}

void Emitter::block(Phase phase, std::string label, int image) {
  if (loop_open_) throw Error("block() inside an open loop");
  if (!items_.empty() && items_.back().kind == ItemKind::Block && items_.back().body.empty()) items_.pop_back();
  items_.push_back(Item{.kind = ItemKind::Block, .phase = phase, .label = std::move(label), .image = image});
}

void Emitter::emit(const Instruction& in, DmaEffect dma, uint32_t dma_words) {
  Item& it = cur();
  const SInst s{in, dma, dma_words};
  if (it.kind == ItemKind::Loop && !in_body_) {
    it.prologue.push_back(s);
  } else {
    it.body.push_back(s);
  }
  track(in);
}

void Emitter::track(const Instruction& in) {
  if (!writes_rd(in.op) || in.rd == 0) return;
  if (in_body_) {
    body_written_[in.rd] = true;
    return;
  }
  auto value_of = [&](unsigned r) -> std::optional<uint32_t> { return r == 0 ? std::optional<uint32_t>(0) : known_[r]; };
  if (in.op == Op::Lui) {
    known_[in.rd] = static_cast<uint32_t>(in.imm);
  } else if (in.op == Op::Addi && value_of(in.rs1)) {
    known_[in.rd] = *value_of(in.rs1) + static_cast<uint32_t>(in.imm);
  } else {
    known_[in.rd].reset();
  }
}

void Emitter::li(unsigned rd, uint32_t value) {
  if (in_body_) throw Error("li() inside a loop body");
  if (rd == 0) throw Error("li() into x0");
  if (known_[rd] == value) return;
  if (known_[rd]) {
    const int64_t delta = static_cast<int64_t>(static_cast<int32_t>(value - *known_[rd]));
    if (delta >= -2048 && delta <= 2047) {
      emit(isa::i_type(Op::Addi, rd, rd, static_cast<int32_t>(delta)));
      return;
    }
  }
  const int32_t sv = static_cast<int32_t>(value);
  if (sv >= -2048 && sv <= 2047) {
    emit(isa::i_type(Op::Addi, rd, 0, sv));
    return;
  }
  const uint32_t hi = (value + 0x800u) & 0xFFFFF000u;
  const int32_t lo = static_cast<int32_t>(value - hi);
  emit(isa::u_type(Op::Lui, rd, static_cast<int32_t>(hi)));
  if (lo) emit(isa::i_type(Op::Addi, rd, rd, lo));
}

int32_t Emitter::near(unsigned r, uint32_t target, int32_t lo, int32_t hi) {
  if (in_body_) throw Error("near() inside a loop body");
  if (known_[r]) {
    const int64_t delta = static_cast<int64_t>(static_cast<int32_t>(target - *known_[r]));
    if (delta >= lo && delta <= hi) return static_cast<int32_t>(delta);
  }
  li(r, target - static_cast<uint32_t>(lo));
  return lo;
}

void Emitter::begin_loop(Phase phase, uint32_t trips, std::string label, int image) {
  if (loop_open_) throw Error("nested loops are not supported");
  if (trips == 0) throw Error("loop with zero trips");
  if (!items_.empty() && items_.back().kind == ItemKind::Block && items_.back().body.empty()) items_.pop_back();
  items_.push_back(Item{.kind = ItemKind::Loop,
                        .phase = phase,
                        .label = std::move(label),
                        .trips = trips,
                        .counter = static_cast<uint8_t>(reg::kCounter),
                        .image = image});
  loop_open_ = true;
  in_body_ = false;
  body_written_.fill(false);
}

void Emitter::loop_body() {
  li(reg::kCounter, items_.back().trips);
  in_body_ = true;
}

void Emitter::end_loop() {
  in_body_ = false;
  loop_open_ = false;
  for (unsigned r = 0; r < 32; ++r)
    if (body_written_[r]) known_[r].reset();
  known_[reg::kCounter] = 0;
}

void Emitter::dma_start(Phase phase, uint32_t src, uint32_t dst, uint32_t words, std::string label) {
  if (words == 0) return;
  if (dma_pending_) dma_wait(*dma_pending_, "wait before new transfer");
  block(phase, std::move(label));
  li(reg::kDma, mem::kDmaBase);
  li(reg::kT0, src);
  emit(isa::s_type(Op::Sw, reg::kDma, reg::kT0, mem::kDmaSrc));
  li(reg::kT0, dst);
  emit(isa::s_type(Op::Sw, reg::kDma, reg::kT0, mem::kDmaDst));
  li(reg::kT0, words);
  emit(isa::s_type(Op::Sw, reg::kDma, reg::kT0, mem::kDmaLen));
  emit(isa::s_type(Op::Sw, reg::kDma, reg::kT0, mem::kDmaCtrl), DmaEffect::Start, words);
  dma_pending_ = phase;
}

void Emitter::dma_wait(Phase phase, std::string label) {
  if (!dma_pending_) return;
  block(phase, std::move(label));
  li(reg::kDma, mem::kDmaBase);
  emit(isa::i_type(Op::Lw, 0, reg::kDma, mem::kDmaWait), DmaEffect::Wait);
  dma_pending_.reset();
}

void Emitter::halt() {
  if (loop_open_) throw Error("halt() inside an open loop");
  if (!items_.empty() && items_.back().kind == ItemKind::Block && items_.back().body.empty()) items_.pop_back();
  items_.push_back(Item{.kind = ItemKind::Halt, .phase = Phase::PrePost, .label = "halt", .body = {SInst{isa::jal(0, 0)}}});
}

std::vector<Item> Emitter::take() {
  std::vector<Item> out;
  for (auto& it : items_)
    if (!(it.kind == ItemKind::Block && it.body.empty())) out.push_back(std::move(it));
  items_.clear();
  return out;
}

}  // namespace rvcim::sched
