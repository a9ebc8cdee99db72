// schedule.hpp: the lowered program as an ordered list of code items, the
// builder used to emit them, the linker that turns them into an instruction
// image, and the static latency estimator.
//
// An item is a straight-line block, a counted loop or the final halt. Each
// item carries the phase its cycles are charged to. Instructions that touch
// the uDMA engine are annotated so the estimator can model the single
// outstanding transfer exactly as the core does.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rvcim/config.hpp"
#include "rvcim/isa.hpp"

namespace rvcim::sched {

enum class Phase : uint8_t { WeightLoad, Conv, Pool, PrePost, DramFmTraffic };
inline constexpr size_t kPhaseCount = 5;
std::string_view phase_name(Phase p);

enum class DmaEffect : uint8_t { None, Start, Wait };

struct SInst {
  isa::Instruction inst;
  DmaEffect dma = DmaEffect::None;
  uint32_t dma_words = 0;  // Start only
};

enum class ItemKind : uint8_t { Block, Loop, Halt };

// Loop layout: prologue, then `trips` iterations of body followed by the
// latch `addi counter, counter, -1; bne counter, x0, body`.
struct Item {
  ItemKind kind = ItemKind::Block;
  Phase phase = Phase::PrePost;
  std::string label;
  std::vector<SInst> prologue;  // Loop only
  std::vector<SInst> body;
  uint32_t trips = 1;
  uint8_t counter = 0;
  int image = -1;  // macro image the item's CIM instructions belong to
};

struct LatencyBreakdown {
  std::array<uint64_t, kPhaseCount> phase{};
  uint64_t total = 0;
  uint64_t operator[](Phase p) const { return phase[static_cast<size_t>(p)]; }
  friend bool operator==(const LatencyBreakdown&, const LatencyBreakdown&) = default;
};

struct Program {
  std::vector<uint32_t> words;
  std::vector<Phase> phase_of_word;
  std::vector<uint32_t> item_of_word;
  std::vector<uint32_t> item_start;  // word index of each item's first instruction
};

// Throws LoweringError when a loop body is out of branch range.
Program link(const std::vector<Item>& items);

struct Estimate {
  LatencyBreakdown breakdown;
  std::vector<uint64_t> item_issue_cycle;
};

Estimate estimate(const std::vector<Item>& items, const SimConfig& cfg);

// Per-phase totals from a per-instruction cycle profile of a simulated run.
LatencyBreakdown breakdown_from_profile(const Program& prog, const std::vector<uint64_t>& profile);

// Register conventions shared by every emitted kernel.
namespace reg {
inline constexpr unsigned kConvSrc = 8;
inline constexpr unsigned kConvDst = 9;
inline constexpr unsigned kWeightSrc = 18;
inline constexpr unsigned kSegment = 19;
inline constexpr unsigned kDma = 20;
inline constexpr unsigned kPtrA = 21;
inline constexpr unsigned kPtrB = 22;
inline constexpr unsigned kT0 = 5;
inline constexpr unsigned kT1 = 6;
inline constexpr unsigned kT2 = 7;
inline constexpr unsigned kCounter = 31;
}  // namespace reg

class Emitter {
 public:
  // Starts a new straight-line block charged to `phase`.
  void block(Phase phase, std::string label = {}, int image = -1);
  void emit(const isa::Instruction& in, DmaEffect dma = DmaEffect::None, uint32_t dma_words = 0);

  // Loads a constant, reusing the tracked register value when possible.
  void li(unsigned rd, uint32_t value);
  // Returns imm in [lo, hi] with regs[r] + imm == target, re-basing r to
  // target - lo when the tracked value is out of reach.
  int32_t near(unsigned r, uint32_t target, int32_t lo, int32_t hi);
  void forget(unsigned r) { known_[r].reset(); }
  void forget_all() { known_.fill(std::nullopt); }

  // Loop construction: begin_loop opens the prologue (li/near allowed),
  // loop_body switches to the body (explicit instructions only), end_loop
  // closes it. The counter register is loaded at the end of the prologue.
  void begin_loop(Phase phase, uint32_t trips, std::string label = {}, int image = -1);
  void loop_body();
  void end_loop();

  // uDMA control through the memory-mapped registers.
  void dma_start(Phase phase, uint32_t src, uint32_t dst, uint32_t words, std::string label = {});
  void dma_wait(Phase phase, std::string label = {});
  bool dma_pending() const { return dma_pending_.has_value(); }

  void halt();
  std::vector<Item> take();

 private:
  Item& cur();
  void track(const isa::Instruction& in);

  std::vector<Item> items_;
  std::array<std::optional<uint32_t>, 32> known_{};
  bool in_body_ = false;
  bool loop_open_ = false;
  std::array<bool, 32> body_written_{};
  std::optional<Phase> dma_pending_;
};

}  // namespace rvcim::sched
