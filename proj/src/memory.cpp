#include "rvcim/memory.hpp"

#include <fmt/format.h>

#include "rvcim/error.hpp"

namespace rvcim::mem {

SramBank::SramBank(std::string name, uint32_t size_bits, uint32_t wide_port_bits)
    : name_(std::move(name)), wide_port_bits_(wide_port_bits), words_(size_bits / 32, 0) {
  if (size_bits % 32 || wide_port_bits % 32 || wide_port_bits == 0) {
    throw ConfigError("SRAM size and port width must be multiples of 32 bits");
  }
}

void SramBank::check(uint64_t word_addr, uint64_t count) const {
  if (!in_range(word_addr, count)) {
    throw BoundsError(fmt::format("{} SRAM access [{}, {}) out of range ({} words)", name_, word_addr,
                                  word_addr + count, words_.size()));
  }
}

uint32_t SramBank::read(uint32_t word_addr) const {
  check(word_addr, 1);
  return words_[word_addr];
}

void SramBank::write(uint32_t word_addr, uint32_t value) {
  check(word_addr, 1);
  words_[word_addr] = value;
}

std::vector<uint32_t> SramBank::read_wide(uint32_t word_addr) const {
  const uint32_t n = wide_port_bits_ / 32;
  if (word_addr % n) throw BoundsError(fmt::format("{} wide read at word {} is not {}-word aligned", name_, word_addr, n));
  return read_block(word_addr, n);
}

void SramBank::write_wide(uint32_t word_addr, std::span<const uint32_t> data) {
  const uint32_t n = wide_port_bits_ / 32;
  if (word_addr % n) throw BoundsError(fmt::format("{} wide write at word {} is not {}-word aligned", name_, word_addr, n));
  if (data.size() != n) throw BoundsError(fmt::format("{} wide write needs exactly {} words", name_, n));
  write_block(word_addr, data);
}

void SramBank::write_block(uint32_t word_addr, std::span<const uint32_t> data) {
  check(word_addr, data.size());
  std::copy(data.begin(), data.end(), words_.begin() + word_addr);
}

std::vector<uint32_t> SramBank::read_block(uint32_t word_addr, uint32_t count) const {
  check(word_addr, count);
  return {words_.begin() + word_addr, words_.begin() + word_addr + count};
}

uint64_t dram_fetch_cost(const DramConfig& cfg, uint64_t n_words) {
  if (n_words == 0) return 0;
  const uint64_t bursts = (n_words + cfg.burst_words - 1) / cfg.burst_words;
  return bursts * cfg.latency_first_word + (n_words - bursts) * cfg.per_burst_word;
}

void DmaEngine::start(const DmaTransfer& t, uint64_t total_cycles) {
  if (state_ == DmaState::Busy) throw Error("DMA engine busy");
  transfer_ = t;
  remaining_ = total_cycles;
  state_ = DmaState::Busy;
}

bool DmaEngine::tick(uint64_t cycles) {
  if (state_ != DmaState::Busy || cycles == 0) return false;
  if (remaining_ <= cycles) {
    remaining_ = 0;
    state_ = DmaState::Done;
    return true;
  }
  remaining_ -= cycles;
  return false;
}

uint32_t ByteMemory::load(uint32_t addr, unsigned size) const {
  if (!in_range(addr, size)) throw BoundsError(fmt::format("byte access 0x{:X}+{} out of range", addr, size));
  uint32_t v = 0;
  for (unsigned i = 0; i < size; ++i) v |= static_cast<uint32_t>(bytes_[addr + i]) << (8 * i);
  return v;
}

void ByteMemory::store(uint32_t addr, unsigned size, uint32_t value) {
  if (!in_range(addr, size)) throw BoundsError(fmt::format("byte access 0x{:X}+{} out of range", addr, size));
  for (unsigned i = 0; i < size; ++i) bytes_[addr + i] = static_cast<uint8_t>(value >> (8 * i));
}

MemorySystem::MemorySystem(const SimConfig& cfg)
    : cfg_(cfg),
      imem_(cfg.memory.imem_bytes),
      dmem_(cfg.memory.dmem_bytes),
      dram_(cfg.memory.dram_bytes),
      fm_("fm", cfg.memory.fm_sram_bits, 256),
      weight_("weight", cfg.memory.weight_sram_bits, 512) {}

Region MemorySystem::region_of(uint32_t addr, uint32_t size) const {
  auto inside = [&](uint32_t base, uint64_t bytes) {
    return addr >= base && static_cast<uint64_t>(addr - base) + size <= bytes;
  };
  if (inside(kImemBase, imem_.size())) return Region::Imem;
  if (inside(kDmemBase, dmem_.size())) return Region::Dmem;
  if (inside(kFmBase, fm_.size_words() * 4ull)) return Region::Fm;
  if (inside(kWeightBase, weight_.size_words() * 4ull)) return Region::Weight;
  if (inside(kDmaBase, kDmaWait + 4)) return Region::Dma;
  if (inside(kDramBase, dram_.size())) return Region::Dram;
  return Region::None;
}

bool MemorySystem::dma_range_ok(uint32_t addr, uint32_t words) const {
  if (addr % 4) return false;
  if (words == 0) return region_of(addr, 4) != Region::None;
  const uint64_t bytes = words * 4ull;
  if (bytes > 0xFFFFFFFFull) return false;
  const Region r = region_of(addr, static_cast<uint32_t>(bytes));
  return r == Region::Dmem || r == Region::Fm || r == Region::Weight || r == Region::Dram;
}

uint32_t MemorySystem::read_word_at(uint32_t addr) const {
  switch (region_of(addr, 4)) {
    case Region::Dmem: return dmem_.read_word(addr - kDmemBase);
    case Region::Fm: return fm_.read((addr - kFmBase) / 4);
    case Region::Weight: return weight_.read((addr - kWeightBase) / 4);
    case Region::Dram: return dram_.read_word(addr - kDramBase);
    default: throw BoundsError(fmt::format("no word storage at 0x{:08X}", addr));
  }
}

void MemorySystem::write_word_at(uint32_t addr, uint32_t value) {
  switch (region_of(addr, 4)) {
    case Region::Dmem: dmem_.write_word(addr - kDmemBase, value); return;
    case Region::Fm: fm_.write((addr - kFmBase) / 4, value); return;
    case Region::Weight: weight_.write((addr - kWeightBase) / 4, value); return;
    case Region::Dram: dram_.write_word(addr - kDramBase, value); return;
    default: throw BoundsError(fmt::format("no word storage at 0x{:08X}", addr));
  }
}

uint64_t MemorySystem::dma_cost(uint32_t words) const {
  return dram_fetch_cost(cfg_.dram, words) + words;
}

std::optional<std::string> MemorySystem::dma_start(const DmaTransfer& t) {
  if (dma_.state() == DmaState::Busy) return std::string("DMA start while busy");
  if (!dma_range_ok(t.src, t.length_words)) return fmt::format("DMA source 0x{:08X} invalid", t.src);
  if (!dma_range_ok(t.dst, t.length_words)) return fmt::format("DMA destination 0x{:08X} invalid", t.dst);
  const bool src_dram = region_of(t.src, 4) == Region::Dram;
  const bool dst_dram = region_of(t.dst, 4) == Region::Dram;
  if (src_dram == dst_dram) return std::string("DMA transfers must have exactly one DRAM endpoint");
  dma_.start(t, dma_cost(t.length_words));
  return std::nullopt;
}

void MemorySystem::tick(uint64_t cycles) {
  if (dma_.tick(cycles)) {
    const auto& t = dma_.transfer();
    for (uint32_t i = 0; i < t.length_words; ++i) write_word_at(t.dst + 4 * i, read_word_at(t.src + 4 * i));
  }
}

}  // namespace rvcim::mem
