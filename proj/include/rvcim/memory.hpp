// memory.hpp: on-chip SRAM banks, the DRAM latency model, the uDMA engine
// and the core-visible address map.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvcim/config.hpp"

namespace rvcim::mem {

// Core-visible byte address map.
inline constexpr uint32_t kImemBase = 0x0000'0000;
inline constexpr uint32_t kDmemBase = 0x1000'0000;
inline constexpr uint32_t kFmBase = 0x2000'0000;
inline constexpr uint32_t kWeightBase = 0x3000'0000;
inline constexpr uint32_t kDmaBase = 0x4000'0000;
inline constexpr uint32_t kDramBase = 0x8000'0000;

// uDMA register offsets from kDmaBase.
inline constexpr uint32_t kDmaSrc = 0x00;
inline constexpr uint32_t kDmaDst = 0x04;
inline constexpr uint32_t kDmaLen = 0x08;   // words
inline constexpr uint32_t kDmaCtrl = 0x0C;  // write: start; read: status
inline constexpr uint32_t kDmaWait = 0x10;  // read stalls until the transfer is Done

// Word-addressed SRAM with a 32-bit core port and a wide CIM-side port over
// the same backing bits.
class SramBank {
 public:
  SramBank(std::string name, uint32_t size_bits, uint32_t wide_port_bits);

  const std::string& name() const { return name_; }
  uint32_t size_bits() const { return static_cast<uint32_t>(words_.size() * 32); }
  uint32_t size_words() const { return static_cast<uint32_t>(words_.size()); }
  uint32_t wide_port_bits() const { return wide_port_bits_; }

  bool in_range(uint64_t word_addr, uint64_t count = 1) const { return word_addr + count <= words_.size(); }

  uint32_t read(uint32_t word_addr) const;
  void write(uint32_t word_addr, uint32_t value);
  // Wide port: wide_port_bits / 32 words, aligned to the port width.
  std::vector<uint32_t> read_wide(uint32_t word_addr) const;
  void write_wide(uint32_t word_addr, std::span<const uint32_t> data);
  // Unaligned multi-word block access (CIM output write-back, DMA).
  void write_block(uint32_t word_addr, std::span<const uint32_t> data);
  std::vector<uint32_t> read_block(uint32_t word_addr, uint32_t count) const;

  std::span<const uint32_t> words() const { return words_; }
  std::span<uint32_t> words() { return words_; }

 private:
  void check(uint64_t word_addr, uint64_t count) const;

  std::string name_;
  uint32_t wide_port_bits_;
  std::vector<uint32_t> words_;
};

// Each burst of up to burst_words pays latency_first_word for its first word
// and per_burst_word for every following word.
uint64_t dram_fetch_cost(const DramConfig& cfg, uint64_t n_words);

enum class DmaState : uint8_t { Idle, Busy, Done };

struct DmaTransfer {
  uint32_t src = 0;  // byte addresses in the core map
  uint32_t dst = 0;
  uint32_t length_words = 0;
};

// A single-outstanding-transfer engine advanced by explicit ticks.
class DmaEngine {
 public:
  DmaState state() const { return state_; }
  uint64_t remaining() const { return remaining_; }
  const DmaTransfer& transfer() const { return transfer_; }

  // Throws Error if the engine is Busy.
  void start(const DmaTransfer& t, uint64_t total_cycles);
  // Advances `cycles` cycles. Returns true if the transfer completed during
  // these cycles (the caller then commits the data).
  bool tick(uint64_t cycles = 1);

 private:
  DmaState state_ = DmaState::Idle;
  uint64_t remaining_ = 0;
  DmaTransfer transfer_;
};

// Byte-addressed flat memory used for instruction memory, data memory and DRAM.
class ByteMemory {
 public:
  explicit ByteMemory(uint32_t size_bytes) : bytes_(size_bytes, 0) {}
  uint32_t size() const { return static_cast<uint32_t>(bytes_.size()); }
  bool in_range(uint64_t addr, uint64_t n) const { return addr + n <= bytes_.size(); }
  uint32_t load(uint32_t addr, unsigned size) const;
  void store(uint32_t addr, unsigned size, uint32_t value);
  uint32_t read_word(uint32_t addr) const { return load(addr, 4); }
  void write_word(uint32_t addr, uint32_t v) { store(addr, 4, v); }
  std::span<uint8_t> bytes() { return bytes_; }
  std::span<const uint8_t> bytes() const { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

enum class Region : uint8_t { Imem, Dmem, Fm, Weight, Dma, Dram, None };

// Everything outside the core and the macro.
class MemorySystem {
 public:
  explicit MemorySystem(const SimConfig& cfg);

  const SimConfig& config() const { return cfg_; }
  ByteMemory& imem() { return imem_; }
  ByteMemory& dmem() { return dmem_; }
  ByteMemory& dram() { return dram_; }
  SramBank& fm() { return fm_; }
  SramBank& weight() { return weight_; }
  DmaEngine& dma() { return dma_; }
  const ByteMemory& imem() const { return imem_; }
  const ByteMemory& dmem() const { return dmem_; }
  const ByteMemory& dram() const { return dram_; }
  const SramBank& fm() const { return fm_; }
  const SramBank& weight() const { return weight_; }
  const DmaEngine& dma() const { return dma_; }

  Region region_of(uint32_t addr, uint32_t size) const;

  // Word view over any DMA-capable region (Dmem, Fm, Weight, Dram).
  bool dma_range_ok(uint32_t addr, uint32_t words) const;
  uint32_t read_word_at(uint32_t addr) const;
  void write_word_at(uint32_t addr, uint32_t value);

  // Cycles a transfer of `words` takes once started.
  uint64_t dma_cost(uint32_t words) const;
  // Validates and starts a transfer; returns an error message on failure.
  std::optional<std::string> dma_start(const DmaTransfer& t);
  // Advances the DMA engine, committing data when the transfer completes.
  void tick(uint64_t cycles);

 private:
  SimConfig cfg_;
  ByteMemory imem_;
  ByteMemory dmem_;
  ByteMemory dram_;
  SramBank fm_;
  SramBank weight_;
  DmaEngine dma_;
};

}  // namespace rvcim::mem
