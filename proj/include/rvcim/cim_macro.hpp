// cim_macro.hpp: functional model of the 512Kb binary/ternary SRAM CIM macro.
//
// Weights are stored as the physical differential cell image: each ternary
// weight occupies a (c_plus, c_minus) cell pair, so the array holds two
// bit-planes per sense-amplifier column. A column sum is then
// popcount(input & plus) - popcount(input & minus), which is exactly the
// integer dot product of the 0/1 activations with the ternary weights.
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace rvcim::cim {

enum class Mode : uint8_t { X, Y };

struct MacroMode {
  Mode mode;
  uint32_t n_wl;
  uint32_t n_bl;
  uint32_t n_sa;

  static MacroMode x() { return {Mode::X, 1024, 512, 256}; }
  static MacroMode y() { return {Mode::Y, 512, 1024, 512}; }
  static MacroMode of(Mode m) { return m == Mode::X ? x() : y(); }

  uint32_t input_words() const { return n_wl / 32; }   // shift-buffer words
  uint32_t output_words() const { return n_sa / 32; }  // packed SA output words
  uint32_t segments_per_column() const { return n_wl / 32; }
  uint32_t segment_count() const { return segments_per_column() * n_sa; }
  friend bool operator==(const MacroMode&, const MacroMode&) = default;
};

Mode parse_mode(std::string_view s);  // "x" / "y", case-insensitive
char mode_tag(Mode m);

// 2 * n_wl * n_sa: one MAC counts as two operations.
uint64_t peak_ops_per_cycle(const MacroMode& mode);
// Peak throughput in TOPS at the given clock.
double peak_tops(const MacroMode& mode, double clock_mhz);

struct CellPair {
  uint8_t c_plus;
  uint8_t c_minus;
  friend bool operator==(const CellPair&, const CellPair&) = default;
};

// +1 -> (1,0), -1 -> (0,1), 0 -> (0,0). Throws BoundsError on non-ternary input.
CellPair symmetric_map(int w);
// Inverse of symmetric_map; (1,1) is not a valid cell image and throws.
int8_t symmetric_unmap(CellPair cells);

class TernaryWeightArray {
 public:
  explicit TernaryWeightArray(MacroMode mode);

  const MacroMode& mode() const { return mode_; }

  int8_t at(uint32_t row, uint32_t column) const;
  void set(uint32_t row, uint32_t column, int8_t value);
  CellPair cells(uint32_t row, uint32_t column) const;

  // Replaces rows [row_base, row_base + values.size()) of one column.
  void write(uint32_t row_base, uint32_t column, std::span<const int8_t> values);
  std::vector<int8_t> read(uint32_t row_base, uint32_t column, uint32_t count) const;

  // Signed column sum over the input bits (one bit per wordline, packed
  // 32 per word, word i holding wordlines 32i..32i+31).
  int32_t column_sum(uint32_t column, std::span<const uint32_t> input_words) const;

  // Row-major dump [n_wl x n_sa].
  std::vector<int8_t> to_row_major() const;
  static TernaryWeightArray from_row_major(MacroMode mode, std::span<const int8_t> values);

  friend bool operator==(const TernaryWeightArray&, const TernaryWeightArray&) = default;

 private:
  void check(uint32_t row_base, uint32_t column, uint64_t count) const;

  MacroMode mode_;
  uint32_t words_per_column_;
  std::vector<uint32_t> plus_;   // [n_sa][n_wl/32]
  std::vector<uint32_t> minus_;  // [n_sa][n_wl/32]
};

class InputShiftBuffer {
 public:
  explicit InputShiftBuffer(uint32_t n_wl);

  uint32_t size() const { return static_cast<uint32_t>(words_.size() * 32); }
  bool bit(uint32_t wordline) const;
  void set_bit(uint32_t wordline, bool v);
  // Drops the oldest 32 bits (wordlines 0..31) and appends `word` as the
  // newest 32 (bit k lands on wordline n_wl - 32 + k).
  void shift_in(uint32_t word);
  std::span<const uint32_t> words() const { return words_; }
  void clear();

  friend bool operator==(const InputShiftBuffer&, const InputShiftBuffer&) = default;

 private:
  std::vector<uint32_t> words_;
};

struct SaConfig {
  std::vector<int32_t> thresholds;
  explicit SaConfig(uint32_t n_sa) : thresholds(n_sa, 0) {}
  friend bool operator==(const SaConfig&, const SaConfig&) = default;
};

// Pre-threshold column sums, one per SA column.
std::vector<int32_t> column_sums(const TernaryWeightArray& array, const InputShiftBuffer& buffer);
// output[j] = sum_j > threshold_j, packed LSB-first into n_sa/32 words.
std::vector<uint32_t> mac_and_sense(const TernaryWeightArray& array, const InputShiftBuffer& buffer,
                                    const SaConfig& sa);

// The macro as owned by one simulation unit: weights, shift buffer and SA
// thresholds. Weight segments are the 32-row slices addressed by cim.read and
// cim.write: segment s covers column s / segments_per_column, rows
// 32 * (s % segments_per_column) .. +31.
class CimMacro {
 public:
  explicit CimMacro(MacroMode mode);

  const MacroMode& mode() const { return array_.mode(); }
  TernaryWeightArray& weights() { return array_; }
  const TernaryWeightArray& weights() const { return array_; }
  InputShiftBuffer& buffer() { return buffer_; }
  const InputShiftBuffer& buffer() const { return buffer_; }
  SaConfig& sa() { return sa_; }
  const SaConfig& sa() const { return sa_; }

  // Shift one word in, then MAC + sense over the full buffer.
  std::vector<uint32_t> convolve(uint32_t input_word);

  bool segment_in_range(uint64_t segment) const { return segment < mode().segment_count(); }
  std::vector<int8_t> read_segment(uint32_t segment) const;
  void write_segment(uint32_t segment, std::span<const int8_t> values);

  friend bool operator==(const CimMacro&, const CimMacro&) = default;

 private:
  TernaryWeightArray array_;
  InputShiftBuffer buffer_;
  SaConfig sa_;
};

}  // namespace rvcim::cim
