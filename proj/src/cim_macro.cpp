#include "rvcim/cim_macro.hpp"

#include <algorithm>
#include <bit>
#include <cctype>

#include <fmt/format.h>

#include "rvcim/error.hpp"

namespace rvcim::cim {

Mode parse_mode(std::string_view s) {
  if (s.size() == 1) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    if (c == 'x') return Mode::X;
    if (c == 'y') return Mode::Y;
  }
  throw ConfigError(fmt::format("unknown macro mode '{}' (expected x or y)", s));
}

char mode_tag(Mode m) { return m == Mode::X ? 'X' : 'Y'; }

uint64_t peak_ops_per_cycle(const MacroMode& mode) {
  return 2ull * mode.n_wl * mode.n_sa;
}

double peak_tops(const MacroMode& mode, double clock_mhz) {
  return static_cast<double>(peak_ops_per_cycle(mode)) * clock_mhz * 1e6 / 1e12;
}

CellPair symmetric_map(int w) {
  switch (w) {
    case 1: return {1, 0};
    case -1: return {0, 1};
    case 0: return {0, 0};
    default: throw BoundsError(fmt::format("weight {} is not ternary", w));
  }
}

int8_t symmetric_unmap(CellPair cells) {
  if (cells.c_plus > 1 || cells.c_minus > 1 || (cells.c_plus && cells.c_minus)) {
    throw BoundsError("invalid symmetric cell image (1,1)");
  }
  return static_cast<int8_t>(cells.c_plus - cells.c_minus);
}

// ---------------------------------------------------------------------------

TernaryWeightArray::TernaryWeightArray(MacroMode mode)
    : mode_(mode),
      words_per_column_(mode.n_wl / 32),
      plus_(static_cast<size_t>(mode.n_sa) * words_per_column_, 0),
      minus_(static_cast<size_t>(mode.n_sa) * words_per_column_, 0) {}

void TernaryWeightArray::check(uint32_t row_base, uint32_t column, uint64_t count) const {
  if (column >= mode_.n_sa) {
    throw BoundsError(fmt::format("column {} out of range (n_sa={})", column, mode_.n_sa));
  }
  if (static_cast<uint64_t>(row_base) + count > mode_.n_wl) {
    throw BoundsError(fmt::format("rows [{}, {}) exceed n_wl={}", row_base, row_base + count, mode_.n_wl));
  }
}

int8_t TernaryWeightArray::at(uint32_t row, uint32_t column) const {
  return symmetric_unmap(cells(row, column));
}

CellPair TernaryWeightArray::cells(uint32_t row, uint32_t column) const {
  check(row, column, 1);
  const size_t w = static_cast<size_t>(column) * words_per_column_ + row / 32;
  const uint32_t m = 1u << (row % 32);
  return {static_cast<uint8_t>((plus_[w] & m) != 0), static_cast<uint8_t>((minus_[w] & m) != 0)};
}

void TernaryWeightArray::set(uint32_t row, uint32_t column, int8_t value) {
  check(row, column, 1);
  const CellPair c = symmetric_map(value);
  const size_t w = static_cast<size_t>(column) * words_per_column_ + row / 32;
  const uint32_t m = 1u << (row % 32);
  plus_[w] = c.c_plus ? (plus_[w] | m) : (plus_[w] & ~m);
  minus_[w] = c.c_minus ? (minus_[w] | m) : (minus_[w] & ~m);
}

void TernaryWeightArray::write(uint32_t row_base, uint32_t column, std::span<const int8_t> values) {
  check(row_base, column, values.size());
  for (int8_t v : values) symmetric_map(v);  // validate before mutating
  for (size_t i = 0; i < values.size(); ++i) set(row_base + static_cast<uint32_t>(i), column, values[i]);
}

std::vector<int8_t> TernaryWeightArray::read(uint32_t row_base, uint32_t column, uint32_t count) const {
  check(row_base, column, count);
  std::vector<int8_t> out(count);
  for (uint32_t i = 0; i < count; ++i) out[i] = at(row_base + i, column);
  return out;
}

int32_t TernaryWeightArray::column_sum(uint32_t column, std::span<const uint32_t> input_words) const {
  const uint32_t* p = plus_.data() + static_cast<size_t>(column) * words_per_column_;
  const uint32_t* n = minus_.data() + static_cast<size_t>(column) * words_per_column_;
  int32_t s = 0;
  for (uint32_t i = 0; i < words_per_column_; ++i) {
    s += std::popcount(input_words[i] & p[i]) - std::popcount(input_words[i] & n[i]);
  }
  return s;
}

std::vector<int8_t> TernaryWeightArray::to_row_major() const {
  std::vector<int8_t> out(static_cast<size_t>(mode_.n_wl) * mode_.n_sa);
  for (uint32_t r = 0; r < mode_.n_wl; ++r) {
    for (uint32_t c = 0; c < mode_.n_sa; ++c) out[static_cast<size_t>(r) * mode_.n_sa + c] = at(r, c);
  }
  return out;
}

TernaryWeightArray TernaryWeightArray::from_row_major(MacroMode mode, std::span<const int8_t> values) {
  if (values.size() != static_cast<size_t>(mode.n_wl) * mode.n_sa) {
    throw BoundsError(fmt::format("weight image has {} values, expected {}", values.size(),
                                  static_cast<size_t>(mode.n_wl) * mode.n_sa));
  }
  TernaryWeightArray a(mode);
  for (uint32_t r = 0; r < mode.n_wl; ++r) {
    for (uint32_t c = 0; c < mode.n_sa; ++c) a.set(r, c, values[static_cast<size_t>(r) * mode.n_sa + c]);
  }
  return a;
}

// ---------------------------------------------------------------------------

InputShiftBuffer::InputShiftBuffer(uint32_t n_wl) : words_(n_wl / 32, 0) {}

bool InputShiftBuffer::bit(uint32_t wordline) const {
  if (wordline >= size()) throw BoundsError(fmt::format("wordline {} out of range", wordline));
  return (words_[wordline / 32] >> (wordline % 32)) & 1u;
}

void InputShiftBuffer::set_bit(uint32_t wordline, bool v) {
  if (wordline >= size()) throw BoundsError(fmt::format("wordline {} out of range", wordline));
  const uint32_t m = 1u << (wordline % 32);
  words_[wordline / 32] = v ? (words_[wordline / 32] | m) : (words_[wordline / 32] & ~m);
}

void InputShiftBuffer::shift_in(uint32_t word) {
  std::shift_left(words_.begin(), words_.end(), 1);
  words_.back() = word;
}

void InputShiftBuffer::clear() { std::fill(words_.begin(), words_.end(), 0u); }

// ---------------------------------------------------------------------------

std::vector<int32_t> column_sums(const TernaryWeightArray& array, const InputShiftBuffer& buffer) {
  if (buffer.size() != array.mode().n_wl) throw BoundsError("input buffer length does not match n_wl");
  std::vector<int32_t> sums(array.mode().n_sa);
  for (uint32_t j = 0; j < array.mode().n_sa; ++j) sums[j] = array.column_sum(j, buffer.words());
  return sums;
}

std::vector<uint32_t> mac_and_sense(const TernaryWeightArray& array, const InputShiftBuffer& buffer,
                                    const SaConfig& sa) {
  const auto sums = column_sums(array, buffer);
  if (sa.thresholds.size() != sums.size()) throw BoundsError("SA threshold count does not match n_sa");
  std::vector<uint32_t> out(array.mode().output_words(), 0);
  for (uint32_t j = 0; j < sums.size(); ++j) {
    if (sums[j] > sa.thresholds[j]) out[j / 32] |= 1u << (j % 32);
  }
  return out;
}

// ---------------------------------------------------------------------------

CimMacro::CimMacro(MacroMode mode) : array_(mode), buffer_(mode.n_wl), sa_(mode.n_sa) {}

std::vector<uint32_t> CimMacro::convolve(uint32_t input_word) {
  buffer_.shift_in(input_word);
  return mac_and_sense(array_, buffer_, sa_);
}

std::vector<int8_t> CimMacro::read_segment(uint32_t segment) const {
  if (!segment_in_range(segment)) throw BoundsError(fmt::format("macro segment {} out of range", segment));
  const uint32_t spc = mode().segments_per_column();
  return array_.read(32 * (segment % spc), segment / spc, 32);
}

void CimMacro::write_segment(uint32_t segment, std::span<const int8_t> values) {
  if (!segment_in_range(segment)) throw BoundsError(fmt::format("macro segment {} out of range", segment));
  if (values.size() != 32) throw BoundsError("a macro segment holds exactly 32 weights");
  const uint32_t spc = mode().segments_per_column();
  array_.write(32 * (segment % spc), segment / spc, values);
}

}  // namespace rvcim::cim
