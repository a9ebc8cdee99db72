#include "rvcim/weight_image.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "rvcim/error.hpp"

namespace rvcim::cim {
namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const std::vector<uint8_t>& in, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<uint8_t> encode_weight_image(const TernaryWeightArray& array) {
  const auto& mode = array.mode();
  std::vector<uint8_t> out{'C', 'I', 'M', 'W', static_cast<uint8_t>(mode_tag(mode.mode)), 1, 0, 0};
  put_u32(out, mode.n_wl);
  put_u32(out, mode.n_sa);
  for (int8_t v : array.to_row_major()) out.push_back(static_cast<uint8_t>(v));
  return out;
}

TernaryWeightArray decode_weight_image(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < kWeightImageHeaderBytes || std::memcmp(bytes.data(), "CIMW", 4) != 0) {
    throw Error("not a weight image (bad magic)");
  }
  if (bytes[5] != 1) throw Error(fmt::format("unsupported weight image version {}", bytes[5]));
  const Mode mode = parse_mode(std::string(1, static_cast<char>(bytes[4])));
  const MacroMode geom = MacroMode::of(mode);
  if (get_u32(bytes, 8) != geom.n_wl || get_u32(bytes, 12) != geom.n_sa) {
    throw Error(fmt::format("weight image dims {}x{} do not match mode {}", get_u32(bytes, 8), get_u32(bytes, 12),
                            mode_tag(mode)));
  }
  const size_t n = size_t{geom.n_wl} * geom.n_sa;
  if (bytes.size() != kWeightImageHeaderBytes + n) {
    throw Error(fmt::format("weight image holds {} bytes, expected {}", bytes.size(), kWeightImageHeaderBytes + n));
  }
  std::vector<int8_t> values(n);
  std::memcpy(values.data(), bytes.data() + kWeightImageHeaderBytes, n);
  return TernaryWeightArray::from_row_major(geom, values);
}

void save_weight_image(const std::string& path, const TernaryWeightArray& array) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  const auto bytes = encode_weight_image(array);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TernaryWeightArray load_weight_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weight_image(bytes);
}

}  // namespace rvcim::cim
