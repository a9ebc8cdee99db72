// weight_image.hpp: on-disk macro weight image.
//
// Layout (little-endian): "CIMW", mode tag ('X' or 'Y'), version 1, two
// reserved zero bytes, u32 n_wl, u32 n_sa, then n_wl * n_sa signed bytes in
// {-1, 0, +1}, row-major.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rvcim/cim_macro.hpp"

namespace rvcim::cim {

inline constexpr uint32_t kWeightImageHeaderBytes = 16;

std::vector<uint8_t> encode_weight_image(const TernaryWeightArray& array);
TernaryWeightArray decode_weight_image(const std::vector<uint8_t>& bytes);

void save_weight_image(const std::string& path, const TernaryWeightArray& array);
TernaryWeightArray load_weight_image(const std::string& path);

}  // namespace rvcim::cim
