#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace rvcim {

struct DramConfig {
  uint32_t latency_first_word = 30;
  uint32_t per_burst_word = 1;
  uint32_t burst_words = 16;
};

struct LatencyConfig {
  // Extra cycles for a taken branch or jump (pipeline refill bubble).
  uint32_t taken_branch_penalty = 1;
};

struct MemoryConfig {
  uint32_t imem_bytes = 1u << 20;
  uint32_t dmem_bytes = 256u << 10;
  uint32_t dram_bytes = 16u << 20;
  // Fixed by the chip; asserted when loading a config file.
  uint32_t fm_sram_bits = 256u * 1024;
  uint32_t weight_sram_bits = 512u * 1024;
};

struct SimConfig {
  DramConfig dram;
  LatencyConfig latency;
  MemoryConfig memory;
  double clock_mhz = 50.0;
};

SimConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SimConfig& cfg);
SimConfig load_config(const std::string& path);

}  // namespace rvcim
