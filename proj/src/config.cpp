#include "rvcim/config.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rvcim/error.hpp"

namespace rvcim {
namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SimConfig config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  try {
    if (j.contains("dram")) {
      const auto& d = j.at("dram");
      read_opt(d, "latency_first_word", cfg.dram.latency_first_word);
      read_opt(d, "per_burst_word", cfg.dram.per_burst_word);
      read_opt(d, "burst_words", cfg.dram.burst_words);
    }
    if (j.contains("latency")) read_opt(j.at("latency"), "taken_branch_penalty", cfg.latency.taken_branch_penalty);
    if (j.contains("memory")) {
      const auto& m = j.at("memory");
      read_opt(m, "imem_bytes", cfg.memory.imem_bytes);
      read_opt(m, "dmem_bytes", cfg.memory.dmem_bytes);
      read_opt(m, "dram_bytes", cfg.memory.dram_bytes);
    }
    if (j.contains("sram")) {
      const auto& s = j.at("sram");
      const MemoryConfig fixed;
      uint32_t fm = fixed.fm_sram_bits, w = fixed.weight_sram_bits;
      read_opt(s, "fm_bits", fm);
      read_opt(s, "weight_bits", w);
      if (fm != fixed.fm_sram_bits || w != fixed.weight_sram_bits) {
        throw ConfigError(fmt::format("SRAM sizes are fixed at fm_bits={} weight_bits={}", fixed.fm_sram_bits,
                                      fixed.weight_sram_bits));
      }
    }
    read_opt(j, "clock_mhz", cfg.clock_mhz);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  if (cfg.dram.burst_words == 0) throw ConfigError("dram.burst_words must be >= 1");
  if (cfg.clock_mhz <= 0) throw ConfigError("clock_mhz must be positive");
  if (cfg.memory.imem_bytes % 4 || cfg.memory.dmem_bytes % 4 || cfg.memory.dram_bytes % 4) {
    throw ConfigError("memory sizes must be multiples of 4 bytes");
  }
  return cfg;
}

nlohmann::json config_to_json(const SimConfig& cfg) {
  return {
      {"dram",
       {{"latency_first_word", cfg.dram.latency_first_word},
        {"per_burst_word", cfg.dram.per_burst_word},
        {"burst_words", cfg.dram.burst_words}}},
      {"latency", {{"taken_branch_penalty", cfg.latency.taken_branch_penalty}}},
      {"memory",
       {{"imem_bytes", cfg.memory.imem_bytes},
        {"dmem_bytes", cfg.memory.dmem_bytes},
        {"dram_bytes", cfg.memory.dram_bytes}}},
      {"sram", {{"fm_bits", cfg.memory.fm_sram_bits}, {"weight_bits", cfg.memory.weight_sram_bits}}},
      {"clock_mhz", cfg.clock_mhz},
  };
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("cannot parse config '{}': {}", path, e.what()));
  }
  return config_from_json(j);
}

}  // namespace rvcim
