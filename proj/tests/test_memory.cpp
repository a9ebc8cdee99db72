#include <random>

#include <nlohmann/json.hpp>

#include "doctest.h"

#include "rvcim/config.hpp"
#include "rvcim/error.hpp"
#include "rvcim/memory.hpp"

using namespace rvcim;
using namespace rvcim::mem;

namespace {

// Independent reference for the DRAM cost: walk the words one by one.
uint64_t cost_by_walking(const DramConfig& c, uint64_t n) {
  uint64_t cost = 0;
  for (uint64_t i = 0; i < n; ++i) cost += (i % c.burst_words == 0) ? c.latency_first_word : c.per_burst_word;
  return cost;
}

}  // namespace

TEST_CASE("SRAM capacities and wide ports") {
  MemorySystem m{SimConfig{}};
  CHECK(m.fm().size_bits() == 262144u);
  CHECK(m.weight().size_bits() == 524288u);
  CHECK(m.fm().size_words() == 8192u);
  CHECK(m.weight().size_words() == 16384u);
  CHECK(m.fm().wide_port_bits() == 256u);
  CHECK(m.weight().wide_port_bits() == 512u);
}

TEST_CASE("SRAM capacity edge") {
  SramBank fm("fm", 262144, 256);
  fm.write(8191, 0xDEADBEEFu);
  CHECK(fm.read(8191) == 0xDEADBEEFu);
  CHECK_THROWS_AS(fm.write(8192, 1), BoundsError);
  CHECK_THROWS_AS(fm.read(8192), BoundsError);
  const std::vector<uint32_t> two{1, 2};
  CHECK_THROWS_AS(fm.write_block(8191, two), BoundsError);
  CHECK_THROWS_AS(fm.read_wide(8184 + 1), BoundsError);
}

TEST_CASE("property: narrow and wide ports are coherent") {
  std::mt19937 rng(21);
  SramBank w("weight", 524288, 512);
  for (int n = 0; n < 2000; ++n) {
    const uint32_t base = (rng() % (16384 / 16)) * 16;
    if (rng() & 1) {
      std::vector<uint32_t> data(16);
      for (auto& d : data) d = rng();
      w.write_wide(base, data);
      for (uint32_t i = 0; i < 16; ++i) REQUIRE(w.read(base + i) == data[i]);
    } else {
      const uint32_t off = rng() % 16;
      const uint32_t v = rng();
      w.write(base + off, v);
      REQUIRE(w.read_wide(base)[off] == v);
    }
  }
}

TEST_CASE("DRAM fetch cost") {
  const DramConfig def;
  CHECK(dram_fetch_cost(def, 0) == 0u);
  CHECK(dram_fetch_cost(def, 1) == 30u);
  CHECK(dram_fetch_cost(def, 16) == 45u);
  CHECK(dram_fetch_cost(def, 17) == 75u);
  std::mt19937 rng(4);
  for (int n = 0; n < 200; ++n) {
    DramConfig c{static_cast<uint32_t>(1 + rng() % 100), static_cast<uint32_t>(rng() % 4), static_cast<uint32_t>(1 + rng() % 64)};
    uint64_t prev = 0;
    for (uint64_t k = 0; k < 300; ++k) {
      const uint64_t cost = dram_fetch_cost(c, k);
      REQUIRE(cost == cost_by_walking(c, k));
      REQUIRE(cost >= prev);
      prev = cost;
    }
  }
}

TEST_CASE("DMA engine state machine") {
  DmaEngine e;
  CHECK(e.state() == DmaState::Idle);
  e.start({}, 3);
  CHECK(e.state() == DmaState::Busy);
  CHECK_THROWS_AS(e.start({}, 1), Error);
  CHECK_FALSE(e.tick(2));
  CHECK(e.remaining() == 1);
  CHECK(e.tick(5));
  CHECK(e.state() == DmaState::Done);
  CHECK_FALSE(e.tick(1));
  e.start({}, 0);
  CHECK(e.tick(1));
  CHECK(e.state() == DmaState::Done);
}

TEST_CASE("DMA copies DRAM to SRAM at completion") {
  MemorySystem m{SimConfig{}};
  for (uint32_t i = 0; i < 16; ++i) m.dram().write_word(4 * i, 100 + i);
  const uint64_t cost = m.dma_cost(16);
  CHECK(cost == 45u + 16u);
  REQUIRE_FALSE(m.dma_start({kDramBase, kWeightBase + 64, 16}).has_value());
  CHECK(m.dma_start({kDramBase, kFmBase, 1}).has_value());  // busy
  m.tick(cost - 1);
  CHECK(m.weight().read(16) == 0u);
  m.tick(1);
  CHECK(m.dma().state() == DmaState::Done);
  for (uint32_t i = 0; i < 16; ++i) CHECK(m.weight().read(16 + i) == 100 + i);
}

TEST_CASE("DMA validation") {
  MemorySystem m{SimConfig{}};
  CHECK(m.dma_start({kFmBase, kWeightBase, 4}).has_value());    // no DRAM endpoint
  CHECK(m.dma_start({kDramBase, kDramBase + 64, 4}).has_value());  // two DRAM endpoints
  CHECK(m.dma_start({kDramBase, kFmBase + 4 * 8190, 4}).has_value());  // overruns FM
  CHECK(m.dma_start({kDramBase + 2, kFmBase, 4}).has_value());  // misaligned
  CHECK(m.dma_start({kDramBase, 0x5000'0000, 4}).has_value());  // unmapped
  REQUIRE_FALSE(m.dma_start({kFmBase, kDramBase, 0}).has_value());
  CHECK(m.dma_cost(0) == 0u);
  m.tick(1);
  CHECK(m.dma().state() == DmaState::Done);
  REQUIRE_FALSE(m.dma_start({kDmemBase, kDramBase + 8, 2}).has_value());
}

TEST_CASE("address map") {
  MemorySystem m{SimConfig{}};
  CHECK(m.region_of(0, 4) == Region::Imem);
  CHECK(m.region_of(kDmemBase, 4) == Region::Dmem);
  CHECK(m.region_of(kFmBase + 4 * 8191, 4) == Region::Fm);
  CHECK(m.region_of(kFmBase + 4 * 8192, 4) == Region::None);
  CHECK(m.region_of(kWeightBase + 4 * 16383, 4) == Region::Weight);
  CHECK(m.region_of(kDmaBase + kDmaWait, 4) == Region::Dma);
  CHECK(m.region_of(kDramBase, 4) == Region::Dram);
  m.write_word_at(kFmBase + 8, 0x12345678u);
  CHECK(m.fm().read(2) == 0x12345678u);
  CHECK_THROWS_AS(m.write_word_at(kDmaBase, 1), BoundsError);
}

TEST_CASE("config JSON") {
  const SimConfig def;
  const SimConfig back = config_from_json(config_to_json(def));
  CHECK(back.dram.latency_first_word == 30u);
  CHECK(back.dram.burst_words == 16u);
  CHECK(back.clock_mhz == doctest::Approx(50.0));
  nlohmann::json j = {{"dram", {{"latency_first_word", 12}}}};
  CHECK(config_from_json(j).dram.latency_first_word == 12u);
  CHECK_THROWS_AS(config_from_json({{"sram", {{"fm_bits", 1024}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"dram", {{"burst_words", 0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"dram", {{"burst_words", "x"}}}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);
}
