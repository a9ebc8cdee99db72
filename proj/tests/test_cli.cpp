#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::map<std::string, std::string> kv;
  std::string get(const std::string& k) const {
    const auto it = kv.find(k);
    return it == kv.end() ? std::string() : it->second;
  }
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(RVCIM_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) r.kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "rvcim_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string kRoot = RVCIM_SOURCE_DIR;

}  // namespace

TEST_CASE("info") {
  const auto r = cli("info");
  CHECK(r.code == 0);
  CHECK(r.get("mode.X.peak_tops") == "26.21");
  CHECK(r.get("mode.Y.peak_tops") == "26.21");
  CHECK(r.get("mode.X.n_wl") == "1024");
  CHECK(r.get("mode.Y.n_sa") == "512");
}

TEST_CASE("asm, disasm and reassembly reach a fixpoint") {
  const auto src = scratch("prog.s");
  write(src,
        "  li x5, 3\n"
        "loop:\n"
        "  cim.conv x8, x9, 1, 2\n"
        "  addi x5, x5, -1\n"
        "  bne x5, x0, loop\n"
        "  jal x0, 0\n");
  const auto bin = scratch("prog.bin");
  REQUIRE(cli("asm " + src.string() + " -o " + bin.string()).code == 0);
  const auto d1 = cli("disasm " + bin.string());
  REQUIRE(d1.code == 0);
  CHECK(d1.out.find("cim.conv") != std::string::npos);
  const auto src2 = scratch("prog2.s");
  write(src2, d1.out);
  const auto bin2 = scratch("prog2.bin");
  REQUIRE(cli("asm " + src2.string() + " -o " + bin2.string()).code == 0);
  CHECK(read(bin) == read(bin2));
  CHECK(cli("disasm " + bin2.string()).out == d1.out);

  const auto r = cli("run " + bin.string());
  CHECK(r.code == 0);
  CHECK(r.get("status") == "halted");
  CHECK(r.kv.count("x5") == 0);  // counted down to zero
}

TEST_CASE("assembler errors name the line") {
  const auto src = scratch("bad.s");
  write(src, "addi x1, x0, 1\nfrobnicate x1\n");
  const auto r = cli("asm " + src.string() + " -o " + scratch("bad.bin").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("2") != std::string::npos);
  CHECK(r.out.find("frobnicate") != std::string::npos);
}

TEST_CASE("run reports timeouts and traps") {
  const auto loop = scratch("spin.s");
  write(loop, "top:\n  beq x0, x0, top\n");
  const auto bin = scratch("spin.bin");
  REQUIRE(cli("asm " + loop.string() + " -o " + bin.string()).code == 0);
  const auto r = cli("run " + bin.string() + " --max-cycles 1000");
  CHECK(r.code == 4);
  CHECK(r.get("status") == "timeout");

  const auto bad = scratch("trap.s");
  write(bad, "  lui x1, 0x50000\n  lw x2, 0(x1)\n  jal x0, 0\n");
  const auto bin2 = scratch("trap.bin");
  REQUIRE(cli("asm " + bad.string() + " -o " + bin2.string()).code == 0);
  CHECK(cli("run " + bin2.string()).code == 3);
}

TEST_CASE("report and ladder keys") {
  const auto r = cli("report --ladder");
  REQUIRE(r.code == 0);
  for (const char* k : {"step0.name", "step1.step_reduction_pct", "step3.config", "total_reduction_pct",
                        "target_total_reduction_pct", "step2.target_step_reduction_pct"})
    CHECK(r.kv.count(k) == 1);
  CHECK(r.get("step0.name") == "baseline");
  CHECK(r.get("target_total_reduction_pct") == "85.14");

  const auto cal = cli("report --ladder --model " + kRoot + "/models/calibration.json --config " + kRoot +
                       "/configs/calibration.json");
  REQUIRE(cal.code == 0);
  const double total = std::stod(cal.get("total_reduction_pct"));
  CHECK(total > 75.14);
  CHECK(total < 95.14);
}

TEST_CASE("lower dumps a schedule and rejects oversize layers") {
  const auto dump = scratch("sched.txt");
  const auto r = cli("lower --enable-layer-fusion --enable-weight-fusion --enable-pipeline --dump " + dump.string());
  REQUIRE(r.code == 0);
  CHECK(r.get("config") == "lf+wf+pipe");
  CHECK(read(dump).find("cim.conv") != std::string::npos);

  const auto m = scratch("wide.json");
  write(m, R"({"layers": [{"kind": "conv", "out_channels": 300}, {"kind": "gap", "classes": 12}]})");
  const auto bad = cli("lower --model " + m.string());
  CHECK(bad.code == 2);
  CHECK(bad.out.find("layer0") != std::string::npos);
}

TEST_CASE("kws end to end with generated inputs") {
  const auto prefix = scratch("w").string();
  const auto audio = scratch("frame.pcm");
  const auto g = cli("gen --seed 5 --weights-prefix " + prefix + " --audio " + audio.string());
  REQUIRE(g.code == 0);
  std::string weights;
  for (size_t i = 0; fs::exists(prefix + std::to_string(i) + ".cimw"); ++i) weights += " " + prefix + std::to_string(i) + ".cimw";
  REQUIRE_FALSE(weights.empty());

  const auto trace = scratch("trace.txt");
  const auto r = cli("kws --enable-layer-fusion --enable-weight-fusion --enable-pipeline --audio " + audio.string() +
                     " --weights" + weights + " --trace " + trace.string());
  REQUIRE(r.code == 0);
  CHECK(r.get("golden_match") == "1");
  CHECK(r.get("estimate_match") == "1");
  CHECK(r.get("trace_total") == r.get("measured.total"));
  CHECK(r.get("cycles") == r.get("measured.total"));
  CHECK(fs::file_size(trace) > 0);

  const auto again = cli("kws --enable-layer-fusion --enable-weight-fusion --enable-pipeline --audio " +
                         audio.string() + " --weights" + weights);
  CHECK(again.get("scores") == r.get("scores"));

  const auto base = cli("kws --seed 9");
  CHECK(base.code == 0);
  CHECK(base.get("config") == "baseline");
  CHECK(std::stoull(base.get("measured.total")) > std::stoull(r.get("measured.total")));
}

TEST_CASE("ladder table agrees with the key=value report") {
  const auto kv = cli("report --ladder");
  const auto table = cli("report --ladder --table");
  REQUIRE(table.code == 0);
  std::istringstream in(table.out);
  std::string line;
  while (std::getline(in, line) && line.rfind("step ", 0) != 0) {}
  for (int i = 0; i < 4; ++i) {
    REQUIRE(std::getline(in, line));
    std::istringstream row(line);
    std::string name, config, total, wl, conv, pool, pre, dram, step, target, cum;
    row >> name >> config >> total >> wl >> conv >> pool >> pre >> dram >> step >> target >> cum;
    const std::string p = "step" + std::to_string(i) + ".";
    CHECK(name == kv.get(p + "name"));
    CHECK(config == kv.get(p + "config"));
    CHECK(total == kv.get(p + "total"));
    CHECK(wl == kv.get(p + "weight_load"));
    CHECK(conv == kv.get(p + "conv"));
    CHECK(pool == kv.get(p + "pool"));
    CHECK(pre == kv.get(p + "pre_post"));
    CHECK(dram == kv.get(p + "dram_fm_traffic"));
    if (i > 0) {
      CHECK(step == kv.get(p + "step_reduction_pct"));
      CHECK(target == kv.get(p + "target_step_reduction_pct"));
      CHECK(cum == kv.get(p + "total_reduction_pct"));
    }
  }
}

TEST_CASE("jump to self halts immediately") {
  const auto src = scratch("halt.s");
  write(src, "jal x0, 0\n");
  const auto bin = scratch("halt.bin");
  REQUIRE(cli("asm " + src.string() + " -o " + bin.string()).code == 0);
  const auto r = cli("run " + bin.string());
  CHECK(r.code == 0);
  CHECK(std::stoull(r.get("cycles")) <= 2);
}

TEST_CASE("CIM smoke program reproduces its golden trace") {
  const auto bin = scratch("smoke.bin");
  REQUIRE(cli("asm " + kRoot + "/tests/data/cim_smoke.s -o " + bin.string()).code == 0);
  const auto trace = scratch("smoke.trace");
  const auto r = cli("run " + bin.string() + " --trace " + trace.string());
  CHECK(r.code == 0);
  CHECK(r.get("x8") == "0x00000001");
  CHECK(read(trace) == read(kRoot + "/tests/data/cim_smoke.trace"));
}
