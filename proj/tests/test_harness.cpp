#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridrestore/harness.hpp"

namespace fs = std::filesystem;
using namespace gridrestore;

namespace {

struct CommandResult {
  int code = -1;
  std::string out;
};

CommandResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" GRIDRESTORE_CLI "\" " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("gridrestore_" + std::to_string(getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string smoke() const { return std::string(GRIDRESTORE_CONFIG_DIR) + "/smoke.json"; }

  fs::path dir_;
};

// Valid feeder with one region and n switched branches in a chain.
std::string chain_feeder_json(int n) {
  nlohmann::json doc;
  doc["s_base_kva"] = 1000;
  doc["p_gen_cap_kw"] = 2400;
  nlohmann::json buses = nlohmann::json::array(), branches = nlohmann::json::array(),
                 switches = nlohmann::json::array(), bus_ids = nlohmann::json::array(),
                 switch_ids = nlohmann::json::array();
  for (int i = 0; i <= n; ++i) {
    const auto id = "b" + std::to_string(i);
    buses.push_back({{"id", id}, {"base_kv", 4.16}, {"is_source", false}});
    bus_ids.push_back(id);
  }
  for (int i = 1; i <= n; ++i) {
    const auto k = std::to_string(i);
    branches.push_back({{"id", "l" + k}, {"from_bus", "b" + std::to_string(i - 1)}, {"to_bus", "b" + k},
                        {"r_pu", 0.001}, {"x_pu", 0.001}, {"s_max_pu", 1.0}, {"switch_id", "s" + k}});
    switches.push_back({{"id", "s" + k}, {"branch_id", "l" + k}, {"state", "Open"}, {"owner_microgrid", 0}});
    switch_ids.push_back("s" + k);
  }
  doc["buses"] = buses;
  doc["branches"] = branches;
  doc["switches"] = switches;
  doc["loads"] = {{{"id", "L"}, {"bus_id", "b1"}, {"p_demand_kw", 10}, {"q_demand_kvar", 3}, {"priority", 1}}};
  doc["ders"] = {{{"id", "G"}, {"bus_id", "b0"}, {"p_min_kw", 0}, {"p_max_kw", 100},
                  {"q_min_kvar", -50}, {"q_max_kvar", 50}, {"owner_microgrid", 0}}};
  doc["microgrids"] = {{{"index", 0}, {"bus_ids", bus_ids}, {"switch_ids", switch_ids},
                        {"load_ids", {"L"}}, {"der_ids", {"G"}}}};
  return doc.dump();
}

}  // namespace

TEST(RunConfig, DefaultsAndStrictKeys) {
  const auto c = run_config_from_json(nlohmann::json::parse(R"({"feeder": "toy4"})"));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(c.algorithm, RunAlgorithm::Happo);
  EXPECT_EQ(c.train.clip_eps, 0.2);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"feeder": "toy4", "bogus": 1})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"feeder": "toy4", "train": {"clip": 1}})")),
               ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"feeder": "toy4", "train": {"gamma": "x"}})")),
               ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"seeds": [1]})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"feeder": "toy4", "algorithm": "dqn"})")),
               ConfigError);
}

TEST(RunConfig, JsonRoundTrip) {
  auto doc = nlohmann::json::parse(R"({
    "feeder": "toy13", "algorithm": "independent-ppo", "seeds": "1-3",
    "scenario": {"fault_count_max": 2, "der_scale_min": 0.5, "horizon": 9},
    "reward": {"delta_mode": "raw_kw", "constraint_norms": [1, 2, 3, 4, 5, 6]},
    "train": {"update_order": "random", "hidden_dims": [16, 8]},
    "benchmark": {"algorithms": ["random"], "timing": false}
  })");
  const auto c = run_config_from_json(doc);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.scenario.horizon, 9);
  const auto again = run_config_from_json(nlohmann::json::parse(run_config_to_json(c).dump()));
  EXPECT_EQ(run_config_to_json(again), run_config_to_json(c));
}

TEST(SeedList, ParsesListsAndRanges) {
  EXPECT_EQ(parse_seed_list("1,2,3"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(parse_seed_list("4-6,9"), (std::vector<std::uint64_t>{4, 5, 6, 9}));
  EXPECT_TRUE(parse_seed_list("").empty());
  EXPECT_THROW(parse_seed_list("x"), ConfigError);
  EXPECT_THROW(parse_seed_list("5-2"), ConfigError);
}

TEST(Overrides, ExtractAndApply) {
  std::vector<std::pair<std::string, std::string>> ov;
  const auto rest = extract_overrides({"train", "--config", "c.json", "--train.clip_eps", "0.1",
                                       "--scenario.horizon=5", "--force"},
                                      ov);
  EXPECT_EQ(rest, (std::vector<std::string>{"train", "--config", "c.json", "--force"}));
  ASSERT_EQ(ov.size(), 2u);
  auto doc = nlohmann::json::parse(R"({"feeder": "toy4", "train": {"clip_eps": 0.3}})");
  apply_overrides(doc, ov);
  EXPECT_EQ(doc["train"]["clip_eps"], 0.1);
  EXPECT_EQ(doc["scenario"]["horizon"], 5);
  EXPECT_EQ(parse_override_value("64,64"), nlohmann::json::parse("[64,64]"));
  EXPECT_EQ(parse_override_value("fixed"), "fixed");
  std::vector<std::pair<std::string, std::string>> bad;
  EXPECT_THROW(extract_overrides({"--train.clip_eps"}, bad), ConfigError);
}

TEST(MetricsCsv, HeaderAndWallclockSuppression) {
  EXPECT_EQ(join_csv(metrics_header(2)),
            "iteration,steps,mean_reward,cum_reward,restored_frac,weighted_restored_kw,xi_mean,"
            "actor_loss_0,actor_loss_1,critic_loss,entropy_0,entropy_1,wallclock_s");
  IterationMetrics m;
  m.iteration = 3;
  m.steps = 48;
  m.actor_loss = {0.5};
  m.entropy = {1.0};
  m.wallclock_s = 0.25;
  EXPECT_EQ(metrics_row(m, false), "3,48,0,0,0,0,0,0.5,0,1,0");
  EXPECT_EQ(metrics_row(m, true), "3,48,0,0,0,0,0,0.5,0,1,0.25");
}

TEST(OracleRatio, Edges) {
  EXPECT_DOUBLE_EQ(oracle_ratio(50, 100), 0.5);
  EXPECT_DOUBLE_EQ(oracle_ratio(0, 0), 1.0);
}

TEST(Cli, ValidateFixture) {
  const auto r = run_cli("validate --feeder toy13");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("ok: 13 buses"), std::string::npos) << r.out;
}

TEST(Cli, ConfigErrorsExitOne) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("frobnicate").code, 1);
  EXPECT_EQ(run_cli("validate --feeder /nonexistent/feeder.json").code, 1);
  EXPECT_EQ(run_cli("oracle --feeder toy4 --mode bogus").code, 1);
  EXPECT_EQ(run_cli("train --config /nonexistent.json").code, 1);
}

TEST(Cli, OracleReportOnToy4) {
  const auto r = run_cli("oracle --feeder toy4 --seed 1");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("oracle report (mode: strict)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("configs_evaluated: 4\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("best_bits: "), std::string::npos);
}

TEST_F(Workdir, OracleGuardTripExitsTwo) {
  const auto path = dir_ / "chain25.json";
  std::ofstream(path) << chain_feeder_json(25);
  const auto r = run_cli("oracle --feeder " + path.string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("too large"), std::string::npos) << r.out;
}

TEST_F(Workdir, TrainWritesArtifactsAndEchoesOverrides) {
  const auto out = dir_ / "run";
  const auto r = run_cli("train --config " + smoke() + " --output " + out.string() +
                         " --train.clip_eps 0.1 --seeds 1,2");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto resolved = nlohmann::json::parse(slurp(out / "resolved-config.json"));
  EXPECT_EQ(resolved["config"]["train"]["clip_eps"], 0.1);
  EXPECT_EQ(resolved["config"]["seeds"], nlohmann::json::parse("[1,2]"));
  EXPECT_TRUE(resolved.contains("gridrestore_version"));
  for (const char* s : {"seed_1", "seed_2"}) {
    const auto m = lines(slurp(out / s / "metrics.csv"));
    ASSERT_EQ(m.size(), 4u);
    EXPECT_EQ(m[0], join_csv(metrics_header(2)));
    EXPECT_TRUE(fs::exists(out / s / "checkpoint_final.json"));
    EXPECT_TRUE(fs::exists(out / s / "eval.csv"));
  }
  const auto summary = lines(slurp(out / "summary.csv"));
  ASSERT_EQ(summary.size(), 5u);
  EXPECT_EQ(summary[0], "seed,final_restored_frac,final_cum_reward,final_xi_mean,eval_restored_frac,eval_oracle_ratio");
  EXPECT_EQ(summary[3].rfind("mean,", 0), 0u);
  EXPECT_EQ(summary[4].rfind("std,", 0), 0u);

  const auto again = run_cli("train --config " + smoke() + " --output " + out.string());
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.out.find("--force"), std::string::npos) << again.out;
  EXPECT_EQ(run_cli("train --config " + smoke() + " --output " + out.string() + " --force").code, 0);
}

TEST_F(Workdir, SeedPrecedence) {
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run_cli("train --config " + smoke() + " --output " + a.string(), "GRIDRESTORE_SEED=7").code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(a / "resolved-config.json"))["config"]["seeds"],
            nlohmann::json::parse("[7]"));
  ASSERT_EQ(run_cli("train --config " + smoke() + " --output " + b.string() + " --seeds 3",
                    "GRIDRESTORE_SEED=7")
                .code,
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(b / "resolved-config.json"))["config"]["seeds"],
            nlohmann::json::parse("[3]"));
  EXPECT_EQ(run_cli("train --config " + smoke() + " --output " + (dir_ / "c").string(),
                    "GRIDRESTORE_SEED=1,2")
                .code,
            1);
}

TEST_F(Workdir, TrainIsByteDeterministic) {
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run_cli("train --config " + smoke() + " --output " + a.string()).code, 0);
  ASSERT_EQ(run_cli("train --config " + smoke() + " --output " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "seed_1" / "metrics.csv"), slurp(b / "seed_1" / "metrics.csv"));
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
}

TEST_F(Workdir, EvalCheckpoint) {
  const auto run = dir_ / "run";
  ASSERT_EQ(run_cli("train --config " + smoke() + " --output " + run.string()).code, 0);
  const auto ckpt = (run / "seed_1" / "checkpoint_final.json").string();

  const auto ok = run_cli("eval --checkpoint " + ckpt + " --scenarios 1-3 --greedy --oracle");
  ASSERT_EQ(ok.code, 0) << ok.out;
  const auto rows = lines(ok.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].rfind("scenario_seed,restored_frac,", 0), 0u);

  const auto empty = run_cli("eval --checkpoint " + ckpt + " --scenarios \"\"");
  EXPECT_EQ(empty.code, 1) << empty.out;

  const auto mismatch = run_cli("eval --checkpoint " + ckpt + " --scenarios 1 --feeder toy13");
  EXPECT_EQ(mismatch.code, 1) << mismatch.out;
  EXPECT_NE(mismatch.out.find("dimension mismatch"), std::string::npos) << mismatch.out;

  const auto missing = run_cli("eval --checkpoint " + (dir_ / "nope.json").string() + " --scenarios 1");
  EXPECT_EQ(missing.code, 1);
}

TEST_F(Workdir, BenchmarkEmitsOneRowPerAlgorithm) {
  const auto csv = dir_ / "bench.csv";
  const auto r = run_cli("benchmark --config " + smoke() + " --output " + csv.string() +
                         " --benchmark.timing false");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = lines(slurp(csv));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "algorithm,restored_frac_mean,restored_frac_std,oracle_gap_pct,train_wallclock_s,eval_latency_ms");
  EXPECT_EQ(rows[1].rfind("happo,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("independent-ppo,", 0), 0u);
  EXPECT_EQ(rows[3].rfind("random,", 0), 0u);
  EXPECT_EQ(rows[4].rfind("greedy,", 0), 0u);
  const auto again = dir_ / "bench2.csv";
  ASSERT_EQ(run_cli("benchmark --config " + smoke() + " --output " + again.string() +
                    " --benchmark.timing false")
                .code,
            0);
  EXPECT_EQ(slurp(csv), slurp(again));
}

TEST_F(Workdir, BaselineAlgorithmsTrainWithoutLearning) {
  auto doc = nlohmann::json::parse(slurp(smoke()));
  doc["algorithm"] = "greedy";
  const auto cfg = dir_ / "greedy.json";
  std::ofstream(cfg) << doc.dump();
  const auto out = dir_ / "greedy";
  const auto r = run_cli("train --config " + cfg.string() + " --output " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(out / "seed_1" / "eval.csv"));
  EXPECT_FALSE(fs::exists(out / "seed_1" / "metrics.csv"));
}
