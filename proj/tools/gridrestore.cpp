// gridrestore command-line tool: train, eval, oracle, benchmark, validate.
//
// Exit codes: 0 success, 1 configuration or input error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridrestore/baselines.hpp"
#include "gridrestore/harness.hpp"

namespace fs = std::filesystem;
using namespace gridrestore;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::pair<std::string, std::string>> g_overrides;

RunConfig resolve_config(const std::string& path, const std::string& seeds_flag,
                         const std::string& output_flag) {
  RunConfig c = load_run_config(path, g_overrides);
  if (const char* env = std::getenv("GRIDRESTORE_SEED"); env && *env) {
    c.seeds = parse_seed_list(env);
    if (c.seeds.size() != 1) throw ConfigError("GRIDRESTORE_SEED must hold a single seed");
  }
  if (!seeds_flag.empty()) c.seeds = parse_seed_list(seeds_flag);
  if (!output_flag.empty()) c.output_dir = output_flag;
  c.validate();
  return c;
}

void claim_output_dir(const fs::path& dir, bool force) {
  const auto marker = dir / "resolved-config.json";
  if (fs::exists(marker) && !force) {
    throw UsageError("output directory '" + dir.string() +
                     "' already holds a run; pass --force to overwrite");
  }
  fs::create_directories(dir);
}

void write_resolved_config(const fs::path& dir, const RunConfig& c) {
  nlohmann::ordered_json doc;
  doc["gridrestore_version"] = kVersion;
  doc["config"] = run_config_to_json(c);
  std::ofstream out(dir / "resolved-config.json");
  if (!out) throw std::runtime_error("cannot write resolved config into '" + dir.string() + "'");
  out << doc.dump(2) << '\n';
}

double suite_mean(const std::vector<ScenarioEval>& rows, bool ratio) {
  double s = 0.0;
  for (const auto& r : rows) s += (ratio ? r.oracle_ratio : r.trace.final_fraction);
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

std::vector<std::uint64_t> suite_seeds(const RunConfig& c) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < c.eval.suite_size; ++i) s.push_back(c.eval.suite_first_seed + static_cast<std::uint64_t>(i));
  return s;
}

std::vector<ScenarioEval> evaluate_baseline(const RunConfig& c, std::uint64_t seed) {
  const auto feeder = load_shared_feeder(c.feeder);
  auto env = make_env_factory(feeder, c)();
  Rng rng(derive_seed(seed, 3));
  std::vector<ScenarioEval> out;
  for (auto s : suite_seeds(c)) {
    ScenarioEval e;
    e.scenario_seed = s;
    const auto spec = sample_scenario(*feeder, s, c.scenario);
    e.trace = c.algorithm == RunAlgorithm::Greedy ? greedy_episode(env, spec)
                                                  : random_episode(env, spec, rng);
    e.oracle_weighted_kw =
        exhaustive_oracle(*feeder, spec, OracleMode::Strict, c.reward, c.powerflow).best_weighted_kw;
    e.oracle_ratio = oracle_ratio(e.trace.final_weighted_kw, e.oracle_weighted_kw);
    out.push_back(std::move(e));
  }
  return out;
}

int cmd_train(const std::string& config_path, const std::string& seeds, const std::string& output,
              bool force) {
  const RunConfig c = resolve_config(config_path, seeds, output);
  const fs::path root(c.output_dir);
  claim_output_dir(root, force);
  write_resolved_config(root, c);

  std::ofstream summary(root / "summary.csv");
  summary << "seed,final_restored_frac,final_cum_reward,final_xi_mean,eval_restored_frac,"
             "eval_oracle_ratio\n";
  std::vector<std::vector<double>> columns(5);
  for (auto seed : c.seeds) {
    const fs::path dir = root / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    std::vector<double> row(5, std::nan(""));
    std::vector<ScenarioEval> evals;
    if (is_learner(c.algorithm)) {
      const auto run = train_seed(c, seed, dir);
      if (!run.metrics.empty()) {
        row[0] = run.metrics.back().restored_frac;
        row[1] = run.metrics.back().cum_reward;
        row[2] = run.metrics.back().xi_mean;
      }
      auto env = make_env_factory(load_shared_feeder(c.feeder), c)();
      evals = evaluate_policy(env, run.policy, suite_seeds(c), true, derive_seed(seed, 4), true);
    } else {
      evals = evaluate_baseline(c, seed);
    }
    {
      std::ofstream eval_out(dir / "eval.csv");
      write_eval_csv(eval_out, evals);
    }
    row[3] = suite_mean(evals, false);
    row[4] = suite_mean(evals, true);
    summary << seed;
    for (std::size_t k = 0; k < row.size(); ++k) {
      summary << ',' << (std::isnan(row[k]) ? std::string() : fmt_num(row[k]));
      if (!std::isnan(row[k])) columns[k].push_back(row[k]);
    }
    summary << '\n' << std::flush;
    std::cout << "seed " << seed << ": eval restored_frac " << fmt_num(row[3]) << ", J/J* "
              << fmt_num(row[4]) << '\n';
  }
  for (const char* label : {"mean", "std"}) {
    summary << label;
    for (const auto& col : columns) {
      if (col.empty()) {
        summary << ',';
        continue;
      }
      const auto ms = mean_std(col);
      summary << ',' << fmt_num(std::string(label) == "mean" ? ms.mean : ms.std);
    }
    summary << '\n';
  }
  std::cout << "wrote " << (root / "summary.csv").string() << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& scenarios, const std::string& feeder_flag,
             bool greedy, const std::string& output, std::uint64_t sample_seed, bool with_oracle) {
  const auto doc = read_json_file(checkpoint, "checkpoint");
  if (!doc.contains("run_config")) throw ConfigError("checkpoint carries no run_config");
  RunConfig c = run_config_from_json(doc.at("run_config"));
  if (!feeder_flag.empty()) c.feeder = feeder_flag;
  const auto seeds = parse_seed_list(scenarios);
  if (seeds.empty()) throw ConfigError("eval needs a non-empty --scenarios list");
  const PolicySet policy = policy_from_json(doc.at("policy"));
  auto env = make_env_factory(load_shared_feeder(c.feeder), c)();
  const auto rows = evaluate_policy(env, policy, seeds, greedy, sample_seed, with_oracle);
  if (output.empty()) {
    write_eval_csv(std::cout, rows);
  } else {
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot write '" + output + "'");
    write_eval_csv(out, rows);
  }
  return 0;
}

int cmd_oracle(const std::string& feeder_name, std::uint64_t seed, const std::string& mode_name,
               const std::string& config_path) {
  OracleMode mode;
  if (mode_name == "strict") {
    mode = OracleMode::Strict;
  } else if (mode_name == "penalty-free-best") {
    mode = OracleMode::PenaltyFreeBest;
  } else {
    throw ConfigError("--mode must be strict or penalty-free-best");
  }
  ScenarioConfig scenario;
  RewardConfig reward;
  PowerFlowOptions pf;
  if (!config_path.empty()) {
    const RunConfig c = load_run_config(config_path, g_overrides);
    scenario = c.scenario;
    reward = c.reward;
    pf = c.powerflow;
  }
  const FeederGraph graph = load_feeder(feeder_name);
  const auto spec = sample_scenario(graph, seed, scenario);
  const auto r = exhaustive_oracle(graph, spec, mode, reward, pf);
  std::cout << "oracle report (mode: " << to_string(mode) << ")\n"
            << "feeder: " << feeder_name << '\n'
            << "scenario_seed: " << seed << '\n'
            << "faulted: " << (spec.faulted_branch_ids.empty() ? "-" : "") ;
  for (std::size_t i = 0; i < spec.faulted_branch_ids.size(); ++i) {
    std::cout << (i ? "," : "") << spec.faulted_branch_ids[i];
  }
  std::cout << '\n'
            << "operable_switches: " << r.operable_switches << '\n'
            << "configs_evaluated: " << r.configs_evaluated << '\n'
            << "J*: " << fmt_num(r.best_weighted_kw) << '\n'
            << "fraction: " << fmt_num(r.best_fraction) << '\n'
            << "xi: " << fmt_num(r.best_xi) << '\n'
            << "feasible: " << (r.best_feasible ? "yes" : "no") << '\n'
            << "best_bits: " << bit_string(r.best_switch_states) << '\n'
            << "ties: " << r.ties << '\n'
            << "configs_per_second: "
            << fmt_num(r.seconds > 0 ? static_cast<double>(r.configs_evaluated) / r.seconds : 0.0) << '\n';
  return 0;
}

int cmd_benchmark(const std::string& config_path, const std::string& seeds, const std::string& output) {
  const RunConfig c = resolve_config(config_path, seeds, "");
  const auto rows = run_benchmark(c);
  if (output.empty()) {
    write_benchmark_csv(std::cout, rows);
  } else {
    const fs::path p(output);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + output + "'");
    write_benchmark_csv(out, rows);
    std::cout << "wrote " << output << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& feeder_name) {
  const FeederGraph g = load_feeder(feeder_name);
  std::cout << "ok: " << g.buses.size() << " buses, " << g.branches.size() << " branches, "
            << g.switches.size() << " switches, " << g.loads.size() << " loads, " << g.ders.size()
            << " DERs, " << g.microgrids.size() << " microgrids\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = extract_overrides(args, g_overrides);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  CLI::App app{"Multi-agent service restoration on distribution feeders"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, seeds, output, checkpoint, scenarios, feeder, mode = "strict";
  bool force = false, greedy = false, with_oracle = false;
  std::uint64_t seed = 1, sample_seed = 0;

  auto* train = app.add_subcommand("train", "Train one policy per seed");
  train->add_option("--config", config_path, "Run config (JSON)")->required();
  train->add_option("--seeds", seeds, "Seed list, e.g. 1,2,3 or 1-5");
  train->add_option("--output", output, "Output directory (overrides output_dir)");
  train->add_flag("--force", force, "Overwrite an existing run directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on scenarios");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  eval->add_option("--scenarios", scenarios, "Scenario seeds, e.g. 1-5")->required();
  eval->add_option("--feeder", feeder, "Feeder to evaluate on (default: the training feeder)");
  eval->add_flag("--greedy", greedy, "Take argmax actions instead of sampling");
  eval->add_option("--output", output, "CSV path (default: stdout)");
  eval->add_option("--sample-seed", sample_seed, "Seed for action sampling");
  eval->add_flag("--oracle", with_oracle, "Also compute the strict oracle per scenario");

  auto* oracle = app.add_subcommand("oracle", "Exhaustive best configuration for one scenario");
  oracle->add_option("--feeder", feeder, "Feeder fixture name or path")->required();
  oracle->add_option("--seed", seed, "Scenario seed");
  oracle->add_option("--mode", mode, "strict | penalty-free-best");
  oracle->add_option("--config", config_path, "Run config supplying scenario/reward settings");

  auto* bench = app.add_subcommand("benchmark", "Compare algorithms on the canonical suite");
  bench->add_option("--config", config_path, "Run config (JSON)")->required();
  bench->add_option("--seeds", seeds, "Seed list");
  bench->add_option("--output", output, "CSV path (default: stdout)");

  auto* validate = app.add_subcommand("validate", "Check a feeder file");
  validate->add_option("--feeder", feeder, "Feeder fixture name or path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(config_path, seeds, output, force);
    if (*eval) return cmd_eval(checkpoint, scenarios, feeder, greedy, output, sample_seed, with_oracle);
    if (*oracle) return cmd_oracle(feeder, seed, mode, config_path);
    if (*bench) return cmd_benchmark(config_path, seeds, output);
    if (*validate) return cmd_validate(feeder);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const DimensionMismatch& e) {
    std::cerr << "dimension mismatch: " << e.what() << '\n';
    return 1;
  } catch (const TooLarge& e) {
    std::cerr << "too large: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
