#ifndef GRIDRESTORE_HARNESS_HPP_
#define GRIDRESTORE_HARNESS_HPP_

// Run configuration, command-line overrides and experiment orchestration:
// per-seed training runs with metrics CSVs and checkpoints, policy
// evaluation on scenario lists, and the cross-algorithm benchmark table.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridrestore/baselines.hpp"
#include "gridrestore/constraints.hpp"
#include "gridrestore/env.hpp"
#include "gridrestore/errors.hpp"
#include "gridrestore/feeder.hpp"
#include "gridrestore/happo.hpp"
#include "gridrestore/powerflow.hpp"

#ifndef GRIDRESTORE_VERSION
#define GRIDRESTORE_VERSION "0.0.0"
#endif

namespace gridrestore {

inline constexpr const char* kVersion = GRIDRESTORE_VERSION;

enum class RunAlgorithm { Happo, IndependentPpo, Random, Greedy };

inline const char* to_string(RunAlgorithm a) {
  switch (a) {
    case RunAlgorithm::Happo: return "happo";
    case RunAlgorithm::IndependentPpo: return "independent-ppo";
    case RunAlgorithm::Random: return "random";
    case RunAlgorithm::Greedy: return "greedy";
  }
  return "?";
}

inline RunAlgorithm parse_run_algorithm(const std::string& s) {
  if (s == "happo") return RunAlgorithm::Happo;
  if (s == "independent-ppo") return RunAlgorithm::IndependentPpo;
  if (s == "random") return RunAlgorithm::Random;
  if (s == "greedy") return RunAlgorithm::Greedy;
  throw ConfigError("unknown algorithm '" + s + "' (happo|independent-ppo|random|greedy)");
}

inline bool is_learner(RunAlgorithm a) {
  return a == RunAlgorithm::Happo || a == RunAlgorithm::IndependentPpo;
}

struct EvalConfig {
  int suite_size = 5;
  std::uint64_t suite_first_seed = 1;
  int random_repeats = 20;  // random-policy episodes per suite scenario
};

struct RunConfig {
  std::string feeder;
  RunAlgorithm algorithm = RunAlgorithm::Happo;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  int checkpoint_every = 0;  // 0 keeps only the final checkpoint
  bool log_wallclock = false;
  ScenarioConfig scenario;
  RewardConfig reward;
  TrainConfig train;
  PowerFlowOptions powerflow;
  EvalConfig eval;
  std::vector<RunAlgorithm> benchmark_algorithms{RunAlgorithm::Happo, RunAlgorithm::IndependentPpo,
                                                 RunAlgorithm::Random, RunAlgorithm::Greedy};
  bool benchmark_timing = true;

  void validate() const {
    if (feeder.empty()) throw ConfigError("run config needs a 'feeder'");
    if (seeds.empty()) throw ConfigError("run config needs at least one seed");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (eval.suite_size < 1) throw ConfigError("eval.suite_size must be >= 1");
    if (eval.random_repeats < 1) throw ConfigError("eval.random_repeats must be >= 1");
    if (benchmark_algorithms.empty()) throw ConfigError("benchmark.algorithms must not be empty");
    if (!(powerflow.tol_pu > 0) || powerflow.max_iterations < 1) {
      throw ConfigError("powerflow.tol_pu must be > 0 and max_iterations >= 1");
    }
    scenario.validate();
    reward.validate();
    train.validate();
  }
};

namespace detail {

using nlohmann::json;

inline void config_keys(const json& obj, const std::string& section,
                        std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + (section.empty() ? "run config" : "'" + section + "'"));
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + section + "." + key + "' has the wrong type");
  }
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("bad seed range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        std::size_t used = 0;
        seeds.push_back(std::stoull(item, &used));
        if (used != item.size()) throw ConfigError("bad seed '" + item + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  return seeds;
}

}  // namespace detail

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  return detail::parse_seed_list(text);
}

inline RunConfig run_config_from_json(const nlohmann::json& doc) {
  using detail::config_keys;
  using detail::read;
  config_keys(doc, "", {"feeder", "algorithm", "seeds", "output_dir", "checkpoint_every",
                        "log_wallclock", "scenario", "reward", "train", "powerflow", "eval",
                        "benchmark"});
  RunConfig c;
  read(doc, "feeder", c.feeder, "run");
  if (doc.contains("algorithm")) {
    std::string a;
    read(doc, "algorithm", a, "run");
    c.algorithm = parse_run_algorithm(a);
  }
  if (doc.contains("seeds")) {
    const auto& s = doc.at("seeds");
    if (s.is_string()) {
      c.seeds = detail::parse_seed_list(s.get<std::string>());
    } else if (s.is_number_unsigned()) {
      c.seeds = {s.get<std::uint64_t>()};
    } else {
      read(doc, "seeds", c.seeds, "run");
    }
  }
  read(doc, "output_dir", c.output_dir, "run");
  read(doc, "checkpoint_every", c.checkpoint_every, "run");
  read(doc, "log_wallclock", c.log_wallclock, "run");

  if (doc.contains("scenario")) {
    const auto& s = doc.at("scenario");
    config_keys(s, "scenario", {"fault_count_min", "fault_count_max", "der_scale_min",
                                "der_scale_max", "horizon", "lock_penalty"});
    read(s, "fault_count_min", c.scenario.fault_count_min, "scenario");
    read(s, "fault_count_max", c.scenario.fault_count_max, "scenario");
    read(s, "der_scale_min", c.scenario.der_scale_min, "scenario");
    read(s, "der_scale_max", c.scenario.der_scale_max, "scenario");
    if (s.contains("horizon") && !s.at("horizon").is_null()) {
      int h = 0;
      read(s, "horizon", h, "scenario");
      c.scenario.horizon = h;
    }
    read(s, "lock_penalty", c.scenario.lock_penalty, "scenario");
  }
  if (doc.contains("reward")) {
    const auto& r = doc.at("reward");
    config_keys(r, "reward", {"alpha", "beta", "lambda_pen", "v_min_pu", "v_max_pu", "delta_mode",
                              "constraint_norms"});
    read(r, "alpha", c.reward.alpha, "reward");
    read(r, "beta", c.reward.beta, "reward");
    read(r, "lambda_pen", c.reward.lambda_pen, "reward");
    read(r, "v_min_pu", c.reward.v_min_pu, "reward");
    read(r, "v_max_pu", c.reward.v_max_pu, "reward");
    if (r.contains("delta_mode")) {
      std::string m;
      read(r, "delta_mode", m, "reward");
      if (m == "weighted_fraction") {
        c.reward.delta_mode = DeltaMode::WeightedFraction;
      } else if (m == "raw_kw") {
        c.reward.delta_mode = DeltaMode::RawKw;
      } else {
        throw ConfigError("reward.delta_mode must be weighted_fraction or raw_kw");
      }
    }
    if (r.contains("constraint_norms") && !r.at("constraint_norms").is_null()) {
      std::vector<double> n;
      read(r, "constraint_norms", n, "reward");
      if (n.size() != 6 || std::any_of(n.begin(), n.end(), [](double v) { return !(v > 0); })) {
        throw ConfigError("reward.constraint_norms must list 6 positive values");
      }
      ConstraintNorms norms;
      std::copy(n.begin(), n.end(), norms.value.begin());
      c.reward.constraint_norms = norms;
    }
  }
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    config_keys(t, "train", {"gamma", "gae_lambda", "clip_eps", "ent_coef", "ppo_epochs",
                             "critic_epochs", "minibatch_size", "rollout_length", "iterations",
                             "update_order", "happo_strict", "normalize_advantages", "actor_lr",
                             "critic_lr", "hidden_dims", "max_grad_norm", "actor_output_gain"});
    auto& tc = c.train;
    read(t, "gamma", tc.gamma, "train");
    read(t, "gae_lambda", tc.gae_lambda, "train");
    read(t, "clip_eps", tc.clip_eps, "train");
    read(t, "ent_coef", tc.ent_coef, "train");
    read(t, "ppo_epochs", tc.ppo_epochs, "train");
    read(t, "critic_epochs", tc.critic_epochs, "train");
    read(t, "minibatch_size", tc.minibatch_size, "train");
    read(t, "rollout_length", tc.rollout_length, "train");
    read(t, "iterations", tc.iterations, "train");
    if (t.contains("update_order")) {
      std::string o;
      read(t, "update_order", o, "train");
      if (o == "fixed") {
        tc.update_order = UpdateOrder::Fixed;
      } else if (o == "random") {
        tc.update_order = UpdateOrder::Random;
      } else {
        throw ConfigError("train.update_order must be fixed or random");
      }
    }
    read(t, "happo_strict", tc.happo_strict, "train");
    read(t, "normalize_advantages", tc.normalize_advantages, "train");
    read(t, "actor_lr", tc.actor_lr, "train");
    read(t, "critic_lr", tc.critic_lr, "train");
    read(t, "hidden_dims", tc.hidden_dims, "train");
    read(t, "max_grad_norm", tc.max_grad_norm, "train");
    read(t, "actor_output_gain", tc.actor_output_gain, "train");
  }
  if (doc.contains("powerflow")) {
    const auto& p = doc.at("powerflow");
    config_keys(p, "powerflow", {"tol_pu", "max_iterations"});
    read(p, "tol_pu", c.powerflow.tol_pu, "powerflow");
    read(p, "max_iterations", c.powerflow.max_iterations, "powerflow");
  }
  if (doc.contains("eval")) {
    const auto& e = doc.at("eval");
    config_keys(e, "eval", {"suite_size", "suite_first_seed", "random_repeats"});
    read(e, "suite_size", c.eval.suite_size, "eval");
    read(e, "suite_first_seed", c.eval.suite_first_seed, "eval");
    read(e, "random_repeats", c.eval.random_repeats, "eval");
  }
  if (doc.contains("benchmark")) {
    const auto& b = doc.at("benchmark");
    config_keys(b, "benchmark", {"algorithms", "timing"});
    if (b.contains("algorithms")) {
      std::vector<std::string> names;
      read(b, "algorithms", names, "benchmark");
      c.benchmark_algorithms.clear();
      for (const auto& n : names) c.benchmark_algorithms.push_back(parse_run_algorithm(n));
    }
    read(b, "timing", c.benchmark_timing, "benchmark");
  }
  c.validate();
  return c;
}

inline nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json doc;
  doc["feeder"] = c.feeder;
  doc["algorithm"] = to_string(c.algorithm);
  doc["seeds"] = c.seeds;
  doc["output_dir"] = c.output_dir;
  doc["checkpoint_every"] = c.checkpoint_every;
  doc["log_wallclock"] = c.log_wallclock;
  doc["scenario"] = {{"fault_count_min", c.scenario.fault_count_min},
                     {"fault_count_max", c.scenario.fault_count_max},
                     {"der_scale_min", c.scenario.der_scale_min},
                     {"der_scale_max", c.scenario.der_scale_max},
                     {"horizon", c.scenario.horizon ? nlohmann::ordered_json(*c.scenario.horizon)
                                                    : nlohmann::ordered_json(nullptr)},
                     {"lock_penalty", c.scenario.lock_penalty}};
  nlohmann::ordered_json norms = nullptr;
  if (c.reward.constraint_norms) {
    norms = std::vector<double>(c.reward.constraint_norms->value.begin(),
                                c.reward.constraint_norms->value.end());
  }
  doc["reward"] = {{"alpha", c.reward.alpha},
                   {"beta", c.reward.beta},
                   {"lambda_pen", c.reward.lambda_pen},
                   {"v_min_pu", c.reward.v_min_pu},
                   {"v_max_pu", c.reward.v_max_pu},
                   {"delta_mode", c.reward.delta_mode == DeltaMode::RawKw ? "raw_kw" : "weighted_fraction"},
                   {"constraint_norms", norms}};
  const auto& t = c.train;
  doc["train"] = {{"gamma", t.gamma},
                  {"gae_lambda", t.gae_lambda},
                  {"clip_eps", t.clip_eps},
                  {"ent_coef", t.ent_coef},
                  {"ppo_epochs", t.ppo_epochs},
                  {"critic_epochs", t.critic_epochs},
                  {"minibatch_size", t.minibatch_size},
                  {"rollout_length", t.rollout_length},
                  {"iterations", t.iterations},
                  {"update_order", t.update_order == UpdateOrder::Random ? "random" : "fixed"},
                  {"happo_strict", t.happo_strict},
                  {"normalize_advantages", t.normalize_advantages},
                  {"actor_lr", t.actor_lr},
                  {"critic_lr", t.critic_lr},
                  {"hidden_dims", t.hidden_dims},
                  {"max_grad_norm", t.max_grad_norm},
                  {"actor_output_gain", t.actor_output_gain}};
  doc["powerflow"] = {{"tol_pu", c.powerflow.tol_pu}, {"max_iterations", c.powerflow.max_iterations}};
  doc["eval"] = {{"suite_size", c.eval.suite_size},
                 {"suite_first_seed", c.eval.suite_first_seed},
                 {"random_repeats", c.eval.random_repeats}};
  std::vector<std::string> algos;
  for (auto a : c.benchmark_algorithms) algos.push_back(to_string(a));
  doc["benchmark"] = {{"algorithms", algos}, {"timing", c.benchmark_timing}};
  return doc;
}

// Parses an override value: JSON literal when it parses, otherwise a string.
// "1,2,3" style lists become arrays of numbers.
inline nlohmann::json parse_override_value(const std::string& text) {
  auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  if (text.find(',') != std::string::npos) {
    auto as_array = nlohmann::json::parse("[" + text + "]", nullptr, false);
    if (!as_array.is_discarded()) return as_array;
  }
  return text;
}

// Applies "section.key" = value overrides onto a raw config document.
inline void apply_overrides(nlohmann::json& doc,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [path, value] : overrides) {
    nlohmann::json* node = &doc;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("empty override key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->is_object()) throw ConfigError("override '" + path + "' does not address a section");
      node = &(*node)[parts[i]];
      if (node->is_null()) *node = nlohmann::json::object();
    }
    if (!node->is_object()) throw ConfigError("override '" + path + "' does not address a section");
    (*node)[parts.back()] = parse_override_value(value);
  }
}

// Splits "--section.key value" / "--section.key=value" pairs out of argv.
// Everything else is returned untouched for the regular parser.
inline std::vector<std::string> extract_overrides(
    const std::vector<std::string>& args, std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) == 0 && a.find('.') != std::string::npos &&
        a.find('.') < a.find('=') && a.size() > 2 && a[2] != '.') {
      const auto eq = a.find('=');
      if (eq != std::string::npos) {
        overrides.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
      } else {
        if (i + 1 >= args.size()) throw ConfigError("override " + a + " needs a value");
        overrides.emplace_back(a.substr(2), args[++i]);
      }
    } else {
      rest.push_back(a);
    }
  }
  return rest;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path.string() + "'");
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(std::string(what) + " '" + path.string() + "' is not valid JSON");
  return doc;
}

// Loads a run config file, applies overrides, and resolves a relative
// feeder path against the config file's directory when that file exists.
inline RunConfig load_run_config(const std::filesystem::path& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  auto doc = read_json_file(path, "run config");
  apply_overrides(doc, overrides);
  RunConfig c = run_config_from_json(doc);
  const std::filesystem::path f(c.feeder);
  if (f.is_relative()) {
    const auto beside = path.parent_path() / f;
    if (std::filesystem::exists(beside)) c.feeder = beside.lexically_normal().string();
  }
  return c;
}

// --- CSV helpers -----------------------------------------------------------

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::vector<std::string> metrics_header(std::size_t agents) {
  std::vector<std::string> h{"iteration", "steps", "mean_reward", "cum_reward", "restored_frac",
                             "weighted_restored_kw", "xi_mean"};
  for (std::size_t a = 0; a < agents; ++a) h.push_back("actor_loss_" + std::to_string(a));
  h.push_back("critic_loss");
  for (std::size_t a = 0; a < agents; ++a) h.push_back("entropy_" + std::to_string(a));
  h.push_back("wallclock_s");
  return h;
}

inline std::string join_csv(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line;
}

inline std::string metrics_row(const IterationMetrics& m, bool log_wallclock) {
  std::vector<std::string> c{std::to_string(m.iteration), std::to_string(m.steps),
                             fmt_num(m.mean_reward), fmt_num(m.cum_reward),
                             fmt_num(m.restored_frac), fmt_num(m.weighted_restored_kw),
                             fmt_num(m.xi_mean)};
  for (double v : m.actor_loss) c.push_back(fmt_num(v));
  c.push_back(fmt_num(m.critic_loss));
  for (double v : m.entropy) c.push_back(fmt_num(v));
  c.push_back(fmt_num(log_wallclock ? m.wallclock_s : 0.0));
  return join_csv(c);
}

// --- environment plumbing ----------------------------------------------------

inline std::shared_ptr<const FeederGraph> load_shared_feeder(const std::string& name_or_path) {
  return std::make_shared<const FeederGraph>(load_feeder(name_or_path));
}

inline EnvFactory make_env_factory(std::shared_ptr<const FeederGraph> feeder, const RunConfig& c) {
  return [feeder, scenario = c.scenario, reward = c.reward, pf = c.powerflow] {
    return RestorationEnv(feeder, scenario, reward, pf);
  };
}

inline Algorithm learner_algorithm(RunAlgorithm a) {
  if (a == RunAlgorithm::IndependentPpo) return Algorithm::IndependentPpo;
  if (a == RunAlgorithm::Happo) return Algorithm::Happo;
  throw ConfigError(std::string("algorithm '") + to_string(a) + "' has no trainable policy");
}

// --- training ----------------------------------------------------------------

struct TrainRunResult {
  std::uint64_t seed = 0;
  std::vector<IterationMetrics> metrics;
  PolicySet policy;
  double train_seconds = 0.0;
};

inline nlohmann::json make_checkpoint(const Trainer& trainer, const RunConfig& config) {
  auto doc = trainer.checkpoint();
  doc["gridrestore_version"] = kVersion;
  doc["run_config"] = run_config_to_json(config);
  return doc;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << doc.dump(1) << '\n';
}

// Trains one seed. With a run directory, writes metrics.csv (flushed per
// row), timing.csv, and checkpoints; without one, keeps everything in memory.
inline TrainRunResult train_seed(const RunConfig& config, std::uint64_t seed,
                                 const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                                 const UpdateObserver& observer = {}) {
  const auto feeder = load_shared_feeder(config.feeder);
  Trainer trainer(make_env_factory(feeder, config), config.train,
                  learner_algorithm(config.algorithm), seed);
  TrainRunResult result;
  result.seed = seed;
  std::ofstream metrics, timing;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    metrics.open(*run_dir / "metrics.csv");
    timing.open(*run_dir / "timing.csv");
    if (!metrics || !timing) throw std::runtime_error("cannot write into '" + run_dir->string() + "'");
    metrics << join_csv(metrics_header(trainer.env().num_agents())) << '\n';
    timing << "iteration,wallclock_s\n";
  }
  for (int it = 1; it <= config.train.iterations; ++it) {
    IterationMetrics m = trainer.iterate(observer);
    result.train_seconds += m.wallclock_s;
    if (run_dir) {
      metrics << metrics_row(m, config.log_wallclock) << '\n' << std::flush;
      timing << it << ',' << fmt_num(m.wallclock_s) << '\n';
      if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) {
        write_json_file(*run_dir / ("checkpoint_" + std::to_string(it) + ".json"),
                        make_checkpoint(trainer, config));
      }
    }
    result.metrics.push_back(std::move(m));
  }
  if (run_dir) write_json_file(*run_dir / "checkpoint_final.json", make_checkpoint(trainer, config));
  result.policy = trainer.policy();
  return result;
}

// --- evaluation ----------------------------------------------------------------

struct ScenarioEval {
  std::uint64_t scenario_seed = 0;
  EpisodeTrace trace;
  double oracle_weighted_kw = 0.0;  // J* (strict) when computed
  double oracle_ratio = 0.0;        // final J / J*
};

inline std::string action_trace_string(const EpisodeTrace& t) {
  std::string s;
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    if (i) s += '|';
    for (std::size_t a = 0; a < t.actions[i].size(); ++a) {
      if (a) s += ';';
      s += std::to_string(t.actions[i][a]);
    }
  }
  return s;
}

inline double oracle_ratio(double j, double j_star) {
  return j_star > 0 ? j / j_star : (j >= 0 ? 1.0 : 0.0);
}

// Evaluates a learned policy on scenarios drawn from `scenario_seeds`.
inline std::vector<ScenarioEval> evaluate_policy(RestorationEnv& env, const PolicySet& policy,
                                                 const std::vector<std::uint64_t>& scenario_seeds,
                                                 bool greedy, std::uint64_t sample_seed,
                                                 bool with_oracle) {
  if (scenario_seeds.empty()) throw ConfigError("no scenarios to evaluate");
  check_policy_fits(policy, env);
  Rng rng(sample_seed);
  std::vector<ScenarioEval> out;
  for (auto s : scenario_seeds) {
    ScenarioEval e;
    e.scenario_seed = s;
    const auto spec = sample_scenario(env.base_feeder(), s, env.scenario_config());
    e.trace = run_policy_episode(env, policy, spec, greedy, &rng);
    if (with_oracle) {
      e.oracle_weighted_kw = exhaustive_oracle(env.base_feeder(), spec, OracleMode::Strict,
                                               env.reward_config())
                                 .best_weighted_kw;
      e.oracle_ratio = oracle_ratio(e.trace.final_weighted_kw, e.oracle_weighted_kw);
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_eval_csv(std::ostream& out, const std::vector<ScenarioEval>& rows) {
  out << "scenario_seed,restored_frac,weighted_kw,restored_kw,xi,episode_return,oracle_weighted_kw,"
         "oracle_ratio,actions\n";
  for (const auto& r : rows) {
    out << r.scenario_seed << ',' << fmt_num(r.trace.final_fraction) << ','
        << fmt_num(r.trace.final_weighted_kw) << ',' << fmt_num(r.trace.final_restored_kw) << ','
        << fmt_num(r.trace.final_xi) << ',' << fmt_num(r.trace.episode_return) << ','
        << fmt_num(r.oracle_weighted_kw) << ',' << fmt_num(r.oracle_ratio) << ','
        << action_trace_string(r.trace) << '\n';
  }
}

// --- summaries -------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(v.size()));
  return m;
}

// --- benchmark -------------------------------------------------------------------

struct BenchmarkRow {
  RunAlgorithm algorithm = RunAlgorithm::Happo;
  MeanStd restored_frac;       // across seeds, of the suite-mean final fraction
  double oracle_gap_pct = 0.0; // 100 * (1 - mean J/J*)
  double train_wallclock_s = 0.0;
  double eval_latency_ms = 0.0;  // per decision step
  std::vector<double> per_seed_fraction;
};

struct SuiteEntry {
  ScenarioSpec spec;
  double j_star = 0.0;
};

inline std::vector<SuiteEntry> oracle_suite(const FeederGraph& graph, const RunConfig& config) {
  std::vector<SuiteEntry> out;
  for (auto& spec : canonical_suite(graph, config.scenario, config.eval.suite_size,
                                    config.eval.suite_first_seed)) {
    const double j = exhaustive_oracle(graph, spec, OracleMode::Strict, config.reward, config.powerflow)
                         .best_weighted_kw;
    out.push_back({std::move(spec), j});
  }
  return out;
}

// Runs every configured algorithm over every seed and scores the final
// policies on the canonical suite. `on_trained` sees each learner run.
inline std::vector<BenchmarkRow> run_benchmark(
    const RunConfig& config,
    const std::function<void(RunAlgorithm, const TrainRunResult&)>& on_trained = {}) {
  const auto feeder = load_shared_feeder(config.feeder);
  const auto suite = oracle_suite(*feeder, config);
  std::vector<BenchmarkRow> rows;
  for (auto algo : config.benchmark_algorithms) {
    RunConfig rc = config;
    rc.algorithm = algo;
    BenchmarkRow row;
    row.algorithm = algo;
    std::vector<double> ratios;
    double decide = 0.0, steps = 0.0;
    for (auto seed : config.seeds) {
      auto env = make_env_factory(feeder, rc)();
      std::vector<EpisodeTrace> traces;
      if (is_learner(algo)) {
        const auto run = train_seed(rc, seed);
        row.train_wallclock_s += run.train_seconds / static_cast<double>(config.seeds.size());
        if (on_trained) on_trained(algo, run);
        for (const auto& e : suite) traces.push_back(run_policy_episode(env, run.policy, e.spec, true, nullptr));
      } else if (algo == RunAlgorithm::Random) {
        Rng rng(derive_seed(seed, 3));
        for (const auto& e : suite) {
          for (int k = 0; k < config.eval.random_repeats; ++k) traces.push_back(random_episode(env, e.spec, rng));
        }
      } else {
        for (const auto& e : suite) traces.push_back(greedy_episode(env, e.spec));
      }
      double frac = 0.0;
      const std::size_t reps = traces.size() / suite.size();
      for (std::size_t i = 0; i < traces.size(); ++i) {
        frac += traces[i].final_fraction / static_cast<double>(traces.size());
        ratios.push_back(oracle_ratio(traces[i].final_weighted_kw, suite[i / reps].j_star));
        decide += traces[i].decide_seconds;
        steps += static_cast<double>(traces[i].actions.size());
      }
      row.per_seed_fraction.push_back(frac);
    }
    row.restored_frac = mean_std(row.per_seed_fraction);
    row.oracle_gap_pct = 100.0 * (1.0 - mean_std(ratios).mean);
    row.eval_latency_ms = steps > 0 ? 1000.0 * decide / steps : 0.0;
    if (!config.benchmark_timing) {
      row.train_wallclock_s = 0.0;
      row.eval_latency_ms = 0.0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  out << "algorithm,restored_frac_mean,restored_frac_std,oracle_gap_pct,train_wallclock_s,"
         "eval_latency_ms\n";
  for (const auto& r : rows) {
    out << to_string(r.algorithm) << ',' << fmt_num(r.restored_frac.mean) << ','
        << fmt_num(r.restored_frac.std) << ',' << fmt_num(r.oracle_gap_pct) << ','
        << fmt_num(r.train_wallclock_s) << ',' << fmt_num(r.eval_latency_ms) << '\n';
  }
}

}  // namespace gridrestore

#endif  // GRIDRESTORE_HARNESS_HPP_
