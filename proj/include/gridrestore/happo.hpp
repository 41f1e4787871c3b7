#ifndef GRIDRESTORE_HAPPO_HPP_
#define GRIDRESTORE_HAPPO_HPP_

// Heterogeneous-agent PPO: decentralized categorical actors, one centralized
// critic over the global state, lambda-GAE advantages shared by all agents,
// and sequential per-agent clipped updates with every other actor frozen.
// The same machinery runs independent PPO (per-agent critics on local
// observations) as a baseline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridrestore/env.hpp"
#include "gridrestore/errors.hpp"
#include "gridrestore/nn.hpp"
#include "gridrestore/rng.hpp"

namespace gridrestore {

enum class Algorithm { Happo, IndependentPpo };

inline const char* to_string(Algorithm a) {
  return a == Algorithm::Happo ? "happo" : "independent-ppo";
}

enum class UpdateOrder { Fixed, Random };

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double ent_coef = 0.01;
  int ppo_epochs = 4;
  int critic_epochs = 4;
  int minibatch_size = 64;
  int rollout_length = 256;
  int iterations = 100;
  UpdateOrder update_order = UpdateOrder::Fixed;
  bool happo_strict = false;
  bool normalize_advantages = true;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  std::vector<std::size_t> hidden_dims{64, 64};
  double max_grad_norm = 0.5;
  double actor_output_gain = 0.01;

  void validate() const {
    if (!(gamma > 0 && gamma <= 1)) throw ConfigError("train.gamma must lie in (0, 1]");
    if (!(gae_lambda >= 0 && gae_lambda <= 1)) throw ConfigError("train.gae_lambda must lie in [0, 1]");
    if (!(clip_eps > 0)) throw ConfigError("train.clip_eps must be > 0");
    if (ent_coef < 0) throw ConfigError("train.ent_coef must be >= 0");
    if (ppo_epochs < 1 || critic_epochs < 0) throw ConfigError("train epochs must be >= 1");
    if (minibatch_size < 1) throw ConfigError("train.minibatch_size must be >= 1");
    if (rollout_length < 1) throw ConfigError("train.rollout_length must be >= 1");
    if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
    if (!(actor_lr > 0 && critic_lr > 0)) throw ConfigError("learning rates must be > 0");
    if (hidden_dims.empty() ||
        std::any_of(hidden_dims.begin(), hidden_dims.end(), [](std::size_t d) { return d == 0; })) {
      throw ConfigError("train.hidden_dims must be a non-empty list of positive sizes");
    }
  }
};

struct Network {
  nn::MlpSpec spec;
  nn::ParamVector params;
  nn::AdamState adam;

  bool operator==(const Network&) const = default;
};

// All learnable state of a run.
struct PolicySet {
  Algorithm algorithm = Algorithm::Happo;
  std::vector<Network> actors;
  std::vector<Network> critics;  // one for HAPPO, one per agent otherwise

  bool operator==(const PolicySet&) const = default;
};

// Critic input for critic c: the global state for HAPPO; the agent's own
// observation plus the trailing global scalars for independent PPO.
inline std::vector<double> critic_input(Algorithm algorithm, std::size_t critic,
                                        const StepResult& step) {
  if (algorithm == Algorithm::Happo) return step.global_state;
  std::vector<double> x = step.observations.at(critic);
  const auto& g = step.global_state;
  x.insert(x.end(), g.end() - 3, g.end());
  return x;
}

inline PolicySet make_policy(const RestorationEnv& env, const TrainConfig& config,
                             Algorithm algorithm, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0));
  PolicySet policy;
  policy.algorithm = algorithm;
  for (std::size_t a = 0; a < env.num_agents(); ++a) {
    Network net;
    net.spec = {env.observation_size(a), config.hidden_dims, env.action_size(a)};
    net.params = nn::init_params(net.spec, rng, config.actor_output_gain);
    net.adam = nn::AdamState::for_params(net.params.size(), config.actor_lr);
    policy.actors.push_back(std::move(net));
  }
  const std::size_t critics = algorithm == Algorithm::Happo ? 1 : env.num_agents();
  for (std::size_t c = 0; c < critics; ++c) {
    Network net;
    const std::size_t input =
        algorithm == Algorithm::Happo ? env.global_state_size() : env.observation_size(c) + 3;
    net.spec = {input, config.hidden_dims, 1};
    net.params = nn::init_params(net.spec, rng, 1.0);
    net.adam = nn::AdamState::for_params(net.params.size(), config.critic_lr);
    policy.critics.push_back(std::move(net));
  }
  return policy;
}

struct ActionChoice {
  int action = 0;
  double log_prob = 0.0;
};

inline ActionChoice select_action(const Network& actor, const Observation& obs, Rng* rng,
                                  bool greedy) {
  const auto logits = nn::forward(actor.spec, actor.params, obs);
  const auto dist = nn::categorical_head(logits);
  const std::size_t a = greedy || !rng ? nn::argmax(dist.probs) : nn::sample(dist.probs, *rng);
  return {static_cast<int>(a), dist.log_probs[a]};
}

inline double critic_value(const Network& critic, const std::vector<double>& input) {
  return nn::forward(critic.spec, critic.params, input)[0];
}

struct EpisodeStats {
  double episode_return = 0.0;
  double final_fraction = 0.0;
  double final_weighted_kw = 0.0;
  double final_xi = 0.0;
};

// One on-policy rollout segment. Per-agent arrays are [agent][t]; critic
// arrays are [critic][t].
struct TrajectoryBuffer {
  std::vector<std::vector<double>> global_states;
  std::vector<std::vector<Observation>> observations;
  std::vector<std::vector<int>> actions;
  std::vector<std::vector<double>> log_probs;
  std::vector<std::vector<std::vector<double>>> critic_inputs;
  std::vector<std::vector<double>> values;
  std::vector<double> bootstrap;  // V(s_T) per critic
  std::vector<double> rewards;
  std::vector<bool> dones;
  std::vector<double> xi;
  std::vector<EpisodeStats> episodes;  // completed inside this segment
  double last_fraction = 0.0;

  std::size_t size() const { return rewards.size(); }
};

// Runs `steps` transitions from the environment's current state. When the
// horizon is reached the environment is reset with a freshly drawn scenario
// seed and collection continues.
inline TrajectoryBuffer collect_rollout(RestorationEnv& env, const PolicySet& policy, int steps,
                                        Rng& rng) {
  const std::size_t agents = env.num_agents();
  const std::size_t critics = policy.critics.size();
  TrajectoryBuffer buf;
  buf.observations.resize(agents);
  buf.actions.resize(agents);
  buf.log_probs.resize(agents);
  buf.critic_inputs.resize(critics);
  buf.values.resize(critics);
  if (env.done()) env.sample_and_reset(rng.next_u64());
  StepResult current = env.last();
  EpisodeStats running;
  std::vector<AgentAction> joint(agents);
  for (int t = 0; t < steps; ++t) {
    buf.global_states.push_back(current.global_state);
    for (std::size_t c = 0; c < critics; ++c) {
      auto input = critic_input(policy.algorithm, c, current);
      buf.values[c].push_back(critic_value(policy.critics[c], input));
      buf.critic_inputs[c].push_back(std::move(input));
    }
    for (std::size_t a = 0; a < agents; ++a) {
      const auto choice = select_action(policy.actors[a], current.observations[a], &rng, false);
      buf.observations[a].push_back(current.observations[a]);
      buf.actions[a].push_back(choice.action);
      buf.log_probs[a].push_back(choice.log_prob);
      joint[a] = AgentAction{choice.action};
    }
    StepResult next = env.step(joint);
    buf.rewards.push_back(next.reward);
    buf.dones.push_back(next.done);
    buf.xi.push_back(next.info.xi);
    running.episode_return += next.reward;
    buf.last_fraction = next.info.weighted_fraction;
    if (next.done) {
      running.final_fraction = next.info.weighted_fraction;
      running.final_weighted_kw = next.info.weighted_kw;
      running.final_xi = next.info.xi;
      buf.episodes.push_back(running);
      running = EpisodeStats{};
      next = env.sample_and_reset(rng.next_u64());
    }
    current = std::move(next);
  }
  buf.bootstrap.resize(critics);
  for (std::size_t c = 0; c < critics; ++c) {
    buf.bootstrap[c] = critic_value(policy.critics[c], critic_input(policy.algorithm, c, current));
  }
  return buf;
}

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Backward lambda-GAE recursion; dones cut both the bootstrap and the trace.
inline AdvantageEstimate compute_gae(const std::vector<double>& rewards,
                                     const std::vector<double>& values,
                                     const std::vector<bool>& dones, double bootstrap_value,
                                     double gamma, double gae_lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw DimensionMismatch("compute_gae: rewards, values and dones differ in length");
  }
  AdvantageEstimate out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : bootstrap_value;
    const double keep = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * keep * next_value - values[t];
    next_adv = delta + gamma * gae_lambda * keep * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

inline AdvantageEstimate compute_gae(const TrajectoryBuffer& buf, std::size_t critic,
                                     double gamma, double gae_lambda) {
  return compute_gae(buf.rewards, buf.values.at(critic), buf.dones, buf.bootstrap.at(critic),
                     gamma, gae_lambda);
}

// Shifts to mean 0 and scales to unit (population) standard deviation.
inline std::vector<double> normalize(std::vector<double> x) {
  if (x.empty()) return x;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : x) v = sd > 1e-12 ? (v - mean) / sd : v - mean;
  return x;
}

// min(r A, clip(r, 1-eps, 1+eps) A)
inline double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

struct ActorBatch {
  const std::vector<Observation>* observations = nullptr;
  const std::vector<int>* actions = nullptr;
  const std::vector<double>* old_log_probs = nullptr;
  const std::vector<double>* advantages = nullptr;  // already scaled by any HAPPO factor
};

struct LossAndGrad {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate
  double entropy = 0.0;    // mean entropy
  nn::ParamVector grad;
};

// Loss = -mean(clipped surrogate) - ent_coef * mean(entropy) over `indices`,
// with its exact gradient.
inline LossAndGrad actor_loss_and_grad(const Network& actor, const ActorBatch& batch,
                                       std::span<const std::size_t> indices, double clip_eps,
                                       double ent_coef) {
  LossAndGrad out;
  out.grad.assign(actor.params.size(), 0.0);
  if (indices.empty()) return out;
  const double inv = 1.0 / static_cast<double>(indices.size());
  nn::ForwardCache cache;
  std::vector<double> dlogits(actor.spec.output_dim);
  for (std::size_t i : indices) {
    const auto logits = nn::forward(actor.spec, actor.params, (*batch.observations)[i], &cache);
    const auto dist = nn::categorical_head(logits);
    const int a = (*batch.actions)[i];
    const double adv = (*batch.advantages)[i];
    const double ratio = std::exp(dist.log_probs[a] - (*batch.old_log_probs)[i]);
    const double unclipped = ratio * adv;
    const double objective = clipped_surrogate(ratio, adv, clip_eps);
    const double h = nn::entropy(dist);
    out.surrogate += objective * inv;
    out.entropy += h * inv;
    const bool unclipped_active = unclipped <= objective;
    for (std::size_t j = 0; j < dlogits.size(); ++j) {
      const double indicator = static_cast<int>(j) == a ? 1.0 : 0.0;
      const double d_obj = unclipped_active ? unclipped * (indicator - dist.probs[j]) : 0.0;
      const double d_ent = -dist.probs[j] * (dist.log_probs[j] + h);
      dlogits[j] = -inv * d_obj - ent_coef * inv * d_ent;
    }
    nn::backward_accumulate(actor.spec, actor.params, cache, dlogits, out.grad);
  }
  out.loss = -out.surrogate - ent_coef * out.entropy;
  return out;
}

struct CriticLoss {
  double loss = 0.0;
  nn::ParamVector grad;
};

inline CriticLoss critic_loss_and_grad(const Network& critic,
                                       const std::vector<std::vector<double>>& inputs,
                                       const std::vector<double>& returns,
                                       std::span<const std::size_t> indices) {
  CriticLoss out;
  out.grad.assign(critic.params.size(), 0.0);
  if (indices.empty()) return out;
  const double inv = 1.0 / static_cast<double>(indices.size());
  nn::ForwardCache cache;
  for (std::size_t i : indices) {
    const double v = nn::forward(critic.spec, critic.params, inputs[i], &cache)[0];
    const double err = v - returns[i];
    out.loss += err * err * inv;
    const double dv = 2.0 * err * inv;
    nn::backward_accumulate(critic.spec, critic.params, cache, std::span<const double>(&dv, 1),
                            out.grad);
  }
  return out;
}

inline double critic_mse(const Network& critic, const std::vector<std::vector<double>>& inputs,
                         const std::vector<double>& returns) {
  if (inputs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double err = critic_value(critic, inputs[i]) - returns[i];
    total += err * err;
  }
  return total / static_cast<double>(inputs.size());
}

namespace detail {

inline void guard_finite(double value, const std::string& what) {
  if (!std::isfinite(value)) {
    throw NonFiniteLoss(what + " became non-finite (" + std::to_string(value) + ")");
  }
}

inline std::vector<std::vector<std::size_t>> minibatches(std::size_t n, int size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(size)) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(size));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace detail

// Notifications raised during the update phase, e.g. to audit that frozen
// actors stay untouched.
struct UpdateEvent {
  enum class Kind { AgentBegin, Minibatch, AgentEnd, CriticEnd };
  Kind kind = Kind::AgentBegin;
  std::size_t agent = 0;
  const PolicySet* policy = nullptr;
};
using UpdateObserver = std::function<void(const UpdateEvent&)>;

struct AgentUpdateStats {
  double loss = 0.0;
  double entropy = 0.0;
  double surrogate = 0.0;
  int clip_bound_violations = 0;
};

struct SequentialUpdateResult {
  std::vector<AgentUpdateStats> agents;  // indexed by agent
  std::vector<std::size_t> order;
};

// Updates actors one at a time. `advantages[a]` is the advantage sequence
// agent a should use (HAPPO passes the same shared sequence to every agent).
// With happo_strict, each agent's advantages are multiplied by the product of
// probability ratios of the agents updated before it.
inline SequentialUpdateResult sequential_update(PolicySet& policy, const TrajectoryBuffer& buf,
                                                const std::vector<std::vector<double>>& advantages,
                                                const TrainConfig& config, Rng& rng,
                                                const UpdateObserver& observer = {}) {
  const std::size_t agents = policy.actors.size();
  const std::size_t n = buf.size();
  SequentialUpdateResult result;
  result.agents.resize(agents);
  result.order.resize(agents);
  std::iota(result.order.begin(), result.order.end(), 0);
  if (config.update_order == UpdateOrder::Random) rng.shuffle(result.order);

  std::vector<double> factor(n, 1.0);
  for (std::size_t k : result.order) {
    auto& actor = policy.actors[k];
    std::vector<double> adv = config.normalize_advantages ? normalize(advantages[k]) : advantages[k];
    if (config.happo_strict) {
      for (std::size_t t = 0; t < n; ++t) adv[t] *= factor[t];
    }
    const ActorBatch batch{&buf.observations[k], &buf.actions[k], &buf.log_probs[k], &adv};
    if (observer) observer({UpdateEvent::Kind::AgentBegin, k, &policy});
    AgentUpdateStats& stats = result.agents[k];
    for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
      double loss_sum = 0.0, ent_sum = 0.0, surr_sum = 0.0;
      for (const auto& mb : detail::minibatches(n, config.minibatch_size, rng)) {
        auto lg = actor_loss_and_grad(actor, batch, mb, config.clip_eps, config.ent_coef);
        detail::guard_finite(lg.loss, "actor " + std::to_string(k) + " loss (epoch " +
                                          std::to_string(epoch) + ")");
#ifndef NDEBUG
        for (std::size_t i : mb) {
          const auto logits = nn::forward(actor.spec, actor.params, buf.observations[k][i]);
          const auto d = nn::categorical_head(logits);
          const double r = std::exp(d.log_probs[buf.actions[k][i]] - buf.log_probs[k][i]);
          const double bound = std::max(adv[i] * (1 + config.clip_eps), adv[i] * (1 - config.clip_eps));
          if (clipped_surrogate(r, adv[i], config.clip_eps) > bound + 1e-12) ++stats.clip_bound_violations;
        }
#endif
        const double w = static_cast<double>(mb.size()) / static_cast<double>(n);
        loss_sum += lg.loss * w;
        ent_sum += lg.entropy * w;
        surr_sum += lg.surrogate * w;
        nn::clip_grad_norm(lg.grad, config.max_grad_norm);
        nn::adam_step(actor.adam, actor.params, lg.grad);
        if (observer) observer({UpdateEvent::Kind::Minibatch, k, &policy});
      }
      stats.loss = loss_sum;
      stats.entropy = ent_sum;
      stats.surrogate = surr_sum;
    }
    if (config.happo_strict) {
      for (std::size_t t = 0; t < n; ++t) {
        const auto logits = nn::forward(actor.spec, actor.params, buf.observations[k][t]);
        const auto d = nn::categorical_head(logits);
        factor[t] *= std::exp(d.log_probs[buf.actions[k][t]] - buf.log_probs[k][t]);
      }
    }
    if (observer) observer({UpdateEvent::Kind::AgentEnd, k, &policy});
  }
  return result;
}

struct CriticUpdateResult {
  double loss_before = 0.0;
  double loss_after = 0.0;
};

inline CriticUpdateResult critic_update(Network& critic,
                                        const std::vector<std::vector<double>>& inputs,
                                        const std::vector<double>& returns,
                                        const TrainConfig& config, Rng& rng) {
  CriticUpdateResult out;
  out.loss_before = critic_mse(critic, inputs, returns);
  detail::guard_finite(out.loss_before, "critic loss");
  for (int epoch = 0; epoch < config.critic_epochs; ++epoch) {
    for (const auto& mb : detail::minibatches(inputs.size(), config.minibatch_size, rng)) {
      auto lg = critic_loss_and_grad(critic, inputs, returns, mb);
      detail::guard_finite(lg.loss, "critic loss");
      nn::clip_grad_norm(lg.grad, config.max_grad_norm);
      nn::adam_step(critic.adam, critic.params, lg.grad);
    }
  }
  out.loss_after = critic_mse(critic, inputs, returns);
  detail::guard_finite(out.loss_after, "critic loss");
  return out;
}

struct IterationMetrics {
  int iteration = 0;
  long long steps = 0;
  double mean_reward = 0.0;
  double cum_reward = 0.0;
  double restored_frac = 0.0;
  double weighted_restored_kw = 0.0;
  double xi_mean = 0.0;
  std::vector<double> actor_loss;
  double critic_loss = 0.0;
  std::vector<double> entropy;
  double wallclock_s = 0.0;
};

using EnvFactory = std::function<RestorationEnv()>;

// Owns one training run: environment, policy, RNG streams and counters.
class Trainer {
 public:
  Trainer(const EnvFactory& make_env, TrainConfig config, Algorithm algorithm, std::uint64_t seed)
      : env_(make_env()),
        config_(std::move(config)),
        seed_(seed),
        policy_(make_policy(env_, config_, algorithm, seed)),
        rollout_rng_(derive_seed(seed, 1)),
        update_rng_(derive_seed(seed, 2)) {
    if (env_.num_agents() == 0) throw ConfigError("feeder declares no microgrid agents");
    if (env_.horizon() < 1) throw ConfigError("training needs scenario.horizon >= 1");
  }

  IterationMetrics iterate(const UpdateObserver& observer = {}) {
    const auto start = std::chrono::steady_clock::now();
    ++iteration_;
    env_.sample_and_reset(rollout_rng_.next_u64());
    const TrajectoryBuffer buf = collect_rollout(env_, policy_, config_.rollout_length, rollout_rng_);
    steps_ += static_cast<long long>(buf.size());

    const std::size_t agents = policy_.actors.size();
    std::vector<AdvantageEstimate> estimates;
    for (std::size_t c = 0; c < policy_.critics.size(); ++c) {
      estimates.push_back(compute_gae(buf, c, config_.gamma, config_.gae_lambda));
    }
    std::vector<std::vector<double>> advantages(agents);
    for (std::size_t a = 0; a < agents; ++a) {
      advantages[a] = estimates[policy_.algorithm == Algorithm::Happo ? 0 : a].advantages;
    }
    const auto actor_stats = sequential_update(policy_, buf, advantages, config_, update_rng_, observer);
    double critic_loss = 0.0;
    for (std::size_t c = 0; c < policy_.critics.size(); ++c) {
      const auto cu = critic_update(policy_.critics[c], buf.critic_inputs[c], estimates[c].returns,
                                    config_, update_rng_);
      critic_loss += cu.loss_before / static_cast<double>(policy_.critics.size());
    }
    if (observer) observer({UpdateEvent::Kind::CriticEnd, 0, &policy_});

    IterationMetrics m;
    m.iteration = iteration_;
    m.steps = steps_;
    m.mean_reward = std::accumulate(buf.rewards.begin(), buf.rewards.end(), 0.0) /
                    static_cast<double>(buf.size());
    m.xi_mean = std::accumulate(buf.xi.begin(), buf.xi.end(), 0.0) / static_cast<double>(buf.size());
    if (!buf.episodes.empty()) {
      const double ne = static_cast<double>(buf.episodes.size());
      for (const auto& e : buf.episodes) {
        m.cum_reward += e.episode_return / ne;
        m.restored_frac += e.final_fraction / ne;
        m.weighted_restored_kw += e.final_weighted_kw / ne;
      }
    } else {
      m.cum_reward = std::accumulate(buf.rewards.begin(), buf.rewards.end(), 0.0);
      m.restored_frac = buf.last_fraction;
      m.weighted_restored_kw = env_.last().info.weighted_kw;
    }
    for (const auto& s : actor_stats.agents) {
      m.actor_loss.push_back(s.loss);
      m.entropy.push_back(s.entropy);
    }
    m.critic_loss = critic_loss;
    m.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
  }

  const PolicySet& policy() const { return policy_; }
  PolicySet& policy() { return policy_; }
  const RestorationEnv& env() const { return env_; }
  const TrainConfig& config() const { return config_; }
  int iteration() const { return iteration_; }
  std::uint64_t seed() const { return seed_; }

  nlohmann::json checkpoint() const;
  void restore(const nlohmann::json& doc);

 private:
  RestorationEnv env_;
  TrainConfig config_;
  std::uint64_t seed_;
  PolicySet policy_;
  Rng rollout_rng_;
  Rng update_rng_;
  int iteration_ = 0;
  long long steps_ = 0;
};

inline nlohmann::json network_to_json(const Network& n) {
  return {{"spec", nn::to_json(n.spec)}, {"params", n.params}, {"adam", nn::to_json(n.adam)}};
}

inline Network network_from_json(const nlohmann::json& j) {
  Network n;
  n.spec = nn::spec_from_json(j.at("spec"));
  n.params = j.at("params").get<std::vector<double>>();
  n.adam = nn::adam_from_json(j.at("adam"));
  nn::check_params(n.spec, n.params);
  return n;
}

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json policy_to_json(const PolicySet& p) {
  nlohmann::json doc;
  doc["algorithm"] = to_string(p.algorithm);
  doc["actors"] = nlohmann::json::array();
  for (const auto& a : p.actors) doc["actors"].push_back(network_to_json(a));
  doc["critics"] = nlohmann::json::array();
  for (const auto& c : p.critics) doc["critics"].push_back(network_to_json(c));
  return doc;
}

inline PolicySet policy_from_json(const nlohmann::json& doc) {
  PolicySet p;
  const auto algo = doc.at("algorithm").get<std::string>();
  if (algo == "happo") {
    p.algorithm = Algorithm::Happo;
  } else if (algo == "independent-ppo") {
    p.algorithm = Algorithm::IndependentPpo;
  } else {
    throw ParseError("checkpoint: unknown algorithm '" + algo + "'");
  }
  for (const auto& a : doc.at("actors")) p.actors.push_back(network_from_json(a));
  for (const auto& c : doc.at("critics")) p.critics.push_back(network_from_json(c));
  return p;
}

inline nlohmann::json Trainer::checkpoint() const {
  nlohmann::json doc;
  doc["format"] = "gridrestore-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["seed"] = seed_;
  doc["iteration"] = iteration_;
  doc["steps"] = steps_;
  doc["policy"] = policy_to_json(policy_);
  doc["rng"] = {{"rollout", rollout_rng_.serialize()}, {"update", update_rng_.serialize()}};
  return doc;
}

// Throws DimensionMismatch when the checkpoint's networks do not fit the
// environment's observation/action sizes.
inline void check_policy_fits(const PolicySet& p, const RestorationEnv& env) {
  if (p.actors.size() != env.num_agents()) {
    throw DimensionMismatch("checkpoint has " + std::to_string(p.actors.size()) +
                            " actors, feeder has " + std::to_string(env.num_agents()) + " agents");
  }
  for (std::size_t a = 0; a < p.actors.size(); ++a) {
    const auto& s = p.actors[a].spec;
    if (s.input_dim != env.observation_size(a) || s.output_dim != env.action_size(a)) {
      throw DimensionMismatch("agent " + std::to_string(a) + ": checkpoint actor is " +
                              std::to_string(s.input_dim) + "->" + std::to_string(s.output_dim) +
                              ", feeder needs " + std::to_string(env.observation_size(a)) + "->" +
                              std::to_string(env.action_size(a)));
    }
  }
}

inline void Trainer::restore(const nlohmann::json& doc) {
  if (doc.at("format").get<std::string>() != "gridrestore-checkpoint" ||
      doc.at("version").get<int>() != kCheckpointVersion) {
    throw ParseError("not a version " + std::to_string(kCheckpointVersion) + " checkpoint");
  }
  PolicySet p = policy_from_json(doc.at("policy"));
  check_policy_fits(p, env_);
  policy_ = std::move(p);
  seed_ = doc.at("seed").get<std::uint64_t>();
  iteration_ = doc.at("iteration").get<int>();
  steps_ = doc.at("steps").get<long long>();
  rollout_rng_.deserialize(doc.at("rng").at("rollout").get<std::string>());
  update_rng_.deserialize(doc.at("rng").at("update").get<std::string>());
}

struct EpisodeTrace {
  double episode_return = 0.0;
  double final_fraction = 0.0;
  double final_weighted_kw = 0.0;
  double final_xi = 0.0;
  double final_restored_kw = 0.0;
  SwitchStates final_states;
  std::vector<std::vector<int>> actions;  // [t][agent]
  double decide_seconds = 0.0;            // time spent choosing actions
};

// Rolls one full episode of `spec` under the actors; greedy picks argmax.
inline EpisodeTrace run_policy_episode(RestorationEnv& env, const PolicySet& policy,
                                       const ScenarioSpec& spec, bool greedy, Rng* rng) {
  EpisodeTrace trace;
  StepResult step = env.reset(spec);
  trace.final_fraction = step.info.weighted_fraction;
  trace.final_weighted_kw = step.info.weighted_kw;
  trace.final_xi = step.info.xi;
  trace.final_restored_kw = step.info.restored_kw;
  std::vector<AgentAction> joint(env.num_agents());
  while (!env.done()) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> chosen;
    for (std::size_t a = 0; a < env.num_agents(); ++a) {
      joint[a] = AgentAction{select_action(policy.actors[a], step.observations[a], rng, greedy).action};
      chosen.push_back(joint[a].index);
    }
    trace.decide_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.actions.push_back(std::move(chosen));
    step = env.step(joint);
    trace.episode_return += step.reward;
    trace.final_fraction = step.info.weighted_fraction;
    trace.final_weighted_kw = step.info.weighted_kw;
    trace.final_xi = step.info.xi;
    trace.final_restored_kw = step.info.restored_kw;
  }
  trace.final_states = env.switch_states();
  return trace;
}

}  // namespace gridrestore

#endif  // GRIDRESTORE_HAPPO_HPP_
