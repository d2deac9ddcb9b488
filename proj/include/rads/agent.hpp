#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "rads/codec.hpp"
#include "rads/dynamics.hpp"
#include "rads/nn.hpp"

namespace rads::agent {

using dynamics::Transition;

struct AgentConfig {
  double gamma = 0.99;
  double delta = 0.0;       // constraint threshold on E[Q_safe]
  double lr_actor = 1e-4;
  double lr_critic = 3e-5;  // task critics, safety critic
  double lr_alpha = 3e-5;
  double lr_lambda = 3e-5;
  int batch_size = 32;
  int epochs = 90;
  int eval_every = 5;
  int sim_batch = 32;       // rollouts collected per epoch
  int updates_per_step = 1;
  std::size_t replay_capacity = 50000;
  std::vector<int> hidden = {64, 64, 64};
  double polyak_tau = 0.005;
  std::optional<double> target_entropy;  // defaults to -action_dim
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double init_alpha = 0.1;
  double init_lambda = 0.0;
  bool twin_safety = false;
  bool freeze_lambda = false;  // ablation arm: lambda pinned at 0
  int eval_rollouts_per_caption = 3;
  double divergence_cap = 1e6;
};

// Bounded FIFO store of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t logical) const;  // 0 = oldest

  // Uniform sample of `n` indices into logical order; requires size >= n.
  std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> store_;
};

// Policy, critics, temperature, and multiplier for the constrained SAC
// agent. Value-like; eval runs on copies.
struct AgentBundle {
  AgentConfig cfg;
  int obs_dim = 0;
  int act_dim = 0;
  int horizon = 0;

  nn::Mlp policy;  // outputs [mean, raw log std]
  nn::Mlp q1, q2, q1_target, q2_target;
  nn::Mlp qsafe, qsafe_target;
  nn::Mlp qsafe2, qsafe2_target;  // only used when cfg.twin_safety

  double log_alpha = 0.0;
  double lambda = 0.0;

  nn::AdamState opt_policy, opt_q1, opt_q2, opt_qsafe, opt_qsafe2;
  nn::ScalarAdam opt_alpha;

  double alpha() const { return std::exp(log_alpha); }
  double target_entropy() const {
    return cfg.target_entropy.value_or(-static_cast<double>(act_dim));
  }

  static AgentBundle init(const dynamics::EnvConfig& env, const AgentConfig& cfg,
                          std::uint64_t seed);
};

// Observation fed to policy and critics: [x, step/T, base embedding].
Eigen::VectorXd observation(const dynamics::SystemState& s,
                            const Eigen::VectorXd& e_base, int horizon);

enum class ActionMode { kStochastic, kDeterministic };

struct ActionSample {
  Eigen::VectorXd u;
  double log_prob = 0.0;
};

// Squashed-Gaussian sample with the tanh change-of-variables correction in
// log_prob. Deterministic mode returns tanh(mean).
ActionSample sample_action(const nn::Mlp& policy, const Eigen::VectorXd& obs,
                           ActionMode mode, std::mt19937_64& rng,
                           double log_std_min = -5.0, double log_std_max = 2.0);

// Sparse terminal alignment reward (cosine between the projected final
// latent and the base embedding). Requires a terminal state.
double compute_reward(const dynamics::SystemState& final_state,
                      const Eigen::VectorXd& e_base,
                      const dynamics::EnvConfig& env);

using Batch = std::vector<const Transition*>;

// One regression step toward the recursive safety targets; returns the MSE
// before the step.
double update_safety_critic(AgentBundle& b, const Batch& batch,
                            std::mt19937_64& rng);

// One regression step for both task critics; returns the summed MSE.
double update_task_critics(AgentBundle& b, const Batch& batch,
                           std::mt19937_64& rng);

// Reparameterized ascent on min(Q1,Q2) + alpha*entropy + lambda*Q_safe;
// returns the (negated objective) loss.
double update_policy(AgentBundle& b, const Batch& batch, std::mt19937_64& rng);

// Dual step: lambda <- max(0, lambda - lr * (E[Q_safe(s, u~pi)] - delta)).
double update_lambda(AgentBundle& b, const Batch& batch, std::mt19937_64& rng);

// Gradient step on log alpha toward the entropy target; returns new alpha.
double update_temperature(AgentBundle& b, const Batch& batch,
                          std::mt19937_64& rng);

// Elementwise target <- (1 - tau) * target + tau * main for every network
// with a target copy.
void polyak_update_targets(AgentBundle& b);

// Deterministic-mode action source backed by a policy snapshot.
dynamics::ActionSource deterministic_policy(const AgentBundle& b);

// Stochastic action source with its own derived stream (reproducible
// per-episode exploration).
dynamics::ActionSource stochastic_policy(const AgentBundle& b, std::uint64_t seed);

struct EvalPoint {
  double score = 0.0;  // mean terminal r + ell
  double failure_rate = 0.0;
  double alignment = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double loss_safety = 0.0;
  double loss_task = 0.0;
  double loss_policy = 0.0;
  double alpha = 0.0;
  double lambda = 0.0;
  double mean_q_safe = 0.0;
  std::size_t transitions = 0;
  std::optional<EvalPoint> eval;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_score = 0.0;
};

struct TrainResult {
  TrainLog log;
  AgentBundle best;  // snapshot at the best evaluation epoch
};

// Full training loop: per epoch collect sim_batch rollouts round-robin over
// captions, run one gradient pass per collected transition, update targets,
// temperature, and multiplier, and evaluate every eval_every epochs.
// Deterministic given (bundle-init seed, train seed, threads irrelevant for
// rollouts in DDIM mode). Throws std::runtime_error on divergence.
TrainResult train(AgentBundle& b, const dynamics::EnvConfig& env,
                  const codec::CodecParams& codec, std::uint64_t seed,
                  int threads = 1);

}  // namespace rads::agent
