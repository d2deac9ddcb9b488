#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rads/codec.hpp"

namespace rads::dynamics {

enum class NoiseMode { kDdim, kDdpm };

// A planted memorization basin: captions within `radius` of `trigger` summon
// a strong pull toward the latent `target`.
struct MemorizedTarget {
  Eigen::VectorXd trigger;  // kappa_k, length n_e
  Eigen::VectorXd target;   // M_k, length n_x
  double radius = 0.0;      // rho_k > 0
};

struct EnvConfig {
  int horizon = 20;                    // T
  double guidance_scale = 2.0;         // g
  NoiseMode noise_mode = NoiseMode::kDdim;
  int n_x = 2;
  int n_e = 8;
  int action_dim = 2;                  // d
  std::vector<MemorizedTarget> targets;
  std::vector<double> step_sizes;      // alpha_tau, one per step
  double guidance_gain = 0.5;          // scales (y - b) inside a trigger region
  double capture_radius = 3.0;         // latent basin midpoint; <= 0 disables
  double capture_width = 1.0;          // basin shoulder softness
  double sigma = 0.05;                 // DDPM noise scale per step
  double eta = 0.1;                    // target-function slope
  double beta = 2.6350429192227636;  // calibrated guidance-norm threshold
  Eigen::VectorXd base_attractor;      // b, length n_x
  Eigen::MatrixXd cond_map;            // A, n_x x n_e
  std::vector<Eigen::VectorXd> captions;
  std::vector<std::string> caption_ids;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws std::invalid_argument on bad invariants
};

// Desk-scale environment: two planted basins, sixteen captions on the unit
// circle of a 2-D caption subspace, beta from the threshold sweep.
EnvConfig default_env();

// State s_t = (x_{T-t}, t) with t counted from 0 (pure noise) to T (output).
struct SystemState {
  Eigen::VectorXd x;
  int step = 0;
};

struct CaptionEmbedding {
  Eigen::VectorXd e;
  std::string caption_id;
};

struct NoiseDraw {
  Eigen::VectorXd omega;

  static NoiseDraw zero(int n_x);
  // Zero in DDIM mode, standard normal in DDPM mode.
  static NoiseDraw draw(const EnvConfig& cfg, std::mt19937_64& rng);
};

// Index of the trigger whose ball contains e (nearest wins, ties to the
// lowest index), or -1.
int nearest_trigger(const Eigen::VectorXd& e, const EnvConfig& cfg);

// Index of the planted target nearest to x, or -1 when none exist.
int nearest_target(const Eigen::VectorXd& x, const EnvConfig& cfg);

// Distance from x to the nearest planted target (+inf when none exist).
double distance_to_nearest_target(const Eigen::VectorXd& x, const EnvConfig& cfg);

// Toy noise predictor. e == nullptr selects the unconditional branch
// (x - b). The conditional branch is x - y_eff where y_eff follows the
// fixed map A*e away from basins, the gain-scaled target inside a trigger
// region, and a proximity blend of the two inside a latent basin.
Eigen::VectorXd predict_noise(const Eigen::VectorXd& x, const Eigen::VectorXd* e,
                              int tau, const EnvConfig& cfg);

// Conditional minus unconditional prediction at the same state.
Eigen::VectorXd guidance_vector(const Eigen::VectorXd& x, const Eigen::VectorXd& e,
                                int tau, const EnvConfig& cfg);

double guidance_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& e, int tau,
                     const EnvConfig& cfg);

// Safety margin for a guidance norm: -tanh(eta * (norm - beta)).
double ell_value(double norm, const EnvConfig& cfg);

// One denoising step under the steered embedding:
//   x' = x - alpha_tau * (eps_u + g (eps_c - eps_u)) + sigma_tau * omega.
SystemState step(const SystemState& s, const Eigen::VectorXd& e_steered,
                 const NoiseDraw& noise, const EnvConfig& cfg);

// One unit of experience. `ell` is the target-function value at (s, u);
// `ell_next` carries it for s_next under the same steering, which supplies
// the terminal branch of the safety backup.
struct Transition {
  Eigen::VectorXd e_base;
  std::string caption_id;
  SystemState s;
  Eigen::VectorXd u;
  double reward = 0.0;
  double ell = 0.0;
  SystemState s_next;
  double ell_next = 0.0;
  bool terminal = false;
};

// Per-step trace row used for CSV export and norm analysis.
struct StepTrace {
  int step = 0;
  double guidance_norm = 0.0;
  double ell = 0.0;
  double reward = 0.0;
  double distance_to_target = 0.0;
};

using ActionSource = std::function<Eigen::VectorXd(
    const SystemState& s, const Eigen::VectorXd& e_base)>;

// Runs one episode of exactly `horizon` transitions. Deterministic given
// (seed, policy) in DDIM mode. The trace, when requested, gets one row per
// step.
std::vector<Transition> rollout(const EnvConfig& cfg,
                                const codec::CodecParams& codec,
                                const CaptionEmbedding& e_base,
                                const ActionSource& policy, std::uint64_t seed,
                                std::vector<StepTrace>* trace = nullptr);

// Terminal alignment: cosine between the padded final latent and the base
// embedding. Zero (with a false flag) when either side has zero norm.
double terminal_alignment(const Eigen::VectorXd& x_final,
                          const Eigen::VectorXd& e_base, const EnvConfig& cfg,
                          bool* degenerate = nullptr);

}  // namespace rads::dynamics
