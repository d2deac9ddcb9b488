#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "rads/codec.hpp"
#include "rads/dynamics.hpp"

namespace rads::reach {

struct TargetFnParams {
  double eta = 0.1;
  double beta = 2.2;
};

// l(s) = -tanh(eta * (||eps(x, e') - eps(x, null)||_2 - beta)); strictly
// decreasing in the guidance norm, zero exactly at the threshold.
double target_ell(const dynamics::SystemState& s, const Eigen::VectorXd& e_steered,
                  const dynamics::EnvConfig& env, const TargetFnParams& params);

// Recursive safety target: ell_T at the horizon, otherwise
// (1 - gamma) * ell_t + gamma * min(ell_t, q_next).
double safety_backup(double ell_t, double q_next, double gamma, bool terminal,
                     double ell_T);

// Finite deterministic MDP for fixed-point checks. Absorbing states self-loop.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<std::vector<int>> next;  // next[s][a]
};

// Iterates Q(s,a) <- (1-gamma) ell(s) + gamma min(ell(s), max_a' Q(s',a'))
// until the sup-norm change drops below tol. Throws if the iteration cap is
// reached first.
Eigen::MatrixXd tabular_fixed_point(const TabularMdp& mdp,
                                    const std::vector<double>& ell, double gamma,
                                    double tol = 1e-10, int max_iter = 200000);

struct GridSpec {
  Eigen::VectorXd x_min;
  Eigen::VectorXd x_max;
  std::vector<int> points;          // per latent dimension
  int action_points_per_dim = 3;    // symmetric lattice over [-1, 1]
};

// Discretized exact reachability values. values[t] is the layer for step t,
// flattened row-major over the state axes; a state is in the BRT when its
// value is <= 0.
struct BrtGrid {
  std::vector<std::vector<double>> axes;
  std::vector<Eigen::VectorXd> actions;
  int horizon = 0;
  std::string caption_id;
  double eta = 0.0;
  double beta = 0.0;
  std::vector<std::vector<double>> values;

  std::size_t layer_size() const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  bool in_brt(const std::vector<int>& idx, int t) const;
  std::size_t mask_count(int t) const;
};

// Dense action lattice over [-1, 1]^d with `per_dim` points per axis.
std::vector<Eigen::VectorXd> action_lattice(int dim, int per_dim);

// Backward induction for the best-case reachability value of the caption:
//   V(x, T) = max_u ell(x, steer(e, u))
//   V(x, t) = max_u min(ell(x, steer(e, u)), V(f(x, u), t + 1))
// with multilinear interpolation on x and boundary clamping. DDIM only.
BrtGrid compute_brt_oracle(const dynamics::EnvConfig& env,
                           const codec::CodecParams& codec,
                           const dynamics::CaptionEmbedding& e_base,
                           const GridSpec& spec, int threads = 1);

// Multilinear interpolation of one value layer at an arbitrary point,
// clamped to the grid box.
double interpolate_layer(const BrtGrid& grid, int t, const Eigen::VectorXd& x);

struct Calibration {
  double beta = 0.0;
  double accuracy = 0.0;
  std::size_t n_triggered = 0;
  std::size_t n_plain = 0;
};

// Threshold sweep over guidance norms visited by zero-steer rollouts of
// every caption: picks the midpoint of the accuracy-maximizing interval for
// separating triggered from plain captions.
Calibration calibrate_beta(const dynamics::EnvConfig& env,
                           const codec::CodecParams& codec,
                           int rollouts_per_caption, std::uint64_t seed);

}  // namespace rads::reach
