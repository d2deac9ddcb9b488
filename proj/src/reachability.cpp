#include "rads/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rads/rng.hpp"

namespace rads::reach {

double target_ell(const dynamics::SystemState& s, const Eigen::VectorXd& e_steered,
                  const dynamics::EnvConfig& env, const TargetFnParams& params) {
  if (params.eta <= 0.0) {
    throw std::invalid_argument("target_ell: eta must be positive");
  }
  const int tau = env.horizon - s.step;
  const double norm = dynamics::guidance_norm(s.x, e_steered, tau, env);
  return -std::tanh(params.eta * (norm - params.beta));
}

double safety_backup(double ell_t, double q_next, double gamma, bool terminal,
                     double ell_T) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("safety_backup: gamma must be in (0, 1]");
  }
  if (terminal) return ell_T;
  return (1.0 - gamma) * ell_t + gamma * std::min(ell_t, q_next);
}

Eigen::MatrixXd tabular_fixed_point(const TabularMdp& mdp,
                                    const std::vector<double>& ell, double gamma,
                                    double tol, int max_iter) {
  if (mdp.n_states <= 0 || mdp.n_actions <= 0) {
    throw std::invalid_argument("tabular_fixed_point: empty system");
  }
  if (static_cast<int>(ell.size()) != mdp.n_states) {
    throw std::invalid_argument("tabular_fixed_point: ell size mismatch");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("tabular_fixed_point: gamma must be in (0, 1]");
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    if (static_cast<int>(mdp.next[s].size()) != mdp.n_actions) {
      throw std::invalid_argument("tabular_fixed_point: ragged next table");
    }
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (mdp.next[s][a] < 0 || mdp.next[s][a] >= mdp.n_states) {
        throw std::invalid_argument("tabular_fixed_point: next state out of range");
      }
    }
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  Eigen::MatrixXd q_new = q;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd v = q.rowwise().maxCoeff();
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double bootstrap = std::min(ell[s], v(mdp.next[s][a]));
        q_new(s, a) = (1.0 - gamma) * ell[s] + gamma * bootstrap;
      }
    }
    const double diff = (q_new - q).cwiseAbs().maxCoeff();
    q.swap(q_new);
    if (diff < tol) return q;
  }
  throw std::runtime_error("tabular_fixed_point: no convergence within iteration cap");
}

std::size_t BrtGrid::layer_size() const {
  std::size_t n = 1;
  for (const auto& axis : axes) n *= axis.size();
  return n;
}

std::size_t BrtGrid::flat_index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (std::size_t dim = 0; dim < axes.size(); ++dim) {
    flat = flat * axes[dim].size() + static_cast<std::size_t>(idx[dim]);
  }
  return flat;
}

bool BrtGrid::in_brt(const std::vector<int>& idx, int t) const {
  return values[static_cast<std::size_t>(t)][flat_index(idx)] <= 0.0;
}

std::size_t BrtGrid::mask_count(int t) const {
  const auto& layer = values[static_cast<std::size_t>(t)];
  return static_cast<std::size_t>(
      std::count_if(layer.begin(), layer.end(), [](double v) { return v <= 0.0; }));
}

std::vector<Eigen::VectorXd> action_lattice(int dim, int per_dim) {
  if (dim < 1 || per_dim < 1) {
    throw std::invalid_argument("action_lattice: bad lattice shape");
  }
  std::vector<double> ticks;
  if (per_dim == 1) {
    ticks.push_back(0.0);
  } else {
    for (int i = 0; i < per_dim; ++i) {
      ticks.push_back(-1.0 + 2.0 * i / (per_dim - 1));
    }
  }
  std::vector<Eigen::VectorXd> out;
  const std::size_t total = static_cast<std::size_t>(std::pow(per_dim, dim));
  out.reserve(total);
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Eigen::VectorXd u(dim);
    for (int d = 0; d < dim; ++d) u(d) = ticks[static_cast<std::size_t>(idx[d])];
    out.push_back(std::move(u));
    for (int d = dim - 1; d >= 0; --d) {
      if (++idx[d] < per_dim) break;
      idx[d] = 0;
    }
  }
  return out;
}

namespace {

double interpolate(const std::vector<std::vector<double>>& axes,
                   const std::vector<double>& layer, const Eigen::VectorXd& x) {
  const std::size_t dims = axes.size();
  std::vector<int> lo(dims, 0);
  std::vector<double> frac(dims, 0.0);
  for (std::size_t d = 0; d < dims; ++d) {
    const auto& axis = axes[d];
    double v = std::clamp(x(static_cast<int>(d)), axis.front(), axis.back());
    auto it = std::upper_bound(axis.begin(), axis.end(), v);
    int hi = static_cast<int>(it - axis.begin());
    hi = std::clamp(hi, 1, static_cast<int>(axis.size()) - 1);
    lo[d] = hi - 1;
    const double span = axis[hi] - axis[hi - 1];
    frac[d] = span > 0.0 ? (v - axis[hi - 1]) / span : 0.0;
  }
  double acc = 0.0;
  const std::size_t corners = std::size_t{1} << dims;
  for (std::size_t corner = 0; corner < corners; ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    for (std::size_t d = 0; d < dims; ++d) {
      const bool high = (corner >> d) & 1U;
      w *= high ? frac[d] : (1.0 - frac[d]);
      flat = flat * axes[d].size() +
             static_cast<std::size_t>(lo[d] + (high ? 1 : 0));
    }
    acc += w * layer[flat];
  }
  return acc;
}

void for_each_chunk(std::size_t total, int threads,
                    const std::function<void(std::size_t, std::size_t)>& body) {
  if (threads <= 1 || total < 64) {
    body(0, total);
    return;
  }
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(threads), total);
  std::vector<std::thread> pool;
  const std::size_t chunk = (total + n_threads - 1) / n_threads;
  for (std::size_t i = 0; i < n_threads; ++i) {
    const std::size_t begin = i * chunk;
    const std::size_t end = std::min(total, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(body, begin, end);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

double interpolate_layer(const BrtGrid& grid, int t, const Eigen::VectorXd& x) {
  return interpolate(grid.axes, grid.values[static_cast<std::size_t>(t)], x);
}

BrtGrid compute_brt_oracle(const dynamics::EnvConfig& env,
                           const codec::CodecParams& codec,
                           const dynamics::CaptionEmbedding& e_base,
                           const GridSpec& spec, int threads) {
  env.validate();
  if (env.noise_mode != dynamics::NoiseMode::kDdim) {
    throw std::invalid_argument(
        "compute_brt_oracle: requires DDIM mode (deterministic dynamics)");
  }
  if (env.n_x > 3) {
    throw std::invalid_argument("compute_brt_oracle: n_x must be <= 3");
  }
  if (static_cast<int>(spec.points.size()) != env.n_x ||
      spec.x_min.size() != env.n_x || spec.x_max.size() != env.n_x) {
    throw std::invalid_argument("compute_brt_oracle: grid spec dimension mismatch");
  }
  for (int d = 0; d < env.n_x; ++d) {
    if (spec.points[static_cast<std::size_t>(d)] < 2 ||
        !(spec.x_max(d) > spec.x_min(d))) {
      throw std::invalid_argument("compute_brt_oracle: degenerate grid axis");
    }
  }

  BrtGrid grid;
  grid.horizon = env.horizon;
  grid.caption_id = e_base.caption_id;
  grid.eta = env.eta;
  grid.beta = env.beta;
  for (int d = 0; d < env.n_x; ++d) {
    const int n = spec.points[static_cast<std::size_t>(d)];
    std::vector<double> axis(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      axis[static_cast<std::size_t>(i)] =
          spec.x_min(d) + (spec.x_max(d) - spec.x_min(d)) * i / (n - 1);
    }
    grid.axes.push_back(std::move(axis));
  }
  grid.actions = action_lattice(env.action_dim, spec.action_points_per_dim);

  std::vector<Eigen::VectorXd> steered;
  steered.reserve(grid.actions.size());
  for (const auto& u : grid.actions) {
    steered.push_back(codec::steer(codec, e_base.e, u));
  }

  const std::size_t n_nodes = grid.layer_size();
  std::vector<Eigen::VectorXd> nodes(n_nodes);
  {
    std::vector<int> idx(static_cast<std::size_t>(env.n_x), 0);
    for (std::size_t n = 0; n < n_nodes; ++n) {
      Eigen::VectorXd x(env.n_x);
      for (int d = 0; d < env.n_x; ++d) {
        x(d) = grid.axes[static_cast<std::size_t>(d)]
                        [static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
      }
      nodes[n] = std::move(x);
      for (int d = env.n_x - 1; d >= 0; --d) {
        if (++idx[static_cast<std::size_t>(d)] <
            static_cast<int>(grid.axes[static_cast<std::size_t>(d)].size()))
          break;
        idx[static_cast<std::size_t>(d)] = 0;
      }
    }
  }

  grid.values.assign(static_cast<std::size_t>(env.horizon) + 1,
                     std::vector<double>(n_nodes, 0.0));

  // Terminal layer: best admissible measurement, exact at the nodes.
  for_each_chunk(n_nodes, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& e : steered) {
        const double norm = dynamics::guidance_norm(nodes[n], e, 0, env);
        best = std::max(best, dynamics::ell_value(norm, env));
      }
      grid.values[static_cast<std::size_t>(env.horizon)][n] = best;
    }
  });

  // Backward induction over the remaining layers.
  for (int t = env.horizon - 1; t >= 0; --t) {
    const auto& next_layer = grid.values[static_cast<std::size_t>(t) + 1];
    auto& layer = grid.values[static_cast<std::size_t>(t)];
    const int tau = env.horizon - t;
    for_each_chunk(n_nodes, threads, [&](std::size_t begin, std::size_t end) {
      dynamics::SystemState s;
      s.step = t;
      const dynamics::NoiseDraw no_noise = dynamics::NoiseDraw::zero(env.n_x);
      for (std::size_t n = begin; n < end; ++n) {
        s.x = nodes[n];
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < steered.size(); ++a) {
          const double norm = dynamics::guidance_norm(s.x, steered[a], tau, env);
          const double ell_here = dynamics::ell_value(norm, env);
          const dynamics::SystemState s_next =
              dynamics::step(s, steered[a], no_noise, env);
          const double v_next = interpolate(grid.axes, next_layer, s_next.x);
          best = std::max(best, std::min(ell_here, v_next));
        }
        layer[n] = best;
      }
    });
  }

  // Coarseness estimate: the largest jump between neighboring nodes bounds
  // the multilinear interpolation error on the initial layer.
  double max_gap = 0.0;
  const auto& first = grid.values.front();
  std::vector<std::size_t> strides(grid.axes.size());
  {
    std::size_t stride = 1;
    for (std::size_t d = grid.axes.size(); d-- > 0;) {
      strides[d] = stride;
      stride *= grid.axes[d].size();
    }
  }
  for (std::size_t n = 0; n < n_nodes; ++n) {
    std::size_t rem = n;
    for (std::size_t d = 0; d < grid.axes.size(); ++d) {
      const std::size_t coord = rem / strides[d];
      rem %= strides[d];
      if (coord + 1 < grid.axes[d].size()) {
        max_gap = std::max(max_gap, std::abs(first[n] - first[n + strides[d]]));
      }
    }
  }
  if (max_gap > 0.5) {
    std::cerr << "compute_brt_oracle: warning: grid may be too coarse "
                 "(max neighbor value gap "
              << max_gap << ")\n";
  }
  return grid;
}

Calibration calibrate_beta(const dynamics::EnvConfig& env,
                           const codec::CodecParams& codec,
                           int rollouts_per_caption, std::uint64_t seed) {
  if (rollouts_per_caption < 1) {
    throw std::invalid_argument("calibrate_beta: need at least one rollout");
  }
  const dynamics::ActionSource zero_policy =
      [&](const dynamics::SystemState&, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(env.action_dim);
      };
  std::vector<std::pair<double, bool>> samples;  // (norm, triggered caption)
  for (std::size_t c = 0; c < env.captions.size(); ++c) {
    const bool triggered = dynamics::nearest_trigger(env.captions[c], env) >= 0;
    dynamics::CaptionEmbedding cap{env.captions[c], env.caption_ids[c]};
    for (int r = 0; r < rollouts_per_caption; ++r) {
      std::vector<dynamics::StepTrace> trace;
      dynamics::rollout(env, codec, cap, zero_policy,
                        derive_seed(seed, c * 10007ULL + static_cast<std::uint64_t>(r)),
                        &trace);
      for (const auto& row : trace) {
        samples.emplace_back(row.guidance_norm, triggered);
      }
    }
  }
  Calibration cal;
  for (const auto& [norm, trig] : samples) {
    (void)norm;
    if (trig) {
      cal.n_triggered += 1;
    } else {
      cal.n_plain += 1;
    }
  }
  if (cal.n_triggered == 0 || cal.n_plain == 0) {
    throw std::runtime_error(
        "calibrate_beta: need both triggered and plain captions");
  }

  std::sort(samples.begin(), samples.end());
  // Classify "triggered" when norm > threshold. Sweeping thresholds between
  // consecutive samples: start below the minimum (all classified triggered).
  const double total = static_cast<double>(samples.size());
  std::size_t plain_below = 0;
  std::size_t trig_below = 0;
  double best_acc = -1.0;
  std::vector<double> best_thresholds;
  auto consider = [&](double threshold) {
    const std::size_t correct =
        plain_below + (cal.n_triggered - trig_below);
    const double acc = static_cast<double>(correct) / total;
    if (acc > best_acc + 1e-12) {
      best_acc = acc;
      best_thresholds.assign(1, threshold);
    } else if (std::abs(acc - best_acc) <= 1e-12) {
      best_thresholds.push_back(threshold);
    }
  };
  consider(samples.front().first - 1.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].second) {
      trig_below += 1;
    } else {
      plain_below += 1;
    }
    const double here = samples[i].first;
    const double next =
        (i + 1 < samples.size()) ? samples[i + 1].first : here + 2.0;
    if (next > here) consider(0.5 * (here + next));
  }
  cal.accuracy = best_acc;
  cal.beta = best_thresholds[best_thresholds.size() / 2];
  return cal;
}

}  // namespace rads::reach
