#include "rads/dynamics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rads/rng.hpp"

namespace rads::dynamics {

namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

}  // namespace

double ell_value(double norm, const EnvConfig& cfg) {
  return -std::tanh(cfg.eta * (norm - cfg.beta));
}

void EnvConfig::validate() const {
  std::ostringstream msg;
  if (horizon < 1) {
    throw std::invalid_argument("EnvConfig: horizon must be >= 1");
  }
  if (guidance_scale < 0.0) {
    throw std::invalid_argument("EnvConfig: guidance scale must be >= 0");
  }
  if (n_x < 1 || n_e < 1 || action_dim < 1) {
    throw std::invalid_argument("EnvConfig: dimensions must be positive");
  }
  if (static_cast<int>(step_sizes.size()) != horizon) {
    msg << "EnvConfig: expected " << horizon << " step sizes, got "
        << step_sizes.size();
    throw std::invalid_argument(msg.str());
  }
  for (double a : step_sizes) {
    if (!(a > 0.0)) {
      throw std::invalid_argument("EnvConfig: step sizes must be positive");
    }
  }
  if (base_attractor.size() != n_x) {
    throw std::invalid_argument("EnvConfig: base attractor length != n_x");
  }
  if (cond_map.rows() != n_x || cond_map.cols() != n_e) {
    throw std::invalid_argument("EnvConfig: conditional map must be n_x x n_e");
  }
  if (!base_attractor.allFinite() || !cond_map.allFinite()) {
    throw std::invalid_argument("EnvConfig: non-finite field");
  }
  if (eta <= 0.0) {
    throw std::invalid_argument("EnvConfig: eta must be positive");
  }
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& t = targets[k];
    if (t.trigger.size() != n_e || t.target.size() != n_x) {
      msg << "EnvConfig: target " << k << " has mismatched dimensions";
      throw std::invalid_argument(msg.str());
    }
    if (!(t.radius > 0.0)) {
      msg << "EnvConfig: target " << k << " needs a positive trigger radius";
      throw std::invalid_argument(msg.str());
    }
    if (!t.trigger.allFinite() || !t.target.allFinite()) {
      msg << "EnvConfig: target " << k << " has non-finite entries";
      throw std::invalid_argument(msg.str());
    }
  }
  if (captions.size() != caption_ids.size()) {
    throw std::invalid_argument("EnvConfig: caption/id count mismatch");
  }
  for (const auto& e : captions) {
    if (e.size() != n_e || !e.allFinite()) {
      throw std::invalid_argument("EnvConfig: bad caption embedding");
    }
  }
}

EnvConfig default_env() {
  EnvConfig cfg;
  cfg.horizon = 20;
  cfg.guidance_scale = 2.0;
  cfg.noise_mode = NoiseMode::kDdim;
  cfg.n_x = 2;
  cfg.n_e = 8;
  cfg.action_dim = 2;
  cfg.step_sizes.assign(cfg.horizon, 0.15);
  cfg.guidance_gain = 0.5;
  cfg.capture_radius = 3.0;
  cfg.capture_width = 1.0;
  cfg.sigma = 0.05;
  cfg.eta = 0.1;
  // Accuracy-maximizing guidance-norm threshold from the sweep in
  // calibrate_beta (3 zero-steer rollouts per caption, seed 12345).
  cfg.beta = 2.6350429192227636;
  cfg.base_attractor = Eigen::VectorXd::Zero(cfg.n_x);
  cfg.cond_map = Eigen::MatrixXd::Zero(cfg.n_x, cfg.n_e);
  cfg.cond_map(0, 0) = 1.0;
  cfg.cond_map(1, 1) = 1.0;
  cfg.rng_seed = 0;

  // Caption subspace basis: orthonormal, with the first two coordinates
  // carrying the latent-visible content at weight 0.8.
  Eigen::VectorXd v1 = Eigen::VectorXd::Zero(cfg.n_e);
  Eigen::VectorXd v2 = Eigen::VectorXd::Zero(cfg.n_e);
  v1(0) = 0.8;
  v1(2) = 0.6;
  v2(1) = 0.8;
  v2(3) = 0.6;

  auto caption_at = [&](double angle) {
    return Eigen::VectorXd(std::cos(angle) * v1 + std::sin(angle) * v2);
  };

  const double pi = std::acos(-1.0);
  const double trig0_angle = pi / 4.0;                // toward (4.2, 4.2)
  const double trig1_angle = std::atan2(0.6, -0.8);   // toward (-4.8, 3.6)

  std::vector<double> angles = {trig0_angle, trig1_angle};
  for (double deg : {85.0,  95.0,  105.0, 185.0, 200.0, 215.0, 230.0,
                     245.0, 260.0, 275.0, 290.0, 305.0, 320.0, 335.0}) {
    angles.push_back(deg * pi / 180.0);
  }
  for (std::size_t i = 0; i < angles.size(); ++i) {
    cfg.captions.push_back(caption_at(angles[i]));
    std::ostringstream id;
    if (i < 2) {
      id << "mem-00" << i;
    } else {
      id << "cap-" << (i < 10 ? "00" : "0") << i;
    }
    cfg.caption_ids.push_back(id.str());
  }

  Eigen::VectorXd m0(2), m1(2);
  m0 << 4.2, 4.2;
  m1 << -4.8, 3.6;
  cfg.targets.push_back({cfg.captions[0], m0, 0.55});
  cfg.targets.push_back({cfg.captions[1], m1, 0.55});
  cfg.validate();
  return cfg;
}

NoiseDraw NoiseDraw::zero(int n_x) { return NoiseDraw{Eigen::VectorXd::Zero(n_x)}; }

NoiseDraw NoiseDraw::draw(const EnvConfig& cfg, std::mt19937_64& rng) {
  if (cfg.noise_mode == NoiseMode::kDdim) return zero(cfg.n_x);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(cfg.n_x);
  for (int i = 0; i < cfg.n_x; ++i) w(i) = normal(rng);
  return NoiseDraw{std::move(w)};
}

int nearest_trigger(const Eigen::VectorXd& e, const EnvConfig& cfg) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cfg.targets.size(); ++k) {
    const double dist = (e - cfg.targets[k].trigger).norm();
    if (dist < cfg.targets[k].radius && dist < best_dist) {
      best = static_cast<int>(k);
      best_dist = dist;
    }
  }
  return best;
}

int nearest_target(const Eigen::VectorXd& x, const EnvConfig& cfg) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cfg.targets.size(); ++k) {
    const double dist = (x - cfg.targets[k].target).norm();
    if (dist < best_dist) {
      best = static_cast<int>(k);
      best_dist = dist;
    }
  }
  return best;
}

double distance_to_nearest_target(const Eigen::VectorXd& x, const EnvConfig& cfg) {
  const int k = nearest_target(x, cfg);
  if (k < 0) return std::numeric_limits<double>::infinity();
  return (x - cfg.targets[k].target).norm();
}

namespace {

// Basin weight in [0, 1]: 1 deep inside a latent basin, 0 far away.
double capture_weight(const Eigen::VectorXd& x, const EnvConfig& cfg, int* which) {
  *which = -1;
  if (cfg.capture_radius <= 0.0 || cfg.targets.empty()) return 0.0;
  const int k = nearest_target(x, cfg);
  *which = k;
  const double r = (x - cfg.targets[k].target).norm();
  return 1.0 / (1.0 + std::exp((r - cfg.capture_radius) / cfg.capture_width));
}

// Effective conditional attractor y_eff(x, e).
Eigen::VectorXd conditional_attractor(const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& e,
                                      const EnvConfig& cfg) {
  const Eigen::VectorXd plain = cfg.cond_map * e;
  const int trig = nearest_trigger(e, cfg);
  if (trig >= 0) {
    return cfg.base_attractor +
           cfg.guidance_gain * (cfg.targets[trig].target - cfg.base_attractor);
  }
  int cap = -1;
  const double w = capture_weight(x, cfg, &cap);
  if (cap < 0 || w <= 0.0) return plain;
  const Eigen::VectorXd summoned =
      cfg.base_attractor +
      cfg.guidance_gain * (cfg.targets[cap].target - cfg.base_attractor);
  return (1.0 - w) * plain + w * summoned;
}

}  // namespace

Eigen::VectorXd predict_noise(const Eigen::VectorXd& x, const Eigen::VectorXd* e,
                              int /*tau*/, const EnvConfig& cfg) {
  if (x.size() != cfg.n_x) {
    throw std::invalid_argument("predict_noise: latent dimension mismatch");
  }
  require_finite(x, "predict_noise");
  if (e == nullptr) {
    return x - cfg.base_attractor;
  }
  if (e->size() != cfg.n_e) {
    throw std::invalid_argument("predict_noise: embedding dimension mismatch");
  }
  require_finite(*e, "predict_noise");
  return x - conditional_attractor(x, *e, cfg);
}

Eigen::VectorXd guidance_vector(const Eigen::VectorXd& x, const Eigen::VectorXd& e,
                                int tau, const EnvConfig& cfg) {
  return predict_noise(x, &e, tau, cfg) - predict_noise(x, nullptr, tau, cfg);
}

double guidance_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& e, int tau,
                     const EnvConfig& cfg) {
  return guidance_vector(x, e, tau, cfg).norm();
}

SystemState step(const SystemState& s, const Eigen::VectorXd& e_steered,
                 const NoiseDraw& noise, const EnvConfig& cfg) {
  if (s.step >= cfg.horizon) {
    throw std::invalid_argument("step: state is terminal");
  }
  if (s.step < 0) {
    throw std::invalid_argument("step: negative step index");
  }
  const int tau = cfg.horizon - s.step;
  const Eigen::VectorXd eps_u = predict_noise(s.x, nullptr, tau, cfg);
  const Eigen::VectorXd eps_c = predict_noise(s.x, &e_steered, tau, cfg);
  const double alpha = cfg.step_sizes[static_cast<std::size_t>(s.step)];
  const double sigma = cfg.noise_mode == NoiseMode::kDdpm ? cfg.sigma : 0.0;
  SystemState out;
  out.x = s.x - alpha * (eps_u + cfg.guidance_scale * (eps_c - eps_u));
  if (sigma != 0.0) {
    if (noise.omega.size() != cfg.n_x) {
      throw std::invalid_argument("step: noise draw dimension mismatch");
    }
    out.x += sigma * noise.omega;
  }
  out.step = s.step + 1;
  return out;
}

double terminal_alignment(const Eigen::VectorXd& x_final,
                          const Eigen::VectorXd& e_base, const EnvConfig& cfg,
                          bool* degenerate) {
  if (degenerate != nullptr) *degenerate = false;
  const Eigen::VectorXd feature = cfg.cond_map.transpose() * x_final;
  const double denom = feature.norm() * e_base.norm();
  if (denom <= 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  return feature.dot(e_base) / denom;
}

std::vector<Transition> rollout(const EnvConfig& cfg,
                                const codec::CodecParams& codec,
                                const CaptionEmbedding& e_base,
                                const ActionSource& policy, std::uint64_t seed,
                                std::vector<StepTrace>* trace) {
  cfg.validate();
  if (e_base.e.size() != cfg.n_e) {
    throw std::invalid_argument("rollout: base embedding dimension mismatch");
  }
  std::mt19937_64 rng(mix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);

  SystemState s;
  s.x = Eigen::VectorXd(cfg.n_x);
  for (int i = 0; i < cfg.n_x; ++i) s.x(i) = normal(rng);
  s.step = 0;

  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(cfg.horizon));
  for (int t = 0; t < cfg.horizon; ++t) {
    Eigen::VectorXd u = policy(s, e_base.e);
    if (u.size() != cfg.action_dim) {
      throw std::invalid_argument("rollout: action dimension mismatch");
    }
    u = u.cwiseMax(-1.0).cwiseMin(1.0);
    const Eigen::VectorXd e_steered = codec::steer(codec, e_base.e, u);
    const int tau = cfg.horizon - t;
    const double norm = guidance_norm(s.x, e_steered, tau, cfg);
    const double ell = ell_value(norm, cfg);
    const NoiseDraw noise = NoiseDraw::draw(cfg, rng);

    Transition tr;
    tr.e_base = e_base.e;
    tr.caption_id = e_base.caption_id;
    tr.s = s;
    tr.u = u;
    tr.ell = ell;
    tr.s_next = step(s, e_steered, noise, cfg);
    tr.terminal = (t + 1 == cfg.horizon);
    tr.ell_next =
        ell_value(guidance_norm(tr.s_next.x, e_steered, tau - 1, cfg), cfg);
    tr.reward = tr.terminal ? terminal_alignment(tr.s_next.x, e_base.e, cfg) : 0.0;

    if (trace != nullptr) {
      StepTrace row;
      row.step = t;
      row.guidance_norm = norm;
      row.ell = ell;
      row.reward = tr.reward;
      row.distance_to_target = distance_to_nearest_target(s.x, cfg);
      trace->push_back(row);
    }
    s = tr.s_next;
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace rads::dynamics
