// Scratch probe for the default environment geometry. Not part of the test
// suite; run manually while tuning.
#include <Eigen/Dense>
#include <iostream>

#include "rads/codec.hpp"
#include "rads/dynamics.hpp"
#include "rads/reachability.hpp"

using namespace rads;

int main() {
  auto env = dynamics::default_env();
  auto cparams = codec::fit_codec(env.captions, env.action_dim, 0.5);
  std::cout << "codec roundtrip worst cosine: "
            << codec::reconstruction_cosine(cparams, env.captions) << "\n";

  auto cal = reach::calibrate_beta(env, cparams, 3, 12345);
  std::cout << "calibrated beta=" << cal.beta << " acc=" << cal.accuracy
            << " trig_n=" << cal.n_triggered << " plain_n=" << cal.n_plain << "\n";

  // Triggered norms at a few radii.
  dynamics::CaptionEmbedding trig{env.captions[0], env.caption_ids[0]};
  for (double r : {6.0, 4.0, 3.0, 2.0, 1.0, 0.0}) {
    Eigen::VectorXd x = env.targets[0].target -
                        r * env.targets[0].target.normalized();
    std::cout << "r=" << r
              << " trig_norm=" << dynamics::guidance_norm(x, trig.e, 10, env);
    // Best escape: corner actions.
    double best = 1e9;
    for (auto& u : reach::action_lattice(2, 3)) {
      auto e2 = codec::steer(cparams, trig.e, u);
      best = std::min(best, dynamics::guidance_norm(x, e2, 10, env));
    }
    std::cout << " best_escape_norm=" << best << "\n";
  }

  // Zero-steer triggered rollout: lock-in behaviour.
  dynamics::ActionSource zero = [&](const dynamics::SystemState&,
                                    const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(env.action_dim);
  };
  std::vector<dynamics::StepTrace> trace;
  auto transitions = dynamics::rollout(env, cparams, trig, zero, 7, &trace);
  std::cout << "zero-steer triggered distances:";
  for (auto& row : trace) std::cout << " " << row.distance_to_target;
  std::cout << "\nfinal x: " << transitions.back().s_next.x.transpose()
            << " vs target " << env.targets[0].target.transpose() << "\n";
  std::cout << "terminal reward: " << transitions.back().reward << "\n";

  // Escape rollout (constant corner action).
  dynamics::ActionSource esc = [&](const dynamics::SystemState&,
                                   const Eigen::VectorXd&) {
    Eigen::VectorXd u(2);
    u << -1.0, -1.0;
    return u;
  };
  trace.clear();
  auto esc_tr = dynamics::rollout(env, cparams, trig, esc, 7, &trace);
  std::cout << "escape norms:";
  for (auto& row : trace) std::cout << " " << row.guidance_norm;
  std::cout << "\nescape min ell: ";
  double mn = 1e9;
  for (auto& t : esc_tr) mn = std::min(mn, t.ell);
  std::cout << mn << " reward=" << esc_tr.back().reward << "\n";

  // Oracle on the default env.
  reach::GridSpec spec;
  spec.x_min = Eigen::VectorXd::Constant(2, -8.0);
  spec.x_max = Eigen::VectorXd::Constant(2, 8.0);
  spec.points = {41, 41};
  spec.action_points_per_dim = 3;
  auto grid = reach::compute_brt_oracle(env, cparams, trig, spec, 4);
  std::cout << "BRT mask fractions by layer:";
  for (int t = 0; t <= env.horizon; t += 4) {
    std::cout << " t" << t << "="
              << static_cast<double>(grid.mask_count(t)) /
                     static_cast<double>(grid.layer_size());
  }
  std::cout << "\n";
  return 0;
}
