#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace rads::nn {

// Fully connected network with rectifier hidden activations and a linear
// output layer. Parameters are plain values; forward/backward are pure
// functions of a snapshot, so copies of a net can be used concurrently.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out x in)
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  // widths = {in, hidden..., out}; uniform fan-in initialization.
  static Mlp make(const std::vector<int>& widths, std::uint64_t seed);
};

// Intermediate activations retained by a forward pass for reverse mode.
struct ForwardTrace {
  Eigen::VectorXd input;
  std::vector<Eigen::VectorXd> pre;   // pre-activation per layer
  std::vector<Eigen::VectorXd> post;  // post-activation per hidden layer
};

// Gradient of a scalar objective with respect to every parameter and to the
// network input. Layout mirrors Mlp.
struct Gradients {
  std::vector<Eigen::MatrixXd> dweights;
  std::vector<Eigen::VectorXd> dbiases;
  Eigen::VectorXd dinput;

  static Gradients zeros_like(const Mlp& net);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double c);
  bool all_finite() const;
};

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input);
Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input,
                        ForwardTrace& trace);

// Reverse-mode pass. `upstream` is dL/d(output); returns exact gradients.
Gradients backward(const Mlp& net, const ForwardTrace& trace,
                   const Eigen::VectorXd& upstream);

// Accumulating variant used by batched updates.
void backward_into(const Mlp& net, const ForwardTrace& trace,
                   const Eigen::VectorXd& upstream, Gradients& acc);

// Moment-based adaptive update with bias correction.
struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const Mlp& net, double lr);
};

// Applies one update in place. Throws std::invalid_argument on non-finite
// gradients.
void adam_step(Mlp& net, AdamState& state, const Gradients& grads);

// Scalar twin of AdamState, for temperature-style parameters.
struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

double adam_scalar_step(double value, ScalarAdam& state, double grad);

// target <- (1 - tau) * target + tau * main, elementwise.
void polyak_update(const Mlp& main, Mlp& target, double tau);

}  // namespace rads::nn
