#include "rads/nn.hpp"

#include <cmath>

#include "rads/rng.hpp"

namespace rads::nn {

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size()) +
         static_cast<std::size_t>(biases[l].size());
  }
  return n;
}

Mlp Mlp::make(const std::vector<int>& widths, std::uint64_t seed) {
  if (widths.size() < 2) {
    throw std::invalid_argument("Mlp::make: need at least input and output widths");
  }
  for (int w : widths) {
    if (w <= 0) throw std::invalid_argument("Mlp::make: widths must be positive");
  }
  Mlp net;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = dist(rng);
    }
    Eigen::VectorXd b(out);
    for (int r = 0; r < out; ++r) b(r) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  g.dweights.reserve(net.weights.size());
  g.dbiases.reserve(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.dweights.emplace_back(
        Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.dbiases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  g.dinput = Eigen::VectorXd::Zero(net.input_dim());
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t l = 0; l < dweights.size(); ++l) {
    dweights[l] += other.dweights[l];
    dbiases[l] += other.dbiases[l];
  }
  dinput += other.dinput;
  return *this;
}

Gradients& Gradients::operator*=(double c) {
  for (std::size_t l = 0; l < dweights.size(); ++l) {
    dweights[l] *= c;
    dbiases[l] *= c;
  }
  dinput *= c;
  return *this;
}

bool Gradients::all_finite() const {
  for (std::size_t l = 0; l < dweights.size(); ++l) {
    if (!dweights[l].allFinite() || !dbiases[l].allFinite()) return false;
  }
  return dinput.allFinite();
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
  if (input.size() != net.input_dim()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  Eigen::VectorXd h = input;
  const std::size_t last = net.weights.size() - 1;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    h = (net.weights[l] * h + net.biases[l]).eval();
    if (l != last) h = h.cwiseMax(0.0);
  }
  return h;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input,
                        ForwardTrace& trace) {
  if (input.size() != net.input_dim()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  trace.input = input;
  trace.pre.clear();
  trace.post.clear();
  trace.pre.reserve(net.weights.size());
  trace.post.reserve(net.weights.size());
  Eigen::VectorXd h = input;
  const std::size_t last = net.weights.size() - 1;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Eigen::VectorXd z = net.weights[l] * h + net.biases[l];
    trace.pre.push_back(z);
    if (l != last) {
      h = z.cwiseMax(0.0);
      trace.post.push_back(h);
    } else {
      h = z;
    }
  }
  return h;
}

void backward_into(const Mlp& net, const ForwardTrace& trace,
                   const Eigen::VectorXd& upstream, Gradients& acc) {
  if (upstream.size() != net.output_dim()) {
    throw std::invalid_argument("backward: upstream dimension mismatch");
  }
  const std::size_t layers = net.weights.size();
  Eigen::VectorXd delta = upstream;  // dL/d(pre-activation of layer l)
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t l = layers - 1 - i;
    if (l != layers - 1) {
      // rectifier gate on the hidden pre-activation
      delta = (trace.pre[l].array() > 0.0)
                  .select(delta.array(), 0.0)
                  .matrix();
    }
    const Eigen::VectorXd& layer_in =
        (l == 0) ? trace.input : trace.post[l - 1];
    acc.dweights[l].noalias() += delta * layer_in.transpose();
    acc.dbiases[l] += delta;
    delta = (net.weights[l].transpose() * delta).eval();
  }
  acc.dinput += delta;
}

Gradients backward(const Mlp& net, const ForwardTrace& trace,
                   const Eigen::VectorXd& upstream) {
  Gradients g = Gradients::zeros_like(net);
  backward_into(net, trace, upstream, g);
  return g;
}

AdamState AdamState::init(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    s.m_w.emplace_back(
        Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.v_w.emplace_back(
        Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.m_b.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    s.v_b.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return s;
}

void adam_step(Mlp& net, AdamState& state, const Gradients& grads) {
  if (!grads.all_finite()) {
    throw std::invalid_argument("adam_step: non-finite gradient");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    state.m_w[l] = state.beta1 * state.m_w[l] + (1.0 - state.beta1) * grads.dweights[l];
    state.v_w[l] = state.beta2 * state.v_w[l] +
                   (1.0 - state.beta2) * grads.dweights[l].cwiseProduct(grads.dweights[l]);
    net.weights[l].array() -=
        state.lr * (state.m_w[l].array() / bc1) /
        ((state.v_w[l].array() / bc2).sqrt() + state.eps);

    state.m_b[l] = state.beta1 * state.m_b[l] + (1.0 - state.beta1) * grads.dbiases[l];
    state.v_b[l] = state.beta2 * state.v_b[l] +
                   (1.0 - state.beta2) * grads.dbiases[l].cwiseProduct(grads.dbiases[l]);
    net.biases[l].array() -=
        state.lr * (state.m_b[l].array() / bc1) /
        ((state.v_b[l].array() / bc2).sqrt() + state.eps);
  }
}

double adam_scalar_step(double value, ScalarAdam& state, double grad) {
  if (!std::isfinite(grad)) {
    throw std::invalid_argument("adam_scalar_step: non-finite gradient");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad;
  return value - state.lr * (state.m / bc1) / (std::sqrt(state.v / bc2) + state.eps);
}

void polyak_update(const Mlp& main, Mlp& target, double tau) {
  if (tau <= 0.0 || tau > 1.0) {
    throw std::invalid_argument("polyak_update: tau must be in (0, 1]");
  }
  if (main.weights.size() != target.weights.size()) {
    throw std::invalid_argument("polyak_update: layer count mismatch");
  }
  for (std::size_t l = 0; l < main.weights.size(); ++l) {
    if (main.weights[l].rows() != target.weights[l].rows() ||
        main.weights[l].cols() != target.weights[l].cols()) {
      throw std::invalid_argument("polyak_update: shape mismatch");
    }
    target.weights[l] = (1.0 - tau) * target.weights[l] + tau * main.weights[l];
    target.biases[l] = (1.0 - tau) * target.biases[l] + tau * main.biases[l];
  }
}

}  // namespace rads::nn
