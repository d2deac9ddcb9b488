#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rads::codec {

// Linear encoder/decoder pair onto a compact steering subspace. Control acts
// as e' = dec * (enc * e + action_scale * u). Immutable after fitting.
struct CodecParams {
  Eigen::MatrixXd enc;  // (d x n_e)
  Eigen::MatrixXd dec;  // (n_e x d)
  double action_scale = 0.5;

  int latent_dim() const { return static_cast<int>(enc.rows()); }
  int embedding_dim() const { return static_cast<int>(enc.cols()); }
};

Eigen::VectorXd encode(const CodecParams& params, const Eigen::VectorXd& e);
Eigen::VectorXd decode(const CodecParams& params, const Eigen::VectorXd& z);

// e' = Dec(Enc(e) + action_scale * u); u componentwise in [-1, 1].
Eigen::VectorXd steer(const CodecParams& params, const Eigen::VectorXd& e,
                      const Eigen::VectorXd& u);

// Principal-subspace fit: enc projects onto the top-d right singular
// directions of the caption matrix, dec is its pseudo-inverse (the transpose
// for an orthonormal basis). Throws on rank deficiency.
CodecParams fit_codec(const std::vector<Eigen::VectorXd>& captions, int d,
                      double action_scale = 0.5);

// Smallest round-trip cosine similarity over the given captions.
double reconstruction_cosine(const CodecParams& params,
                             const std::vector<Eigen::VectorXd>& captions);

}  // namespace rads::codec
