#include "rads/codec.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rads::codec {

Eigen::VectorXd encode(const CodecParams& params, const Eigen::VectorXd& e) {
  if (e.size() != params.embedding_dim()) {
    throw std::invalid_argument("encode: embedding dimension mismatch");
  }
  return params.enc * e;
}

Eigen::VectorXd decode(const CodecParams& params, const Eigen::VectorXd& z) {
  if (z.size() != params.latent_dim()) {
    throw std::invalid_argument("decode: latent dimension mismatch");
  }
  return params.dec * z;
}

Eigen::VectorXd steer(const CodecParams& params, const Eigen::VectorXd& e,
                      const Eigen::VectorXd& u) {
  if (u.size() != params.latent_dim()) {
    throw std::invalid_argument("steer: action dimension mismatch");
  }
  return decode(params, encode(params, e) + params.action_scale * u);
}

CodecParams fit_codec(const std::vector<Eigen::VectorXd>& captions, int d,
                      double action_scale) {
  if (captions.empty()) {
    throw std::invalid_argument("fit_codec: empty caption set");
  }
  const int n_e = static_cast<int>(captions.front().size());
  if (d < 1 || d > n_e) {
    throw std::invalid_argument("fit_codec: latent dimension out of range");
  }
  if (static_cast<int>(captions.size()) < d) {
    throw std::invalid_argument("fit_codec: need at least d captions");
  }
  Eigen::MatrixXd data(static_cast<int>(captions.size()), n_e);
  for (std::size_t i = 0; i < captions.size(); ++i) {
    if (captions[i].size() != n_e) {
      throw std::invalid_argument("fit_codec: inconsistent caption lengths");
    }
    data.row(static_cast<int>(i)) = captions[i].transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(d - 1) / sv(0) < 1e-10) {
    std::ostringstream msg;
    msg << "fit_codec: caption set is rank deficient for d=" << d
        << " (singular value ratio " << (sv(0) > 0.0 ? sv(d - 1) / sv(0) : 0.0)
        << ")";
    throw std::invalid_argument(msg.str());
  }
  CodecParams params;
  params.dec = svd.matrixV().leftCols(d);  // orthonormal basis
  params.enc = params.dec.transpose();
  params.action_scale = action_scale;
  return params;
}

double reconstruction_cosine(const CodecParams& params,
                             const std::vector<Eigen::VectorXd>& captions) {
  double worst = 1.0;
  for (const auto& e : captions) {
    const Eigen::VectorXd r = decode(params, encode(params, e));
    const double denom = e.norm() * r.norm();
    const double c = denom > 0.0 ? e.dot(r) / denom : 0.0;
    worst = std::min(worst, c);
  }
  return worst;
}

}  // namespace rads::codec
