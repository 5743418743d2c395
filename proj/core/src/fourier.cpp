#include "lrgp/fourier.hpp"

#include <cmath>
#include <stdexcept>

#include "lrgp/rng.hpp"

namespace lrgp {

Eigen::MatrixXd SpectralSample::frequencies() const {
  return frequencies(kernel_params.lengthscale_inverse_sq);
}

Eigen::MatrixXd SpectralSample::frequencies(const Eigen::VectorXd& eps2) const {
  if (eps2.size() != standardized.cols()) {
    throw std::invalid_argument("SpectralSample: eps2 dimension mismatch");
  }
  const Eigen::RowVectorXd scale =
      (2.0 * eps2.array()).sqrt().matrix().transpose();
  return standardized.array().rowwise() * scale.array();
}

SpectralSample sample_spectral_frequencies(const KernelSpec& spec,
                                           int num_frequencies,
                                           std::uint64_t seed) {
  if (spec.family != KernelFamily::GaussianArd) {
    throw std::invalid_argument(
        "sample_spectral_frequencies: only the Gaussian-ARD kernel has an "
        "implemented spectral density");
  }
  spec.validate();
  if (num_frequencies < 1) {
    throw std::invalid_argument("sample_spectral_frequencies: need >= 1 frequency");
  }
  const int d = spec.input_dim();
  SpectralSample s;
  s.seed = seed;
  s.kernel_params = spec;
  s.standardized.resize(num_frequencies, d);
  Rng rng = Rng(seed).stream("spectral-frequencies");
  for (int i = 0; i < num_frequencies; ++i) {
    for (int j = 0; j < d; ++j) s.standardized(i, j) = rng.gaussian();
  }
  return s;
}

Eigen::VectorXd rff_feature_map(const Eigen::VectorXd& x, const SpectralSample& s) {
  if (x.size() != s.standardized.cols()) {
    throw std::invalid_argument("rff_feature_map: dimension mismatch");
  }
  const Eigen::MatrixXd one_row = x.transpose();
  return rff_feature_matrix(one_row, s).row(0);
}

Eigen::MatrixXd rff_feature_matrix(const Eigen::MatrixXd& X, const SpectralSample& s) {
  return rff_feature_matrix(X, s, s.kernel_params.lengthscale_inverse_sq,
                            s.kernel_params.signal_variance);
}

Eigen::MatrixXd rff_feature_matrix(const Eigen::MatrixXd& X, const SpectralSample& s,
                                   const Eigen::VectorXd& eps2, double sf2) {
  if (X.cols() != s.standardized.cols()) {
    throw std::invalid_argument("rff_feature_matrix: dimension mismatch");
  }
  const int m = s.num_frequencies();
  const int r = 2 * m;
  const Eigen::MatrixXd angles = X * s.frequencies(eps2).transpose();  // N x m
  const double scale = std::sqrt(sf2) * std::sqrt(2.0 / r);
  Eigen::MatrixXd xi(X.rows(), r);
  xi.leftCols(m) = scale * angles.array().cos().matrix();
  xi.rightCols(m) = scale * angles.array().sin().matrix();
  return xi;
}

}  // namespace lrgp
