#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "lrgp/kernels.hpp"

namespace lrgp {

// Frozen spectral draw for random Fourier features of the Gaussian-ARD
// kernel. `standardized` holds raw N(0,1) draws; the effective frequency
// matrix is eta(i,j) = sqrt(2) * eps_j * standardized(i,j), i.e.
// eta ~ N(0, 2 Delta), chosen so that E[cos(eta'(x - x'))] equals
// exp(-(x-x')' Delta (x-x')) exactly. Frequencies are sampled once and stay
// fixed; rescaling the lengthscales rescales them deterministically.
struct SpectralSample {
  Eigen::MatrixXd standardized;  // (r/2) x d
  std::uint64_t seed = 0;
  KernelSpec kernel_params;

  int num_frequencies() const { return static_cast<int>(standardized.rows()); }
  int feature_dim() const { return 2 * num_frequencies(); }

  Eigen::MatrixXd frequencies() const;
  Eigen::MatrixXd frequencies(const Eigen::VectorXd& eps2) const;
};

SpectralSample sample_spectral_frequencies(const KernelSpec& spec,
                                           int num_frequencies,
                                           std::uint64_t seed);

// phi(x) = sf * sqrt(2/r) [cos(eta_1'x), ..., cos(eta_{r/2}'x),
//                          sin(eta_1'x), ..., sin(eta_{r/2}'x)],
// so that phi(x)'phi(x) = sf2 exactly and E[phi(x)'phi(x')] = k(x, x').
Eigen::VectorXd rff_feature_map(const Eigen::VectorXd& x, const SpectralSample& s);

Eigen::MatrixXd rff_feature_matrix(const Eigen::MatrixXd& X, const SpectralSample& s);
// Variant with overriding hyperparameters (used while fitting).
Eigen::MatrixXd rff_feature_matrix(const Eigen::MatrixXd& X, const SpectralSample& s,
                                   const Eigen::VectorXd& eps2, double sf2);

}  // namespace lrgp
