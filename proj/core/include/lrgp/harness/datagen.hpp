#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "lrgp/harness/csv.hpp"
#include "lrgp/kernels.hpp"

namespace lrgp::harness {

// Inputs for the simulated min-rank / KL-curve studies. Gaussian-kernel runs
// draw i.i.d. N(0, (1/16)^2) coordinates; Matern runs draw i.i.d.
// U(-sqrt(3)/16, sqrt(3)/16), matching variances by construction.
Eigen::MatrixXd generate_study_inputs(int dim, int n, KernelFamily family,
                                   std::uint64_t seed);

inline constexpr double kStudyInputStd = 1.0 / 16.0;

// Seeded synthetic regression sets for the benchmark harness:
//   "linear"   y = w'x + eps,             eps ~ N(0, 0.1^2)
//   "smooth"   sum of a few ridge waves + eps, eps ~ N(0, 0.1^2)
//   "constant" y = 1
Dataset synthetic_dataset(const std::string& name, int n, int dim,
                          std::uint64_t seed);

inline constexpr double kSyntheticNoiseStd = 0.1;

}  // namespace lrgp::harness
