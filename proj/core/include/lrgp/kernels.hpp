#pragma once

#include <Eigen/Dense>

namespace lrgp {

enum class KernelFamily { GaussianArd, Matern };

// Parametric kernel. Gaussian-ARD:
//   k(x, x') = sf2 * exp(-sum_j eps2_j (x_j - x'_j)^2)
// Matern with half-integer smoothness nu in {1/2, 3/2, 5/2} and scale
// alpha = ell / sqrt(2 nu), normalized so that k(x, x) = 1.
struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianArd;
  double signal_variance = 1.0;            // sf2, Gaussian only
  Eigen::VectorXd lengthscale_inverse_sq;  // eps2_j per dimension, Gaussian only
  double nu = 0.5;                         // Matern smoothness
  double alpha = 1.0;                      // Matern scale

  static KernelSpec gaussian_ard(double signal_variance, Eigen::VectorXd eps2);
  static KernelSpec gaussian_iso(double signal_variance, double eps2, int dim);
  static KernelSpec matern(double nu, double alpha);

  int input_dim() const {
    return family == KernelFamily::GaussianArd
               ? static_cast<int>(lengthscale_inverse_sq.size())
               : -1;  // Matern is isotropic in any dimension
  }
  // Throws std::invalid_argument on non-positive hyperparameters or
  // unsupported Matern nu.
  void validate() const;
};

double gaussian_kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const KernelSpec& spec);
double matern_kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const KernelSpec& spec);
double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                   const KernelSpec& spec);

// Dense kernel matrix; rows of X (and Y) are points. The one-argument form
// returns the symmetric N x N matrix.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y);

}  // namespace lrgp
