#include "lrgp/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lrgp {

namespace {

void check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                const KernelSpec& spec) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("kernel_eval: point dimensions differ (" +
                                std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  }
  if (spec.family == KernelFamily::GaussianArd &&
      x.size() != spec.lengthscale_inverse_sq.size()) {
    throw std::invalid_argument(
        "kernel_eval: point dimension does not match lengthscale vector");
  }
}

// Half-integer Matern closed forms in u = d / alpha.
double matern_of_scaled_dist(double u, double nu) {
  if (nu == 0.5) return std::exp(-u);
  if (nu == 1.5) return (1.0 + u) * std::exp(-u);
  // nu == 2.5
  return (1.0 + u + u * u / 3.0) * std::exp(-u);
}

}  // namespace

KernelSpec KernelSpec::gaussian_ard(double signal_variance, Eigen::VectorXd eps2) {
  KernelSpec spec;
  spec.family = KernelFamily::GaussianArd;
  spec.signal_variance = signal_variance;
  spec.lengthscale_inverse_sq = std::move(eps2);
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::gaussian_iso(double signal_variance, double eps2, int dim) {
  return gaussian_ard(signal_variance, Eigen::VectorXd::Constant(dim, eps2));
}

KernelSpec KernelSpec::matern(double nu, double alpha) {
  KernelSpec spec;
  spec.family = KernelFamily::Matern;
  spec.nu = nu;
  spec.alpha = alpha;
  spec.validate();
  return spec;
}

void KernelSpec::validate() const {
  if (family == KernelFamily::GaussianArd) {
    if (signal_variance <= 0.0) {
      throw std::invalid_argument("KernelSpec: signal_variance must be > 0");
    }
    if (lengthscale_inverse_sq.size() == 0 ||
        (lengthscale_inverse_sq.array() <= 0.0).any()) {
      throw std::invalid_argument(
          "KernelSpec: all lengthscale_inverse_sq entries must be > 0");
    }
  } else {
    if (alpha <= 0.0) throw std::invalid_argument("KernelSpec: alpha must be > 0");
    if (nu != 0.5 && nu != 1.5 && nu != 2.5) {
      throw std::invalid_argument(
          "KernelSpec: Matern nu must be one of 1/2, 3/2, 5/2");
    }
  }
}

double gaussian_kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const KernelSpec& spec) {
  if (spec.family != KernelFamily::GaussianArd) {
    throw std::invalid_argument("gaussian_kernel_eval: spec is not Gaussian-ARD");
  }
  check_dims(x, y, spec);
  const Eigen::ArrayXd diff = (x - y).array();
  const double quad = (spec.lengthscale_inverse_sq.array() * diff.square()).sum();
  return spec.signal_variance * std::exp(-quad);
}

double matern_kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const KernelSpec& spec) {
  if (spec.family != KernelFamily::Matern) {
    throw std::invalid_argument("matern_kernel_eval: spec is not Matern");
  }
  check_dims(x, y, spec);
  spec.validate();
  return matern_of_scaled_dist((x - y).norm() / spec.alpha, spec.nu);
}

double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                   const KernelSpec& spec) {
  return spec.family == KernelFamily::GaussianArd
             ? gaussian_kernel_eval(x, y, spec)
             : matern_kernel_eval(x, y, spec);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  spec.validate();
  const int n = static_cast<int>(X.rows());
  if (spec.family == KernelFamily::GaussianArd &&
      X.cols() != spec.lengthscale_inverse_sq.size()) {
    throw std::invalid_argument("kernel_matrix: X columns do not match kernel dim");
  }
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = spec.family == KernelFamily::GaussianArd ? spec.signal_variance : 1.0;
    for (int j = 0; j < i; ++j) {
      const double v = kernel_eval(X.row(i), X.row(j), spec);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y) {
  spec.validate();
  if (X.cols() != Y.cols()) {
    throw std::invalid_argument("kernel_matrix: X and Y dimensions differ");
  }
  Eigen::MatrixXd K(X.rows(), Y.rows());
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < Y.rows(); ++j) {
      K(i, j) = kernel_eval(X.row(i), Y.row(j), spec);
    }
  }
  return K;
}

}  // namespace lrgp
