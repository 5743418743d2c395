#include "lrgp/divergence.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lrgp/errors.hpp"

namespace lrgp {

namespace {

Eigen::LLT<Eigen::MatrixXd> cholesky_or_throw(const Eigen::MatrixXd& s,
                                              const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": covariance is not positive definite");
  }
  return llt;
}

double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void require_square_match(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          const char* what) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw std::invalid_argument(std::string(what) + ": matrices must be square and equal-sized");
  }
}

void require_symmetric(const Eigen::MatrixXd& a, const char* what) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
  }
}

// f(u) = e^u - u - 1 - 2 gamma, the Prop-4 root equation in u = ln x. f is
// monotone on each side of u = 0 and |f'| <= 1 for u <= 0, so bisection in
// u-space meets the 1e-10 residual requirement on both branches.
double bisect_root_log_space(double lo, double hi, double two_gamma) {
  const auto f = [two_gamma](double u) { return std::expm1(u) - u - two_gamma; };
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm >= 0.0) == (flo >= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double kl_zero_mean(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2) {
  require_square_match(s1, s2, "kl_zero_mean");
  const auto llt1 = cholesky_or_throw(s1, "kl_zero_mean (S1)");
  const auto llt2 = cholesky_or_throw(s2, "kl_zero_mean (S2)");
  const int n = static_cast<int>(s1.rows());
  // Tr(S2^-1 S1) = ||L2^-1 L1||_F^2
  const Eigen::MatrixXd l1 = llt1.matrixL();
  const Eigen::MatrixXd w = llt2.matrixL().solve(l1);
  const double trace_term = w.squaredNorm();
  return 0.5 * (trace_term - n + logdet_from_llt(llt2) - logdet_from_llt(llt1));
}

double kl_full(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
               const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2) {
  const double base = kl_zero_mean(s1, s2);
  Eigen::VectorXd diff;
  if (mu1.size() == 0 && mu2.size() == 0) return base;
  if (mu1.size() == 0) {
    diff = mu2;
  } else if (mu2.size() == 0) {
    diff = -mu1;
  } else {
    diff = mu2 - mu1;
  }
  if (diff.size() != s2.rows()) {
    throw std::invalid_argument("kl_full: mean dimension mismatch");
  }
  const auto llt2 = cholesky_or_throw(s2, "kl_full (S2)");
  return base + 0.5 * diff.dot(llt2.solve(diff));
}

PsdCheck check_psd_domination(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              double tol) {
  require_square_match(a, b, "check_psd_domination");
  require_symmetric(a, "check_psd_domination (A)");
  require_symmetric(b, "check_psd_domination (B)");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a - b, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  return PsdCheck{min_eig >= -tol, min_eig};
}

namespace {

// Shared precondition check for the Prop-1 bounds: M must be PSD within
// -1e-8 * spectral norm.
void require_psd_precondition(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  const double spectral_norm = es.eigenvalues().cwiseAbs().maxCoeff();
  if (min_eig < -1e-8 * std::max(1.0, spectral_norm)) {
    throw NumericalError(std::string(what) +
                         ": PSD precondition violated, min eigenvalue = " +
                         std::to_string(min_eig));
  }
}

}  // namespace

double kl_bound_trace(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                      double gamma) {
  require_square_match(s1, s2, "kl_bound_trace");
  if (gamma < 0.0) throw std::invalid_argument("kl_bound_trace: gamma must be >= 0");
  require_psd_precondition((1.0 + gamma) * s1 - s2, "kl_bound_trace");
  const auto llt2 = cholesky_or_throw(s2, "kl_bound_trace (S2)");
  const int n = static_cast<int>(s1.rows());
  // Tr(S2^{-1/2}(S1 - (1-gamma) S2) S2^{-1/2}) = Tr(S2^-1 S1) - (1-gamma) N
  const double trace_term = llt2.solve(s1).trace();
  return 0.5 * (trace_term - (1.0 - gamma) * n);
}

double kl_bound_gamma_n(double gamma, int n) {
  if (gamma < 0.0 || n < 0) {
    throw std::invalid_argument("kl_bound_gamma_n: gamma and n must be nonnegative");
  }
  return gamma * n;
}

double kl_bound_noise_trace(const Eigen::MatrixXd& k1, const Eigen::MatrixXd& k2,
                            double gamma, double sigma_sq) {
  require_square_match(k1, k2, "kl_bound_noise_trace");
  if (gamma < 0.0) throw std::invalid_argument("kl_bound_noise_trace: gamma >= 0");
  if (sigma_sq <= 0.0) throw std::invalid_argument("kl_bound_noise_trace: sigma_sq > 0");
  const int n = static_cast<int>(k1.rows());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  require_psd_precondition((1.0 + gamma) * (sigma_sq * eye + k1) - (sigma_sq * eye + k2),
                           "kl_bound_noise_trace");
  const double trace = k1.trace() - (1.0 - gamma) * k2.trace() + gamma * sigma_sq * n;
  return trace / (2.0 * sigma_sq);
}

ParamSandwich kl_to_param_bounds(double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("kl_to_param_bounds: gamma must be >= 0");
  ParamSandwich out;
  out.gamma = gamma;
  out.mahalanobis_bound = std::sqrt(2.0 * gamma);
  if (gamma == 0.0) return out;  // unique root at x = 1
  const double two_gamma = 2.0 * gamma;
  // Left branch: u in [-(2 + 2 gamma), 0] brackets ln b since
  // b >= exp(-1 - 2 gamma). Right branch: the footnote bound
  // t <= 1 + max(sqrt(8 gamma), 8 gamma) keeps ln t below the upper end.
  out.b_root = std::exp(bisect_root_log_space(-(2.0 + two_gamma), 0.0, two_gamma));
  const double hi = std::log(2.0 + 8.0 * gamma + std::sqrt(8.0 * gamma));
  out.t_root = std::exp(bisect_root_log_space(0.0, hi, two_gamma));
  return out;
}

KlDecomposition predictive_kl_decomposition(const GaussianPair& joint,
                                            int train_size) {
  const int n_total = static_cast<int>(joint.s1.rows());
  require_square_match(joint.s1, joint.s2, "predictive_kl_decomposition");
  if (train_size <= 0 || train_size >= n_total) {
    throw std::invalid_argument(
        "predictive_kl_decomposition: train block must be a strict nonempty prefix");
  }
  const int n = train_size;
  const int m = n_total - n;

  const auto mean_of = [&](const Eigen::VectorXd& mu) {
    return mu.size() == 0 ? Eigen::VectorXd::Zero(n_total).eval() : mu;
  };
  const Eigen::VectorXd mu1 = mean_of(joint.mu1);
  const Eigen::VectorXd mu2 = mean_of(joint.mu2);

  const Eigen::MatrixXd s_aa = joint.s1.topLeftCorner(n, n);
  const Eigen::MatrixXd s_ab = joint.s1.topRightCorner(n, m);
  const Eigen::MatrixXd s_bb = joint.s1.bottomRightCorner(m, m);
  const Eigen::MatrixXd t_aa = joint.s2.topLeftCorner(n, n);
  const Eigen::MatrixXd t_ab = joint.s2.topRightCorner(n, m);
  const Eigen::MatrixXd t_bb = joint.s2.bottomRightCorner(m, m);

  KlDecomposition out;
  out.marginal_kl = kl_full(mu1.head(n), s_aa, mu2.head(n), t_aa);

  const auto llt_s = cholesky_or_throw(s_aa, "predictive_kl_decomposition (train S1)");
  const auto llt_t = cholesky_or_throw(t_aa, "predictive_kl_decomposition (train S2)");

  // Gaussian conditioning: P(test | train) has covariance c_p and mean
  // mu1_b + s_ba s_aa^-1 (y - mu1_a); likewise for Q. The expected KL over
  // train draws from P has the closed form assembled below.
  const Eigen::MatrixXd gain_p = llt_s.solve(s_ab).transpose();  // m x n
  const Eigen::MatrixXd gain_q = llt_t.solve(t_ab).transpose();
  const Eigen::MatrixXd c_p = s_bb - gain_p * s_ab;
  const Eigen::MatrixXd c_q = t_bb - gain_q * t_ab;

  const auto llt_cp = cholesky_or_throw(c_p, "predictive_kl_decomposition (cond S1)");
  const auto llt_cq = cholesky_or_throw(c_q, "predictive_kl_decomposition (cond S2)");

  const Eigen::MatrixXd gain_diff = gain_q - gain_p;  // m x n
  const Eigen::VectorXd mean_shift = (mu2.tail(m) - gain_q * mu2.head(n)) -
                                     (mu1.tail(m) - gain_p * mu1.head(n)) +
                                     gain_diff * mu1.head(n);

  const double trace_term = llt_cq.solve(c_p).trace();
  const double logdet_term = logdet_from_llt(llt_cq) - logdet_from_llt(llt_cp);
  const double mean_term = mean_shift.dot(llt_cq.solve(mean_shift));
  const double gain_term = (llt_cq.solve(gain_diff) * s_aa)
                               .cwiseProduct(gain_diff)
                               .sum();  // Tr(B' Cq^-1 B S_aa)
  out.expected_conditional_kl =
      0.5 * (trace_term - m + logdet_term + mean_term + gain_term);
  return out;
}

}  // namespace lrgp
