#pragma once

#include <Eigen/Dense>

namespace lrgp {

// A pair of Gaussians on the same space; empty means are treated as zero.
struct GaussianPair {
  Eigen::VectorXd mu1;
  Eigen::VectorXd mu2;
  Eigen::MatrixXd s1;
  Eigen::MatrixXd s2;
};

// KL(N(0, s1) || N(0, s2)) = (Tr(s2^-1 s1) - N + ln|s2|/|s1|) / 2, computed
// through Cholesky factors of both covariances. Throws NumericalError when a
// factorization fails.
double kl_zero_mean(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2);

// Adds the mean term (mu2-mu1)' s2^-1 (mu2-mu1) / 2.
double kl_full(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
               const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2);

struct PsdCheck {
  bool dominates = false;
  double min_eig = 0.0;
};

// Reports whether a - b has smallest eigenvalue >= -tol.
PsdCheck check_psd_domination(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              double tol);

// Trace bound on KL(N(0,s1) || N(0,s2)) valid when (1+gamma) s1 - s2 is PSD
// (checked): Tr(s2^{-1/2} (s1 - (1-gamma) s2) s2^{-1/2}) / 2.
double kl_bound_trace(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                      double gamma);

// gamma * N; valid when additionally s2 >= (1+gamma)^-1 s1 (caller-verified,
// see check_psd_domination).
double kl_bound_gamma_n(double gamma, int n);

// Noise-split variant for s_i = sigma2 I + k_i with k_i PSD (precondition
// checked): Tr(k1 - (1-gamma) k2 + gamma sigma2 I) / (2 sigma2).
double kl_bound_noise_trace(const Eigen::MatrixXd& k1, const Eigen::MatrixXd& k2,
                            double gamma, double sigma_sq);

// Roots of x - 1 - ln(x) = 2 gamma bracketing the spectrum of
// s2^{-1/2} s1 s2^{-1/2} whenever KL <= gamma, plus the sqrt(2 gamma)
// Mahalanobis bound on the mean difference.
struct ParamSandwich {
  double gamma = 0.0;
  double b_root = 1.0;             // smallest root, in (0, 1]
  double t_root = 1.0;             // largest root, in [1, inf)
  double mahalanobis_bound = 0.0;  // sqrt(2 gamma)
};

ParamSandwich kl_to_param_bounds(double gamma);

// Chain-rule split of the KL between two joint Gaussians partitioned into a
// leading train block and a trailing test block:
//   KL(joint) = KL(train marginals) + E_{train ~ P}[KL(conditionals)].
// Both terms are computed directly from Gaussian conditioning closed forms.
struct KlDecomposition {
  double marginal_kl = 0.0;
  double expected_conditional_kl = 0.0;
};

KlDecomposition predictive_kl_decomposition(const GaussianPair& joint,
                                            int train_size);

}  // namespace lrgp
