#pragma once

#include <Eigen/Dense>

namespace lrgp {

// Inputs for the theoretical rank and KL bound formulas. The asymptotic
// statements hide multiplicative constants; every one of them is a named,
// caller-supplied field defaulting to 1 rather than a fabricated sharp value.
struct BoundParams {
  long long n = 0;          // number of training points N
  double sigma_sq = 1.0;    // noise variance
  double eps = 0.1;         // target accuracy, in (0, 0.5)
  double delta = 0.1;       // failure probability, in (0, 1)
  double radius = 1.0;      // data diameter / measure scale R
  int dim = 1;              // input dimension D
  double diag_bound = 1.0;  // kernel diagonal bound B
  double nu = 0.5;          // Matern smoothness
  double alpha = 1.0;       // Matern scale
  double c0 = 1.0;          // Fourier rank constant
  double c1 = 1.0;          // Mercer-Gaussian constant, large-R regime
  double c2 = 1.0;          // Mercer-Gaussian constant, small-R regime
  double matern_const_a = 1.0;     // Matern rank constant A
  double matern_exponent_c = 1.0;  // exponent constant c in (1/(eps sigma delta))^{cD/nu}
  double s0 = 1.0;                 // index past which the spectral decay law holds
};

// ceil(c0 * (R^D / eps^2) * log(N/sigma2)^{2D} * log(N/delta)); requires
// D <= 5 log(N/sigma2) + 1 and both log arguments > 1.
long long rank_bound_fourier(const BoundParams& p);

// (N / 2 sigma2) * (tail + sqrt(B * tail / (N delta)))
double kl_bound_mercer(long long n, double sigma_sq, double diag_bound,
                       double delta, double tail);

// N * (tail + sqrt(B * tail / (N delta))) == 2 sigma2 * kl_bound_mercer.
double braun_trace_bound(long long n, double diag_bound, double delta, double tail);

// Gaussian-kernel Mercer rank: r = ceil(m^D) with m from the regime selected
// by comparing R against c_threshold.
long long rank_bound_mercer_gaussian(const BoundParams& p, double c_threshold);

// Matern Mercer rank: ceil(max(s0, A * (1/(eps sigma delta))^{c D / nu})).
long long rank_bound_mercer_matern(const BoundParams& p);

// Tail of the polynomial spectral decay law: C * (D / 2 nu) * r^{-2 nu / D},
// valid for r >= s0.
double matern_tail_bound(double rank, double c, double nu, int dim, double s0);

// Effective dimension s_{sigma2}(K) = Tr((sigma2 I + K)^-1 K) <= N.
double effective_dimension(const Eigen::MatrixXd& k, double sigma_sq);

}  // namespace lrgp
