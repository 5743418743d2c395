#include "lrgp/bounds.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lrgp/errors.hpp"

namespace lrgp {

namespace {

void check_common(const BoundParams& p) {
  if (p.n < 1) throw std::invalid_argument("BoundParams: n must be >= 1");
  if (p.sigma_sq <= 0.0) throw std::invalid_argument("BoundParams: sigma_sq must be > 0");
  if (p.eps <= 0.0 || p.eps >= 0.5) {
    throw std::invalid_argument("BoundParams: eps must lie in (0, 0.5)");
  }
  if (p.delta <= 0.0 || p.delta >= 1.0) {
    throw std::invalid_argument("BoundParams: delta must lie in (0, 1)");
  }
  if (p.radius <= 0.0) throw std::invalid_argument("BoundParams: radius must be > 0");
  if (p.dim < 1) throw std::invalid_argument("BoundParams: dim must be >= 1");
}

long long ceil_to_rank(double value) {
  const double c = std::ceil(value);
  if (!std::isfinite(c)) throw NumericalError("rank bound overflowed");
  return c < 1.0 ? 1LL : static_cast<long long>(c);
}

double log_inv_esd(const BoundParams& p) {
  return std::log(1.0 / (p.eps * std::sqrt(p.sigma_sq) * p.delta));
}

}  // namespace

long long rank_bound_fourier(const BoundParams& p) {
  check_common(p);
  const double log_nsig = std::log(static_cast<double>(p.n) / p.sigma_sq);
  if (p.dim > 5.0 * log_nsig + 1.0) {
    throw std::invalid_argument(
        "rank_bound_fourier: requires D <= 5 log(N/sigma^2) + 1");
  }
  if (log_nsig <= 0.0) {
    throw std::invalid_argument("rank_bound_fourier: N/sigma^2 must exceed 1");
  }
  const double log_ndelta = std::log(static_cast<double>(p.n) / p.delta);
  if (log_ndelta <= 0.0) {
    throw std::invalid_argument("rank_bound_fourier: N/delta must exceed 1");
  }
  const double value = p.c0 * std::pow(p.radius, p.dim) / (p.eps * p.eps) *
                       std::pow(log_nsig, 2.0 * p.dim) * log_ndelta;
  return ceil_to_rank(value);
}

double kl_bound_mercer(long long n, double sigma_sq, double diag_bound,
                       double delta, double tail) {
  if (tail < 0.0) throw std::invalid_argument("kl_bound_mercer: tail must be >= 0");
  return braun_trace_bound(n, diag_bound, delta, tail) / (2.0 * sigma_sq);
}

double braun_trace_bound(long long n, double diag_bound, double delta, double tail) {
  if (n < 1) throw std::invalid_argument("braun_trace_bound: n must be >= 1");
  if (diag_bound <= 0.0) throw std::invalid_argument("braun_trace_bound: B must be > 0");
  if (delta <= 0.0 || delta >= 1.0) {
    throw std::invalid_argument("braun_trace_bound: delta must lie in (0, 1)");
  }
  if (tail < 0.0) throw std::invalid_argument("braun_trace_bound: tail must be >= 0");
  const double nn = static_cast<double>(n);
  return nn * (tail + std::sqrt(diag_bound * tail / (nn * delta)));
}

long long rank_bound_mercer_gaussian(const BoundParams& p, double c_threshold) {
  check_common(p);
  if (c_threshold <= 0.0 || c_threshold >= 1.0) {
    throw std::invalid_argument(
        "rank_bound_mercer_gaussian: c_threshold must lie in (0, 1)");
  }
  const double r = p.radius;
  const double d = static_cast<double>(p.dim);
  double m;
  if (r >= c_threshold) {
    m = p.c1 * (r * d * std::log(std::max(r * d, std::exp(1.0))) +
                r * log_inv_esd(p));
  } else {
    const double log_inv_r = std::log(1.0 / r);  // positive since r < c < 1
    m = p.c2 * (d / log_inv_r *
                    std::max(std::log(d / log_inv_r), std::log(2.0 / (r * r))) +
                log_inv_esd(p) / log_inv_r);
  }
  return ceil_to_rank(std::pow(std::max(m, 1.0), d));
}

long long rank_bound_mercer_matern(const BoundParams& p) {
  check_common(p);
  if (p.nu <= 0.0) throw std::invalid_argument("rank_bound_mercer_matern: nu > 0");
  if (p.matern_const_a <= 0.0 || p.matern_exponent_c <= 0.0 || p.s0 < 0.0) {
    throw std::invalid_argument("rank_bound_mercer_matern: constants out of range");
  }
  const double exponent = p.matern_exponent_c * p.dim / p.nu;
  const double value = p.matern_const_a *
                       std::pow(1.0 / (p.eps * std::sqrt(p.sigma_sq) * p.delta),
                                exponent);
  return ceil_to_rank(std::max(p.s0, value));
}

double matern_tail_bound(double rank, double c, double nu, int dim, double s0) {
  if (rank < s0) {
    throw std::invalid_argument("matern_tail_bound: requires rank >= s0");
  }
  if (c <= 0.0 || nu <= 0.0 || dim < 1) {
    throw std::invalid_argument("matern_tail_bound: parameters out of range");
  }
  return c * (dim / (2.0 * nu)) * std::pow(rank, -2.0 * nu / dim);
}

double effective_dimension(const Eigen::MatrixXd& k, double sigma_sq) {
  if (sigma_sq <= 0.0) {
    throw std::invalid_argument("effective_dimension: sigma_sq must be > 0");
  }
  const int n = static_cast<int>(k.rows());
  if (k.cols() != n) throw std::invalid_argument("effective_dimension: K not square");
  Eigen::MatrixXd a = k;
  a.diagonal().array() += sigma_sq;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("effective_dimension: sigma2 I + K is not PD");
  }
  // Tr((sigma2 I + K)^-1 K) = N - sigma2 Tr((sigma2 I + K)^-1)
  const double inv_trace = llt.solve(Eigen::MatrixXd::Identity(n, n)).trace();
  return n - sigma_sq * inv_trace;
}

}  // namespace lrgp
