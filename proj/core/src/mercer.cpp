#include "lrgp/mercer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lrgp/errors.hpp"

namespace lrgp {

namespace {

// Normalized Hermite carrier psi_n(y) = gamma_n H_{n-1}(y). Directly from the
// Hermite recurrence:
//   psi_1 = sqrt(beta)
//   psi_{n+1} = y sqrt(2/n) psi_n - sqrt((n-1)/n) psi_{n-1}
// and d/dy psi_n = sqrt(2(n-1)) psi_{n-1}. Carrying gamma_n inside the
// recurrence keeps the iterates O(1) where H_n and gamma_n alone overflow and
// underflow factorially.
void psi_column(double beta, double y, int max_order, double* out) {
  out[0] = std::sqrt(beta);
  if (max_order == 1) return;
  out[1] = y * std::sqrt(2.0) * out[0];
  for (int n = 2; n < max_order; ++n) {
    out[n] = y * std::sqrt(2.0 / n) * out[n - 1] -
             std::sqrt((n - 1.0) / n) * out[n - 2];
  }
}

// Binomial coefficient as double, good enough for level-set bookkeeping.
double binom(long long n, long long k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (long long i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
  return r;
}

// Number of positive-integer d-tuples with total degree < m: C(m-1, d).
double count_below_level(int m, int d) { return binom(m - 1, d); }

void gen_compositions(int remaining, int dims_left, MultiIndex& prefix,
                      std::vector<MultiIndex>& out) {
  if (dims_left == 1) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int v = 1; v <= remaining - (dims_left - 1); ++v) {
    prefix.push_back(v);
    gen_compositions(remaining - v, dims_left - 1, prefix, out);
    prefix.pop_back();
  }
}

std::vector<MultiIndex> compositions_of_level(int level, int d) {
  std::vector<MultiIndex> out;
  MultiIndex prefix;
  prefix.reserve(d);
  gen_compositions(level, d, prefix, out);
  return out;
}

// Per-level sums of prod_j lambda1_j q_j^{n_j - 1} over all indices with
// total degree t, for t in [d, max_level], via convolution across dimensions.
std::vector<double> level_sums(const EigenSystem& sys, int max_level) {
  const int d = sys.dim();
  const int len = max_level + 1;
  std::vector<double> acc(len, 0.0), next(len, 0.0);
  {
    const auto& b = sys.bases[0];
    for (int n = 1; n <= max_level; ++n) {
      acc[n] = b.lambda1 * std::pow(b.ratio_q, n - 1);
    }
  }
  for (int j = 1; j < d; ++j) {
    std::fill(next.begin(), next.end(), 0.0);
    const auto& b = sys.bases[j];
    for (int t = j + 1; t <= max_level; ++t) {
      double s = 0.0;
      double w = b.lambda1;  // lambda1 * q^{n-1} for n = 1, 2, ...
      for (int n = 1; t - n >= j; ++n) {
        s += acc[t - n] * w;
        w *= b.ratio_q;
      }
      next[t] = s;
    }
    acc.swap(next);
  }
  for (auto& v : acc) v *= sys.signal_variance;
  return acc;
}

double max_ratio_q(const EigenSystem& sys) {
  double q = 0.0;
  for (const auto& b : sys.bases) q = std::max(q, b.ratio_q);
  return q;
}

double lambda1_product(const EigenSystem& sys) {
  double p = sys.signal_variance;
  for (const auto& b : sys.bases) p *= b.lambda1;
  return p;
}

}  // namespace

MercerBasis1D mercer_constants(double alpha, double epsilon_sq) {
  if (alpha <= 0.0 || epsilon_sq <= 0.0) {
    throw std::invalid_argument("mercer_constants: alpha and epsilon_sq must be > 0");
  }
  MercerBasis1D b;
  b.alpha = alpha;
  b.epsilon_sq = epsilon_sq;
  b.beta = std::pow(1.0 + 4.0 * epsilon_sq / (alpha * alpha), 0.25);
  b.delta_sq = alpha * alpha * (b.beta * b.beta - 1.0) / 2.0;
  const double denom = alpha * alpha + b.delta_sq + epsilon_sq;
  b.lambda1 = std::sqrt(alpha * alpha / denom);
  b.ratio_q = epsilon_sq / denom;
  return b;
}

MercerBasis1DDerivs mercer_constants_derivs(const MercerBasis1D& b) {
  MercerBasis1DDerivs d;
  const double a2 = b.alpha * b.alpha;
  d.d_beta = 1.0 / (a2 * b.beta * b.beta * b.beta);
  d.d_delta_sq = 1.0 / (b.beta * b.beta);
  const double T = a2 + b.delta_sq + b.epsilon_sq;
  const double dT = d.d_delta_sq + 1.0;
  d.d_lambda1 = -0.5 * b.lambda1 * dT / T;
  d.d_ratio_q = (T - b.epsilon_sq * dT) / (T * T);
  return d;
}

double hermite_eval(int n, double x) {
  if (n < 0) throw std::invalid_argument("hermite_eval: degree must be >= 0");
  double hm = 1.0;  // H_0
  if (n == 0) return hm;
  double h = 2.0 * x;  // H_1
  for (int k = 1; k < n; ++k) {
    const double hn = 2.0 * x * h - 2.0 * k * hm;
    hm = h;
    h = hn;
  }
  return h;
}

std::vector<MultiIndex> multi_index_sequence(int dim, int count) {
  if (dim < 1 || count < 1) {
    throw std::invalid_argument("multi_index_sequence: dim and count must be >= 1");
  }
  std::vector<MultiIndex> out;
  out.reserve(count);
  for (int level = dim; static_cast<int>(out.size()) < count; ++level) {
    for (auto& idx : compositions_of_level(level, dim)) {
      out.push_back(std::move(idx));
      if (static_cast<int>(out.size()) == count) break;
    }
  }
  return out;
}

EigenSystem make_eigen_system(std::vector<MercerBasis1D> bases,
                              double signal_variance, int rank,
                              IndexOrdering mode) {
  if (bases.empty()) throw std::invalid_argument("make_eigen_system: no bases");
  if (signal_variance <= 0.0) {
    throw std::invalid_argument("make_eigen_system: signal_variance must be > 0");
  }
  EigenSystem sys;
  sys.bases = std::move(bases);
  sys.signal_variance = signal_variance;
  const int d = sys.dim();
  const int want = std::max(rank, 1);
  sys.ordering = multi_index_sequence(d, want);
  if (mode == IndexOrdering::ByEigenvalue) {
    // Enumerate whole levels until no deeper level can still hold one of the
    // top-`rank` eigenvalues, then sort. The stable sort keeps total-degree
    // order among ties, so the result is deterministic.
    double head_scale = sys.signal_variance;
    double q_max = 0.0;
    for (const auto& b : sys.bases) {
      head_scale *= b.lambda1;
      q_max = std::max(q_max, b.ratio_q);
    }
    std::vector<MultiIndex> pool;
    for (int level = d;; ++level) {
      for (auto& idx : compositions_of_level(level, d)) {
        pool.push_back(std::move(idx));
      }
      if (static_cast<int>(pool.size()) < want) continue;
      std::vector<double> values(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) {
        values[i] = eigenvalue(pool[i], sys);
      }
      std::vector<double> top = values;
      std::nth_element(top.begin(), top.begin() + (want - 1), top.end(),
                       std::greater<double>());
      const double kth = top[want - 1];
      const double next_level_max =
          head_scale * std::pow(q_max, static_cast<double>(level + 1 - d));
      if (next_level_max <= kth) break;
    }
    std::stable_sort(pool.begin(), pool.end(),
                     [&](const MultiIndex& a, const MultiIndex& b) {
                       return eigenvalue(a, sys) > eigenvalue(b, sys);
                     });
    pool.resize(want);
    sys.ordering = std::move(pool);
  }
  return sys;
}

EigenSystem make_isotropic_eigen_system(int dim, double alpha, double epsilon_sq,
                                        double signal_variance, int rank) {
  std::vector<MercerBasis1D> bases(dim, mercer_constants(alpha, epsilon_sq));
  return make_eigen_system(std::move(bases), signal_variance, rank);
}

double eigenvalue(const MultiIndex& n, const EigenSystem& sys) {
  if (static_cast<int>(n.size()) != sys.dim()) {
    throw std::invalid_argument("eigenvalue: index dimension mismatch");
  }
  double v = sys.signal_variance;
  for (int j = 0; j < sys.dim(); ++j) {
    const auto& b = sys.bases[j];
    v *= b.lambda1 * std::pow(b.ratio_q, n[j] - 1);
  }
  return v;
}

double eigenfunction_eval(const MultiIndex& n, const Eigen::VectorXd& x,
                          const EigenSystem& sys) {
  if (static_cast<int>(n.size()) != sys.dim() || x.size() != sys.dim()) {
    throw std::invalid_argument("eigenfunction_eval: dimension mismatch");
  }
  double v = 1.0;
  std::vector<double> psi;
  for (int j = 0; j < sys.dim(); ++j) {
    if (n[j] < 1) {
      throw std::invalid_argument("eigenfunction_eval: index entries must be >= 1");
    }
    const auto& b = sys.bases[j];
    psi.resize(n[j]);
    psi_column(b.beta, b.alpha * b.beta * x[j], n[j], psi.data());
    v *= std::exp(-b.delta_sq * x[j] * x[j]) * psi[n[j] - 1];
  }
  return v;
}

MercerTables mercer_tables(const Eigen::MatrixXd& Z, const EigenSystem& sys,
                           int rank, bool with_derivatives) {
  const int d = sys.dim();
  if (Z.cols() != d) {
    throw std::invalid_argument("mercer_tables: Z columns do not match system dim");
  }
  if (rank < 1) throw std::invalid_argument("mercer_tables: rank must be >= 1");
  const auto ordering = static_cast<int>(sys.ordering.size()) >= rank
                            ? sys.ordering
                            : multi_index_sequence(d, rank);

  MercerTables tab;
  tab.max_order.assign(d, 1);
  for (int t = 0; t < rank; ++t) {
    for (int j = 0; j < d; ++j) {
      tab.max_order[j] = std::max(tab.max_order[j], ordering[t][j]);
    }
  }

  const int n_rows = static_cast<int>(Z.rows());
  tab.values.resize(d);
  if (with_derivatives) {
    tab.d_eps2.resize(d);
    tab.d_z.resize(d);
  }
  std::vector<double> psi;
  for (int j = 0; j < d; ++j) {
    const auto& b = sys.bases[j];
    const int mo = tab.max_order[j];
    tab.values[j].resize(n_rows, mo);
    if (with_derivatives) {
      tab.d_eps2[j].resize(n_rows, mo);
      tab.d_z[j].resize(n_rows, mo);
    }
    const auto dv = with_derivatives ? mercer_constants_derivs(b) : MercerBasis1DDerivs{};
    psi.resize(mo);
    for (int i = 0; i < n_rows; ++i) {
      const double z = Z(i, j);
      const double env = std::exp(-b.delta_sq * z * z);
      psi_column(b.beta, b.alpha * b.beta * z, mo, psi.data());
      for (int n = 1; n <= mo; ++n) {
        const double p = psi[n - 1];
        tab.values[j](i, n - 1) = env * p;
        if (!with_derivatives) continue;
        const double dpsi_dy = n >= 2 ? std::sqrt(2.0 * (n - 1)) * psi[n - 2] : 0.0;
        // eps2 chain: gamma_n through beta, the exp envelope through delta2,
        // and the argument y = alpha beta z through beta.
        tab.d_eps2[j](i, n - 1) =
            env * (p * (dv.d_beta / (2.0 * b.beta) - z * z * dv.d_delta_sq) +
                   dpsi_dy * z * b.alpha * dv.d_beta);
        tab.d_z[j](i, n - 1) =
            env * (-2.0 * b.delta_sq * z * p + b.alpha * b.beta * dpsi_dy);
      }
    }
  }
  return tab;
}

Eigen::MatrixXd truncated_feature_matrix(const Eigen::MatrixXd& Z,
                                         const EigenSystem& sys, int rank) {
  if (rank < 1) throw std::invalid_argument("truncated_feature_matrix: rank >= 1");
  const int d = sys.dim();
  const auto ordering = static_cast<int>(sys.ordering.size()) >= rank
                            ? sys.ordering
                            : multi_index_sequence(d, rank);
  const auto tab = mercer_tables(Z, sys, rank, /*with_derivatives=*/false);
  const int n_rows = static_cast<int>(Z.rows());
  Eigen::MatrixXd xi(n_rows, rank);
  for (int t = 0; t < rank; ++t) {
    const double scale = std::sqrt(eigenvalue(ordering[t], sys));
    Eigen::ArrayXd col = Eigen::ArrayXd::Constant(n_rows, scale);
    for (int j = 0; j < d; ++j) {
      col *= tab.values[j].col(ordering[t][j] - 1).array();
    }
    xi.col(t) = col.matrix();
  }
  return xi;
}

double eigenvalue_total_sum(const EigenSystem& sys) {
  double total = sys.signal_variance;
  for (const auto& b : sys.bases) total *= b.lambda1 / (1.0 - b.ratio_q);
  return total;
}

double gaussian_tail_sum(const EigenSystem& sys, int rank, double tol) {
  if (tol <= 0.0) throw std::invalid_argument("gaussian_tail_sum: tol must be > 0");
  if (rank < 0) throw std::invalid_argument("gaussian_tail_sum: rank must be >= 0");
  const int d = sys.dim();
  const double q_max = max_ratio_q(sys);
  const double head_scale = lambda1_product(sys);

  // Majorant on the level sums: s(l) <= g(l) = C(l-1, d-1) * prod(lambda1) *
  // q_max^{l-d}. Its term ratio g(l+1)/g(l) = q_max * l / (l - d + 1) is
  // decreasing, so once it falls below one the remainder is geometric.
  const auto majorant = [&](int level) {
    return binom(level - 1, d - 1) * head_scale *
           std::pow(q_max, static_cast<double>(level - d));
  };
  const auto remainder_bound = [&](int first_level) {
    const double ratio = q_max * first_level / (first_level - d + 1.0);
    if (ratio >= 1.0) return std::numeric_limits<double>::infinity();
    return majorant(first_level) / (1.0 - ratio);
  };

  // Level-complete rank: rank == #{n : 1'n < m} for some m. The count comes
  // from a floating-point binomial, so compare up to rounding.
  int m = -1;
  for (int cand = d; ; ++cand) {
    const double below = count_below_level(cand, d);
    if (std::abs(below - static_cast<double>(rank)) < 0.5) {
      m = cand;
      break;
    }
    if (below > static_cast<double>(rank) + 0.5) break;
  }

  if (m >= 0) {
    int last = m - 1;  // tail spans levels >= m; sum through `last`, bound the rest
    while (remainder_bound(last + 1) >= tol) ++last;
    double tail = 0.0;
    if (last >= m) {
      const auto sums = level_sums(sys, last);
      for (int level = m; level <= last; ++level) tail += sums[level];
    }
    return tail + remainder_bound(last + 1);
  }

  // Not level-complete: tail of the sorted eigenvalue sequence.
  std::vector<double> eigs;
  double kth = 0.0;
  for (int level = d; ; ++level) {
    for (const auto& idx : compositions_of_level(level, d)) {
      eigs.push_back(eigenvalue(idx, sys));
    }
    if (static_cast<int>(eigs.size()) >= rank) {
      std::nth_element(eigs.begin(), eigs.begin() + (rank - 1), eigs.end(),
                       std::greater<double>());
      kth = eigs[rank - 1];
      // No eigenvalue at any deeper level can exceed this bound.
      const double next_level_max =
          head_scale * std::pow(q_max, static_cast<double>(level + 1 - d));
      if (next_level_max <= kth) break;
    }
  }
  std::partial_sort(eigs.begin(), eigs.begin() + rank, eigs.end(),
                    std::greater<double>());
  double head = 0.0;
  for (int t = 0; t < rank; ++t) head += eigs[t];
  return std::max(eigenvalue_total_sum(sys) - head, 0.0);
}

Eigen::MatrixXd empirical_truncation(const Eigen::MatrixXd& K, int rank) {
  const int n = static_cast<int>(K.rows());
  if (K.cols() != n) throw std::invalid_argument("empirical_truncation: K not square");
  if (rank < 1 || rank > n) {
    throw std::invalid_argument("empirical_truncation: need 1 <= rank <= N");
  }
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument("empirical_truncation: K is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  if (es.info() != Eigen::Success) {
    throw NumericalError("empirical_truncation: eigendecomposition failed");
  }
  Eigen::MatrixXd xi(n, rank);
  for (int t = 0; t < rank; ++t) {
    const int src = n - 1 - t;  // eigenvalues ascend in Eigen
    const double mu = std::max(es.eigenvalues()(src), 0.0);
    xi.col(t) = es.eigenvectors().col(src) * std::sqrt(mu);
  }
  return xi;
}

}  // namespace lrgp
