#pragma once

#include <Eigen/Dense>
#include <vector>

namespace lrgp {

// One-dimensional eigensystem of the Gaussian kernel exp(-eps2 (x-x')^2)
// under the Gaussian measure rho(x) = alpha pi^{-1/2} exp(-alpha^2 x^2):
//
//   beta    = (1 + (2 eps / alpha)^2)^{1/4}
//   delta2  = alpha^2 (beta^2 - 1) / 2
//   lambda1 = (alpha^2 / (alpha^2 + delta2 + eps2))^{1/2}
//   q       = eps2 / (alpha^2 + delta2 + eps2),   0 < q < 1
//   lambda_n = lambda1 * q^{n-1},                 n >= 1
//   e_n(x)  = gamma_n exp(-delta2 x^2) H_{n-1}(alpha beta x)
//   gamma_n = beta^{1/2} 2^{(1-n)/2} Gamma(n)^{-1/2}
//
// with H the physicists' Hermite polynomials. The e_n are orthonormal in
// L2(rho).
struct MercerBasis1D {
  double alpha = 1.0;
  double epsilon_sq = 1.0;
  double beta = 0.0;
  double delta_sq = 0.0;
  double lambda1 = 0.0;
  double ratio_q = 0.0;
};

// Derivatives of the 1-D constants w.r.t. eps2 (alpha fixed).
struct MercerBasis1DDerivs {
  double d_beta = 0.0;
  double d_delta_sq = 0.0;
  double d_lambda1 = 0.0;
  double d_ratio_q = 0.0;
};

MercerBasis1D mercer_constants(double alpha, double epsilon_sq);
MercerBasis1DDerivs mercer_constants_derivs(const MercerBasis1D& b);

// Physicists' Hermite polynomial H_n via H_{n+1} = 2x H_n - 2n H_{n-1}.
double hermite_eval(int n, double x);

// Multi-index with entries >= 1; total degree is the entry sum.
using MultiIndex = std::vector<int>;

// First `count` multi-indices in total-degree-major, lexicographic-minor
// order, e.g. d=2: (1,1); (1,2); (2,1); (1,3); (2,2); (3,1); ...
std::vector<MultiIndex> multi_index_sequence(int dim, int count);

// Index ordering for the tensor expansion. TotalDegree is the default
// (degree-major, lexicographic-minor); it is eigenvalue-sorted whenever all
// dimensions share (alpha, eps2). ByEigenvalue re-sorts the indices by
// descending eigenvalue, which matters only for anisotropic systems.
enum class IndexOrdering { TotalDegree, ByEigenvalue };

// Tensor-product eigensystem over d dimensions. Immutable once built.
struct EigenSystem {
  std::vector<MercerBasis1D> bases;
  double signal_variance = 1.0;
  std::vector<MultiIndex> ordering;

  int dim() const { return static_cast<int>(bases.size()); }
};

EigenSystem make_eigen_system(std::vector<MercerBasis1D> bases,
                              double signal_variance, int rank,
                              IndexOrdering mode = IndexOrdering::TotalDegree);
EigenSystem make_isotropic_eigen_system(int dim, double alpha, double epsilon_sq,
                                        double signal_variance, int rank);

double eigenvalue(const MultiIndex& n, const EigenSystem& sys);
double eigenfunction_eval(const MultiIndex& n, const Eigen::VectorXd& x,
                          const EigenSystem& sys);

// N x rank factor with column t = sqrt(lambda_t) * (e_t(z_1), ..., e_t(z_N)),
// so Xi Xi^T equals the rank-truncated Mercer expansion of the kernel matrix.
Eigen::MatrixXd truncated_feature_matrix(const Eigen::MatrixXd& Z,
                                         const EigenSystem& sys, int rank);

// Closed-form total sum of all eigenvalues: sf2 * prod_j lambda1_j/(1 - q_j).
double eigenvalue_total_sum(const EigenSystem& sys);

// Eigenvalue tail Lambda_{>rank}. When `rank` is level-complete (it counts
// exactly the indices with total degree < m for some m), the tail is summed
// level set by level set until the geometric remainder bound drops below
// `tol`; the bound is then added, so the result is an upper bound within tol
// of the true tail. Otherwise the tail is taken w.r.t. the sorted eigenvalue
// sequence (total sum minus the top-`rank` eigenvalues).
double gaussian_tail_sum(const EigenSystem& sys, int rank, double tol = 1e-12);

// Rank-r factor from the top-r eigenpairs of a symmetric PSD matrix,
// eigenvalues descending, negatives clamped to zero.
Eigen::MatrixXd empirical_truncation(const Eigen::MatrixXd& K, int rank);

// Per-dimension tables of 1-D eigenfunction values at the rows of Z for all
// orders used by sys.ordering[0..rank). values[j](i, n-1) = e_n(z_ij).
// Derivative tables (w.r.t. eps2_j and w.r.t. z) are filled on request; they
// feed the marginal-likelihood gradients.
struct MercerTables {
  std::vector<Eigen::MatrixXd> values;
  std::vector<Eigen::MatrixXd> d_eps2;
  std::vector<Eigen::MatrixXd> d_z;
  std::vector<int> max_order;
};

MercerTables mercer_tables(const Eigen::MatrixXd& Z, const EigenSystem& sys,
                           int rank, bool with_derivatives);

}  // namespace lrgp
