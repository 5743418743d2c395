#include "lrgp/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "lrgp/errors.hpp"
#include "lrgp/rng.hpp"

namespace lrgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

Eigen::MatrixXd orthonormal_projection(int rows, int cols, std::uint64_t seed) {
  Rng rng = Rng(seed).stream("projection-init");
  Eigen::MatrixXd g(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) g(i, j) = rng.gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols));
}

void check_finite(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const char* what) {
  if (!x.allFinite() || !y.allFinite()) {
    throw NumericalError(std::string(what) + ": inputs contain NaN or Inf");
  }
}

}  // namespace

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  const int d = static_cast<int>(x.cols());
  s.mean = x.colwise().mean();
  s.scale.resize(d);
  for (int j = 0; j < d; ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().mean();
    const double sd = std::sqrt(var);
    s.scale(j) = sd > 1e-12 ? sd : 1.0;  // constant columns map to zero
  }
  return s;
}

Standardizer Standardizer::identity(int dim) {
  Standardizer s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.scale = Eigen::VectorXd::Ones(dim);
  return s;
}

bool Standardizer::is_identity() const {
  return mean.size() == 0 || (mean.isZero(0.0) && scale.isOnes(0.0));
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (mean.size() == 0) return x;
  if (x.cols() != mean.size()) {
    throw std::invalid_argument("Standardizer: column count mismatch");
  }
  return (x.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Eigen::VectorXd Standardizer::apply_vector(const Eigen::VectorXd& y) const {
  if (mean.size() == 0) return y;
  return (y.array() - mean(0)) / scale(0);
}

Eigen::VectorXd Standardizer::invert_vector(const Eigen::VectorXd& y) const {
  if (mean.size() == 0) return y;
  return y.array() * scale(0) + mean(0);
}

int LowRankGPModel::feature_input_dim() const {
  if (projection) return static_cast<int>(projection->cols());
  return kernel.input_dim();
}

LowRankGPModel LowRankGPModel::exact(KernelSpec kernel, double noise_variance) {
  if (noise_variance <= 0.0) {
    throw std::invalid_argument("LowRankGPModel: noise_variance must be > 0");
  }
  LowRankGPModel m;
  m.method = GpMethod::ExactGp;
  m.kernel = std::move(kernel);
  m.noise_variance = noise_variance;
  return m;
}

LowRankGPModel LowRankGPModel::fgp(int data_dim, int rank, double noise_variance,
                                   std::uint64_t seed, int proj_dim) {
  if (rank < 2 || rank % 2 != 0) {
    throw std::invalid_argument("LowRankGPModel::fgp: rank must be even and >= 2");
  }
  if (noise_variance <= 0.0) {
    throw std::invalid_argument("LowRankGPModel: noise_variance must be > 0");
  }
  const int d_feat = proj_dim > 0 ? proj_dim : data_dim;
  if (proj_dim > data_dim) {
    throw std::invalid_argument("LowRankGPModel::fgp: proj_dim must be <= data_dim");
  }
  LowRankGPModel m;
  m.method = GpMethod::Fgp;
  m.kernel = KernelSpec::gaussian_iso(1.0, 1.0, d_feat);
  m.noise_variance = noise_variance;
  m.rank = rank;
  m.shared_lengthscale = false;
  if (proj_dim > 0) m.projection = orthonormal_projection(data_dim, proj_dim, seed);
  m.spectral = sample_spectral_frequencies(m.kernel, rank / 2, seed);
  return m;
}

LowRankGPModel LowRankGPModel::mgp(int data_dim, int rank, double noise_variance,
                                   int proj_dim, bool shared_lengthscale,
                                   std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("LowRankGPModel::mgp: rank must be >= 1");
  if (noise_variance <= 0.0) {
    throw std::invalid_argument("LowRankGPModel: noise_variance must be > 0");
  }
  if (proj_dim > data_dim) {
    throw std::invalid_argument("LowRankGPModel::mgp: proj_dim must be <= data_dim");
  }
  const int d_feat = proj_dim > 0 ? proj_dim : data_dim;
  LowRankGPModel m;
  m.method = GpMethod::Mgp;
  m.kernel = KernelSpec::gaussian_iso(1.0, 1.0, d_feat);
  m.noise_variance = noise_variance;
  m.rank = rank;
  m.shared_lengthscale = shared_lengthscale;
  if (proj_dim > 0) m.projection = orthonormal_projection(data_dim, proj_dim, seed);
  // The measure scale 1/sqrt(2) matches a standard Gaussian reference measure
  // on the (standardized) feature coordinates.
  m.mercer_alpha = Eigen::VectorXd::Constant(d_feat, 1.0 / std::numbers::sqrt2);
  m.mercer_ordering = multi_index_sequence(d_feat, rank);
  return m;
}

Eigen::MatrixXd lowrank_solve(const Eigen::MatrixXd& xi, double noise_variance,
                              const Eigen::MatrixXd& rhs) {
  if (noise_variance <= 0.0) {
    throw std::invalid_argument("lowrank_solve: noise_variance must be > 0");
  }
  if (rhs.rows() != xi.rows()) {
    throw std::invalid_argument("lowrank_solve: rhs row count mismatch");
  }
  const int r = static_cast<int>(xi.cols());
  if (r == 0) return rhs / noise_variance;
  Eigen::MatrixXd small = xi.transpose() * xi;
  small.diagonal().array() += noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(small);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("lowrank_solve: inner r x r factorization failed");
  }
  return (rhs - xi * llt.solve(xi.transpose() * rhs)) / noise_variance;
}

double lowrank_logdet(const Eigen::MatrixXd& xi, double noise_variance) {
  if (noise_variance <= 0.0) {
    throw std::invalid_argument("lowrank_logdet: noise_variance must be > 0");
  }
  const auto n = xi.rows();
  const auto r = xi.cols();
  if (r == 0) return n * std::log(noise_variance);
  Eigen::MatrixXd small = xi.transpose() * xi;
  small.diagonal().array() += noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(small);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("lowrank_logdet: inner r x r factorization failed");
  }
  const double small_logdet =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return static_cast<double>(n - r) * std::log(noise_variance) + small_logdet;
}

namespace {

// Everything needed to evaluate features once and replay chain rules later.
struct FeatureEval {
  Eigen::MatrixXd xi;
  Eigen::MatrixXd z;       // feature-space coordinates the map was applied to
  Eigen::MatrixXd p;       // pre-standardization projections (MGP with W)
  Standardizer zstd;       // standardizer applied to p (MGP with W)
  bool z_standardized = false;
  MercerTables tables;     // MGP
  Eigen::VectorXd sqrt_lambda;  // MGP, per ordering index
  Eigen::MatrixXd angles;  // FGP, N x (r/2)
};

EigenSystem model_eigen_system(const LowRankGPModel& model) {
  const int d = model.feature_input_dim();
  std::vector<MercerBasis1D> bases(d);
  for (int j = 0; j < d; ++j) {
    bases[j] = mercer_constants(model.mercer_alpha(j),
                                model.kernel.lengthscale_inverse_sq(j));
  }
  EigenSystem sys;
  sys.bases = std::move(bases);
  sys.signal_variance = model.kernel.signal_variance;
  sys.ordering = model.mercer_ordering;
  return sys;
}

FeatureEval build_features(const LowRankGPModel& model, const Eigen::MatrixXd& xs,
                           bool with_grad, const Standardizer* fixed_zstd = nullptr) {
  FeatureEval fe;
  if (model.projection) {
    if (xs.cols() != model.projection->rows()) {
      throw std::invalid_argument("build_features: projection dimension mismatch");
    }
    fe.p = xs * (*model.projection);
  } else {
    fe.p = xs;
  }
  if (model.method == GpMethod::Mgp && model.projection) {
    fe.zstd = fixed_zstd ? *fixed_zstd : Standardizer::fit(fe.p);
    fe.z = fe.zstd.apply(fe.p);
    fe.z_standardized = true;
  } else {
    fe.z = fe.p;
  }

  if (model.method == GpMethod::Fgp) {
    const auto& s = *model.spectral;
    fe.angles = fe.z * s.frequencies(model.kernel.lengthscale_inverse_sq).transpose();
    const int m = s.num_frequencies();
    const double scale = std::sqrt(model.kernel.signal_variance) *
                         std::sqrt(2.0 / (2.0 * m));
    fe.xi.resize(fe.z.rows(), 2 * m);
    fe.xi.leftCols(m) = scale * fe.angles.array().cos().matrix();
    fe.xi.rightCols(m) = scale * fe.angles.array().sin().matrix();
    return fe;
  }

  // MGP
  const EigenSystem sys = model_eigen_system(model);
  const int rank = model.rank;
  fe.tables = mercer_tables(fe.z, sys, rank, with_grad);
  fe.sqrt_lambda.resize(rank);
  const int n_rows = static_cast<int>(fe.z.rows());
  fe.xi.resize(n_rows, rank);
  for (int t = 0; t < rank; ++t) {
    fe.sqrt_lambda(t) = std::sqrt(eigenvalue(model.mercer_ordering[t], sys));
    Eigen::ArrayXd col = Eigen::ArrayXd::Constant(n_rows, fe.sqrt_lambda(t));
    for (int j = 0; j < sys.dim(); ++j) {
      col *= fe.tables.values[j].col(model.mercer_ordering[t][j] - 1).array();
    }
    fe.xi.col(t) = col.matrix();
  }
  return fe;
}

struct ParamLayout {
  int n_eps = 0;        // number of log-lengthscale entries (0 for Matern)
  bool has_sf2 = false;
  bool has_alpha = false;
  int w_rows = 0;
  int w_cols = 0;
  int total = 0;
};

ParamLayout layout_of(const LowRankGPModel& model) {
  ParamLayout pl;
  if (model.kernel.family == KernelFamily::GaussianArd) {
    pl.has_sf2 = true;
    pl.n_eps = model.shared_lengthscale ? 1 : model.kernel.input_dim();
  } else {
    pl.has_alpha = true;
  }
  if (model.projection) {
    pl.w_rows = static_cast<int>(model.projection->rows());
    pl.w_cols = static_cast<int>(model.projection->cols());
  }
  pl.total = 1 + (pl.has_sf2 ? 1 : 0) + pl.n_eps + (pl.has_alpha ? 1 : 0) +
             pl.w_rows * pl.w_cols;
  return pl;
}

}  // namespace

Eigen::MatrixXd model_feature_matrix(const LowRankGPModel& model,
                                     const Eigen::MatrixXd& x_std) {
  if (model.method == GpMethod::ExactGp) {
    throw std::invalid_argument("model_feature_matrix: exact GP has no feature map");
  }
  return build_features(model, x_std, /*with_grad=*/false).xi;
}

Eigen::VectorXd get_params(const LowRankGPModel& model) {
  const ParamLayout pl = layout_of(model);
  Eigen::VectorXd theta(pl.total);
  int k = 0;
  theta(k++) = std::log(model.noise_variance);
  if (pl.has_sf2) theta(k++) = std::log(model.kernel.signal_variance);
  for (int j = 0; j < pl.n_eps; ++j) {
    theta(k++) = std::log(model.kernel.lengthscale_inverse_sq(j));
  }
  if (pl.has_alpha) theta(k++) = std::log(model.kernel.alpha);
  if (model.projection) {
    for (int c = 0; c < pl.w_cols; ++c) {
      for (int r = 0; r < pl.w_rows; ++r) theta(k++) = (*model.projection)(r, c);
    }
  }
  return theta;
}

void set_params(LowRankGPModel& model, const Eigen::VectorXd& params) {
  const ParamLayout pl = layout_of(model);
  if (params.size() != pl.total) {
    throw std::invalid_argument("set_params: parameter vector length mismatch");
  }
  int k = 0;
  model.noise_variance = std::exp(params(k++));
  if (pl.has_sf2) model.kernel.signal_variance = std::exp(params(k++));
  if (pl.n_eps == 1 && model.shared_lengthscale) {
    model.kernel.lengthscale_inverse_sq.setConstant(std::exp(params(k++)));
  } else {
    for (int j = 0; j < pl.n_eps; ++j) {
      model.kernel.lengthscale_inverse_sq(j) = std::exp(params(k++));
    }
  }
  if (pl.has_alpha) model.kernel.alpha = std::exp(params(k++));
  if (model.projection) {
    for (int c = 0; c < pl.w_cols; ++c) {
      for (int r = 0; r < pl.w_rows; ++r) (*model.projection)(r, c) = params(k++);
    }
  }
}

std::vector<std::string> param_names(const LowRankGPModel& model) {
  const ParamLayout pl = layout_of(model);
  std::vector<std::string> names;
  names.reserve(pl.total);
  names.emplace_back("log_noise_variance");
  if (pl.has_sf2) names.emplace_back("log_signal_variance");
  for (int j = 0; j < pl.n_eps; ++j) {
    names.push_back(pl.n_eps == 1 && model.shared_lengthscale
                        ? "log_lengthscale_inv_sq"
                        : "log_lengthscale_inv_sq[" + std::to_string(j) + "]");
  }
  if (pl.has_alpha) names.emplace_back("log_matern_alpha");
  for (int c = 0; c < pl.w_cols; ++c) {
    for (int r = 0; r < pl.w_rows; ++r) {
      names.push_back("W[" + std::to_string(r) + "," + std::to_string(c) + "]");
    }
  }
  return names;
}

namespace {

struct ValueAndGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

Eigen::MatrixXd matern_dk_dlog_alpha(const Eigen::MatrixXd& xs,
                                     const KernelSpec& spec) {
  const int n = static_cast<int>(xs.rows());
  Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      const double u = (xs.row(i) - xs.row(j)).norm() / spec.alpha;
      double v;
      if (spec.nu == 0.5) {
        v = u * std::exp(-u);
      } else if (spec.nu == 1.5) {
        v = u * u * std::exp(-u);
      } else {
        v = (u * u / 3.0) * (1.0 + u) * std::exp(-u);
      }
      dk(i, j) = v;
      dk(j, i) = v;
    }
  }
  return dk;
}

ValueAndGrad eval_exact(const LowRankGPModel& model, const Eigen::MatrixXd& xs,
                        const Eigen::VectorXd& ys, bool with_grad) {
  const int n = static_cast<int>(xs.rows());
  const double sig2 = model.noise_variance;
  Eigen::MatrixXd k = kernel_matrix(model.kernel, xs);
  Eigen::MatrixXd a = k;
  a.diagonal().array() += sig2;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("log_marginal_likelihood: K + sigma2 I is not PD");
  }
  const Eigen::VectorXd alpha = llt.solve(ys);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  ValueAndGrad out;
  out.value = -0.5 * ys.dot(alpha) - 0.5 * logdet - 0.5 * n * kLog2Pi;
  if (!with_grad) return out;

  const ParamLayout pl = layout_of(model);
  out.grad = Eigen::VectorXd::Zero(pl.total);
  const Eigen::MatrixXd a_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd p = alpha * alpha.transpose() - a_inv;
  int idx = 0;
  out.grad(idx++) = 0.5 * sig2 * (alpha.squaredNorm() - a_inv.trace());
  if (model.kernel.family == KernelFamily::GaussianArd) {
    out.grad(idx++) = 0.5 * p.cwiseProduct(k).sum();  // dK/dlog sf2 = K
    const int d = model.kernel.input_dim();
    Eigen::VectorXd g_eps = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) {
      const double eps2 = model.kernel.lengthscale_inverse_sq(j);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) {
          const double diff = xs(i, j) - xs(l, j);
          acc += p(i, l) * k(i, l) * (-eps2 * diff * diff);
        }
      }
      g_eps(j) = 0.5 * acc;
    }
    if (model.shared_lengthscale) {
      out.grad(idx++) = g_eps.sum();
    } else {
      for (int j = 0; j < d; ++j) out.grad(idx++) = g_eps(j);
    }
  } else {
    const Eigen::MatrixXd dk = matern_dk_dlog_alpha(xs, model.kernel);
    out.grad(idx++) = 0.5 * p.cwiseProduct(dk).sum();
  }
  return out;
}

ValueAndGrad eval_lowrank(const LowRankGPModel& model, const Eigen::MatrixXd& xs,
                          const Eigen::VectorXd& ys, bool with_grad) {
  if (model.kernel.family != KernelFamily::GaussianArd) {
    throw std::invalid_argument(
        "low-rank feature methods require the Gaussian-ARD kernel");
  }
  const int n = static_cast<int>(xs.rows());
  const double sig2 = model.noise_variance;
  const FeatureEval fe = build_features(model, xs, with_grad);
  const int r = static_cast<int>(fe.xi.cols());

  Eigen::MatrixXd small = fe.xi.transpose() * fe.xi;
  small.diagonal().array() += sig2;
  Eigen::LLT<Eigen::MatrixXd> llt(small);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("log_marginal_likelihood: inner factorization failed");
  }
  const auto a_solve = [&](const Eigen::MatrixXd& rhs) -> Eigen::MatrixXd {
    return (rhs - fe.xi * llt.solve(fe.xi.transpose() * rhs)) / sig2;
  };
  const Eigen::VectorXd alpha = a_solve(ys);
  const double small_logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double logdet = (n - r) * std::log(sig2) + small_logdet;

  ValueAndGrad out;
  out.value = -0.5 * ys.dot(alpha) - 0.5 * logdet - 0.5 * n * kLog2Pi;
  if (!with_grad) return out;

  const ParamLayout pl = layout_of(model);
  out.grad = Eigen::VectorXd::Zero(pl.total);

  // dL = Tr(G' dXi) with G = (alpha alpha' - A^-1) Xi, plus the direct sigma2
  // term; Tr(A^-1) collapses through Woodbury to the r x r inverse.
  const Eigen::MatrixXd g = alpha * (alpha.transpose() * fe.xi) - a_solve(fe.xi);
  const double tr_small_inv =
      llt.solve(Eigen::MatrixXd::Identity(r, r)).trace();
  const double tr_a_inv = (n - r + sig2 * tr_small_inv) / sig2;

  int idx = 0;
  out.grad(idx++) = 0.5 * sig2 * (alpha.squaredNorm() - tr_a_inv);
  const double g_log_sf2 = 0.5 * g.cwiseProduct(fe.xi).sum();
  out.grad(idx++) = g_log_sf2;

  const int d_feat = model.feature_input_dim();
  Eigen::VectorXd grad_eps2 = Eigen::VectorXd::Zero(d_feat);  // w.r.t. raw eps2
  Eigen::MatrixXd dz;                                         // dL/dz for W

  if (model.method == GpMethod::Fgp) {
    const auto& s = *model.spectral;
    const int m = s.num_frequencies();
    const double scale = std::sqrt(model.kernel.signal_variance) *
                         std::sqrt(1.0 / m);
    const Eigen::MatrixXd freq = s.frequencies(model.kernel.lengthscale_inverse_sq);
    const Eigen::MatrixXd d_theta =
        scale * (-g.leftCols(m).cwiseProduct(fe.angles.array().sin().matrix()) +
                 g.rightCols(m).cwiseProduct(fe.angles.array().cos().matrix()));
    const Eigen::MatrixXd d_freq = d_theta.transpose() * fe.z;  // m x d
    for (int j = 0; j < d_feat; ++j) {
      // dfreq/dlog eps2_j = freq/2, applied per column
      const double g_log = 0.5 * d_freq.col(j).dot(freq.col(j));
      grad_eps2(j) = g_log / model.kernel.lengthscale_inverse_sq(j);
    }
    if (model.projection) dz = d_theta * freq;
  } else {
    // MGP: per-index chain through sqrt(lambda) and the eigenfunction tables.
    const int rank = model.rank;
    std::vector<double> dl1_over_l1(d_feat), dq_over_q(d_feat);
    for (int j = 0; j < d_feat; ++j) {
      const auto b = mercer_constants(model.mercer_alpha(j),
                                      model.kernel.lengthscale_inverse_sq(j));
      const auto dv = mercer_constants_derivs(b);
      dl1_over_l1[j] = dv.d_lambda1 / b.lambda1;
      dq_over_q[j] = dv.d_ratio_q / b.ratio_q;
    }
    const bool need_w = model.projection.has_value();
    if (need_w) dz = Eigen::MatrixXd::Zero(n, d_feat);
    std::vector<Eigen::ArrayXd> prefix(d_feat + 1), suffix(d_feat + 1);
    for (int t = 0; t < rank; ++t) {
      const auto& midx = model.mercer_ordering[t];
      prefix[0] = Eigen::ArrayXd::Ones(n);
      for (int j = 0; j < d_feat; ++j) {
        prefix[j + 1] = prefix[j] * fe.tables.values[j].col(midx[j] - 1).array();
      }
      suffix[d_feat] = Eigen::ArrayXd::Ones(n);
      for (int j = d_feat - 1; j >= 0; --j) {
        suffix[j] = suffix[j + 1] * fe.tables.values[j].col(midx[j] - 1).array();
      }
      const Eigen::ArrayXd g_col = g.col(t).array();
      const double g_dot_xi = (g_col * fe.xi.col(t).array()).sum();
      const double sl = fe.sqrt_lambda(t);
      for (int j = 0; j < d_feat; ++j) {
        const double lam_ratio = dl1_over_l1[j] + (midx[j] - 1) * dq_over_q[j];
        const Eigen::ArrayXd rest = prefix[j] * suffix[j + 1];
        grad_eps2(j) +=
            0.5 * lam_ratio * g_dot_xi +
            sl * (g_col * fe.tables.d_eps2[j].col(midx[j] - 1).array() * rest).sum();
        if (need_w) {
          dz.col(j).array() +=
              sl * g_col * fe.tables.d_z[j].col(midx[j] - 1).array() * rest;
        }
      }
    }
  }

  if (model.shared_lengthscale) {
    double acc = 0.0;
    for (int j = 0; j < d_feat; ++j) {
      acc += model.kernel.lengthscale_inverse_sq(j) * grad_eps2(j);
    }
    out.grad(idx++) = acc;
  } else {
    for (int j = 0; j < d_feat; ++j) {
      out.grad(idx++) = model.kernel.lengthscale_inverse_sq(j) * grad_eps2(j);
    }
  }

  if (model.projection) {
    Eigen::MatrixXd dp;
    if (fe.z_standardized) {
      // z = (p - mean) / sd with per-column train statistics; the statistics
      // move with W, so the chain includes their derivatives.
      dp.resize(n, d_feat);
      for (int j = 0; j < d_feat; ++j) {
        const double mean_s = dz.col(j).mean();
        const double zdot = dz.col(j).cwiseProduct(fe.z.col(j)).mean();
        dp.col(j) = (dz.col(j).array() - mean_s - fe.z.col(j).array() * zdot) /
                    fe.zstd.scale(j);
      }
    } else {
      dp = dz;
    }
    const Eigen::MatrixXd dw = xs.transpose() * dp;
    for (int c = 0; c < dw.cols(); ++c) {
      for (int rr = 0; rr < dw.rows(); ++rr) out.grad(idx++) = dw(rr, c);
    }
  }
  return out;
}

ValueAndGrad eval_log_ml(const LowRankGPModel& model, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& y, bool with_grad) {
  check_finite(x, y, "log_marginal_likelihood");
  if (x.rows() != y.size()) {
    throw std::invalid_argument("log_marginal_likelihood: X/y row mismatch");
  }
  const Eigen::MatrixXd xs = model.input_standardizer.apply(x);
  const Eigen::VectorXd ys = model.output_standardizer.apply_vector(y);
  return model.method == GpMethod::ExactGp ? eval_exact(model, xs, ys, with_grad)
                                           : eval_lowrank(model, xs, ys, with_grad);
}

}  // namespace

double log_marginal_likelihood(const LowRankGPModel& model,
                               const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return eval_log_ml(model, x, y, /*with_grad=*/false).value;
}

ParamGradient gradient_log_ml(const LowRankGPModel& model,
                              const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  auto vg = eval_log_ml(model, x, y, /*with_grad=*/true);
  return ParamGradient{std::move(vg.grad), param_names(model)};
}

PredictiveDistribution predict(const LowRankGPModel& model,
                               const Eigen::MatrixXd& x_train,
                               const Eigen::VectorXd& y_train,
                               const Eigen::MatrixXd& x_test) {
  check_finite(x_train, y_train, "predict");
  if (x_train.cols() != x_test.cols()) {
    throw std::invalid_argument("predict: train/test dimension mismatch");
  }
  const Eigen::MatrixXd xs_tr = model.input_standardizer.apply(x_train);
  const Eigen::MatrixXd xs_te = model.input_standardizer.apply(x_test);
  const Eigen::VectorXd ys = model.output_standardizer.apply_vector(y_train);
  const double sig2 = model.noise_variance;
  const int m = static_cast<int>(x_test.rows());

  Eigen::VectorXd mean_std(m);
  Eigen::MatrixXd cov_std(m, m);
  if (model.method == GpMethod::ExactGp) {
    Eigen::MatrixXd a = kernel_matrix(model.kernel, xs_tr);
    a.diagonal().array() += sig2;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("predict: K + sigma2 I is not PD");
    }
    const Eigen::MatrixXd k_star = kernel_matrix(model.kernel, xs_te, xs_tr);
    mean_std = k_star * llt.solve(ys);
    cov_std = kernel_matrix(model.kernel, xs_te) -
              k_star * llt.solve(k_star.transpose());
    cov_std.diagonal().array() += sig2;
  } else {
    const FeatureEval tr = build_features(model, xs_tr, false);
    const FeatureEval te = build_features(model, xs_te, false,
                                          tr.z_standardized ? &tr.zstd : nullptr);
    const Eigen::VectorXd alpha = lowrank_solve(tr.xi, sig2, ys);
    mean_std = te.xi * (tr.xi.transpose() * alpha);
    const Eigen::MatrixXd a_inv_xi = lowrank_solve(tr.xi, sig2, tr.xi);
    Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(tr.xi.cols(), tr.xi.cols()) -
                            tr.xi.transpose() * a_inv_xi;
    inner = 0.5 * (inner + inner.transpose());
    cov_std = te.xi * inner * te.xi.transpose();
    cov_std.diagonal().array() += sig2;
  }

  PredictiveDistribution pred;
  pred.mean = model.output_standardizer.invert_vector(mean_std);
  const double out_scale = model.output_standardizer.mean.size() == 0
                               ? 1.0
                               : model.output_standardizer.scale(0);
  pred.covariance = (out_scale * out_scale) * cov_std;
  return pred;
}

FitResult fit(LowRankGPModel model, const Eigen::MatrixXd& x,
              const Eigen::VectorXd& y, const FitOptions& opt) {
  if (opt.epochs < 1) throw std::invalid_argument("fit: epochs must be >= 1");
  check_finite(x, y, "fit");
  if (opt.fit_standardizers) {
    model.input_standardizer = Standardizer::fit(x);
    model.output_standardizer = Standardizer::fit(y);
  }

  Eigen::VectorXd theta = get_params(model);
  const auto vg0 = eval_log_ml(model, x, y, /*with_grad=*/false);
  if (!std::isfinite(vg0.value)) {
    std::ostringstream oss;
    oss << "fit: objective is not finite at initialization (";
    const auto names = param_names(model);
    for (std::size_t i = 0; i < names.size(); ++i) {
      oss << names[i] << "=" << theta(static_cast<int>(i))
          << (i + 1 < names.size() ? ", " : ")");
    }
    throw NumericalError(oss.str());
  }

  FitResult result;
  result.parameter_trace.push_back(theta);
  Eigen::VectorXd m_acc = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v_acc = Eigen::VectorXd::Zero(theta.size());
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto vg = eval_log_ml(model, x, y, /*with_grad=*/true);
    result.objective_trace.push_back(vg.value);
    m_acc = opt.beta1 * m_acc + (1.0 - opt.beta1) * vg.grad;
    v_acc = opt.beta2 * v_acc +
            (1.0 - opt.beta2) * vg.grad.cwiseProduct(vg.grad);
    const double bc1 = 1.0 - std::pow(opt.beta1, epoch);
    const double bc2 = 1.0 - std::pow(opt.beta2, epoch);
    const Eigen::ArrayXd step = (m_acc.array() / bc1) /
                                ((v_acc.array() / bc2).sqrt() + opt.adam_eps);
    theta.array() += opt.step_size * step;  // ascent
    set_params(model, theta);
    result.parameter_trace.push_back(theta);
  }
  result.objective_trace.push_back(eval_log_ml(model, x, y, false).value);
  result.model = std::move(model);
  return result;
}

double nlpd(const PredictiveDistribution& pred, const Eigen::VectorXd& y_test) {
  if (pred.mean.size() != y_test.size()) {
    throw std::invalid_argument("nlpd: length mismatch");
  }
  const int m = static_cast<int>(y_test.size());
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    const double var = pred.covariance(i, i);
    if (var <= 0.0) throw NumericalError("nlpd: non-positive predictive variance");
    const double resid = y_test(i) - pred.mean(i);
    acc += 0.5 * (kLog2Pi + std::log(var) + resid * resid / var);
  }
  return acc / m;
}

double rmse(const Eigen::VectorXd& pred_mean, const Eigen::VectorXd& y_test) {
  if (pred_mean.size() != y_test.size()) {
    throw std::invalid_argument("rmse: length mismatch");
  }
  return std::sqrt((pred_mean - y_test).squaredNorm() / pred_mean.size());
}

}  // namespace lrgp
