#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrgp/fourier.hpp"
#include "lrgp/kernels.hpp"
#include "lrgp/mercer.hpp"

namespace lrgp {

enum class GpMethod { Mgp, Fgp, ExactGp };

// Per-column affine standardizer fitted on training statistics
// (population standard deviation, floored so constant columns map to zero).
// A default-constructed (empty) standardizer acts as the identity on data of
// any width.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  static Standardizer identity(int dim);

  bool is_identity() const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply_vector(const Eigen::VectorXd& y) const;
  Eigen::VectorXd invert_vector(const Eigen::VectorXd& y) const;
};

struct PredictiveDistribution {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// A GP regression model backed by an exact kernel or by one of the two
// low-rank feature maps. `kernel` lives on the feature space the features
// see: d columns when a projection is present, D otherwise. The optional
// projection W (D x d) is trainable; MGP re-standardizes the projected
// coordinates so they match the fixed Gaussian reference measure.
struct LowRankGPModel {
  GpMethod method = GpMethod::ExactGp;
  KernelSpec kernel;
  double noise_variance = 0.1;
  int rank = 0;
  std::optional<Eigen::MatrixXd> projection;
  Standardizer input_standardizer;   // fitted on raw X, not trainable
  Standardizer output_standardizer;  // fitted on raw y, not trainable
  std::optional<SpectralSample> spectral;  // Fgp only
  Eigen::VectorXd mercer_alpha;            // Mgp measure scales, default 1/sqrt(2)
  std::vector<MultiIndex> mercer_ordering; // Mgp, fixed once rank and dim are set
  // One shared log-lengthscale parameter (true) vs one per feature dimension.
  bool shared_lengthscale = false;

  int feature_input_dim() const;

  static LowRankGPModel exact(KernelSpec kernel, double noise_variance);
  static LowRankGPModel fgp(int data_dim, int rank, double noise_variance,
                            std::uint64_t seed, int proj_dim = 0);
  static LowRankGPModel mgp(int data_dim, int rank, double noise_variance,
                            int proj_dim = 0, bool shared_lengthscale = true,
                            std::uint64_t seed = 0);
};

// (Xi Xi' + sigma2 I)^-1 rhs through the Woodbury identity; O(r^3 + r^2 N + r N k).
Eigen::MatrixXd lowrank_solve(const Eigen::MatrixXd& xi, double noise_variance,
                              const Eigen::MatrixXd& rhs);

// log |Xi Xi' + sigma2 I| = (N - r) log sigma2 + log |sigma2 I_r + Xi'Xi|.
double lowrank_logdet(const Eigen::MatrixXd& xi, double noise_variance);

// Feature matrix of the model at (already input-standardized) rows.
Eigen::MatrixXd model_feature_matrix(const LowRankGPModel& model,
                                     const Eigen::MatrixXd& x_std);

double log_marginal_likelihood(const LowRankGPModel& model,
                               const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

PredictiveDistribution predict(const LowRankGPModel& model,
                               const Eigen::MatrixXd& x_train,
                               const Eigen::VectorXd& y_train,
                               const Eigen::MatrixXd& x_test);

// Gradient of the log-marginal likelihood over the unconstrained parameters,
// in the order reported by param_names().
struct ParamGradient {
  Eigen::VectorXd values;
  std::vector<std::string> names;
};

Eigen::VectorXd get_params(const LowRankGPModel& model);
void set_params(LowRankGPModel& model, const Eigen::VectorXd& params);
std::vector<std::string> param_names(const LowRankGPModel& model);

ParamGradient gradient_log_ml(const LowRankGPModel& model,
                              const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct FitOptions {
  int epochs = 300;
  double step_size = 1e-2;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool fit_standardizers = true;
};

struct FitResult {
  LowRankGPModel model;
  std::vector<double> objective_trace;          // one entry per epoch
  std::vector<Eigen::VectorXd> parameter_trace; // parameters after each epoch
};

// Full-batch Adam ascent on the log-marginal likelihood. Spectral frequencies
// (FGP) stay fixed; lengthscale changes rescale them deterministically.
FitResult fit(LowRankGPModel model, const Eigen::MatrixXd& x,
              const Eigen::VectorXd& y, const FitOptions& opt);

// Mean negative log predictive density under the per-point marginals.
double nlpd(const PredictiveDistribution& pred, const Eigen::VectorXd& y_test);

double rmse(const Eigen::VectorXd& pred_mean, const Eigen::VectorXd& y_test);

}  // namespace lrgp
