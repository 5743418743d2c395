#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrgp/harness/csv.hpp"
#include "lrgp/kernels.hpp"

namespace lrgp::harness {

enum class ExperimentKind { MinRank, KlCurve, Bench, SynthCurve };
enum class ApproxMethod { Mercer, Fourier, MercerEmpirical };

ExperimentKind experiment_kind_from_string(const std::string& s);
ApproxMethod approx_method_from_string(const std::string& s);
std::string to_string(ExperimentKind k);
std::string to_string(ApproxMethod m);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::KlCurve;
  ApproxMethod method = ApproxMethod::Mercer;

  // Kernel under study (simulated experiments). The Matern scale defaults to
  // the length scale of the default Gaussian kernel exp(-2 pi^2 d^2), i.e.
  // ell = 1/(2 pi), so the two families are compared at matched smoothness.
  KernelFamily kernel_family = KernelFamily::GaussianArd;
  double signal_variance = 1.0;
  double eps2 = 2.0 * 3.14159265358979323846 * 3.14159265358979323846;
  double matern_nu = 0.5;
  double matern_alpha = 1.0 / (2.0 * 3.14159265358979323846);

  int n = 500;
  std::vector<int> dims = {1};
  std::uint64_t seed = 0;
  int num_seeds = 1;

  double eps_threshold = 1e-2;  // KL target is eps_threshold * N
  double sigma_sq = 1.0;
  std::vector<int> rank_grid;
  int rmax = -1;                 // default: N
  int draws = 1;                 // Fourier KL averaging per seed
  double measure_alpha = 0.0;    // 0: derive from the data scale

  // Benchmark / fitting.
  std::string dataset;           // CSV path or generator name
  std::string target_column;
  int splits = 5;
  int epochs = 300;
  double step_size = 1e-2;
  int proj_dim = 0;
  int rank = 10;

  // Synthetic-curve scenario.
  int rank_mgp = 34;
  int rank_fgp = 68;
  int grid_points = 101;
  double grid_lo = -2.0;
  double grid_hi = 2.0;

  std::string out_path = "results.csv";
  int threads = 1;
  bool timing = false;  // real wall times break byte-level determinism
};

struct ResultRow {
  std::string experiment;
  std::uint64_t seed = 0;
  int dim = 0;
  int rank = 0;
  double value = 0.0;
  double wall_time_ms = 0.0;
};

// Lowest rank r (even-only for Fourier) with
// KL(N(0, K + s2 I) || N(0, Sigma_r + s2 I)) <= eps_threshold * N, for one
// (dim, seed) cell; returns rmax + 1 when no rank in range succeeds.
int min_rank_search(const ExperimentConfig& cfg, int dim, std::uint64_t seed);

// Exact KL per (seed, rank) cell over the rank grid.
std::vector<ResultRow> kl_curve(const ExperimentConfig& cfg);

// Fit/evaluate over random 90/10 splits; emits per-split NLPD and RMSE rows
// plus mean/std aggregate rows.
std::vector<ResultRow> run_benchmark(const ExperimentConfig& cfg);

// Curve-recovery scenario: exact GP vs MGP vs FGP on 25 noiseless
// samples of a fixed 1-D curve; emits grid predictions and grid RMSE rows.
std::vector<ResultRow> synth_curve(const ExperimentConfig& cfg);

double synth_curve_function(double x);

// Dispatches on cfg.experiment, runs all (seed, dim) cells (in parallel when
// cfg.threads > 1), sorts rows deterministically, writes the results CSV and
// the manifest JSON, and returns the rows.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_manifest(const ExperimentConfig& cfg);
void sort_rows(std::vector<ResultRow>& rows);

}  // namespace lrgp::harness
