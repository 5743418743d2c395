// lrgp: experiments and model fitting for low-rank GP regression.
//
// Subcommands: min-rank, kl-curve, bench, synth-curve, fit, predict.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrgp/errors.hpp"
#include "lrgp/gp.hpp"
#include "lrgp/harness/csv.hpp"
#include "lrgp/harness/experiments.hpp"
#include "lrgp/harness/model_io.hpp"
#include "lrgp/rng.hpp"

namespace {

using lrgp::harness::ApproxMethod;
using lrgp::harness::ExperimentConfig;
using lrgp::harness::ExperimentKind;

struct CliOptions {
  ExperimentConfig cfg;
  std::string method = "mercer";
  std::string kernel = "gaussian";
  // fit/predict
  std::string model_path;
  std::string fit_method = "mercer";
  int fit_rank = 10;
  int proj_dim = 0;
  bool ard = false;
};

void add_common_flags(CLI::App* sub, ExperimentConfig& cfg) {
  sub->add_option("--seed", cfg.seed, "Base RNG seed");
  sub->add_option("--out", cfg.out_path, "Results CSV path");
  sub->add_option("--threads", cfg.threads, "Worker threads for independent cells");
  sub->add_flag("--timing", cfg.timing,
                "Record real wall times (breaks byte-identical reruns)");
  sub->set_config("--config", "", "key=value file; command-line flags override it");
}

void add_study_flags(CLI::App* sub, CliOptions& opt) {
  auto& cfg = opt.cfg;
  sub->add_option("--method", opt.method, "mercer | fourier | mercer-empirical");
  sub->add_option("--kernel", opt.kernel, "gaussian | matern");
  sub->add_option("--n", cfg.n, "Number of sampled points");
  sub->add_option("--dims", cfg.dims, "Input dimensions to sweep");
  sub->add_option("--num-seeds", cfg.num_seeds, "Number of consecutive seeds");
  sub->add_option("--eps", cfg.eps_threshold, "KL target is eps * N");
  sub->add_option("--sigma-sq", cfg.sigma_sq, "Noise variance sigma^2");
  sub->add_option("--eps2", cfg.eps2, "Gaussian kernel lengthscale-inverse-square");
  sub->add_option("--signal-variance", cfg.signal_variance, "Gaussian kernel sf2");
  sub->add_option("--nu", cfg.matern_nu, "Matern smoothness (1/2, 3/2, 5/2)");
  sub->add_option("--alpha", cfg.matern_alpha, "Matern scale alpha");
  sub->add_option("--measure-alpha", cfg.measure_alpha,
                  "Mercer measure scale (default: derived from data scale)");
  sub->add_option("--dataset", cfg.dataset, "CSV path or generator name");
  sub->add_option("--target-col", cfg.target_column, "Target column name");
}

int run(int argc, char** argv) {
  CLI::App app{"Low-rank Gaussian process regression experiments"};
  app.require_subcommand(1);
  CliOptions opt;
  auto& cfg = opt.cfg;

  auto* min_rank = app.add_subcommand(
      "min-rank", "Lowest rank with KL(exact || low-rank) <= eps * N");
  add_study_flags(min_rank, opt);
  min_rank->add_option("--rmax", cfg.rmax, "Largest candidate rank (default N)");
  add_common_flags(min_rank, cfg);

  auto* kl_curve = app.add_subcommand("kl-curve", "Exact KL against rank");
  add_study_flags(kl_curve, opt);
  kl_curve->add_option("--ranks", cfg.rank_grid, "Rank grid")->required();
  kl_curve->add_option("--draws", cfg.draws, "Frequency draws averaged per seed");
  add_common_flags(kl_curve, cfg);

  auto* bench = app.add_subcommand(
      "bench", "Fit over 90/10 splits and report NLPD/RMSE");
  add_study_flags(bench, opt);
  bench->add_option("--splits", cfg.splits, "Number of random splits");
  bench->add_option("--ranks", cfg.rank_grid, "Rank grid");
  bench->add_option("--rank", cfg.rank, "Single rank (when no grid)");
  bench->add_option("--epochs", cfg.epochs, "Adam epochs");
  bench->add_option("--step-size", cfg.step_size, "Adam step size");
  bench->add_option("--proj-dim", cfg.proj_dim, "Projection dimension d (0 = none)");
  add_common_flags(bench, cfg);

  auto* synth = app.add_subcommand(
      "synth-curve", "Curve-recovery scenario: exact GP vs MGP vs FGP");
  synth->add_option("--rank-mgp", cfg.rank_mgp, "MGP rank");
  synth->add_option("--rank-fgp", cfg.rank_fgp, "FGP rank (even)");
  synth->add_option("--epochs", cfg.epochs, "Adam epochs");
  synth->add_option("--step-size", cfg.step_size, "Adam step size");
  synth->add_option("--grid-points", cfg.grid_points, "Prediction grid size");
  synth->add_option("--grid-lo", cfg.grid_lo, "Grid lower end");
  synth->add_option("--grid-hi", cfg.grid_hi, "Grid upper end");
  add_common_flags(synth, cfg);

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV dataset");
  fit_cmd->add_option("--data", cfg.dataset, "Training CSV")->required();
  fit_cmd->add_option("--target-col", cfg.target_column, "Target column name");
  fit_cmd->add_option("--method", opt.fit_method, "mercer | fourier | exact");
  fit_cmd->add_option("--rank", opt.fit_rank, "Feature rank");
  fit_cmd->add_option("--proj-dim", opt.proj_dim, "Projection dimension (0 = none)");
  fit_cmd->add_flag("--ard", opt.ard, "Per-dimension lengthscales");
  fit_cmd->add_option("--epochs", cfg.epochs, "Adam epochs");
  fit_cmd->add_option("--step-size", cfg.step_size, "Adam step size");
  add_common_flags(fit_cmd, cfg);

  auto* predict_cmd =
      app.add_subcommand("predict", "Predict with a previously fitted model");
  predict_cmd->add_option("--model", opt.model_path, "Model JSON from `fit`")
      ->required();
  predict_cmd->add_option("--data", cfg.dataset, "Feature CSV")->required();
  predict_cmd->add_option("--target-col", cfg.target_column,
                          "Target column (scored when present)");
  add_common_flags(predict_cmd, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse message
    return code == 0 ? 0 : 1;
  }

  if (min_rank->parsed() || kl_curve->parsed() || bench->parsed()) {
    cfg.method = lrgp::harness::approx_method_from_string(opt.method);
    cfg.kernel_family = opt.kernel == "matern" ? lrgp::KernelFamily::Matern
                                               : lrgp::KernelFamily::GaussianArd;
  }
  if (min_rank->parsed()) cfg.experiment = ExperimentKind::MinRank;
  if (kl_curve->parsed()) cfg.experiment = ExperimentKind::KlCurve;
  if (bench->parsed()) cfg.experiment = ExperimentKind::Bench;
  if (synth->parsed()) cfg.experiment = ExperimentKind::SynthCurve;

  if (min_rank->parsed() || kl_curve->parsed() || bench->parsed() ||
      synth->parsed()) {
    const auto rows = lrgp::harness::run_experiment(cfg);
    std::cerr << "wrote " << rows.size() << " rows to " << cfg.out_path << "\n";
    return 0;
  }

  if (fit_cmd->parsed()) {
    const auto ds = lrgp::harness::load_csv(cfg.dataset, cfg.target_column);
    const int d = static_cast<int>(ds.x.cols());
    lrgp::LowRankGPModel model;
    const std::uint64_t model_seed = lrgp::Rng(cfg.seed).stream("model-init").next_u64();
    if (opt.fit_method == "mercer") {
      model = lrgp::LowRankGPModel::mgp(d, opt.fit_rank, 0.1, opt.proj_dim,
                                        /*shared_lengthscale=*/!opt.ard, model_seed);
    } else if (opt.fit_method == "fourier") {
      model = lrgp::LowRankGPModel::fgp(d, opt.fit_rank, 0.1, model_seed,
                                        opt.proj_dim);
    } else if (opt.fit_method == "exact") {
      model = lrgp::LowRankGPModel::exact(
          lrgp::KernelSpec::gaussian_iso(1.0, 1.0, d), 0.1);
      model.shared_lengthscale = !opt.ard;
    } else {
      throw CLI::ValidationError("--method", "expected mercer, fourier, or exact");
    }
    lrgp::FitOptions fit_opt;
    fit_opt.epochs = cfg.epochs;
    fit_opt.step_size = cfg.step_size;
    fit_opt.seed = cfg.seed;
    auto result = lrgp::fit(std::move(model), ds.x, ds.y, fit_opt);
    const std::string out =
        cfg.out_path == "results.csv" ? "model.json" : cfg.out_path;
    lrgp::harness::save_model(out, {std::move(result.model), ds.x, ds.y});
    std::cerr << "final log-ML " << result.objective_trace.back() << ", wrote "
              << out << "\n";
    return 0;
  }

  if (predict_cmd->parsed()) {
    const auto saved = lrgp::harness::load_model(opt.model_path);
    const auto ds = lrgp::harness::load_csv(cfg.dataset, cfg.target_column);
    const auto d_model = saved.x_train.cols();
    Eigen::MatrixXd x_test;
    bool have_targets = false;
    if (ds.x.cols() == d_model) {
      x_test = ds.x;
      have_targets = true;
    } else if (ds.x.cols() + 1 == d_model && cfg.target_column.empty()) {
      // Feature-only file: the default target guess consumed the last
      // feature column; stitch it back.
      x_test.resize(ds.x.rows(), d_model);
      x_test << ds.x, ds.y;
    } else {
      throw lrgp::DataError(
          "predict: feature count differs from the training data");
    }
    const auto pred =
        lrgp::predict(saved.model, saved.x_train, saved.y_train, x_test);
    const std::string out =
        cfg.out_path == "results.csv" ? "predictions.csv" : cfg.out_path;
    std::ofstream os(out, std::ios::binary);
    if (!os) throw lrgp::DataError("cannot open output file: " + out);
    os << "mean,variance\n";
    char buf[64];
    for (int i = 0; i < pred.mean.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g", pred.mean(i),
                    pred.covariance(i, i));
      os << buf << '\n';
    }
    if (have_targets) {
      std::printf("nlpd %.6f\nrmse %.6f\n", lrgp::nlpd(pred, ds.y),
                  lrgp::rmse(pred.mean, ds.y));
    }
    std::cerr << "wrote " << out << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const lrgp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const lrgp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
