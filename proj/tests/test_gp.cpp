#include <doctest.h>

#include <chrono>
#include <cmath>

#include "lrgp/errors.hpp"
#include "lrgp/gp.hpp"
#include "lrgp/rng.hpp"
#include "support/oracles.hpp"

using namespace lrgp;
using lrgp::testing::dense_logdet;
using lrgp::testing::dense_solve;
using lrgp::testing::random_matrix;
using lrgp::testing::random_vector;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

LowRankGPModel random_mgp(Rng& rng, int data_dim, int rank, int proj_dim) {
  auto m = LowRankGPModel::mgp(data_dim, rank, std::exp(rng.uniform(-2.5, 0.0)),
                               proj_dim, /*shared_lengthscale=*/proj_dim > 0,
                               rng.next_u64());
  m.kernel.signal_variance = std::exp(rng.uniform(-1.0, 1.0));
  m.kernel.lengthscale_inverse_sq.setConstant(std::exp(rng.uniform(-1.0, 1.0)));
  if (!m.shared_lengthscale) {
    for (int j = 0; j < m.kernel.input_dim(); ++j) {
      m.kernel.lengthscale_inverse_sq(j) = std::exp(rng.uniform(-1.0, 1.0));
    }
  }
  if (m.projection) *m.projection += 0.1 * random_matrix(rng, data_dim, proj_dim);
  return m;
}

LowRankGPModel random_fgp(Rng& rng, int data_dim, int rank, int proj_dim) {
  auto m = LowRankGPModel::fgp(data_dim, rank, std::exp(rng.uniform(-2.5, 0.0)),
                               rng.next_u64(), proj_dim);
  m.kernel.signal_variance = std::exp(rng.uniform(-1.0, 1.0));
  for (int j = 0; j < m.kernel.input_dim(); ++j) {
    m.kernel.lengthscale_inverse_sq(j) = std::exp(rng.uniform(-1.0, 1.0));
  }
  if (m.projection) *m.projection += 0.1 * random_matrix(rng, data_dim, proj_dim);
  return m;
}

void check_gradient_fd(const LowRankGPModel& model, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y, double tol) {
  const auto g = gradient_log_ml(model, x, y);
  const Eigen::VectorXd theta = get_params(model);
  for (int i = 0; i < theta.size(); ++i) {
    const double h = 1e-5;
    Eigen::VectorXd tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    LowRankGPModel mp = model, mm = model;
    set_params(mp, tp);
    set_params(mm, tm);
    const double fd =
        (log_marginal_likelihood(mp, x, y) - log_marginal_likelihood(mm, x, y)) /
        (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(g.values(i)), 1.0});
    INFO("param ", g.names[i], " analytic ", g.values(i), " fd ", fd);
    CHECK(std::abs(g.values(i) - fd) / denom <= tol);
  }
}

}  // namespace

TEST_CASE("lowrank_solve matches the dense oracle") {
  Rng rng(1);
  // null factor: sigma^-2 V
  {
    const Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(7, 3);
    const Eigen::MatrixXd v = random_matrix(rng, 7, 2);
    const auto out = lowrank_solve(xi, 0.5, v);
    CHECK((out - v / 0.5).cwiseAbs().maxCoeff() <= 1e-14);
  }
  // Sherman-Morrison closed form for r = 1
  {
    const Eigen::VectorXd v = random_vector(rng, 9);
    const double s2 = 0.7;
    const Eigen::MatrixXd xi = v;
    const Eigen::VectorXd out = lowrank_solve(xi, s2, v);
    const Eigen::VectorXd expect =
        (v - v * (v.squaredNorm() / (s2 + v.squaredNorm()))) / s2;
    CHECK((out - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 20 + static_cast<int>(rng.next_u64() % 180);
    const int r = 1 + static_cast<int>(rng.next_u64() % 10);
    const int k = 1 + static_cast<int>(rng.next_u64() % 4);
    const auto xi = random_matrix(rng, n, r);
    const auto v = random_matrix(rng, n, k);
    const double s2 = rng.uniform(0.1, 10.0);
    const auto fast = lowrank_solve(xi, s2, v);
    const auto slow = dense_solve(xi, s2, v);
    CHECK((fast - slow).norm() / slow.norm() <= 1e-9);
  }
  CHECK_THROWS_AS(lowrank_solve(Eigen::MatrixXd::Zero(3, 1), 0.0,
                                Eigen::MatrixXd::Zero(3, 1)),
                  std::invalid_argument);
}

TEST_CASE("lowrank_logdet matches the dense oracle") {
  Rng rng(2);
  CHECK(lowrank_logdet(Eigen::MatrixXd::Zero(5, 2), 0.3) ==
        doctest::Approx(5.0 * std::log(0.3)).epsilon(1e-12));
  // single unit column at sigma2 = 1: log 2
  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(6, 1);
  e1(0, 0) = 1.0;
  CHECK(lowrank_logdet(e1, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 20 + static_cast<int>(rng.next_u64() % 180);
    const int r = 1 + static_cast<int>(rng.next_u64() % 10);
    const auto xi = random_matrix(rng, n, r);
    const double s2 = rng.uniform(0.1, 10.0);
    CHECK(lowrank_logdet(xi, s2) ==
          doctest::Approx(dense_logdet(xi, s2)).epsilon(1e-8));
  }
}

TEST_CASE("log marginal likelihood scalar cases") {
  // N=1, Sigma=0, sigma2=1: feature matrix contributes nothing
  auto m = LowRankGPModel::mgp(1, 1, 1.0);
  m.kernel.signal_variance = 1e-300;  // effectively zero feature scale
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  Eigen::VectorXd y0(1), y2(1);
  y0 << 0.0;
  y2 << 2.0;
  CHECK(log_marginal_likelihood(m, x, y0) ==
        doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-9));
  CHECK(log_marginal_likelihood(m, x, y2) ==
        doctest::Approx(-2.0 - 0.5 * kLog2Pi).epsilon(1e-9));

  Eigen::VectorXd bad(1);
  bad << std::nan("");
  CHECK_THROWS_AS(log_marginal_likelihood(m, x, bad), NumericalError);
}

TEST_CASE("low-rank likelihood equals the dense formula on the same Sigma") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 50 + static_cast<int>(rng.next_u64() % 150);
    const auto x = random_matrix(rng, n, 2);
    const auto y = random_vector(rng, n);
    auto model = random_mgp(rng, 2, 10, 0);
    const auto xi = model_feature_matrix(model, model.input_standardizer.apply(x));
    const double s2 = model.noise_variance;
    Eigen::MatrixXd a = xi * xi.transpose();
    a.diagonal().array() += s2;
    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    const double dense = -0.5 * y.dot(llt.solve(y)) -
                         llt.matrixLLT().diagonal().array().log().sum() -
                         0.5 * n * kLog2Pi;
    CHECK(log_marginal_likelihood(model, x, y) ==
          doctest::Approx(dense).epsilon(1e-8));
  }
}

TEST_CASE("predict matches the dense computation with kernel Xi Xi'") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 80, m = 12, r = 10;
    const auto x_tr = random_matrix(rng, n, 3);
    const auto y_tr = random_vector(rng, n);
    const auto x_te = random_matrix(rng, m, 3);
    auto model = random_fgp(rng, 3, r, 0);

    const auto pred = predict(model, x_tr, y_tr, x_te);

    const auto xi_tr = model_feature_matrix(model, x_tr);
    const auto xi_te = model_feature_matrix(model, x_te);
    const double s2 = model.noise_variance;
    Eigen::MatrixXd a = xi_tr * xi_tr.transpose();
    a.diagonal().array() += s2;
    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    const Eigen::MatrixXd k_star = xi_te * xi_tr.transpose();
    const Eigen::VectorXd mean = k_star * llt.solve(y_tr);
    Eigen::MatrixXd cov =
        xi_te * xi_te.transpose() - k_star * llt.solve(k_star.transpose());
    cov.diagonal().array() += s2;

    CHECK((pred.mean - mean).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((pred.covariance - cov).cwiseAbs().maxCoeff() <= 1e-8);

    // noise floor on the predictive covariance
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pred.covariance,
                                                      Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= s2 - 1e-8);
  }
}

TEST_CASE("far-away test point reverts to the prior") {
  auto model = LowRankGPModel::exact(KernelSpec::gaussian_iso(1.0, 1.0, 1), 0.5);
  Eigen::MatrixXd x_tr(3, 1), x_te(1, 1);
  x_tr << -0.5, 0.0, 0.5;
  x_te << 1000.0;
  Eigen::VectorXd y_tr(3);
  y_tr << 1.0, -1.0, 0.5;
  const auto pred = predict(model, x_tr, y_tr, x_te);
  CHECK(std::abs(pred.mean(0)) <= 1e-8);
  CHECK(pred.covariance(0, 0) == doctest::Approx(1.0 + 0.5).epsilon(1e-9));
}

TEST_CASE("noiseless exact GP interpolates at a train point") {
  Rng rng(5);
  const auto x = random_matrix(rng, 12, 1);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) y(i) = std::sin(2.0 * x(i, 0));
  auto model = LowRankGPModel::exact(KernelSpec::gaussian_iso(1.0, 1.0, 1), 1e-10);
  const auto pred = predict(model, x, y, x.topRows(1));
  CHECK(pred.mean(0) == doctest::Approx(y(0)).epsilon(1e-5));
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(6);
  const int n = 60;

  SUBCASE("exact gaussian, ard") {
    const auto x = random_matrix(rng, n, 3);
    const auto y = random_vector(rng, n);
    auto model = LowRankGPModel::exact(KernelSpec::gaussian_iso(0.8, 1.3, 3), 0.4);
    model.shared_lengthscale = false;
    check_gradient_fd(model, x, y, 1e-4);
  }
  SUBCASE("exact gaussian, shared lengthscale") {
    const auto x = random_matrix(rng, n, 3);
    const auto y = random_vector(rng, n);
    auto model = LowRankGPModel::exact(KernelSpec::gaussian_iso(1.1, 0.6, 3), 0.3);
    model.shared_lengthscale = true;
    check_gradient_fd(model, x, y, 1e-4);
  }
  SUBCASE("fgp, shared lengthscale") {
    const auto x = random_matrix(rng, n, 3);
    const auto y = random_vector(rng, n);
    auto model = LowRankGPModel::fgp(3, 10, 0.25, 77);
    model.shared_lengthscale = true;
    check_gradient_fd(model, x, y, 1e-4);
  }
  SUBCASE("exact matern") {
    const auto x = random_matrix(rng, n, 2);
    const auto y = random_vector(rng, n);
    auto model = LowRankGPModel::exact(KernelSpec::matern(1.5, 0.9), 0.3);
    check_gradient_fd(model, x, y, 1e-4);
  }
  SUBCASE("mgp without projection") {
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_matrix(rng, n, 2);
      const auto y = random_vector(rng, n);
      check_gradient_fd(random_mgp(rng, 2, 8, 0), x, y, 1e-4);
    }
  }
  SUBCASE("mgp with projection and z-standardization") {
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_matrix(rng, n, 5);
      const auto y = random_vector(rng, n);
      check_gradient_fd(random_mgp(rng, 5, 12, 2), x, y, 1e-4);
    }
  }
  SUBCASE("fgp with and without projection") {
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_matrix(rng, n, 4);
      const auto y = random_vector(rng, n);
      check_gradient_fd(random_fgp(rng, 4, 12, 0), x, y, 1e-4);
      check_gradient_fd(random_fgp(rng, 4, 12, 2), x, y, 1e-4);
    }
  }
}

TEST_CASE("noise gradient on a feature-free model") {
  // Sigma = 0: d/dlog s2 of the scalar Gaussian log-density is (y^2/s2 - 1)/2
  auto m = LowRankGPModel::mgp(1, 1, 0.7);
  m.kernel.signal_variance = 1e-300;
  Eigen::MatrixXd x(1, 1);
  x << 0.3;
  Eigen::VectorXd y(1);
  y << 1.4;
  const auto g = gradient_log_ml(m, x, y);
  CHECK(g.values(0) ==
        doctest::Approx(0.5 * (1.4 * 1.4 / 0.7 - 1.0)).epsilon(1e-9));
}

TEST_CASE("gradient at a 1-D stationary point is ~0") {
  // one trainable direction: noise only, on data with matching variance
  Rng rng(8);
  const int n = 40;
  Eigen::MatrixXd x = random_matrix(rng, n, 1);
  Eigen::VectorXd y = random_vector(rng, n);
  auto probe = LowRankGPModel::mgp(1, 1, 1.0);
  probe.kernel.signal_variance = 1e-300;
  // grid search over log sigma2 to find the 1-D maximizer, then check the
  // analytic gradient there
  double best = -1e300, best_ls = 0.0;
  for (double ls = -2.0; ls <= 2.0; ls += 1e-4) {
    probe.noise_variance = std::exp(ls);
    const double v = log_marginal_likelihood(probe, x, y);
    if (v > best) {
      best = v;
      best_ls = ls;
    }
  }
  probe.noise_variance = std::exp(best_ls);
  const auto g = gradient_log_ml(probe, x, y);
  CHECK(std::abs(g.values(0)) <= 1e-3);  // grid resolution limits sharpness
  // refine by bisection on the derivative sign for the 1e-6 claim
  double lo = best_ls - 1e-3, hi = best_ls + 1e-3;
  for (int it = 0; it < 60; ++it) {
    probe.noise_variance = std::exp(0.5 * (lo + hi));
    if (gradient_log_ml(probe, x, y).values(0) > 0) {
      lo = 0.5 * (lo + hi);
    } else {
      hi = 0.5 * (lo + hi);
    }
  }
  probe.noise_variance = std::exp(0.5 * (lo + hi));
  CHECK(std::abs(gradient_log_ml(probe, x, y).values(0)) <= 1e-6);
}

TEST_CASE("fit: deterministic, trace recorded, noise shrinks on constant y") {
  Rng rng(9);
  const int n = 50;
  const auto x = random_matrix(rng, n, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);  // zero-variance targets

  auto model = LowRankGPModel::mgp(2, 6, 10.0);  // large initial noise
  FitOptions opt;
  opt.epochs = 60;
  opt.fit_standardizers = false;
  const auto fr1 = fit(model, x, y, opt);
  const auto fr2 = fit(model, x, y, opt);
  REQUIRE(fr1.parameter_trace.size() == fr2.parameter_trace.size());
  for (std::size_t i = 0; i < fr1.parameter_trace.size(); ++i) {
    CHECK((fr1.parameter_trace[i] - fr2.parameter_trace[i]).cwiseAbs().maxCoeff() ==
          0.0);
  }
  // sigma2 decreases in a majority of steps
  int down = 0, total = 0;
  for (std::size_t i = 1; i < fr1.parameter_trace.size(); ++i) {
    down += fr1.parameter_trace[i](0) < fr1.parameter_trace[i - 1](0) ? 1 : 0;
    ++total;
  }
  CHECK(down * 2 > total);
  CHECK(fr1.model.noise_variance < 10.0);
  CHECK(static_cast<int>(fr1.objective_trace.size()) == opt.epochs + 1);
}

TEST_CASE("fit rejects non-finite initial objectives") {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 1.0, std::nan("");
  auto model = LowRankGPModel::mgp(1, 2, 0.1);
  FitOptions opt;
  opt.epochs = 1;
  CHECK_THROWS_AS(fit(model, x, y, opt), NumericalError);
}

TEST_CASE("nlpd values and monotonicity") {
  PredictiveDistribution pred;
  pred.mean = Eigen::VectorXd::Constant(4, 1.5);
  pred.covariance = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 1.5);
  CHECK(nlpd(pred, y) == doctest::Approx(0.5 * kLog2Pi).epsilon(1e-12));

  pred.covariance *= std::exp(1.0);
  CHECK(nlpd(pred, y) == doctest::Approx(0.5 * (1.0 + kLog2Pi)).epsilon(1e-12));

  pred.covariance = Eigen::MatrixXd::Identity(4, 4);
  const double base = nlpd(pred, y.array() + 0.5);
  const double farther = nlpd(pred, y.array() + 1.0);
  CHECK(farther > base);

  pred.covariance(2, 2) = 0.0;
  CHECK_THROWS_AS(nlpd(pred, y), NumericalError);
}

TEST_CASE("rmse values") {
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 3.0, 4.0;
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(25.0 / 2.0)).epsilon(1e-12));
  CHECK(rmse(a.array() + 2.0, a) == doctest::Approx(2.0));
  Eigen::VectorXd c(3);
  c.setZero();
  CHECK_THROWS_AS(rmse(a, c), std::invalid_argument);
}

TEST_CASE("high-rank MGP likelihood converges to the exact GP likelihood") {
  // points drawn from the reference measure; with the eigensystem's geometric
  // decay a rank-80 truncation reproduces the kernel matrix to ~1e-12, so the
  // feature-path likelihood must agree with the dense kernel path.
  Rng rng(44);
  const int n = 60;
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.gaussian();  // std normal measure
  const auto y = random_vector(rng, n);

  auto low = LowRankGPModel::mgp(1, 80, 0.3);  // alpha = 1/sqrt(2) matches N(0,1)
  low.kernel.lengthscale_inverse_sq.setConstant(0.9);
  auto exact = LowRankGPModel::exact(KernelSpec::gaussian_iso(1.0, 0.9, 1), 0.3);

  CHECK(log_marginal_likelihood(low, x, y) ==
        doctest::Approx(log_marginal_likelihood(exact, x, y)).epsilon(1e-8));

  Eigen::MatrixXd x_test(5, 1);
  x_test << -1.2, -0.3, 0.0, 0.7, 1.5;
  const auto p_low = predict(low, x, y, x_test);
  const auto p_exact = predict(exact, x, y, x_test);
  CHECK((p_low.mean - p_exact.mean).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((p_low.covariance - p_exact.covariance).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("low-rank likelihood cost grows about linearly in N") {
  Rng rng(10);
  const int r = 50;
  auto model = LowRankGPModel::fgp(3, r, 0.3, 123);
  const auto time_at = [&](int n) {
    const auto x = random_matrix(rng, n, 3);
    const auto y = random_vector(rng, n);
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      (void)log_marginal_likelihood(model, x, y);
      const double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
      best = std::min(best, ms);
    }
    return best;
  };
  const double t1 = time_at(10000);
  const double t2 = time_at(20000);
  CHECK(t2 <= std::max(2.5 * t1, t1 + 5.0));  // linear growth, timer-noise floor
}
