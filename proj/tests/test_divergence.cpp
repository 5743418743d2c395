#include <doctest.h>

#include <cmath>

#include "lrgp/divergence.hpp"
#include "lrgp/errors.hpp"
#include "lrgp/fourier.hpp"
#include "lrgp/kernels.hpp"
#include "lrgp/rng.hpp"
#include "support/oracles.hpp"

using namespace lrgp;
using lrgp::testing::random_spd;
using lrgp::testing::random_vector;

namespace {

Eigen::MatrixXd scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m << v;
  return m;
}

}  // namespace

TEST_CASE("zero-mean KL closed form") {
  CHECK(kl_zero_mean(scalar(1.0), scalar(1.0)) == doctest::Approx(0.0));
  CHECK(kl_zero_mean(scalar(2.0), scalar(1.0)) ==
        doctest::Approx(0.5 * (2.0 - 1.0 + std::log(0.5))).epsilon(1e-12));
  CHECK(kl_zero_mean(scalar(1.0), scalar(2.0)) ==
        doctest::Approx(0.5 * (0.5 - 1.0 + std::log(2.0))).epsilon(1e-12));
  CHECK_THROWS_AS(kl_zero_mean(scalar(1.0), scalar(0.0)), NumericalError);
}

TEST_CASE("KL nonnegativity on random PD pairs") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 20);
    const auto s1 = random_spd(rng, n);
    const auto s2 = random_spd(rng, n);
    CHECK(kl_zero_mean(s1, s2) >= -1e-10);
    CHECK(kl_full(random_vector(rng, n), s1, random_vector(rng, n), s2) >= -1e-10);
  }
}

TEST_CASE("full KL adds the quadratic mean term") {
  Eigen::VectorXd mu1(1), mu2(1);
  mu1 << 0.0;
  mu2 << 2.0;
  CHECK(kl_full(mu1, scalar(1.0), mu2, scalar(1.0)) == doctest::Approx(2.0));
  CHECK(kl_full(mu1, scalar(1.0), mu1, scalar(1.0)) == doctest::Approx(0.0));

  // translation invariance: only mu2 - mu1 matters when S1 = S2
  Rng rng(3);
  const auto s = random_spd(rng, 4);
  const auto a = random_vector(rng, 4);
  const auto b = random_vector(rng, 4);
  const auto c = random_vector(rng, 4);
  CHECK(kl_full(a, s, b, s) ==
        doctest::Approx(kl_full(a + c, s, b + c, s)).epsilon(1e-9));
}

TEST_CASE("psd domination checker") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  auto r = check_psd_domination(eye, eye, 1e-12);
  CHECK(r.dominates);
  CHECK(std::abs(r.min_eig) <= 1e-14);
  r = check_psd_domination(2 * eye, eye, 1e-12);
  CHECK(r.dominates);
  CHECK(r.min_eig == doctest::Approx(1.0));
  r = check_psd_domination(eye, 2 * eye, 1e-12);
  CHECK(!r.dominates);
  CHECK(r.min_eig == doctest::Approx(-1.0));

  Eigen::MatrixXd asym = eye;
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(check_psd_domination(asym, eye, 1e-12), std::invalid_argument);
}

TEST_CASE("trace bound values and domination of exact KL") {
  // S1 = S2, gamma = 0
  Rng rng(11);
  const auto s = random_spd(rng, 5);
  CHECK(kl_bound_trace(s, s, 0.0) == doctest::Approx(0.0).epsilon(1e-10));

  // scalar instance: 0.5 * (2 - 0) = 1 >= exact 0.15343
  CHECK(kl_bound_trace(scalar(2.0), scalar(1.0), 1.0) == doctest::Approx(1.0));

  // random precondition-satisfying pairs: bound >= exact KL
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 10);
    const auto s1 = random_spd(rng, n);
    // force the precondition: S2 = (1+gamma) S1 - PSD remainder
    const double gamma = rng.uniform(0.0, 1.0);
    const auto rem = random_spd(rng, n, 0.01);
    const double shrink = rng.uniform(0.0, 0.9);
    Eigen::MatrixXd s2 = (1.0 + gamma) * s1 - shrink * rem;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s2, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-6) continue;
    const double bound = kl_bound_trace(s1, s2, gamma);
    CHECK(bound >= kl_zero_mean(s1, s2) - 1e-9);
  }

  // violated precondition names the offending eigenvalue
  CHECK_THROWS_WITH_AS(kl_bound_trace(scalar(1.0), scalar(3.0), 0.5),
                       doctest::Contains("min eigenvalue"), NumericalError);
}

TEST_CASE("gamma-N bound") {
  CHECK(kl_bound_gamma_n(0.0, 100) == 0.0);
  CHECK(kl_bound_gamma_n(0.01, 5000) == doctest::Approx(50.0));
  CHECK_THROWS_AS(kl_bound_gamma_n(-0.1, 10), std::invalid_argument);

  // Sandwiched random instances: if (1+g)^-1 S1 <= S2 <= (1+g) S1 then
  // KL <= g N.
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 8);
    const auto s1 = random_spd(rng, n);
    const double eps = rng.uniform(0.01, 0.3);
    // S2 = (1 + t) S1 with |t| <= eps satisfies the sandwich with g = 2 eps
    // (the Fourier-instantiation shape gamma = 2 eps).
    const double t = rng.uniform(-eps, eps);
    const Eigen::MatrixXd s2 = (1.0 + t) * s1;
    const double gamma = 2.0 * eps;
    CHECK(check_psd_domination((1.0 + gamma) * s1, s2, 1e-9).dominates);
    CHECK(check_psd_domination(s2, s1 / (1.0 + gamma), 1e-9).dominates);
    CHECK(kl_zero_mean(s1, s2) <= kl_bound_gamma_n(gamma, n) + 1e-9);
  }
}

TEST_CASE("noise trace bound") {
  Rng rng17(17);
  const Eigen::MatrixXd k_same = random_spd(rng17, 4);
  CHECK(kl_bound_noise_trace(k_same, k_same, 0.0, 1.0) ==
        doctest::Approx(0.0).epsilon(1e-10));

  Eigen::MatrixXd k1 = Eigen::MatrixXd::Zero(2, 2);
  k1(0, 0) = 1.0;
  k1(1, 1) = 1.0;
  Eigen::MatrixXd k2 = Eigen::MatrixXd::Zero(2, 2);
  k2(0, 0) = 1.0;
  CHECK(kl_bound_noise_trace(k1, k2, 0.0, 1.0) == doctest::Approx(0.5));

  // Mercer-truncation shape (gamma = 0): Tr(K - Sigma) / (2 s2) >= exact KL
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_u64() % 10);
    const auto k = random_spd(rng, n, 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const int r = 1 + static_cast<int>(rng.next_u64() % (n - 1));
    const Eigen::MatrixXd v = es.eigenvectors().rightCols(r);
    const Eigen::MatrixXd sigma =
        v * es.eigenvalues().tail(r).cwiseMax(0.0).asDiagonal() * v.transpose();
    const double s2 = rng.uniform(0.1, 2.0);
    const double bound = kl_bound_noise_trace(k, sigma, 0.0, s2);
    Eigen::MatrixXd a1 = k, a2 = sigma;
    a1.diagonal().array() += s2;
    a2.diagonal().array() += s2;
    CHECK(bound >= kl_zero_mean(a1, a2) - 1e-9);
  }
}

TEST_CASE("Prop-4 roots: bisection against the defining equation") {
  auto ps = kl_to_param_bounds(0.0);
  CHECK(ps.b_root == 1.0);
  CHECK(ps.t_root == 1.0);
  CHECK(ps.mahalanobis_bound == 0.0);

  ps = kl_to_param_bounds(0.5);  // 2 gamma = 1
  CHECK(ps.b_root == doctest::Approx(0.1585943396).epsilon(1e-7));
  CHECK(ps.t_root == doctest::Approx(3.1461932206).epsilon(1e-7));

  CHECK_THROWS_AS(kl_to_param_bounds(-1e-9), std::invalid_argument);

  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const double gamma = std::exp(rng.uniform(-6.0, 2.5));
    const auto p = kl_to_param_bounds(gamma);
    const auto residual = [&](double x) {
      return std::abs(x - 1.0 - std::log(x) - 2.0 * gamma);
    };
    CHECK(residual(p.b_root) <= 1e-10);
    CHECK(residual(p.t_root) <= 1e-10);
    CHECK(p.b_root <= 1.0);
    CHECK(p.t_root >= 1.0);
    // footnote explicit bounds
    CHECK(p.b_root >=
          std::max(1.0 - 2.0 * std::sqrt(gamma), std::exp(-1.0 - 2.0 * gamma)) -
              1e-12);
    CHECK(p.t_root <=
          1.0 + std::max(std::sqrt(8.0 * gamma), 8.0 * gamma) + 1e-12);
    CHECK(p.mahalanobis_bound == doctest::Approx(std::sqrt(2.0 * gamma)));
  }
}

TEST_CASE("predictive KL chain rule") {
  Rng rng(29);

  // identical joints decompose to (0, 0)
  {
    const auto s = random_spd(rng, 6);
    GaussianPair pair{random_vector(rng, 6), Eigen::VectorXd(), s, s};
    pair.mu2 = pair.mu1;
    const auto dec = predictive_kl_decomposition(pair, 4);
    CHECK(std::abs(dec.marginal_kl) <= 1e-10);
    CHECK(std::abs(dec.expected_conditional_kl) <= 1e-10);
  }

  // equal train blocks: marginal zero, conditional carries everything
  {
    const int n = 3, m = 2;
    const auto joint1 = random_spd(rng, n + m);
    Eigen::MatrixXd joint2 = joint1;
    joint2.bottomRightCorner(m, m) += random_spd(rng, m, 0.2);
    GaussianPair pair{Eigen::VectorXd(), Eigen::VectorXd(), joint1, joint2};
    const auto dec = predictive_kl_decomposition(pair, n);
    CHECK(std::abs(dec.marginal_kl) <= 1e-10);
    CHECK(dec.expected_conditional_kl ==
          doctest::Approx(kl_zero_mean(joint1, joint2)).epsilon(1e-9));
  }

  // chain rule against the exact joint KL, with means
  for (int trial = 0; trial < 50; ++trial) {
    const int n_train = 2 + static_cast<int>(rng.next_u64() % 30);
    const int n_test = 1 + static_cast<int>(rng.next_u64() % 25);
    const int n = n_train + n_test;
    GaussianPair pair{random_vector(rng, n), random_vector(rng, n),
                      random_spd(rng, n), random_spd(rng, n)};
    const auto dec = predictive_kl_decomposition(pair, n_train);
    CHECK(dec.marginal_kl >= -1e-10);
    CHECK(dec.expected_conditional_kl >= -1e-10);
    const double joint = kl_full(pair.mu1, pair.s1, pair.mu2, pair.s2);
    CHECK(dec.marginal_kl + dec.expected_conditional_kl ==
          doctest::Approx(joint).epsilon(1e-9));
  }
}

TEST_CASE("predictive KL decomposition on exact-vs-low-rank GP joints") {
  // The intended use: joint covariances over (train, test) points under the
  // exact kernel and under a feature approximation of it.
  Rng rng(31);
  const int n_train = 30, n_test = 8, n = n_train + n_test;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 0.4 * rng.gaussian();
    x(i, 1) = 0.4 * rng.gaussian();
  }
  const auto spec = KernelSpec::gaussian_iso(1.0, 1.0, 2);
  const double s2 = 0.5;
  Eigen::MatrixXd joint_exact = kernel_matrix(spec, x);
  joint_exact.diagonal().array() += s2;

  const auto sample = sample_spectral_frequencies(spec, 32, 5);
  const Eigen::MatrixXd xi = rff_feature_matrix(x, sample);
  Eigen::MatrixXd joint_approx = xi * xi.transpose();
  joint_approx.diagonal().array() += s2;

  GaussianPair pair{Eigen::VectorXd(), Eigen::VectorXd(), joint_exact,
                    joint_approx};
  const auto dec = predictive_kl_decomposition(pair, n_train);
  const double joint_kl = kl_zero_mean(joint_exact, joint_approx);
  CHECK(dec.marginal_kl >= -1e-10);
  CHECK(dec.expected_conditional_kl >= -1e-10);
  CHECK(dec.marginal_kl + dec.expected_conditional_kl ==
        doctest::Approx(joint_kl).epsilon(1e-9));
  // both pieces sit under the joint divergence
  CHECK(dec.marginal_kl <= joint_kl + 1e-9);
  CHECK(dec.expected_conditional_kl <= joint_kl + 1e-9);
}
