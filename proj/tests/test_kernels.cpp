#include <doctest.h>

#include <cmath>

#include "lrgp/kernels.hpp"
#include "lrgp/rng.hpp"
#include "support/oracles.hpp"

using namespace lrgp;
using lrgp::testing::random_matrix;
using lrgp::testing::random_vector;

namespace {
const double kPi = std::acos(-1.0);
}

TEST_CASE("gaussian kernel pointwise values") {
  Eigen::VectorXd x(1), y(1);
  x << 0.3;
  y << 0.3;
  const auto iso = KernelSpec::gaussian_iso(1.0, 2.0 * kPi * kPi, 1);
  CHECK(gaussian_kernel_eval(x, y, iso) == doctest::Approx(1.0));

  y << x(0) + 1.0;
  CHECK(gaussian_kernel_eval(x, y, iso) ==
        doctest::Approx(std::exp(-2.0 * kPi * kPi)).epsilon(1e-12));

  Eigen::VectorXd eps2(2);
  eps2 << 1.0, 4.0;
  const auto ard = KernelSpec::gaussian_ard(2.0, eps2);
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.5;
  b << 0.0, 0.0;
  CHECK(gaussian_kernel_eval(a, b, ard) ==
        doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("gaussian kernel errors on dimension mismatch") {
  const auto spec = KernelSpec::gaussian_iso(1.0, 1.0, 2);
  Eigen::VectorXd x(2), y(3);
  x.setZero();
  y.setZero();
  CHECK_THROWS_AS(gaussian_kernel_eval(x, y, spec), std::invalid_argument);
}

TEST_CASE("matern closed forms") {
  Eigen::VectorXd x(1), y(1);
  x << 0.0;
  y << 0.0;
  const auto m12 = KernelSpec::matern(0.5, 2.0);
  CHECK(matern_kernel_eval(x, y, m12) == doctest::Approx(1.0));
  y << 2.0;  // d = alpha
  CHECK(matern_kernel_eval(x, y, m12) == doctest::Approx(std::exp(-1.0)));

  // monotone decay
  double prev = 1.0;
  for (double d = 0.5; d < 20.0; d += 0.5) {
    y << d;
    const double v = matern_kernel_eval(x, y, m12);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-4);

  // half-integer forms against their formulas in u = d / alpha
  const auto m32 = KernelSpec::matern(1.5, 0.7);
  const auto m52 = KernelSpec::matern(2.5, 0.7);
  y << 1.1;
  const double u = 1.1 / 0.7;
  CHECK(matern_kernel_eval(x, y, m32) ==
        doctest::Approx((1 + u) * std::exp(-u)).epsilon(1e-12));
  CHECK(matern_kernel_eval(x, y, m52) ==
        doctest::Approx((1 + u + u * u / 3) * std::exp(-u)).epsilon(1e-12));

  CHECK_THROWS_AS(KernelSpec::matern(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("kernel matrix basics") {
  const auto spec = KernelSpec::gaussian_iso(1.7, 0.5, 3);
  Eigen::MatrixXd one(1, 3);
  one << 0.1, -0.2, 0.4;
  const auto k1 = kernel_matrix(spec, one);
  REQUIRE(k1.rows() == 1);
  CHECK(k1(0, 0) == doctest::Approx(1.7));

  Eigen::MatrixXd dup(2, 3);
  dup.row(0) = one.row(0);
  dup.row(1) = one.row(0);
  const auto k2 = kernel_matrix(spec, dup);
  CHECK(k2(0, 1) == doctest::Approx(1.7));
  CHECK(k2(1, 0) == doctest::Approx(1.7));
}

TEST_CASE("kernel matrix symmetry and PSD") {
  Rng rng(11);
  const auto spec = KernelSpec::gaussian_iso(1.0, 1.3, 4);
  const auto x = random_matrix(rng, 50, 4);
  const auto k = kernel_matrix(spec, x);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);

  const auto mspec = KernelSpec::matern(0.5, 1.0);
  const auto km = kernel_matrix(mspec, x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esm(km, Eigen::EigenvaluesOnly);
  CHECK(esm.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("stationarity under random shifts") {
  Rng rng(13);
  const auto gspec = KernelSpec::gaussian_iso(1.0, 2.0, 3);
  const auto mspec = KernelSpec::matern(1.5, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = random_vector(rng, 3);
    const Eigen::VectorXd y = random_vector(rng, 3);
    const Eigen::VectorXd c = random_vector(rng, 3);
    CHECK(gaussian_kernel_eval(x + c, y + c, gspec) ==
          doctest::Approx(gaussian_kernel_eval(x, y, gspec)).epsilon(1e-12));
    CHECK(matern_kernel_eval(x + c, y + c, mspec) ==
          doctest::Approx(matern_kernel_eval(x, y, mspec)).epsilon(1e-12));
  }
}

TEST_CASE("signal variance scales the gaussian kernel linearly") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const double s = std::exp(rng.uniform(-2.0, 2.0));
    const Eigen::VectorXd x = random_vector(rng, 2);
    const Eigen::VectorXd y = random_vector(rng, 2);
    const auto unit = KernelSpec::gaussian_iso(1.0, 0.9, 2);
    const auto scaled = KernelSpec::gaussian_iso(s, 0.9, 2);
    CHECK(gaussian_kernel_eval(x, y, scaled) ==
          doctest::Approx(s * gaussian_kernel_eval(x, y, unit)).epsilon(1e-12));
  }
}

TEST_CASE("cross kernel matrix matches pointwise evaluation") {
  Rng rng(19);
  const auto spec = KernelSpec::gaussian_iso(1.0, 1.0, 2);
  const auto a = random_matrix(rng, 4, 2);
  const auto b = random_matrix(rng, 6, 2);
  const auto k = kernel_matrix(spec, a, b);
  REQUIRE(k.rows() == 4);
  REQUIRE(k.cols() == 6);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) {
      CHECK(k(i, j) ==
            doctest::Approx(gaussian_kernel_eval(a.row(i), b.row(j), spec)));
    }
  }
}
