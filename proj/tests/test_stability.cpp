#include <doctest.h>

#include <chrono>

#include "oracles.hpp"
#include "voltvar/errors.hpp"
#include "voltvar/stability.hpp"

using namespace voltvar;

namespace {
Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }
Matrix two_by_two() {
  Matrix x(2, 2);
  x << 0.4, -0.1, -0.2, 0.5;
  return x;
}
}  // namespace

TEST_CASE("spectral check") {
  const auto zero = spectral_check(scalar(0.5), Vector::Zero(1), 0.9);
  CHECK(zero.spectral_norm == 0.0);
  CHECK(zero.spectral_pass);
  const auto edge = spectral_check(scalar(0.5), Vector::Ones(1), 0.5);
  CHECK(edge.spectral_norm == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(edge.spectral_pass);
  CHECK_FALSE(spectral_check(scalar(0.5), Vector::Constant(1, 1.2), 0.5).spectral_pass);
  CHECK_THROWS_AS(spectral_check(scalar(0.5), Vector::Ones(1), 0.0), ValidationError);
  CHECK_THROWS_AS(spectral_check(scalar(0.5), Vector::Ones(1), 1.0), ValidationError);
}

TEST_CASE("single-phase polytopic check") {
  CHECK(polytopic_check_1p(scalar(0.5), Vector::Ones(1), 0.5));
  CHECK_FALSE(polytopic_check_1p(scalar(0.5), Vector::Ones(1), 0.6));
  CHECK(polytopic_check_1p(scalar(0.5), Vector::Zero(1), 0.99));
  const auto mp = FeederModel::multiphase(Matrix::Zero(2, 2), two_by_two(), 1.0, {"A", "B"});
  CHECK_THROWS_AS(polytopic_check_1p(mp, Vector::Ones(2), 0.3), KindError);
}

TEST_CASE("multiphase polytopic check") {
  CHECK(polytopic_check_3p(two_by_two(), Vector::Ones(2), 0.3));
  CHECK_FALSE(polytopic_check_3p(two_by_two(), Vector::Constant(2, 1.5), 0.3));
  CHECK(polytopic_check_3p(two_by_two(), Vector::Zero(2), 0.3));
}

TEST_CASE("spectral norm by power iteration agrees with the SVD") {
  oracle::Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = oracle::uniform_int(rng, 1, 10);
    Matrix a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = oracle::uniform(rng, -1, 1);
    const double svd = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
    CHECK(spectral_norm(a) == doctest::Approx(svd).epsilon(1e-12));
    CHECK(spectral_norm_power_iteration(a) == doctest::Approx(svd).epsilon(1e-6));
  }
}

TEST_CASE("min_depth") {
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(min_depth(0.463, 0.1, 0.3, 1e-4) == 20);
  const int fine = min_depth(0.463, 0.1, 0.3, 1e-6);
  CHECK((fine == 32 || fine == 33));
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(1));
  CHECK(min_depth(0.463, 0.1, 0.3, 2 * 0.463 * 0.1) == 0);
  CHECK(min_depth(0.463, 0.1, 0.3, 1.0) == 0);
  // Monotone in both accuracy and margin.
  int prev = 0;
  for (double e1 : {1e-2, 1e-3, 1e-4, 1e-6, 1e-9}) {
    const int t = min_depth(0.463, 0.1, 0.3, e1);
    CHECK(t >= prev);
    prev = t;
  }
  prev = 1 << 30;
  for (double eps : {0.05, 0.1, 0.3, 0.5, 0.9}) {
    const int t = min_depth(0.463, 0.1, eps, 1e-4);
    CHECK(t <= prev);
    prev = t;
  }
  // The bound holds at T and fails at T - 1.
  const int t = min_depth(0.463, 0.1, 0.3, 1e-4);
  CHECK(2 * 0.463 * 0.1 * std::pow(0.7, t) <= 1e-4);
  CHECK(2 * 0.463 * 0.1 * std::pow(0.7, t - 1) > 1e-4);
  CHECK_THROWS_AS(min_depth(0.463, 0.1, 0.3, 0.0), ValidationError);
}

TEST_CASE("polytopic restriction implies the spectral bound") {
  oracle::Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = oracle::uniform_int(rng, 1, 8);
    const double eps = oracle::uniform(rng, 0.05, 0.95);
    const auto sp = oracle::random_radial_feeder(rng, n);
    const auto mask = oracle::random_mask(rng, n);
    const Vector a1 = oracle::random_polytopic_alpha(rng, sp.reactance(), eps, mask);
    REQUIRE(polytopic_check_1p(sp, a1, eps));
    const auto c1 = certify(sp, a1, eps);
    CHECK(c1.polytopic_pass);
    CHECK(c1.spectral_pass);

    const auto mp = oracle::random_multiphase_feeder(rng, n);
    const Vector a3 = oracle::random_polytopic_alpha(rng, mp.reactance(), eps, mask);
    const auto c3 = certify(mp, a3, eps);
    CHECK(c3.kind == FeederKind::Multiphase);
    CHECK(c3.polytopic_pass);
    CHECK(c3.spectral_pass);
  }
}
