#include <doctest.h>

#include "oracles.hpp"
#include "voltvar/errors.hpp"
#include "voltvar/dynamics.hpp"

using namespace voltvar;

namespace {

FeederModel scalar_model() {
  return FeederModel::single_phase(Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.5), 1.0);
}

RuleParams scalar_rule() {
  RuleParams p;
  p.vref = Vector::Ones(1);
  p.delta = Vector::Zero(1);
  p.sigma = Vector::Ones(1);
  p.qbar = Vector::Ones(1);
  p.qhat = Vector::Ones(1);
  p.der_mask = all_ders(1);
  return p;
}

}  // namespace

TEST_CASE("single steps") {
  const auto m = scalar_model();
  const auto p = scalar_rule();
  const auto s = scenario_from_vtilde(m, Vector::Constant(1, 1.06));
  const auto r = step(m, p, s, Vector::Zero(1));
  CHECK(r.v(0) == 1.06);
  CHECK(r.q_next(0) == doctest::Approx(-0.06).epsilon(1e-14));
  CHECK(step(m, p, scenario_from_vtilde(m, Vector::Ones(1)), Vector::Zero(1)).q_next(0) == 0.0);
  CHECK(step(m, p, scenario_from_vtilde(m, Vector::Constant(1, 3.0)), Vector::Zero(1)).q_next(0) == -1.0);
}

TEST_CASE("scalar closed loop") {
  const auto m = scalar_model();
  const auto p = scalar_rule();
  const auto s = scenario_from_vtilde(m, Vector::Constant(1, 1.06));
  const auto trace = simulate(m, p, s, 200, 1e-14);
  CHECK(trace.converged);
  CHECK(trace.setpoints.back()(0) == doctest::Approx(-0.04).epsilon(1e-12));
  CHECK(trace.voltages.back()(0) == doctest::Approx(1.04).epsilon(1e-12));
  for (std::size_t t = 0; t < trace.voltages.size(); ++t)
    CHECK(std::abs(trace.voltages[t](0) - (0.5 * trace.setpoints[t](0) + 1.06)) < 1e-15);
  for (std::size_t t = 0; t + 1 < trace.setpoints.size(); ++t)
    CHECK(trace.setpoints[t + 1](0) == eval_rule(p, 0, trace.voltages[t](0)));

  const auto fp = equilibrium_fixed_point(m, p, s);
  CHECK(std::abs(fp.q_star(0) + 0.04) < 1e-9);
  CHECK(fp.objective.has_value());
  CHECK(*fp.objective == doctest::Approx(-0.0012).epsilon(1e-9));
  const auto cd = equilibrium_coordinate_descent(m, p, s);
  CHECK(std::abs(cd.q_star(0) + 0.04) < 1e-9);

  const auto flat = simulate(m, p, scenario_from_vtilde(m, Vector::Ones(1)), 50);
  CHECK(flat.converged);
  CHECK(flat.settle_steps == 1);
  CHECK(flat.setpoints.back()(0) == 0.0);
  CHECK(equilibrium_fixed_point(m, p, scenario_from_vtilde(m, Vector::Ones(1))).q_star(0) == 0.0);
  CHECK(equilibrium_coordinate_descent(m, p, scenario_from_vtilde(m, Vector::Ones(1))).q_star(0) == 0.0);
}

TEST_CASE("inner objective") {
  const auto m = scalar_model();
  const auto p = scalar_rule();
  const auto s = scenario_from_vtilde(m, Vector::Constant(1, 1.06));
  CHECK(inner_objective(m, p, s, Vector::Zero(1)) == 0.0);
  CHECK(inner_objective(m, p, s, Vector::Constant(1, -0.04)) == doctest::Approx(-0.0012).epsilon(1e-12));
  const auto mp = FeederModel::multiphase(Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.5), 1.0, {"A"});
  CHECK_THROWS_AS(inner_objective(mp, p, scenario_from_vtilde(mp, Vector::Ones(1)), Vector::Zero(1)), KindError);
  CHECK_THROWS_AS(equilibrium_coordinate_descent(mp, p, scenario_from_vtilde(mp, Vector::Ones(1))), KindError);
}

TEST_CASE("unstable rule does not settle") {
  const auto m = build_radial_sensitivities({{"0", "1", 0, 0.1}, {"1", "2", 0, 0.1}}, "0");
  RuleParams p;
  p.vref = Vector::Ones(2);
  p.delta = Vector::Zero(2);
  p.sigma = Vector::Constant(2, 0.1);
  p.qbar = Vector::Ones(2);
  p.qhat = Vector::Ones(2);
  p.der_mask = all_ders(2);
  REQUIRE_FALSE(spectral_check(m.reactance(), p.slopes(), 0.01).spectral_pass);
  const auto s = scenario_from_vtilde(m, Vector::Constant(2, 1.05));
  const auto trace = simulate(m, p, s, 500);
  CHECK_FALSE(trace.converged);
  CHECK(trace.final_gap > 1.0);
  // Oscillates between the saturation levels.
  const Vector& last = trace.setpoints.back();
  const Vector& prev = trace.setpoints[trace.setpoints.size() - 2];
  CHECK((last + prev).norm() < 1e-12);
  CHECK_THROWS_AS(equilibrium_fixed_point(m, p, s), ConvergenceError);
}

TEST_CASE("multiphase equilibrium meets the contraction rate") {
  Matrix x(2, 2);
  x << 0.4, -0.1, -0.2, 0.5;
  const auto m = FeederModel::multiphase(Matrix::Zero(2, 2), x, 1.0, {"A", "B"});
  const double eps = 0.3;
  const Vector alpha = Vector::Ones(2);
  REQUIRE(polytopic_check_3p(x, alpha, eps));
  RuleParams p;
  p.vref = Vector::Ones(2);
  p.delta = Vector::Constant(2, 0.01);
  p.sigma = Vector::Constant(2, 0.11);
  p.qbar = Vector::Constant(2, 0.1);
  p.qhat = Vector::Constant(2, 0.1);
  p.der_mask = all_ders(2);
  const auto s = scenario_from_vtilde(m, (Vector(2) << 1.07, 0.96).finished());
  const auto eq = equilibrium_fixed_point(m, p, s, 1e-13);
  CHECK(eq.fixed_point_residual <= 1e-13);
  CHECK_FALSE(eq.objective.has_value());
  const auto trace = simulate(m, p, s, 200, 1e-15);
  for (std::size_t t = 0; t < trace.setpoints.size(); ++t)
    CHECK((trace.setpoints[t] - eq.q_star).norm() <=
          2 * p.qhat.norm() * std::pow(1 - eps, static_cast<double>(t)) + 1e-15);
}

TEST_CASE("random stable instances: oracles agree and q* minimizes F") {
  oracle::Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = oracle::uniform_int(rng, 1, 8);
    const double eps = oracle::uniform(rng, 0.1, 0.6);
    const auto m = oracle::random_radial_feeder(rng, n);
    const auto mask = oracle::random_mask(rng, n);
    const Vector alpha = oracle::random_polytopic_alpha(rng, m.reactance(), eps, mask, oracle::uniform(rng, 0.3, 1.0));
    const auto p = oracle::rule_with_slopes(rng, alpha, mask);
    const auto s = oracle::random_scenario(rng, m);
    const auto fp = equilibrium_fixed_point(m, p, s);
    const auto cd = equilibrium_coordinate_descent(m, p, s);
    CHECK((fp.q_star - cd.q_star).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((fp.q_star - oracle::naive_equilibrium(m.reactance(), p, s.vtilde)).cwiseAbs().maxCoeff() < 1e-9);
    for (Index i = 0; i < n; ++i)
      if (!mask[static_cast<std::size_t>(i)]) CHECK(fp.q_star(i) == 0.0);
    const double best = inner_objective(m, p, s, fp.q_star);
    for (int k = 0; k < 100; ++k) {
      Vector q = Vector::Zero(n);
      for (Index i = 0; i < n; ++i)
        if (mask[static_cast<std::size_t>(i)]) q(i) = oracle::uniform(rng, -p.qbar(i), p.qbar(i));
      CHECK(best <= inner_objective(m, p, s, q) + 1e-12);
    }
  }
}

TEST_CASE("quadratic term equals the rotated norm up to a constant") {
  oracle::Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = oracle::uniform_int(rng, 1, 6);
    const auto m = oracle::random_radial_feeder(rng, n);
    const auto mask = all_ders(n);
    const Vector alpha = oracle::random_polytopic_alpha(rng, m.reactance(), 0.3, mask);
    const auto p = oracle::rule_with_slopes(rng, alpha, mask);
    const auto s = oracle::random_scenario(rng, m);
    const Eigen::LLT<Matrix> llt(m.reactance());
    // Voltage part of F: subtract the per-node regularizer computed here.
    auto v_part = [&](const Vector& q) {
      double reg = 0;
      for (Index i = 0; i < n; ++i) reg += q(i) * q(i) / (2 * alpha(i)) + p.delta(i) * std::abs(q(i));
      return inner_objective(m, p, s, q) - reg;
    };
    auto rotated = [&](const Vector& q) {
      const Vector d = m.reactance() * q + s.vtilde - p.vref;
      return 0.5 * d.dot(llt.solve(d));
    };
    Vector q1(n), q2(n);
    for (Index i = 0; i < n; ++i) {
      q1(i) = oracle::uniform(rng, -p.qbar(i), p.qbar(i));
      q2(i) = oracle::uniform(rng, -p.qbar(i), p.qbar(i));
    }
    CHECK(std::abs((v_part(q1) - v_part(q2)) - (rotated(q1) - rotated(q2))) < 1e-10);
  }
}
