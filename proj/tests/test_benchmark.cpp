#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "voltvar/benchmark.hpp"
#include "voltvar/errors.hpp"
#include "voltvar/trainer.hpp"

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

ScenarioSet set_of(const FeederModel& m, const std::vector<Vector>& vts) {
  ScenarioSet s;
  for (const auto& v : vts) s.scenarios.push_back(scenario_from_vtilde(m, v));
  return s;
}

}  // namespace

TEST_CASE("scalar KKT point") {
  const auto m = scalar_model();
  const auto s = scenario_from_vtilde(m, Vector::Constant(1, 1.06));
  const auto k = kkt_residual(m, scalar_rule(), s, Vector::Constant(1, -0.04));
  CHECK(k.residual <= 1e-15);
  CHECK(k.point.mu_lo(0) == 0.0);
  CHECK(k.point.mu_hi(0) == 0.0);
  CHECK(kkt_residual(m, scalar_rule(), s, Vector::Constant(1, -0.03)).residual > 1e-3);
  const auto mp = FeederModel::multiphase(Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.5), 1.0, {"A"});
  CHECK_THROWS_AS(kkt_residual(mp, scalar_rule(), s, Vector::Zero(1)), KindError);
}

TEST_CASE("saturated coordinate recovers the bound dual") {
  const auto m = scalar_model();
  auto p = scalar_rule();
  p.qbar(0) = 0.02;
  p.sigma(0) = 0.02;
  const auto s = scenario_from_vtilde(m, Vector::Constant(1, 1.2));
  const auto e = enumerate_equilibrium(m, p, s);
  REQUIRE(e.regions.size() == 1);
  CHECK(e.regions[0] == Region::SatHigh);
  CHECK(e.equilibrium.q_star(0) == doctest::Approx(-0.02).epsilon(1e-14));
  const auto k = kkt_residual(m, p, s, e.equilibrium.q_star);
  CHECK(k.residual <= 1e-8);
  CHECK(k.point.mu_lo(0) > 0.0);

  // Halving M2 makes the untouched bound's slack too large to encode.
  const auto full = BigMSpec::with_dual_bound(p, 2 * k.point.mu_lo(0) + 1);
  CHECK(check_big_m(m, p, k.point, full).pass);
  auto tight = full;
  tight.m2 = p.qbar;
  CHECK_FALSE(check_big_m(m, p, k.point, tight).pass);
}

TEST_CASE("region enumeration basics") {
  const auto m = scalar_model();
  auto banded = scalar_rule();
  banded.delta(0) = 0.01;
  const auto flat = enumerate_equilibrium(m, banded, scenario_from_vtilde(m, Vector::Ones(1)));
  CHECK(flat.regions[0] == Region::Deadband);
  CHECK(flat.equilibrium.q_star(0) == 0.0);
  const auto over = enumerate_equilibrium(m, scalar_rule(), scenario_from_vtilde(m, Vector::Constant(1, 1.06)));
  CHECK(over.regions[0] == Region::AffineHigh);
  CHECK(std::abs(over.equilibrium.q_star(0) + 0.04) < 1e-12);
  CHECK(over.distinct_solutions == 1);
}

TEST_CASE("random stable instances: enumeration, KKT and big-M") {
  oracle::Rng rng(67);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = oracle::uniform_int(rng, 1, 6);
    const double eps = oracle::uniform(rng, 0.1, 0.6);
    const auto m = oracle::random_radial_feeder(rng, n);
    const auto mask = oracle::random_mask(rng, n);
    const Vector alpha = oracle::random_polytopic_alpha(rng, m.reactance(), eps, mask, oracle::uniform(rng, 0.3, 1.0));
    const auto p = oracle::rule_with_slopes(rng, alpha, mask);
    ScenarioSet set;
    for (int i = 0; i < 3; ++i) set.scenarios.push_back(oracle::random_scenario(rng, m));
    const auto spec = calibrate_big_m(m, p, set);
    for (const auto& s : set.scenarios) {
      const auto e = enumerate_equilibrium(m, p, s);
      CHECK(e.distinct_solutions == 1);
      const auto cd = equilibrium_coordinate_descent(m, p, s);
      CHECK((e.equilibrium.q_star - cd.q_star).cwiseAbs().maxCoeff() < 1e-9);
      const auto k = kkt_residual(m, p, s, e.equilibrium.q_star);
      CHECK(k.residual <= 1e-9);
      const auto bm = check_big_m(m, p, k.point, spec);
      CHECK(bm.assignment_found);
      CHECK(bm.capability_rows_pass);
      CHECK((spec.m2 - 2 * p.qbar).norm() == 0.0);
    }
  }
}

TEST_CASE("default rule capability rows") {
  const auto m = build_radial_sensitivities({{"0", "1", 0, 0.02}, {"1", "2", 0, 0.02}}, "0");
  const auto def = default_rule(Vector::Constant(2, 0.2), all_ders(2));
  const auto s = scenario_from_vtilde(m, Vector::Constant(2, 1.05));
  const auto k = kkt_residual(m, def, s, equilibrium_fixed_point(m, def, s).q_star);
  const auto bm = check_big_m(m, def, k.point, calibrate_big_m(m, def, set_of(m, {s.vtilde})));
  CHECK(bm.capability_rows_pass);
  CHECK(bm.pass);
}

TEST_CASE("grid search") {
  const auto m = build_radial_sensitivities({{"0", "1", 0, 0.02}, {"1", "2", 0, 0.03}}, "0");
  const Vector qhat = Vector::Constant(2, 0.2);
  const DerMask one{false, true};

  GridSpec coarse;
  coarse.vref_points = 3;
  coarse.delta_points = 2;
  coarse.alpha_points = 3;
  coarse.qbar_points = 2;
  const auto flat = grid_search_ord(m, set_of(m, {Vector::Ones(2)}), qhat, one, 0.5, coarse);
  CHECK(flat.objective == 0.0);
  CHECK(flat.best.vref(1) == 1.0);

  const auto over = set_of(m, {Vector::Constant(2, 1.04), (Vector(2) << 1.03, 1.06).finished()});
  const auto c = grid_search_ord(m, over, qhat, one, 0.5, coarse, true);
  CHECK(c.log.size() == c.evaluated);
  GridSpec fine = coarse;
  fine.vref_points = 5;
  fine.delta_points = 3;
  fine.alpha_points = 5;
  fine.qbar_points = 3;
  fine.threads = 3;
  const auto f = grid_search_ord(m, over, qhat, one, 0.5, fine);
  CHECK(f.objective <= c.objective);
  fine.threads = 1;
  CHECK(grid_search_ord(m, over, qhat, one, 0.5, fine).objective == f.objective);
  fine.refine_levels = 2;
  CHECK(grid_search_ord(m, over, qhat, one, 0.5, fine).objective <= f.objective);
  CHECK(validate(f.best).ok());
  CHECK(polytopic_check_1p(m, f.best.slopes(), 0.5));
  CHECK(evaluate(m, f.best, over).objective == doctest::Approx(f.objective).epsilon(1e-9));

  CHECK_THROWS_AS(grid_search_ord(m, over, qhat, all_ders(2), 0.5, GridSpec{.max_candidates = 10}),
                  ValidationError);
  const auto three = build_radial_sensitivities({{"0", "1", 0, 0.02}, {"1", "2", 0, 0.03}, {"1", "3", 0, 0.01}}, "0");
  CHECK_THROWS_AS(grid_search_ord(three, set_of(three, {Vector::Ones(3)}), Vector::Constant(3, 0.2), all_ders(3), 0.5, coarse),
                  ValidationError);
}

TEST_CASE("MINLP listing") {
  const auto m = build_radial_sensitivities({{"0", "1", 0, 0.02}, {"1", "2", 0, 0.03}}, "0");
  const auto def = default_rule(Vector::Constant(2, 0.2), all_ders(2));
  const auto set = set_of(m, {Vector::Constant(2, 1.04)});
  std::ostringstream os;
  export_minlp(os, m, set, def.qhat, def.der_mask, 0.5, calibrate_big_m(m, def, set));
  const auto text = os.str();
  CHECK(text.find("binary") != std::string::npos);
  CHECK(text.find("minimize") != std::string::npos);
}
