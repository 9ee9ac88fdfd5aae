#include <doctest.h>

#include "oracles.hpp"
#include "voltvar/errors.hpp"
#include "voltvar/rules.hpp"

using namespace voltvar;

namespace {

RuleParams one_node(double vref, double delta, double sigma, double qbar, double qhat) {
  RuleParams p;
  p.vref = Vector::Constant(1, vref);
  p.delta = Vector::Constant(1, delta);
  p.sigma = Vector::Constant(1, sigma);
  p.qbar = Vector::Constant(1, qbar);
  p.qhat = Vector::Constant(1, qhat);
  p.der_mask = all_ders(1);
  return p;
}

RuleParams random_valid(oracle::Rng& rng, int n) {
  Vector alpha(n);
  for (int i = 0; i < n; ++i) alpha(i) = oracle::uniform(rng, 0.1, 20.0);
  return oracle::rule_with_slopes(rng, alpha, all_ders(n));
}

}  // namespace

TEST_CASE("curve regions") {
  const auto def = default_rule(Vector::Constant(1, 0.2), all_ders(1));
  CHECK(eval_rule(def, 0, 1.0) == 0.0);
  CHECK(eval_rule(def, 0, 1.05) == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(eval_rule(def, 0, 1.0 + 0.08 + 0.1) == -0.2);
  CHECK(eval_rule(def, 0, 1.0 - 0.08 - 0.1) == 0.2);
  CHECK(eval_rule(def, 0, 0.95) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK_THROWS_AS(eval_rule(def, 1, 1.0), ValidationError);
}

TEST_CASE("vector evaluation and masks") {
  oracle::Rng rng(3);
  auto p = random_valid(rng, 5);
  CHECK(eval_rule_vector(p, p.vref).isZero());
  Vector v(5);
  for (int i = 0; i < 5; ++i) v(i) = oracle::uniform(rng, 0.8, 1.2);
  const Vector q = eval_rule_vector(p, v);
  for (Index i = 0; i < 5; ++i) CHECK(q(i) == eval_rule(p, i, v(i)));
  p.der_mask[1] = false;
  p.der_mask[3] = false;
  for (double level : {0.5, 1.0, 1.5}) {
    const Vector qm = eval_rule_vector(p, Vector::Constant(5, level));
    CHECK(qm(1) == 0.0);
    CHECK(qm(3) == 0.0);
  }
  CHECK_THROWS_AS(eval_rule_vector(p, Vector::Ones(4)), ValidationError);
}

TEST_CASE("validation") {
  CHECK(validate(default_rule(Vector::Constant(3, 0.3), all_ders(3))).ok());

  auto wide = one_node(1.0, 0.05, 0.12, 0.1, 0.2);
  const auto r1 = validate(wide);
  REQUIRE(r1.violations.size() == 1);
  CHECK(r1.violations[0].bound == Bound::DeltaHigh);
  CHECK(r1.violations[0].node == 0);
  CHECK(r1.violations[0].margin == doctest::Approx(0.02).epsilon(1e-12));

  const auto r2 = validate(one_node(1.0, 0.02, 0.03, 0.1, 0.2));
  REQUIRE(r2.violations.size() == 1);
  CHECK(r2.violations[0].bound == Bound::SaturationGap);

  const auto r3 = validate(one_node(1.1, 0.0, 0.2, 0.3, 0.2));
  CHECK(r3.violations.size() == 3);  // vref, sigma, qbar

  CHECK_THROWS_AS(one_node(1.0, 0.02, 0.02, 0.1, 0.2).check_structure(), ValidationError);
}

TEST_CASE("parameterization conversions") {
  const auto p = one_node(1.0, 0.02, 0.08, 0.2, 0.2);
  const auto a = to_coordinates(p, Parameterization::VrefAlphaDeltaQbar);
  CHECK(a.blocks[1](0) == doctest::Approx(10.0 / 3.0).epsilon(1e-14));
  RuleCoordinates back;
  back.kind = Parameterization::VrefAlphaDeltaQbar;
  back.blocks = {Vector::Constant(1, 1.0), Vector::Constant(1, 10.0 / 3.0), Vector::Constant(1, 0.02),
                 Vector::Constant(1, 0.2)};
  CHECK(from_coordinates(back, p.qhat, p.der_mask).sigma(0) == doctest::Approx(0.08).epsilon(1e-14));

  const auto slope2 = one_node(1.0, 0.0, 0.1, 0.2, 0.2);
  const auto c = to_coordinates(slope2, Parameterization::VrefCDeltaSigma);
  CHECK(c.blocks[1](0) == doctest::Approx(0.5).epsilon(1e-15));
  const auto again = to_coordinates(from_coordinates(c, slope2.qhat, slope2.der_mask),
                                    Parameterization::VrefAlphaDeltaSigma);
  CHECK(again.blocks[1](0) == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(convert(one_node(1.0, 0.05, 0.05, 0.1, 0.2), Parameterization::VrefCDeltaSigma),
                  ValidationError);
  CHECK(parameterization_from_string(to_string(Parameterization::VrefCDeltaQbar)) ==
        Parameterization::VrefCDeltaQbar);
  CHECK_THROWS_AS(parameterization_from_string("nope"), ValidationError);
}

TEST_CASE("curve properties on random rules") {
  oracle::Rng rng(17);
  const Parameterization kinds[] = {Parameterization::VrefAlphaDeltaQbar, Parameterization::VrefAlphaDeltaSigma,
                                    Parameterization::VrefCDeltaSigma, Parameterization::VrefCDeltaQbar};
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_valid(rng, 1);
    const double vr = p.vref(0), d = p.delta(0), s = p.sigma(0), qb = p.qbar(0);
    // Continuity at the breakpoints.
    for (double k : {vr - s, vr - d, vr + d, vr + s}) {
      const double left = eval_rule(p, 0, std::nextafter(k, -1.0));
      const double right = eval_rule(p, 0, std::nextafter(k, 2.0));
      CHECK(std::abs(left - right) < 1e-12);
    }
    std::vector<double> vs;
    for (int i = 0; i < 1000; ++i) vs.push_back(oracle::uniform(rng, vr - 0.3, vr + 0.3));
    std::sort(vs.begin(), vs.end());
    double prev = std::numeric_limits<double>::infinity();
    for (double v : vs) {
      const double q = eval_rule(p, 0, v);
      CHECK(q <= prev);
      CHECK(std::abs(q) <= qb);
      CHECK(q == doctest::Approx(oracle::curve(vr, d, s, qb / (s - d), v)).epsilon(1e-12));
      const double u = v - vr;
      CHECK(std::abs(eval_rule(p, 0, vr + u) + eval_rule(p, 0, vr - u)) < 1e-12);
      prev = q;
    }
    for (auto kind : kinds) {
      const auto conv = convert(p, kind);
      CHECK(conv.parameterization == kind);
      const auto round = convert(conv, Parameterization::VrefDeltaSigmaQbar);
      CHECK(std::abs(round.sigma(0) - s) < 1e-12);
      CHECK(std::abs(round.qbar(0) - qb) < 1e-12);
      for (int i = 0; i < 50; ++i) {
        const double v = oracle::uniform(rng, vr - 0.3, vr + 0.3);
        CHECK(std::abs(eval_rule(conv, 0, v) - eval_rule(p, 0, v)) < 1e-12);
      }
    }
  }
}
