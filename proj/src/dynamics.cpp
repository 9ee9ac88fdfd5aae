#include "voltvar/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voltvar/benchmark.hpp"
#include "voltvar/errors.hpp"
#include "voltvar/stability.hpp"

namespace voltvar {

namespace {

void check_dims(const FeederModel& model, const RuleParams& params, const Scenario& scenario) {
  params.check_structure();
  if (params.size() != model.size() || scenario.vtilde.size() != model.size())
    throw ValidationError("model, rule and scenario dimensions differ");
}

double soft_threshold(double r, double t) {
  if (r > t) return r - t;
  if (r < -t) return r + t;
  return 0.0;
}

}  // namespace

std::string to_string(EquilibriumMethod m) {
  switch (m) {
    case EquilibriumMethod::FixedPoint: return "fixed-point";
    case EquilibriumMethod::CoordinateDescent: return "coordinate-descent";
    case EquilibriumMethod::RegionEnumeration: return "region-enumeration";
  }
  return "?";
}

StepResult step(const FeederModel& model, const RuleParams& params, const Scenario& scenario,
                const Vector& q) {
  check_dims(model, params, scenario);
  if (q.size() != model.size()) throw ValidationError("setpoint vector has wrong length");
  StepResult out;
  out.v = model.reactance() * q + scenario.vtilde;
  out.q_next = eval_rule_vector(params, out.v);
  return out;
}

DynamicsTrace simulate(const FeederModel& model, const RuleParams& params,
                       const Scenario& scenario, int max_steps, double tol) {
  check_dims(model, params, scenario);
  const Matrix& x = model.reactance();
  DynamicsTrace trace;
  Vector q = Vector::Zero(model.size());
  trace.setpoints.push_back(q);
  trace.voltages.push_back(x * q + scenario.vtilde);
  for (int t = 0; t < max_steps; ++t) {
    Vector q_next = eval_rule_vector(params, trace.voltages.back());
    const double change = (q_next - q).lpNorm<Eigen::Infinity>();
    trace.final_gap = (q_next - q).norm();
    q = std::move(q_next);
    trace.setpoints.push_back(q);
    trace.voltages.push_back(x * q + scenario.vtilde);
    if (change < tol) {
      trace.converged = true;
      trace.settle_steps = t + 1;
      return trace;
    }
  }
  trace.settle_steps = max_steps;
  return trace;
}

EquilibriumResult equilibrium_fixed_point(const FeederModel& model, const RuleParams& params,
                                          const Scenario& scenario, double tol) {
  check_dims(model, params, scenario);
  const Matrix& x = model.reactance();
  const Vector alpha = params.slopes();
  const double gain = spectral_norm(alpha.asDiagonal() * x);

  EquilibriumResult res;
  res.method = EquilibriumMethod::FixedPoint;
  int cap = 100000;
  if (gain < 1.0) {
    const double qhat_norm = std::max(params.qbar.norm(), 1e-300);
    const int depth = gain > 0.0 ? min_depth(spectral_norm(x), qhat_norm, 1.0 - gain, tol) : 1;
    cap = std::max(10 * depth, 100);
  } else {
    res.warnings.push_back("rule is not contractive: ||diag(alpha)X||_2 = " +
                           std::to_string(gain));
  }

  Vector q = Vector::Zero(model.size());
  for (int it = 1; it <= cap; ++it) {
    Vector q_next = eval_rule_vector(params, x * q + scenario.vtilde);
    const double change = (q_next - q).lpNorm<Eigen::Infinity>();
    q = std::move(q_next);
    if (change <= tol) {
      res.iterations = it;
      res.q_star = q;
      res.v_star = x * q + scenario.vtilde;
      res.fixed_point_residual =
          (eval_rule_vector(params, res.v_star) - q).lpNorm<Eigen::Infinity>();
      if (model.single_phase()) {
        res.objective = inner_objective(model, params, scenario, q);
        res.kkt_residual = kkt_residual(model, params, scenario, q).residual;
      } else {
        res.kkt_residual = std::numeric_limits<double>::quiet_NaN();
      }
      return res;
    }
  }
  throw ConvergenceError("fixed-point iteration did not settle within " + std::to_string(cap) +
                         " iterations");
}

double inner_objective(const FeederModel& model, const RuleParams& params,
                       const Scenario& scenario, const Vector& q) {
  check_dims(model, params, scenario);
  if (!model.single_phase())
    throw KindError("the inner convex program exists only for single-phase feeders");
  if (q.size() != model.size()) throw ValidationError("setpoint vector has wrong length");
  const Vector alpha = params.slopes();
  double value = 0.5 * q.dot(model.reactance() * q) + q.dot(scenario.vtilde - params.vref);
  for (Index n = 0; n < q.size(); ++n) {
    if (!params.der_mask[static_cast<std::size_t>(n)] || q(n) == 0.0) continue;
    value += q(n) * q(n) / (2.0 * alpha(n)) + params.delta(n) * std::abs(q(n));
  }
  return value;
}

EquilibriumResult equilibrium_coordinate_descent(const FeederModel& model,
                                                 const RuleParams& params,
                                                 const Scenario& scenario, double tol,
                                                 int max_sweeps) {
  check_dims(model, params, scenario);
  if (!model.single_phase())
    throw KindError("coordinate descent needs the single-phase variational form");
  const Matrix& x = model.reactance();
  const Vector alpha = params.slopes();
  const auto ders = der_indices(params.der_mask);

  Vector q = Vector::Zero(model.size());
  // Running X q, updated per coordinate change.
  Vector xq = Vector::Zero(model.size());
  EquilibriumResult res;
  res.method = EquilibriumMethod::CoordinateDescent;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double change = 0.0;
    for (Index n : ders) {
      const double qbar = params.qbar(n);
      double next = 0.0;
      if (qbar > 0.0 && alpha(n) > 0.0) {
        const double curv = x(n, n) + 1.0 / alpha(n);
        const double r = scenario.vtilde(n) - params.vref(n) + xq(n) - x(n, n) * q(n);
        next = std::clamp(-soft_threshold(r, params.delta(n)) / curv, -qbar, qbar);
      }
      const double d = next - q(n);
      if (d != 0.0) {
        xq += d * x.col(n);
        q(n) = next;
        change = std::max(change, std::abs(d));
      }
    }
    if (change < tol) {
      res.iterations = sweep;
      res.q_star = q;
      res.v_star = x * q + scenario.vtilde;
      res.objective = inner_objective(model, params, scenario, q);
      res.fixed_point_residual =
          (eval_rule_vector(params, res.v_star) - q).lpNorm<Eigen::Infinity>();
      res.kkt_residual = kkt_residual(model, params, scenario, q).residual;
      return res;
    }
  }
  throw ConvergenceError("coordinate descent did not settle within " +
                         std::to_string(max_sweeps) + " sweeps");
}

}  // namespace voltvar
