#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voltvar/feeder.hpp"
#include "voltvar/rules.hpp"

namespace voltvar {

inline constexpr double kDefaultSettleTolerance = 1e-7;

struct StepResult {
  Vector q_next;
  Vector v;
};

/// One round of the closed loop: v = X q + vtilde, then q_next = f(v).
StepResult step(const FeederModel& model, const RuleParams& params, const Scenario& scenario,
                const Vector& q);

struct DynamicsTrace {
  std::vector<Vector> setpoints;  // q^0 .. q^T
  std::vector<Vector> voltages;   // v^t = X q^t + vtilde, t = 0 .. T
  bool converged = false;
  int settle_steps = 0;
  double final_gap = 0.0;  // ||q^T - q^{T-1}||_2
};

/// Iterates from q^0 = 0 until ||q^{t+1} - q^t||_inf < tol or `max_steps` steps.
/// Non-convergence is reported through the trace, never thrown.
DynamicsTrace simulate(const FeederModel& model, const RuleParams& params,
                       const Scenario& scenario, int max_steps,
                       double tol = kDefaultSettleTolerance);

enum class EquilibriumMethod { FixedPoint, CoordinateDescent, RegionEnumeration };

std::string to_string(EquilibriumMethod m);

struct EquilibriumResult {
  Vector q_star;
  Vector v_star;
  EquilibriumMethod method = EquilibriumMethod::FixedPoint;
  std::optional<double> objective;  // F(q*), single-phase only
  double kkt_residual = 0.0;        // NaN for multiphase feeders
  double fixed_point_residual = 0.0;
  int iterations = 0;
  std::vector<std::string> warnings;
};

/// Equilibrium by iterating the dynamics. Throws ConvergenceError when the
/// step change does not fall below `tol` within max(10·T, 100) iterations,
/// where T is the depth bound for the rule's actual contraction factor.
EquilibriumResult equilibrium_fixed_point(const FeederModel& model, const RuleParams& params,
                                          const Scenario& scenario, double tol = 1e-12);

/// F(q) = 1/2 q'Xq + q'(vtilde - vref) + sum_n (q_n^2 / (2 alpha_n) + delta_n |q_n|)
/// over DER nodes. Single-phase only (KindError otherwise).
double inner_objective(const FeederModel& model, const RuleParams& params,
                       const Scenario& scenario, const Vector& q);

/// Exact cyclic coordinate minimization of F over the box |q_n| <= qbar_n.
EquilibriumResult equilibrium_coordinate_descent(const FeederModel& model,
                                                 const RuleParams& params,
                                                 const Scenario& scenario, double tol = 1e-13,
                                                 int max_sweeps = 1000000);

}  // namespace voltvar
