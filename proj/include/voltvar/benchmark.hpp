#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "voltvar/dynamics.hpp"
#include "voltvar/feeder.hpp"
#include "voltvar/rules.hpp"

namespace voltvar {

/// Primal/dual point of the differentiable inner program
///   min 1/2 q'(X + diag(c))q + q'(vtilde - vref) + delta'w
///   s.t. -w <= q <= w (lambda_lo, lambda_hi), -qbar <= q <= qbar (mu_lo, mu_hi).
/// Entries at masked nodes are zero.
struct KKTPoint {
  Vector q;
  Vector w;
  Vector lambda_lo;
  Vector lambda_hi;
  Vector mu_lo;
  Vector mu_hi;
};

struct KKTResidual {
  double residual = 0.0;  // max violation over all optimality rows
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;
  KKTPoint point;
};

/// Builds w = |q| and the duals analytically from the region each coordinate
/// sits in, then reports the worst violation of the optimality conditions.
/// `active_tol` decides when |q_n| counts as 0 or as qbar_n.
KKTResidual kkt_residual(const FeederModel& model, const RuleParams& params,
                         const Scenario& scenario, const Vector& q, double active_tol = 1e-9);

/// Curve region of one node: saturated at +qbar (low voltage) through
/// saturated at -qbar (high voltage).
enum class Region { SatLow = 0, AffineLow = 1, Deadband = 2, AffineHigh = 3, SatHigh = 4 };

struct EnumerationResult {
  EquilibriumResult equilibrium;
  std::vector<Region> regions;        // per DER node, in node order
  int consistent_assignments = 0;     // assignments whose solution is region-consistent
  int distinct_solutions = 0;         // after merging assignments that agree on q to 1e-9
};

inline constexpr int kMaxEnumeratedDers = 6;

/// Exact equilibrium by trying all 5^G region assignments of the G DER nodes
/// (G <= 6) and solving the induced linear system for each. Works for any
/// feeder kind; uniqueness relies on a contractive rule.
EnumerationResult enumerate_equilibrium(const FeederModel& model, const RuleParams& params,
                                        const Scenario& scenario, double boundary_tol = 1e-10);

struct BigMSpec {
  double m1 = 0.0;  // bound on the complementarity duals
  Vector m2;        // 2·qbar per node

  static BigMSpec with_dual_bound(const RuleParams& params, double m1);
};

/// M1 = 2·(largest dual found at the scenario equilibria) + 1, M2 = 2·qbar.
BigMSpec calibrate_big_m(const FeederModel& model, const RuleParams& params,
                         const ScenarioSet& scenarios);

struct BigMCheck {
  bool pass = false;
  bool assignment_found = false;  // some binary vector satisfies all big-M rows
  bool capability_rows_pass = false;  // 0.02 <= c·qbar <= 0.18 - delta
  /// Witness binaries per complementarity pair, per node:
  /// [0] lambda_hi / (w - q), [1] lambda_lo / (w + q), [2] mu_hi / (qbar - q),
  /// [3] mu_lo / (qbar + q). 1 means the dual side is active.
  std::vector<std::array<int, 4>> binaries;
  std::vector<std::string> failures;
};

BigMCheck check_big_m(const FeederModel& model, const RuleParams& params, const KKTPoint& point,
                      const BigMSpec& spec, double tol = 1e-9);

/// Candidate values per DER parameter for the exhaustive ORD oracle.
/// Saturation levels and slopes are gridded; sigma follows as delta + qbar/alpha.
struct GridSpec {
  int vref_points = 9;    // on [0.95, 1.05]
  int delta_points = 3;   // on [0, 0.03]
  int alpha_points = 7;   // on (0, alpha_max], alpha_max from the per-node stability row
  int qbar_points = 5;    // on (0, qhat]
  int refine_levels = 0;  // zoom passes (3 points per coordinate) around the incumbent
  int threads = 1;
  std::size_t max_candidates = 1000000;
};

struct GridSearchResult {
  RuleParams best;
  double objective = 0.0;
  std::size_t evaluated = 0;
  std::size_t feasible = 0;
  /// Every evaluated candidate of the first (unrefined) pass, DER-major:
  /// per DER (vref, delta, sigma, alpha), then the objective.
  std::vector<std::vector<double>> log;
};

/// Exhaustive search over per-DER curve parameters (at most 2 DERs). Each
/// candidate must pass the IEEE 1547 bounds and the kind-appropriate
/// polytopic restriction; the objective is (1/2S) sum_s ||v*_s - 1||^2 with
/// exact equilibria from region enumeration. Ties go to the first index.
/// Throws InfeasibleError when no candidate survives the filters.
GridSearchResult grid_search_ord(const FeederModel& model, const ScenarioSet& scenarios,
                                 const Vector& qhat, const DerMask& mask, double epsilon,
                                 const GridSpec& grid, bool keep_log = false);

/// Writes the mixed-integer ORD instance as a plain-text algebraic listing.
void export_minlp(std::ostream& out, const FeederModel& model, const ScenarioSet& scenarios,
                  const Vector& qhat, const DerMask& mask, double epsilon, const BigMSpec& spec);

}  // namespace voltvar
