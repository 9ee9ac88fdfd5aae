#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voltvar/types.hpp"

namespace voltvar {

enum class FeederKind { SinglePhase, Multiphase };

std::string to_string(FeederKind kind);

/// Linearized feeder model v = R p + X q + v0·1 over the N non-substation nodes.
///
/// Instances are only created through the factories, which check the
/// invariants of the requested kind:
///  - single-phase: X symmetric, non-negative, positive definite;
///  - multiphase: z'Xz > 0 for all z != 0 (checked on the symmetric part).
/// The positive-definiteness test requires the smallest eigenvalue of
/// (X + X')/2 to exceed 1e-10.
class FeederModel {
 public:
  static FeederModel single_phase(Matrix resistance, Matrix reactance, double v0,
                                  std::vector<std::string> labels = {});
  static FeederModel multiphase(Matrix resistance, Matrix reactance, double v0,
                                std::vector<std::string> phases,
                                std::vector<std::string> labels = {});

  Index size() const { return reactance_.rows(); }
  const Matrix& resistance() const { return resistance_; }
  const Matrix& reactance() const { return reactance_; }
  double v0() const { return v0_; }
  FeederKind kind() const { return kind_; }
  bool single_phase() const { return kind_ == FeederKind::SinglePhase; }
  /// One label per node: "single" for single-phase feeders, otherwise A/B/C.
  const std::vector<std::string>& phases() const { return phases_; }
  /// Node names in index order (1..N in the file's numbering).
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  FeederModel() = default;

  Matrix resistance_;
  Matrix reactance_;
  double v0_ = 1.0;
  FeederKind kind_ = FeederKind::SinglePhase;
  std::vector<std::string> phases_;
  std::vector<std::string> labels_;
};

/// Smallest eigenvalue of the symmetric part (A + A')/2.
double min_symmetric_eigenvalue(const Matrix& a);

struct Line {
  std::string from;
  std::string to;
  double r = 0.0;
  double x = 0.0;
};

/// Builds R and X of a single-phase radial feeder with the common-path rule
/// X_nm = 2·(sum of reactances shared by the root paths of n and m), and
/// likewise for R. Non-root nodes are indexed in order of first appearance
/// in `lines`.
FeederModel build_radial_sensitivities(const std::vector<Line>& lines, const std::string& root,
                                       double v0 = 1.0);

struct Injections {
  Vector p_g;
  Vector p_l;
  Vector q_l;
};

/// Grid-condition vector: the voltages the feeder would have without DER reactive support.
struct Scenario {
  Vector vtilde;
  std::optional<Injections> injections;
};

struct ScenarioSet {
  std::vector<Scenario> scenarios;
  std::string source;

  std::size_t size() const { return scenarios.size(); }
  bool empty() const { return scenarios.empty(); }
};

/// vtilde = R(p_g - p_l) - X q_l + v0·1
Scenario make_scenario(const FeederModel& model, const Vector& p_g, const Vector& p_l,
                       const Vector& q_l);

Scenario scenario_from_vtilde(const FeederModel& model, Vector vtilde);

/// v = X q + vtilde
Vector voltage(const FeederModel& model, const Vector& q, const Scenario& scenario);

}  // namespace voltvar
