#pragma once

#include <string>
#include <vector>

#include "voltvar/feeder.hpp"
#include "voltvar/twin.hpp"

namespace voltvar {

inline constexpr double kAlphaFloor = 1e-6;

/// Rule weights with the slope replaced by its reciprocal c = 1/alpha.
/// Entries at masked nodes are carried along but never constrained.
struct CSpacePoint {
  Vector vref;
  Vector c;
  Vector delta;
  Vector sigma;
};

struct CSpaceConversion {
  CSpacePoint point;
  int clamped = 0;  // DER slopes raised to the floor before inversion
};

/// c = 1/max(alpha, floor) at DER nodes, 0 elsewhere.
CSpaceConversion to_c_space(const TwinParams& params, double alpha_floor = kAlphaFloor);

/// alpha = 1/c at DER nodes, 0 elsewhere.
TwinParams from_c_space(const CSpacePoint& point, const Vector& qhat, const DerMask& mask);

struct ProjectionResult {
  CSpacePoint point;
  double displacement = 0.0;  // Euclidean distance moved, DER coordinates only
  double residual = 0.0;      // worst constraint violation of the result
  int iterations = 0;         // Newton steps; 0 when the input was already feasible
  bool polished = false;      // active-set refinement accepted
  Vector aux;                 // a = 1/c at DER nodes
};

/// IEEE 1547 bounds plus the c-space capability and stability rows at the
/// DER nodes:
///   0.95 <= vref <= 1.05, 0 <= delta <= 0.03, delta + 0.02 <= sigma <= 0.18,
///   sigma - delta <= c·qhat, c >= |X|1/(1-eps), |X|'a <= (1-eps)1, a·c >= 1.
/// The auxiliary a is eliminated as a = 1/c, which leaves a convex problem in
/// (delta, sigma, c); vref separates and is clipped.
class FeasibleSet {
 public:
  /// Throws InfeasibleError when a DER node has qhat <= 0.
  static FeasibleSet build(const FeederModel& model, const Vector& qhat, const DerMask& mask,
                           double epsilon);

  double epsilon() const { return epsilon_; }
  const DerMask& mask() const { return mask_; }

  /// Worst violation over all rows (0 when feasible).
  double residual(const CSpacePoint& p) const;
  /// Names and violations of the rows violated by more than `tol`.
  std::vector<std::string> violated_rows(const CSpacePoint& p, double tol = 0.0) const;

  /// Euclidean projection of the DER coordinates. Feasible inputs are returned unchanged.
  ProjectionResult project(const CSpacePoint& p) const;

 private:
  FeasibleSet() = default;

  Vector qhat_;
  DerMask mask_;
  std::vector<Index> ders_;
  double epsilon_ = 0.0;
  Vector c_min_;        // per DER: |X| row sum / (1 - eps)
  Matrix coupling_;     // rows: nodes m, cols: DERs n, entries |X|_nm
};

}  // namespace voltvar
