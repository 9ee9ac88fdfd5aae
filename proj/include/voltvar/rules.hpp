#pragma once

#include <array>
#include <string>
#include <vector>

#include "voltvar/types.hpp"

namespace voltvar {

/// The equivalent four-block coordinate systems of a Volt/VAR curve.
enum class Parameterization {
  VrefDeltaSigmaQbar,   // (vref, delta, sigma, qbar)
  VrefAlphaDeltaQbar,   // (vref, alpha, delta, qbar)
  VrefAlphaDeltaSigma,  // (vref, alpha, delta, sigma), trained by the twin
  VrefCDeltaSigma,      // (vref, c, delta, sigma), projection space
  VrefCDeltaQbar,       // (vref, c, delta, qbar)
};

std::string to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& name);

/// IEEE 1547 bounds on the curve parameters.
struct Ieee1547Limits {
  static constexpr double kVrefMin = 0.95;
  static constexpr double kVrefMax = 1.05;
  static constexpr double kDeltaMax = 0.03;
  static constexpr double kMinSaturationGap = 0.02;
  static constexpr double kSigmaMax = 0.18;
};

/// Per-node Volt/VAR curves.
///
/// The curve is stored in the canonical (vref, delta, sigma, qbar) form; the
/// parameterization tag records the coordinate system the values were last
/// expressed in. Nodes outside `der_mask` carry no rule and always return 0.
struct RuleParams {
  Vector vref;
  Vector delta;
  Vector sigma;
  Vector qbar;
  Vector qhat;
  DerMask der_mask;
  Parameterization parameterization = Parameterization::VrefDeltaSigmaQbar;

  Index size() const { return vref.size(); }

  /// alpha_n = qbar_n / (sigma_n - delta_n); zero at masked nodes.
  Vector slopes() const;

  /// Throws ValidationError on dimension mismatches or a curve that cannot be
  /// evaluated (sigma <= delta, negative qbar or delta, non-finite values).
  /// IEEE 1547 bounds are not checked here; see validate().
  void check_structure() const;
};

/// (vref, delta, sigma, qbar) = (1, 0.02, 0.08, qhat) at every DER node.
RuleParams default_rule(const Vector& qhat, DerMask mask);

/// Evaluates the piecewise-linear curve with the given canonical parameters.
double curve_value(double vref, double delta, double sigma, double qbar, double v);

double eval_rule(const RuleParams& params, Index node, double v);
Vector eval_rule_vector(const RuleParams& params, const Vector& v);

enum class Bound {
  VrefLow,        // vref >= 0.95
  VrefHigh,       // vref <= 1.05
  DeltaLow,       // delta >= 0
  DeltaHigh,      // delta <= 0.03
  SaturationGap,  // sigma >= delta + 0.02
  SigmaHigh,      // sigma <= 0.18
  QbarLow,        // qbar >= 0
  QbarHigh,       // qbar <= qhat
};

std::string to_string(Bound b);

struct Violation {
  Index node = 0;  // zero-based
  Bound bound = Bound::VrefLow;
  double margin = 0.0;  // amount by which the bound is exceeded (> 0)
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Lists every IEEE 1547 bound violated at a DER node. Violations within
/// `tol` are ignored.
ValidationReport validate(const RuleParams& params, double tol = 1e-12);

/// The four coordinate blocks of a curve in one parameterization.
struct RuleCoordinates {
  Parameterization kind = Parameterization::VrefDeltaSigmaQbar;
  std::array<Vector, 4> blocks;
};

RuleCoordinates to_coordinates(const RuleParams& params, Parameterization kind);
RuleParams from_coordinates(const RuleCoordinates& coords, const Vector& qhat, DerMask mask);

/// Re-expresses the curve in `target` coordinates. The curve itself is unchanged.
RuleParams convert(const RuleParams& params, Parameterization target);

}  // namespace voltvar
