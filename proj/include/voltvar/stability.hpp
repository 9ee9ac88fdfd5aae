#pragma once

#include "voltvar/feeder.hpp"
#include "voltvar/types.hpp"

namespace voltvar {

/// Relative slack granted to the stability comparisons so that points sitting
/// exactly on a boundary are not rejected by rounding.
inline constexpr double kStabilityTolerance = 1e-12;

struct StabilityCertificate {
  double epsilon = 0.0;
  double spectral_norm = 0.0;  // ||diag(alpha) X||_2
  bool spectral_pass = false;  // spectral_norm <= 1 - epsilon
  bool polytopic_pass = false;
  FeederKind kind = FeederKind::SinglePhase;
};

/// Largest singular value. Dense SVD up to 64 rows, power iteration on A'A beyond.
double spectral_norm(const Matrix& a);
double spectral_norm_power_iteration(const Matrix& a, double tol = 1e-12, int max_iter = 100000);

/// Operator 2-norm test of diag(alpha) X against 1 - epsilon. `polytopic_pass`
/// is filled with the |X| (multiphase) restriction, which is valid for any X.
StabilityCertificate spectral_check(const Matrix& x, const Vector& alpha, double epsilon);

/// X alpha <= (1-eps)1 and alpha_n <= (1-eps)/sum_m X_nm for nodes with alpha_n > 0.
/// Throws KindError for a multiphase model.
bool polytopic_check_1p(const FeederModel& model, const Vector& alpha, double epsilon);
bool polytopic_check_1p(const Matrix& x, const Vector& alpha, double epsilon);

/// |X|' alpha <= (1-eps)1 and alpha_n <= (1-eps)/sum_m |X_nm| for nodes with alpha_n > 0.
bool polytopic_check_3p(const Matrix& x, const Vector& alpha, double epsilon);

/// Spectral test plus the polytopic restriction matching the model kind.
StabilityCertificate certify(const FeederModel& model, const Vector& alpha, double epsilon);

/// Smallest T with 2||X|| ||qhat|| (1-eps)^T <= eps1, i.e.
/// ceil(log(2||X|| ||qhat|| / eps1) / log(1/(1-eps))); 0 when the bound holds at T = 0.
int min_depth(double x_norm, double qhat_norm, double epsilon, double eps1);
int min_depth(const Matrix& x, const Vector& qhat, double epsilon, double eps1);

}  // namespace voltvar
