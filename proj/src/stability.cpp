#include "voltvar/stability.hpp"

#include <cmath>

#include "voltvar/errors.hpp"

namespace voltvar {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ValidationError("stability margin epsilon must lie in (0,1)");
}

void check_alpha(const Matrix& x, const Vector& alpha) {
  if (x.rows() != x.cols() || alpha.size() != x.rows())
    throw ValidationError("slope vector does not match the sensitivity matrix");
  if ((alpha.array() < 0.0).any()) throw ValidationError("slopes must be non-negative");
}

bool le(double lhs, double rhs) { return lhs <= rhs * (1.0 + kStabilityTolerance); }

bool polytopic(const Matrix& x_abs, const Vector& alpha, double epsilon) {
  const double bound = 1.0 - epsilon;
  const Vector col = x_abs.transpose() * alpha;
  for (Index m = 0; m < col.size(); ++m)
    if (!le(col(m), bound)) return false;
  const Vector row_sums = x_abs.rowwise().sum();
  for (Index n = 0; n < alpha.size(); ++n) {
    if (alpha(n) == 0.0) continue;
    if (!le(alpha(n) * row_sums(n), bound)) return false;
  }
  return true;
}

}  // namespace

double spectral_norm_power_iteration(const Matrix& a, double tol, int max_iter) {
  if (a.size() == 0) return 0.0;
  const Matrix gram = a.transpose() * a;
  Vector z = Vector::Ones(gram.cols());
  for (Index i = 0; i < z.size(); ++i) z(i) += 1e-3 * static_cast<double>(i % 7);
  z.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector y = gram * z;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    const double next = z.dot(y);
    y /= norm;
    z = std::move(y);
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() <= 64 && a.cols() <= 64) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
  }
  return spectral_norm_power_iteration(a);
}

StabilityCertificate spectral_check(const Matrix& x, const Vector& alpha, double epsilon) {
  check_epsilon(epsilon);
  check_alpha(x, alpha);
  StabilityCertificate cert;
  cert.epsilon = epsilon;
  cert.spectral_norm = spectral_norm(alpha.asDiagonal() * x);
  cert.spectral_pass = le(cert.spectral_norm, 1.0 - epsilon);
  cert.polytopic_pass = polytopic(x.cwiseAbs(), alpha, epsilon);
  cert.kind = FeederKind::Multiphase;
  return cert;
}

bool polytopic_check_1p(const Matrix& x, const Vector& alpha, double epsilon) {
  check_epsilon(epsilon);
  check_alpha(x, alpha);
  if (x.minCoeff() < 0.0) throw KindError("single-phase restriction needs a non-negative X");
  // For the symmetric single-phase X, X alpha and X' alpha coincide.
  return polytopic(x, alpha, epsilon);
}

bool polytopic_check_1p(const FeederModel& model, const Vector& alpha, double epsilon) {
  if (!model.single_phase())
    throw KindError("single-phase polytopic restriction applied to a multiphase feeder");
  return polytopic_check_1p(model.reactance(), alpha, epsilon);
}

bool polytopic_check_3p(const Matrix& x, const Vector& alpha, double epsilon) {
  check_epsilon(epsilon);
  check_alpha(x, alpha);
  return polytopic(x.cwiseAbs(), alpha, epsilon);
}

StabilityCertificate certify(const FeederModel& model, const Vector& alpha, double epsilon) {
  StabilityCertificate cert = spectral_check(model.reactance(), alpha, epsilon);
  cert.kind = model.kind();
  cert.polytopic_pass = model.single_phase()
                            ? polytopic_check_1p(model, alpha, epsilon)
                            : polytopic_check_3p(model.reactance(), alpha, epsilon);
  return cert;
}

int min_depth(double x_norm, double qhat_norm, double epsilon, double eps1) {
  check_epsilon(epsilon);
  if (!(eps1 > 0.0)) throw ValidationError("accuracy eps1 must be positive");
  const double initial = 2.0 * x_norm * qhat_norm;
  if (initial <= eps1) return 0;
  const double t = std::log(initial / eps1) / -std::log1p(-epsilon);
  return static_cast<int>(std::ceil(t));
}

int min_depth(const Matrix& x, const Vector& qhat, double epsilon, double eps1) {
  return min_depth(spectral_norm(x), qhat.norm(), epsilon, eps1);
}

}  // namespace voltvar
