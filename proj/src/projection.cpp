#include "voltvar/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "voltvar/errors.hpp"
#include "voltvar/rules.hpp"

namespace voltvar {

namespace {

using L = Ieee1547Limits;

// Stability rows are solved slightly inside the true boundary so the
// reciprocal map back to slopes cannot land outside it.
constexpr double kInnerShrink = 1e-11;
// Violations at or below this are treated as rounding.
constexpr double kFeasibleTol = 1e-14;

/// g(y) = a'y - b <= 0 with at most three non-zeros.
struct LinearRow {
  int idx[3];
  double coef[3];
  int nnz;
  double rhs;

  double eval(const Vector& y) const {
    double s = -rhs;
    for (int k = 0; k < nnz; ++k) s += coef[k] * y(idx[k]);
    return s;
  }
};

/// Variables y = (delta_1..G, sigma_1..G, c_1..G).
struct Problem {
  int g = 0;
  Vector target;
  std::vector<LinearRow> linear;
  Matrix coupling;  // rows m with some coupling, cols DERs
  double beta = 0.0;

  int dim() const { return 3 * g; }
  int rows() const { return static_cast<int>(linear.size() + coupling.rows()); }

  Vector constraints(const Vector& y) const {
    Vector out(rows());
    int k = 0;
    for (const auto& r : linear) out(k++) = r.eval(y);
    const Vector inv_c = y.tail(g).cwiseInverse();
    for (Index m = 0; m < coupling.rows(); ++m) out(k++) = coupling.row(m).dot(inv_c) - beta;
    return out;
  }

  Vector gradient(int i, const Vector& y) const {
    Vector grad = Vector::Zero(dim());
    if (i < static_cast<int>(linear.size())) {
      const auto& r = linear[static_cast<std::size_t>(i)];
      for (int k = 0; k < r.nnz; ++k) grad(r.idx[k]) += r.coef[k];
    } else {
      const Index m = i - static_cast<int>(linear.size());
      for (int n = 0; n < g; ++n) grad(2 * g + n) = -coupling(m, n) / (y(2 * g + n) * y(2 * g + n));
    }
    return grad;
  }

  /// Adds weight·Hessian of row i (only the coupling rows are curved).
  void add_hessian(int i, const Vector& y, double weight, Matrix& h) const {
    if (i < static_cast<int>(linear.size())) return;
    const Index m = i - static_cast<int>(linear.size());
    for (int n = 0; n < g; ++n) {
      const double c = y(2 * g + n);
      h(2 * g + n, 2 * g + n) += weight * 2.0 * coupling(m, n) / (c * c * c);
    }
  }

  bool strictly_feasible(const Vector& y) const {
    if ((y.tail(g).array() <= 0.0).any()) return false;
    return (constraints(y).array() < 0.0).all();
  }
};

double barrier_value(const Problem& p, const Vector& y, double t) {
  const Vector gv = p.constraints(y);
  double phi = 0.5 * t * (y - p.target).squaredNorm();
  for (Index i = 0; i < gv.size(); ++i) phi -= std::log(-gv(i));
  return phi;
}

struct BarrierResult {
  Vector y;
  double t = 0.0;
  int iterations = 0;
};

BarrierResult barrier_solve(const Problem& p, Vector y) {
  const int n = p.dim();
  const int m = p.rows();
  BarrierResult res;
  const double f0 = 0.5 * (y - p.target).squaredNorm();
  double t = std::max(1.0, m / std::max(f0, 1e-12));
  for (int outer = 0; outer < 60; ++outer) {
    for (int inner = 0; inner < 50; ++inner) {
      const Vector gv = p.constraints(y);
      Vector grad = t * (y - p.target);
      Matrix h = t * Matrix::Identity(n, n);
      for (int i = 0; i < m; ++i) {
        const double s = -gv(i);
        const Vector gi = p.gradient(i, y);
        grad += gi / s;
        h.noalias() += gi * gi.transpose() / (s * s);
        p.add_hessian(i, y, 1.0 / s, h);
      }
      const Vector step = -h.llt().solve(grad);
      const double decrement = -grad.dot(step);
      ++res.iterations;
      if (!(decrement > 1e-9)) break;
      double s = 1.0;
      const double phi = barrier_value(p, y, t);
      Vector next;
      int halvings = 0;
      for (; halvings < 80; ++halvings) {
        next = y + s * step;
        if (p.strictly_feasible(next) && barrier_value(p, next, t) <= phi - 0.25 * s * decrement)
          break;
        s *= 0.5;
      }
      if (halvings == 80) break;
      y = std::move(next);
    }
    const double f = 0.5 * (y - p.target).squaredNorm();
    // The active-set polish supplies the last digits.
    if (m / t <= 1e-10 * std::max(1.0, f)) break;
    t *= 20.0;
  }
  res.y = std::move(y);
  res.t = t;
  return res;
}

/// Newton iterations on the KKT system of the rows guessed active at the
/// barrier point. Returns false if the guess does not hold up.
bool polish(const Problem& p, const BarrierResult& bar, Vector& out, int& iterations) {
  const Vector g0 = p.constraints(bar.y);
  std::vector<int> active;
  std::vector<double> duals;
  for (int i = 0; i < p.rows(); ++i) {
    const double slack = -g0(i);
    const double lambda = 1.0 / (bar.t * slack);
    if (lambda > slack) {
      active.push_back(i);
      duals.push_back(lambda);
    }
  }
  const int n = p.dim();
  const int k = static_cast<int>(active.size());
  if (k > n) return false;
  Vector y = bar.y;
  Vector nu = Eigen::Map<const Vector>(duals.data(), k);
  bool converged = false;
  for (int it = 0; it < 40; ++it) {
    Matrix kkt = Matrix::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n).setIdentity();
    Vector rhs(n + k);
    Vector ry = y - p.target;
    for (int j = 0; j < k; ++j) {
      const Vector gj = p.gradient(active[static_cast<std::size_t>(j)], y);
      ry += nu(j) * gj;
      kkt.block(0, n + j, n, 1) = gj;
      kkt.block(n + j, 0, 1, n) = gj.transpose();
      Matrix hj = Matrix::Zero(n, n);
      p.add_hessian(active[static_cast<std::size_t>(j)], y, nu(j), hj);
      kkt.topLeftCorner(n, n) += hj;
    }
    const Vector gv = p.constraints(y);
    rhs.head(n) = -ry;
    for (int j = 0; j < k; ++j) rhs(n + j) = -gv(active[static_cast<std::size_t>(j)]);
    const auto lu = kkt.fullPivLu();
    if (!lu.isInvertible()) return false;
    const Vector d = lu.solve(rhs);
    y += d.head(n);
    nu += d.tail(k);
    ++iterations;
    if ((y.tail(p.g).array() <= 0.0).any()) return false;
    if (d.head(n).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + y.lpNorm<Eigen::Infinity>())) {
      converged = true;
      break;
    }
  }
  if (!converged) return false;
  if (k > 0 && nu.minCoeff() < -1e-10) return false;
  const Vector gv = p.constraints(y);
  if (gv.maxCoeff() > 1e-13) return false;
  // The interior barrier point is feasible, so the true projection is no farther.
  if ((y - p.target).norm() > (bar.y - p.target).norm() + 1e-9) return false;
  out = std::move(y);
  return true;
}

}  // namespace

CSpaceConversion to_c_space(const TwinParams& params, double alpha_floor) {
  if (!(alpha_floor > 0.0)) throw ValidationError("slope floor must be positive");
  CSpaceConversion out;
  out.point.vref = params.vref;
  out.point.delta = params.delta;
  out.point.sigma = params.sigma;
  out.point.c = Vector::Zero(params.size());
  for (Index n = 0; n < params.size(); ++n) {
    if (!params.der_mask[static_cast<std::size_t>(n)]) continue;
    double a = params.alpha(n);
    if (!(a >= alpha_floor)) {
      a = alpha_floor;
      ++out.clamped;
    }
    out.point.c(n) = 1.0 / a;
  }
  return out;
}

TwinParams from_c_space(const CSpacePoint& point, const Vector& qhat, const DerMask& mask) {
  TwinParams p;
  p.vref = point.vref;
  p.delta = point.delta;
  p.sigma = point.sigma;
  p.qhat = qhat;
  p.der_mask = mask;
  p.alpha = Vector::Zero(point.c.size());
  for (Index n = 0; n < point.c.size(); ++n) {
    if (!mask[static_cast<std::size_t>(n)]) continue;
    if (!(point.c(n) > 0.0))
      throw ValidationError("non-positive c at node " + std::to_string(n + 1));
    p.alpha(n) = 1.0 / point.c(n);
  }
  return p;
}

FeasibleSet FeasibleSet::build(const FeederModel& model, const Vector& qhat, const DerMask& mask,
                               double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0,1)");
  if (qhat.size() != model.size() || static_cast<Index>(mask.size()) != model.size())
    throw ValidationError("capability vector or DER mask length does not match the feeder");
  FeasibleSet set;
  set.qhat_ = qhat;
  set.mask_ = mask;
  set.ders_ = der_indices(mask);
  set.epsilon_ = epsilon;
  for (Index n : set.ders_)
    if (!(qhat(n) > 0.0))
      throw InfeasibleError("node " + std::to_string(n + 1) + ": rows 'sigma - delta >= 0.02' and "
                            "'sigma - delta <= c*qhat' cannot both hold with qhat = " +
                            std::to_string(qhat(n)));
  const Matrix x_abs = model.reactance().cwiseAbs();
  const Index g = static_cast<Index>(set.ders_.size());
  set.c_min_.resize(g);
  set.coupling_.resize(model.size(), g);
  for (Index j = 0; j < g; ++j) {
    const Index n = set.ders_[static_cast<std::size_t>(j)];
    set.c_min_(j) = x_abs.row(n).sum() / (1.0 - epsilon);
    set.coupling_.col(j) = x_abs.row(n).transpose();
  }
  return set;
}

std::vector<std::string> FeasibleSet::violated_rows(const CSpacePoint& p, double tol) const {
  std::vector<std::string> out;
  auto report = [&](double violation, const std::string& row) {
    if (violation > tol) {
      std::ostringstream s;
      s << row << " violated by " << violation;
      out.push_back(s.str());
    }
  };
  const double bound = 1.0 - epsilon_;
  Vector inv_c = Vector::Zero(static_cast<Index>(ders_.size()));
  for (std::size_t j = 0; j < ders_.size(); ++j) {
    const Index n = ders_[j];
    const std::string id = "node " + std::to_string(n + 1) + ": ";
    report(L::kVrefMin - p.vref(n), id + "vref >= 0.95");
    report(p.vref(n) - L::kVrefMax, id + "vref <= 1.05");
    report(-p.delta(n), id + "delta >= 0");
    report(p.delta(n) - L::kDeltaMax, id + "delta <= 0.03");
    report(p.delta(n) + L::kMinSaturationGap - p.sigma(n), id + "sigma >= delta + 0.02");
    report(p.sigma(n) - L::kSigmaMax, id + "sigma <= 0.18");
    report(p.sigma(n) - p.delta(n) - p.c(n) * qhat_(n), id + "sigma - delta <= c*qhat");
    report(c_min_(static_cast<Index>(j)) - p.c(n), id + "c >= |X|1/(1-eps)");
    if (!(p.c(n) > 0.0)) {
      report(std::numeric_limits<double>::infinity(), id + "c > 0");
      return out;
    }
    inv_c(static_cast<Index>(j)) = 1.0 / p.c(n);
  }
  const Vector load = coupling_ * inv_c;
  for (Index m = 0; m < load.size(); ++m)
    report(load(m) - bound, "node " + std::to_string(m + 1) + ": |X|'a <= 1-eps with a = 1/c");
  return out;
}

double FeasibleSet::residual(const CSpacePoint& p) const {
  using std::max;
  double worst = 0.0;
  const double bound = 1.0 - epsilon_;
  Vector inv_c = Vector::Zero(static_cast<Index>(ders_.size()));
  for (std::size_t j = 0; j < ders_.size(); ++j) {
    const Index n = ders_[j];
    if (!(p.c(n) > 0.0)) return std::numeric_limits<double>::infinity();
    worst = max({worst, L::kVrefMin - p.vref(n), p.vref(n) - L::kVrefMax, -p.delta(n),
                 p.delta(n) - L::kDeltaMax, p.delta(n) + L::kMinSaturationGap - p.sigma(n),
                 p.sigma(n) - L::kSigmaMax, p.sigma(n) - p.delta(n) - p.c(n) * qhat_(n),
                 c_min_(static_cast<Index>(j)) - p.c(n)});
    inv_c(static_cast<Index>(j)) = 1.0 / p.c(n);
  }
  if (!ders_.empty()) worst = max(worst, (coupling_ * inv_c).maxCoeff() - bound);
  return worst;
}

ProjectionResult FeasibleSet::project(const CSpacePoint& p) const {
  const Index n_nodes = static_cast<Index>(mask_.size());
  if (p.vref.size() != n_nodes || p.c.size() != n_nodes || p.delta.size() != n_nodes ||
      p.sigma.size() != n_nodes)
    throw ValidationError("projection input does not match the feasible set size");
  for (Index n : ders_)
    if (!std::isfinite(p.vref(n)) || !std::isfinite(p.c(n)) || !std::isfinite(p.delta(n)) ||
        !std::isfinite(p.sigma(n)))
      throw ValidationError("non-finite projection input at node " + std::to_string(n + 1));

  ProjectionResult res;
  res.point = p;
  const int g = static_cast<int>(ders_.size());
  auto finish = [&](ProjectionResult& r) {
    r.aux = Vector::Zero(n_nodes);
    double d2 = 0.0;
    for (Index n : ders_) {
      r.aux(n) = 1.0 / r.point.c(n);
      d2 += (r.point.vref(n) - p.vref(n)) * (r.point.vref(n) - p.vref(n)) +
            (r.point.c(n) - p.c(n)) * (r.point.c(n) - p.c(n)) +
            (r.point.delta(n) - p.delta(n)) * (r.point.delta(n) - p.delta(n)) +
            (r.point.sigma(n) - p.sigma(n)) * (r.point.sigma(n) - p.sigma(n));
    }
    r.displacement = std::sqrt(d2);
    r.residual = residual(r.point);
    return r;
  };
  if (g == 0 || residual(p) <= kFeasibleTol) return finish(res);

  for (Index n : ders_) res.point.vref(n) = std::clamp(p.vref(n), L::kVrefMin, L::kVrefMax);

  Problem prob;
  prob.g = g;
  prob.target.resize(3 * g);
  for (int j = 0; j < g; ++j) {
    const Index n = ders_[static_cast<std::size_t>(j)];
    prob.target(j) = p.delta(n);
    prob.target(g + j) = p.sigma(n);
    prob.target(2 * g + j) = p.c(n);
    const int d = j, s = g + j, c = 2 * g + j;
    prob.linear.push_back({{d, 0, 0}, {-1.0, 0, 0}, 1, 0.0});
    prob.linear.push_back({{d, 0, 0}, {1.0, 0, 0}, 1, L::kDeltaMax});
    prob.linear.push_back({{d, s, 0}, {1.0, -1.0, 0}, 2, -L::kMinSaturationGap});
    prob.linear.push_back({{s, 0, 0}, {1.0, 0, 0}, 1, L::kSigmaMax});
    prob.linear.push_back({{s, d, c}, {1.0, -1.0, -qhat_(n)}, 3, 0.0});
    prob.linear.push_back({{c, 0, 0}, {-1.0, 0, 0}, 1, -c_min_(j) * (1.0 + kInnerShrink)});
  }
  std::vector<Index> coupled;
  for (Index m = 0; m < coupling_.rows(); ++m)
    if (coupling_.row(m).maxCoeff() > 0.0) coupled.push_back(m);
  prob.coupling.resize(static_cast<Index>(coupled.size()), g);
  for (std::size_t k = 0; k < coupled.size(); ++k)
    prob.coupling.row(static_cast<Index>(k)) = coupling_.row(coupled[k]);
  prob.beta = (1.0 - epsilon_) * (1.0 - kInnerShrink);

  // Strictly interior start: mid-range deadband and saturation, then c
  // scaled up until every coupling row sits at half its bound.
  Vector y0(3 * g);
  for (int j = 0; j < g; ++j) {
    const Index n = ders_[static_cast<std::size_t>(j)];
    y0(j) = 0.015;
    y0(g + j) = 0.1;
    y0(2 * g + j) = std::max(2.0 * c_min_(j), 2.0 * 0.085 / qhat_(n));
  }
  if (prob.coupling.rows() > 0) {
    const double load = (prob.coupling * y0.tail(g).cwiseInverse()).maxCoeff();
    const double scale = load / (0.5 * prob.beta);
    if (scale > 1.0) y0.tail(g) *= scale;
  }

  const BarrierResult bar = barrier_solve(prob, y0);
  res.iterations = bar.iterations;
  Vector y = bar.y;
  Vector polished;
  if (polish(prob, bar, polished, res.iterations)) {
    y = std::move(polished);
    res.polished = true;
  }

  for (int j = 0; j < g; ++j) {
    const Index n = ders_[static_cast<std::size_t>(j)];
    double d = std::clamp(y(j), 0.0, L::kDeltaMax);
    double s = std::clamp(y(g + j), d + L::kMinSaturationGap, L::kSigmaMax);
    double c = std::max({y(2 * g + j), c_min_(j), (s - d) / qhat_(n)});
    res.point.delta(n) = d;
    res.point.sigma(n) = s;
    res.point.c(n) = c;
  }
  return finish(res);
}

}  // namespace voltvar
