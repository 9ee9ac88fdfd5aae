#include "voltvar/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "voltvar/errors.hpp"
#include "voltvar/stability.hpp"

namespace voltvar {

namespace {

constexpr int kRegions = 5;

/// Rule curves and reactance restricted to the DER nodes. G is 1, 2 or Dynamic.
template <int G>
struct ReducedSystem {
  using Vec = Eigen::Matrix<double, G, 1>;
  using Mat = Eigen::Matrix<double, G, G>;

  int size = 0;
  Mat x;
  Vec vref, delta, sigma, qbar, alpha;

  void resize(int g) {
    size = g;
    x.resize(g, g);
    vref.resize(g);
    delta.resize(g);
    sigma.resize(g);
    qbar.resize(g);
    alpha.resize(g);
  }

  bool fixed_zero(int n) const { return !(qbar(n) > 0.0); }

  Vec rule(const Vec& v) const {
    Vec q(size);
    for (int n = 0; n < size; ++n)
      q(n) = fixed_zero(n) ? 0.0 : curve_value(vref(n), delta(n), sigma(n), qbar(n), v(n));
    return q;
  }

  Region region_of(int n, double v) const {
    const double u = v - vref(n);
    if (u >= sigma(n)) return Region::SatHigh;
    if (u > delta(n)) return Region::AffineHigh;
    if (u >= -delta(n)) return Region::Deadband;
    if (u > -sigma(n)) return Region::AffineLow;
    return Region::SatLow;
  }

  /// Solves q_n = fixed value or q_n + alpha_n (X q)_n = alpha_n (k_n - vtilde_n).
  std::optional<Vec> solve(const Region* regions, const Vec& vt) const {
    Mat a = Mat::Identity(size, size);
    Vec b(size);
    for (int n = 0; n < size; ++n) {
      const Region r = fixed_zero(n) ? Region::Deadband : regions[n];
      switch (r) {
        case Region::SatLow: b(n) = qbar(n); break;
        case Region::SatHigh: b(n) = -qbar(n); break;
        case Region::Deadband: b(n) = 0.0; break;
        case Region::AffineLow:
        case Region::AffineHigh: {
          const double knee = r == Region::AffineLow ? vref(n) - delta(n) : vref(n) + delta(n);
          a.row(n) += alpha(n) * x.row(n);
          b(n) = alpha(n) * (knee - vt(n));
          break;
        }
      }
    }
    const auto lu = a.fullPivLu();
    if (!lu.isInvertible()) return std::nullopt;
    return Vec(lu.solve(b));
  }

  bool consistent(const Region* regions, const Vec& q, const Vec& vt, double tol) const {
    const Vec v = x * q + vt;
    for (int n = 0; n < size; ++n) {
      if (fixed_zero(n)) continue;
      const double u = v(n) - vref(n);
      bool ok = false;
      switch (regions[n]) {
        case Region::SatLow: ok = u <= -sigma(n) + tol; break;
        case Region::AffineLow: ok = u >= -sigma(n) - tol && u <= -delta(n) + tol; break;
        case Region::Deadband: ok = u >= -delta(n) - tol && u <= delta(n) + tol; break;
        case Region::AffineHigh: ok = u >= delta(n) - tol && u <= sigma(n) + tol; break;
        case Region::SatHigh: ok = u >= sigma(n) - tol; break;
      }
      if (!ok) return false;
    }
    return true;
  }

  /// Warm-started exact solve: iterate the loop, read the regions off the
  /// iterate, solve that assignment, and fall back to full enumeration.
  std::optional<Vec> equilibrium(const Vec& vt, double tol) const {
    Vec q = Vec::Zero(size);
    for (int it = 0; it < 400; ++it) {
      const Vec next = rule(x * q + vt);
      const double change = (next - q).cwiseAbs().maxCoeff();
      q = next;
      if (change < 1e-11) break;
    }
    std::array<Region, kMaxEnumeratedDers> regions{};
    const Vec v = x * q + vt;
    for (int n = 0; n < size; ++n) regions[static_cast<std::size_t>(n)] = region_of(n, v(n));
    if (auto sol = solve(regions.data(), vt); sol && consistent(regions.data(), *sol, vt, tol))
      return sol;
    std::optional<Vec> found;
    enumerate([&](const Region* r) {
      if (auto sol = solve(r, vt); sol && consistent(r, *sol, vt, tol)) {
        found = sol;
        return false;
      }
      return true;
    });
    return found;
  }

  /// Calls fn for every assignment until it returns false.
  template <class Fn>
  void enumerate(Fn&& fn) const {
    std::array<Region, kMaxEnumeratedDers> r{};
    long total = 1;
    for (int n = 0; n < size; ++n) total *= kRegions;
    for (long code = 0; code < total; ++code) {
      long c = code;
      for (int n = 0; n < size; ++n) {
        r[static_cast<std::size_t>(n)] = static_cast<Region>(c % kRegions);
        c /= kRegions;
      }
      if (!fn(r.data())) return;
    }
  }
};

template <int G>
ReducedSystem<G> reduce(const Matrix& x, const RuleParams& params,
                        const std::vector<Index>& ders) {
  ReducedSystem<G> sys;
  const int g = static_cast<int>(ders.size());
  sys.resize(g);
  const Vector alpha = params.slopes();
  for (int i = 0; i < g; ++i) {
    const Index n = ders[static_cast<std::size_t>(i)];
    for (int j = 0; j < g; ++j) sys.x(i, j) = x(n, ders[static_cast<std::size_t>(j)]);
    sys.vref(i) = params.vref(n);
    sys.delta(i) = params.delta(n);
    sys.sigma(i) = params.sigma(n);
    sys.qbar(i) = params.qbar(n);
    sys.alpha(i) = alpha(n);
  }
  return sys;
}

Vector gather(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

std::vector<double> linspace(double lo, double hi, int points) {
  std::vector<double> out;
  if (points <= 1) {
    out.push_back(0.5 * (lo + hi));
    return out;
  }
  for (int i = 0; i < points; ++i)
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  return out;
}

}  // namespace

KKTResidual kkt_residual(const FeederModel& model, const RuleParams& params,
                         const Scenario& scenario, const Vector& q, double active_tol) {
  params.check_structure();
  if (!model.single_phase())
    throw KindError("KKT conditions of the inner program need a single-phase feeder");
  const Index n_nodes = model.size();
  if (q.size() != n_nodes || params.size() != n_nodes || scenario.vtilde.size() != n_nodes)
    throw ValidationError("kkt_residual: dimension mismatch");

  const Vector alpha = params.slopes();
  const Vector xq = model.reactance() * q;
  KKTResidual out;
  KKTPoint& p = out.point;
  p.q = q;
  p.w = q.cwiseAbs();
  p.lambda_lo = Vector::Zero(n_nodes);
  p.lambda_hi = Vector::Zero(n_nodes);
  p.mu_lo = Vector::Zero(n_nodes);
  p.mu_hi = Vector::Zero(n_nodes);

  for (Index n = 0; n < n_nodes; ++n) {
    if (!params.der_mask[static_cast<std::size_t>(n)]) {
      p.w(n) = 0.0;
      out.primal_feasibility = std::max(out.primal_feasibility, std::abs(q(n)));
      continue;
    }
    const double qbar = params.qbar(n);
    const double delta = params.delta(n);
    const double tol = active_tol * std::max(1.0, qbar);
    const double qn = q(n);
    double& l_lo = p.lambda_lo(n);
    double& l_hi = p.lambda_hi(n);
    double& m_lo = p.mu_lo(n);
    double& m_hi = p.mu_hi(n);

    if (qbar <= tol || !(alpha(n) > 0.0)) {
      // No reactive range: both box rows can be active.
      const double g = xq(n) + scenario.vtilde(n) - params.vref(n);
      l_lo = l_hi = 0.5 * delta;
      m_hi = std::max(0.0, -g);
      m_lo = std::max(0.0, g);
    } else {
      const double g = xq(n) + qn / alpha(n) + scenario.vtilde(n) - params.vref(n);
      if (std::abs(qn) <= tol) {
        l_hi = 0.5 * (delta - g);
        l_lo = 0.5 * (delta + g);
      } else if (qn >= qbar - tol) {
        l_hi = delta;
        m_hi = -g - delta;
      } else if (qn <= -qbar + tol) {
        l_lo = delta;
        m_lo = g - delta;
      } else if (qn > 0.0) {
        l_hi = delta;
      } else {
        l_lo = delta;
      }
      const double stat = g - l_lo + l_hi - m_lo + m_hi;
      out.stationarity = std::max(out.stationarity, std::abs(stat));
    }
    out.stationarity = std::max(out.stationarity, std::abs(delta - l_lo - l_hi));
    out.primal_feasibility = std::max(
        {out.primal_feasibility, std::abs(qn) - p.w(n), std::abs(qn) - qbar, 0.0});
    out.dual_feasibility = std::max({out.dual_feasibility, -l_lo, -l_hi, -m_lo, -m_hi, 0.0});
    out.complementarity = std::max({out.complementarity, std::abs(l_hi * (qn - p.w(n))),
                                    std::abs(l_lo * (-qn - p.w(n))),
                                    std::abs(m_hi * (qn - qbar)), std::abs(m_lo * (-qn - qbar))});
  }
  out.residual = std::max({out.stationarity, out.primal_feasibility, out.dual_feasibility,
                           out.complementarity});
  return out;
}

EnumerationResult enumerate_equilibrium(const FeederModel& model, const RuleParams& params,
                                        const Scenario& scenario, double boundary_tol) {
  params.check_structure();
  if (params.size() != model.size() || scenario.vtilde.size() != model.size())
    throw ValidationError("enumerate_equilibrium: dimension mismatch");
  const auto ders = der_indices(params.der_mask);
  if (static_cast<int>(ders.size()) > kMaxEnumeratedDers)
    throw ValidationError("region enumeration supports at most " +
                          std::to_string(kMaxEnumeratedDers) + " DER nodes");

  const auto sys = reduce<Eigen::Dynamic>(model.reactance(), params, ders);
  const Vector vt = gather(scenario.vtilde, ders);

  EnumerationResult out;
  std::vector<Vector> solutions;
  std::vector<std::vector<Region>> assignments;
  sys.enumerate([&](const Region* r) {
    auto sol = sys.solve(r, vt);
    if (!sol || !sys.consistent(r, *sol, vt, boundary_tol)) return true;
    ++out.consistent_assignments;
    bool known = false;
    for (const auto& s : solutions)
      if ((s - *sol).cwiseAbs().maxCoeff() <= 1e-9) known = true;
    if (!known) {
      solutions.push_back(*sol);
      assignments.emplace_back(r, r + sys.size);
    }
    return true;
  });
  out.distinct_solutions = static_cast<int>(solutions.size());
  if (solutions.empty())
    throw BoundaryAmbiguityError("no region assignment is consistent within tolerance " +
                                 std::to_string(boundary_tol));
  if (solutions.size() > 1)
    throw BoundaryAmbiguityError(std::to_string(solutions.size()) +
                                 " region assignments give different equilibria");

  out.regions = assignments.front();
  EquilibriumResult& eq = out.equilibrium;
  eq.method = EquilibriumMethod::RegionEnumeration;
  eq.q_star = Vector::Zero(model.size());
  for (std::size_t i = 0; i < ders.size(); ++i) eq.q_star(ders[i]) = solutions.front()(static_cast<Index>(i));
  eq.v_star = model.reactance() * eq.q_star + scenario.vtilde;
  eq.fixed_point_residual =
      (eval_rule_vector(params, eq.v_star) - eq.q_star).lpNorm<Eigen::Infinity>();
  eq.iterations = out.consistent_assignments;
  if (model.single_phase()) {
    eq.objective = inner_objective(model, params, scenario, eq.q_star);
    eq.kkt_residual = kkt_residual(model, params, scenario, eq.q_star).residual;
  } else {
    eq.kkt_residual = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

BigMSpec BigMSpec::with_dual_bound(const RuleParams& params, double m1) {
  BigMSpec spec;
  spec.m1 = m1;
  spec.m2 = 2.0 * params.qbar;
  return spec;
}

BigMSpec calibrate_big_m(const FeederModel& model, const RuleParams& params,
                         const ScenarioSet& scenarios) {
  double largest = 0.0;
  for (const auto& s : scenarios.scenarios) {
    const auto eq = equilibrium_fixed_point(model, params, s);
    const auto kkt = kkt_residual(model, params, s, eq.q_star);
    const auto& p = kkt.point;
    largest = std::max({largest, p.lambda_lo.maxCoeff(), p.lambda_hi.maxCoeff(),
                        p.mu_lo.maxCoeff(), p.mu_hi.maxCoeff()});
  }
  return BigMSpec::with_dual_bound(params, 2.0 * largest + 1.0);
}

BigMCheck check_big_m(const FeederModel& model, const RuleParams& params, const KKTPoint& point,
                      const BigMSpec& spec, double tol) {
  params.check_structure();
  const Index n_nodes = model.size();
  if (point.q.size() != n_nodes || spec.m2.size() != n_nodes)
    throw ValidationError("check_big_m: dimension mismatch");

  BigMCheck out;
  out.assignment_found = true;
  out.capability_rows_pass = true;
  out.binaries.resize(static_cast<std::size_t>(n_nodes), {0, 0, 0, 0});
  const Vector alpha = params.slopes();

  for (Index n = 0; n < n_nodes; ++n) {
    if (!params.der_mask[static_cast<std::size_t>(n)]) continue;
    const double q = point.q(n), w = point.w(n), qbar = params.qbar(n);
    const std::array<double, 4> duals{point.lambda_hi(n), point.lambda_lo(n), point.mu_hi(n),
                                      point.mu_lo(n)};
    const std::array<double, 4> slacks{w - q, w + q, qbar - q, qbar + q};
    static const char* kNames[4] = {"lambda_hi/(w-q)", "lambda_lo/(w+q)", "mu_hi/(qbar-q)",
                                    "mu_lo/(qbar+q)"};
    for (std::size_t k = 0; k < 4; ++k) {
      const double d = duals[k], s = slacks[k];
      int b = 0;
      bool ok = d >= -tol && s >= -tol;
      if (d > tol) {
        b = 1;
        ok = ok && d <= spec.m1 + tol && s <= tol;
      } else {
        ok = ok && s <= spec.m2(n) + tol;
      }
      out.binaries[static_cast<std::size_t>(n)][k] = b;
      if (!ok) {
        out.assignment_found = false;
        out.failures.push_back("node " + std::to_string(n + 1) + " pair " + kNames[k] +
                               ": dual " + std::to_string(d) + ", slack " + std::to_string(s));
      }
    }
    if (qbar > 0.0 && alpha(n) > 0.0) {
      const double cq = qbar / alpha(n);
      if (cq < 0.02 - tol || cq > 0.18 - params.delta(n) + tol) {
        out.capability_rows_pass = false;
        out.failures.push_back("node " + std::to_string(n + 1) +
                               ": c*qbar = " + std::to_string(cq) +
                               " outside [0.02, 0.18 - delta]");
      }
    }
  }
  out.pass = out.assignment_found && out.capability_rows_pass;
  return out;
}

namespace {

/// One DER's curve on the oracle grid.
struct CurvePoint {
  double vref, delta, alpha, qbar;
  double sigma() const { return delta + qbar / alpha; }
};

bool curve_feasible(const CurvePoint& c, double qhat, double alpha_max) {
  using L = Ieee1547Limits;
  const double gap = c.qbar / c.alpha;
  return c.vref >= L::kVrefMin - 1e-12 && c.vref <= L::kVrefMax + 1e-12 && c.delta >= 0.0 &&
         c.delta <= L::kDeltaMax + 1e-12 && c.alpha > 0.0 && c.alpha <= alpha_max &&
         c.qbar > 0.0 && c.qbar <= qhat + 1e-12 && gap >= L::kMinSaturationGap - 1e-12 &&
         c.delta + gap <= L::kSigmaMax + 1e-12;
}

template <int G>
class OracleEvaluator {
 public:
  OracleEvaluator(const FeederModel& model, const ScenarioSet& scenarios,
                  const std::vector<Index>& ders)
      : ders_(ders) {
    const Index g = static_cast<Index>(ders.size());
    x_cols_ = Matrix(model.size(), g);
    for (Index j = 0; j < g; ++j) x_cols_.col(j) = model.reactance().col(ders[static_cast<std::size_t>(j)]);
    base_.resize(g);
    base_.size = static_cast<int>(g);
    for (Index i = 0; i < g; ++i)
      for (Index j = 0; j < g; ++j)
        base_.x(i, j) = model.reactance()(ders[static_cast<std::size_t>(i)], ders[static_cast<std::size_t>(j)]);
    for (const auto& s : scenarios.scenarios) {
      vtilde_.push_back(s.vtilde);
      typename ReducedSystem<G>::Vec vt(g);
      for (Index i = 0; i < g; ++i) vt(i) = s.vtilde(ders[static_cast<std::size_t>(i)]);
      vt_der_.push_back(vt);
    }
  }

  /// Returns +inf when some scenario has no consistent equilibrium.
  double objective(const CurvePoint* curves) const {
    ReducedSystem<G> sys = base_;
    for (int i = 0; i < sys.size; ++i) {
      sys.vref(i) = curves[i].vref;
      sys.delta(i) = curves[i].delta;
      sys.alpha(i) = curves[i].alpha;
      sys.qbar(i) = curves[i].qbar;
      sys.sigma(i) = curves[i].sigma();
    }
    double total = 0.0;
    for (std::size_t s = 0; s < vtilde_.size(); ++s) {
      const auto q = sys.equilibrium(vt_der_[s], 1e-9);
      if (!q) return std::numeric_limits<double>::infinity();
      const Vector v = x_cols_ * Vector(*q) + vtilde_[s];
      total += (v.array() - 1.0).square().sum();
    }
    return total / (2.0 * static_cast<double>(vtilde_.size()));
  }

 private:
  std::vector<Index> ders_;
  Matrix x_cols_;
  ReducedSystem<G> base_;
  std::vector<Vector> vtilde_;
  std::vector<typename ReducedSystem<G>::Vec> vt_der_;
};

template <int G>
GridSearchResult run_grid(const FeederModel& model, const ScenarioSet& scenarios,
                          const Vector& qhat, const DerMask& mask, double epsilon,
                          const GridSpec& grid, bool keep_log) {
  using L = Ieee1547Limits;
  const auto ders = der_indices(mask);
  const int g = static_cast<int>(ders.size());
  const Matrix x_abs = model.reactance().cwiseAbs();
  const Vector row_sums = x_abs.rowwise().sum();

  std::vector<double> alpha_max(static_cast<std::size_t>(g));
  std::vector<std::vector<CurvePoint>> per_der(static_cast<std::size_t>(g));
  for (int i = 0; i < g; ++i) {
    const Index n = ders[static_cast<std::size_t>(i)];
    if (!(qhat(n) > 0.0))
      throw InfeasibleError("node " + std::to_string(n + 1) +
                            " has no reactive capability: 0.02 <= sigma - delta <= c*qhat is empty");
    alpha_max[static_cast<std::size_t>(i)] = (1.0 - epsilon) / row_sums(n);
    for (double v : linspace(L::kVrefMin, L::kVrefMax, grid.vref_points))
      for (double d : linspace(0.0, L::kDeltaMax, grid.delta_points))
        for (int ka = 1; ka <= grid.alpha_points; ++ka)
          for (int kq = 1; kq <= grid.qbar_points; ++kq) {
            CurvePoint c{v, d,
                         alpha_max[static_cast<std::size_t>(i)] * ka / grid.alpha_points,
                         qhat(n) * kq / grid.qbar_points};
            if (curve_feasible(c, qhat(n), alpha_max[static_cast<std::size_t>(i)]))
              per_der[static_cast<std::size_t>(i)].push_back(c);
          }
    if (per_der[static_cast<std::size_t>(i)].empty())
      throw InfeasibleError("no grid curve at node " + std::to_string(n + 1) +
                            " satisfies 0.02 <= qbar/alpha <= 0.18 - delta with alpha <= " +
                            std::to_string(alpha_max[static_cast<std::size_t>(i)]));
  }

  std::size_t total = 1;
  for (const auto& v : per_der) total *= v.size();
  if (total > grid.max_candidates)
    throw ValidationError("grid has " + std::to_string(total) + " candidates, limit " +
                          std::to_string(grid.max_candidates));

  const OracleEvaluator<G> evaluator(model, scenarios, ders);
  auto stable = [&](const CurvePoint* curves) {
    Vector alpha = Vector::Zero(model.size());
    for (int i = 0; i < g; ++i) alpha(ders[static_cast<std::size_t>(i)]) = curves[i].alpha;
    return model.single_phase() ? polytopic_check_1p(model, alpha, epsilon)
                                : polytopic_check_3p(model.reactance(), alpha, epsilon);
  };

  struct Best {
    double objective = std::numeric_limits<double>::infinity();
    std::size_t index = std::numeric_limits<std::size_t>::max();
    std::array<CurvePoint, 2> curves{};
    std::size_t feasible = 0;
  };

  auto decode = [&](std::size_t idx, CurvePoint* out) {
    for (int i = 0; i < g; ++i) {
      const auto& list = per_der[static_cast<std::size_t>(i)];
      out[i] = list[idx % list.size()];
      idx /= list.size();
    }
  };

  const int threads = std::max(1, grid.threads);
  std::vector<Best> partial(static_cast<std::size_t>(threads));
  std::vector<double> objectives(keep_log ? total : 0);
  auto worker = [&](int t) {
    const std::size_t lo = total * static_cast<std::size_t>(t) / static_cast<std::size_t>(threads);
    const std::size_t hi =
        total * static_cast<std::size_t>(t + 1) / static_cast<std::size_t>(threads);
    Best& best = partial[static_cast<std::size_t>(t)];
    std::array<CurvePoint, 2> curves{};
    for (std::size_t idx = lo; idx < hi; ++idx) {
      decode(idx, curves.data());
      double obj = std::numeric_limits<double>::infinity();
      if (stable(curves.data())) {
        obj = evaluator.objective(curves.data());
        if (std::isfinite(obj)) ++best.feasible;
      }
      if (keep_log) objectives[idx] = obj;
      if (obj < best.objective) {
        best.objective = obj;
        best.index = idx;
        best.curves = curves;
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  Best best;
  for (const auto& b : partial) {
    best.feasible += b.feasible;
    if (b.objective < best.objective ||
        (b.objective == best.objective && b.index < best.index)) {
      best.objective = b.objective;
      best.index = b.index;
      best.curves = b.curves;
    }
  }
  if (!std::isfinite(best.objective))
    throw InfeasibleError("every grid candidate violates the stability rows (|X|'alpha <= 1-eps)");

  GridSearchResult result;
  result.evaluated = total;
  result.feasible = best.feasible;

  if (keep_log) {
    result.log.reserve(total);
    std::array<CurvePoint, 2> curves{};
    for (std::size_t idx = 0; idx < total; ++idx) {
      decode(idx, curves.data());
      std::vector<double> row;
      for (int i = 0; i < g; ++i)
        row.insert(row.end(), {curves[static_cast<std::size_t>(i)].vref, curves[static_cast<std::size_t>(i)].delta,
                               curves[static_cast<std::size_t>(i)].sigma(), curves[static_cast<std::size_t>(i)].alpha});
      row.push_back(objectives[idx]);
      result.log.push_back(std::move(row));
    }
  }

  // Local zoom: 3 values per coordinate around the incumbent, halving the step.
  std::array<double, 4> step{
      (L::kVrefMax - L::kVrefMin) / std::max(1, grid.vref_points - 1),
      L::kDeltaMax / std::max(1, grid.delta_points - 1), 0.0, 0.0};
  for (int level = 0; level < grid.refine_levels; ++level) {
    for (auto& h : step) h *= 0.5;
    const int dims = 4 * g;
    std::size_t combos = 1;
    for (int d = 0; d < dims; ++d) combos *= 3;
    const auto center = best.curves;
    for (std::size_t code = 0; code < combos; ++code) {
      std::array<CurvePoint, 2> cand = center;
      std::size_t c = code;
      bool ok = true;
      for (int i = 0; i < g && ok; ++i) {
        const Index n = ders[static_cast<std::size_t>(i)];
        const double amax = alpha_max[static_cast<std::size_t>(i)];
        const double a_step = amax / grid.alpha_points * std::pow(0.5, level + 1);
        const double q_step = qhat(n) / grid.qbar_points * std::pow(0.5, level + 1);
        auto off = [&]() {
          const double o = static_cast<double>(static_cast<int>(c % 3) - 1);
          c /= 3;
          return o;
        };
        CurvePoint& p = cand[static_cast<std::size_t>(i)];
        p.vref = std::clamp(p.vref + off() * step[0], L::kVrefMin, L::kVrefMax);
        p.delta = std::clamp(p.delta + off() * step[1], 0.0, L::kDeltaMax);
        p.alpha = std::min(p.alpha + off() * a_step, amax);
        p.qbar = std::min(p.qbar + off() * q_step, qhat(n));
        ok = curve_feasible(p, qhat(n), amax);
      }
      if (!ok || !stable(cand.data())) continue;
      ++result.evaluated;
      const double obj = evaluator.objective(cand.data());
      if (obj < best.objective) {
        best.objective = obj;
        best.curves = cand;
      }
    }
  }

  RuleParams params = default_rule(qhat, mask);
  for (int i = 0; i < g; ++i) {
    const Index n = ders[static_cast<std::size_t>(i)];
    const auto& c = best.curves[static_cast<std::size_t>(i)];
    params.vref(n) = c.vref;
    params.delta(n) = c.delta;
    params.sigma(n) = c.sigma();
    params.qbar(n) = c.qbar;
  }
  result.best = std::move(params);
  result.objective = best.objective;
  return result;
}

}  // namespace

GridSearchResult grid_search_ord(const FeederModel& model, const ScenarioSet& scenarios,
                                 const Vector& qhat, const DerMask& mask, double epsilon,
                                 const GridSpec& grid, bool keep_log) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0,1)");
  if (scenarios.empty()) throw ValidationError("grid search needs at least one scenario");
  if (qhat.size() != model.size() || static_cast<Index>(mask.size()) != model.size())
    throw ValidationError("capability vector or DER mask length mismatch");
  for (const auto& s : scenarios.scenarios)
    if (s.vtilde.size() != model.size()) throw ValidationError("scenario length mismatch");
  const auto g = der_count(mask);
  if (g == 1) return run_grid<1>(model, scenarios, qhat, mask, epsilon, grid, keep_log);
  if (g == 2) return run_grid<2>(model, scenarios, qhat, mask, epsilon, grid, keep_log);
  throw ValidationError("grid search supports 1 or 2 DERs (got " + std::to_string(g) + ")");
}

void export_minlp(std::ostream& out, const FeederModel& model, const ScenarioSet& scenarios,
                  const Vector& qhat, const DerMask& mask, double epsilon, const BigMSpec& spec) {
  const auto ders = der_indices(mask);
  const Matrix& x = model.reactance();
  const Index n_nodes = model.size();
  const std::size_t s_count = scenarios.size();
  out.precision(17);

  out << "# ORD mixed-integer nonlinear program\n";
  out << "# nodes " << n_nodes << ", DERs " << ders.size() << ", scenarios " << s_count
      << ", epsilon " << epsilon << ", M1 " << spec.m1 << "\n";
  out << "# decision variables per DER n: vref[n], c[n], delta[n], qbar[n], a[n]\n";
  out << "# per scenario s and DER n: q[s,n], w[s,n], llo[s,n], lhi[s,n], mlo[s,n], mhi[s,n],"
         " b1..b4[s,n] binary\n";

  out << "minimize (1/" << 2 * s_count << ") * sum_s sum_m ( sum_n X[m,n] q[s,n] + vt[s,m] - 1 )^2\n";
  for (Index m = 0; m < n_nodes; ++m) {
    out << "row_x[" << m + 1 << "]:";
    for (Index n : ders) out << " " << x(m, n) << "*q[s," << n + 1 << "]";
    out << "\n";
  }
  for (std::size_t s = 0; s < s_count; ++s) {
    out << "vt[" << s + 1 << "] =";
    for (Index m = 0; m < n_nodes; ++m) out << " " << scenarios.scenarios[s].vtilde(m);
    out << "\n";
  }

  const double margin = 1.0 - epsilon;
  const Matrix x_abs = x.cwiseAbs();
  for (Index n : ders) {
    const auto id = std::to_string(n + 1);
    out << "bound_vref[" << id << "]: 0.95 <= vref[" << id << "] <= 1.05\n";
    out << "bound_delta[" << id << "]: 0 <= delta[" << id << "] <= 0.03\n";
    out << "bound_qbar[" << id << "]: 0 <= qbar[" << id << "] <= " << qhat(n) << "\n";
    out << "cap_cq[" << id << "]: 0.02 <= c[" << id << "]*qbar[" << id << "] <= 0.18 - delta["
        << id << "]\n";
    out << "stab_c[" << id << "]: c[" << id << "] >= " << x_abs.row(n).sum() / margin << "\n";
    out << "stab_cone[" << id << "]: a[" << id << "]*c[" << id << "] >= 1\n";
  }
  for (Index m = 0; m < n_nodes; ++m) {
    out << "stab_a[" << m + 1 << "]:";
    for (Index n : ders) out << " + " << x_abs(n, m) << "*a[" << n + 1 << "]";
    out << " <= " << margin << "\n";
  }
  for (std::size_t s = 0; s < s_count; ++s) {
    const auto ss = std::to_string(s + 1);
    for (Index n : ders) {
      const auto id = std::to_string(n + 1);
      const auto sn = "[" + ss + "," + id + "]";
      out << "kkt_stat" << sn << ":";
      for (Index m : ders) out << " + " << x(n, m) << "*q[" << ss << "," << m + 1 << "]";
      out << " + c[" << id << "]*q" << sn << " + " << scenarios.scenarios[s].vtilde(n)
          << " - vref[" << id << "] - llo" << sn << " + lhi" << sn << " - mlo" << sn << " + mhi"
          << sn << " = 0\n";
      out << "kkt_w" << sn << ": delta[" << id << "] - llo" << sn << " - lhi" << sn << " = 0\n";
      out << "kkt_abs" << sn << ": -w" << sn << " <= q" << sn << " <= w" << sn << "\n";
      out << "kkt_box" << sn << ": -qbar[" << id << "] <= q" << sn << " <= qbar[" << id << "]\n";
      out << "kkt_dual" << sn << ": llo, lhi, mlo, mhi" << sn << " >= 0\n";
      const char* pairs[4][2] = {{"lhi", "w - q"}, {"llo", "w + q"}, {"mhi", "qbar - q"},
                                 {"mlo", "qbar + q"}};
      for (int k = 0; k < 4; ++k) {
        out << "bigm" << k + 1 << sn << ": 0 <= " << pairs[k][0] << sn << " <= " << spec.m1
            << "*b" << k + 1 << sn << "; 0 <= (" << pairs[k][1] << ")" << sn
            << " <= " << spec.m2(n) << "*(1 - b" << k + 1 << sn << ")\n";
      }
    }
  }
}

}  // namespace voltvar
