#include "voltvar/feeder.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "voltvar/errors.hpp"

namespace voltvar {

namespace {

constexpr double kPdTolerance = 1e-10;

void check_square_pair(const Matrix& r, const Matrix& x) {
  if (x.rows() == 0 || x.rows() != x.cols())
    throw ValidationError("reactance sensitivity must be a non-empty square matrix");
  if (r.rows() != x.rows() || r.cols() != x.cols())
    throw ValidationError("resistance and reactance sensitivities differ in dimension");
  if (!x.allFinite() || !r.allFinite())
    throw ValidationError("sensitivity matrices contain non-finite entries");
}

std::vector<std::string> default_labels(Index n) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 1; i <= n; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

std::string to_string(FeederKind kind) {
  return kind == FeederKind::SinglePhase ? "single-phase" : "multiphase";
}

double min_symmetric_eigenvalue(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

FeederModel FeederModel::single_phase(Matrix resistance, Matrix reactance, double v0,
                                      std::vector<std::string> labels) {
  check_square_pair(resistance, reactance);
  const Index n = reactance.rows();
  const double scale = std::max(1.0, reactance.cwiseAbs().maxCoeff());
  if ((reactance - reactance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationError("single-phase reactance sensitivity must be symmetric");
  if (reactance.minCoeff() < 0.0)
    throw ValidationError("single-phase reactance sensitivity has negative entries");
  const double lambda_min = min_symmetric_eigenvalue(reactance);
  if (!(lambda_min > kPdTolerance)) {
    std::ostringstream msg;
    msg << "reactance sensitivity is not positive definite (min eigenvalue " << lambda_min << ")";
    throw ValidationError(msg.str());
  }
  if (!labels.empty() && static_cast<Index>(labels.size()) != n)
    throw ValidationError("label count does not match model size");

  FeederModel m;
  m.resistance_ = std::move(resistance);
  m.reactance_ = std::move(reactance);
  m.v0_ = v0;
  m.kind_ = FeederKind::SinglePhase;
  m.phases_.assign(static_cast<std::size_t>(n), "single");
  m.labels_ = labels.empty() ? default_labels(n) : std::move(labels);
  return m;
}

FeederModel FeederModel::multiphase(Matrix resistance, Matrix reactance, double v0,
                                    std::vector<std::string> phases,
                                    std::vector<std::string> labels) {
  check_square_pair(resistance, reactance);
  const Index n = reactance.rows();
  const double lambda_min = min_symmetric_eigenvalue(reactance);
  if (!(lambda_min > kPdTolerance)) {
    std::ostringstream msg;
    msg << "reactance sensitivity fails z'Xz > 0 (symmetric-part min eigenvalue " << lambda_min
        << ")";
    throw ValidationError(msg.str());
  }
  if (phases.empty()) phases.assign(static_cast<std::size_t>(n), "A");
  if (static_cast<Index>(phases.size()) != n)
    throw ValidationError("phase tag count does not match model size");
  for (const auto& p : phases)
    if (p != "A" && p != "B" && p != "C")
      throw ValidationError("multiphase phase tags must be A, B or C (got '" + p + "')");
  if (!labels.empty() && static_cast<Index>(labels.size()) != n)
    throw ValidationError("label count does not match model size");

  FeederModel m;
  m.resistance_ = std::move(resistance);
  m.reactance_ = std::move(reactance);
  m.v0_ = v0;
  m.kind_ = FeederKind::Multiphase;
  m.phases_ = std::move(phases);
  m.labels_ = labels.empty() ? default_labels(n) : std::move(labels);
  return m;
}

FeederModel build_radial_sensitivities(const std::vector<Line>& lines, const std::string& root,
                                       double v0) {
  if (lines.empty()) throw TopologyError("feeder has no lines");

  std::vector<std::string> order;
  std::map<std::string, std::size_t> index;
  auto intern = [&](const std::string& name) {
    if (name == root) return;
    if (index.emplace(name, order.size()).second) order.push_back(name);
  };
  for (const auto& line : lines) {
    if (line.r < 0.0 || line.x < 0.0)
      throw ValidationError("line " + line.from + "-" + line.to + " has negative impedance");
    if (line.from == line.to) throw TopologyError("self-loop at node " + line.from);
    intern(line.from);
    intern(line.to);
  }
  const std::size_t n = order.size();
  if (lines.size() != n)
    throw TopologyError("edge count " + std::to_string(lines.size()) + " != node count " +
                        std::to_string(n) + ": feeder is not a tree (cycle or parallel lines)");

  // Node id n stands for the root in the adjacency arrays.
  const std::size_t root_id = n;
  auto id_of = [&](const std::string& name) { return name == root ? root_id : index.at(name); };
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n + 1);
  for (std::size_t e = 0; e < lines.size(); ++e) {
    const auto a = id_of(lines[e].from);
    const auto b = id_of(lines[e].to);
    adj[a].emplace_back(b, e);
    adj[b].emplace_back(a, e);
  }

  // Breadth-first from the root; record parent edge and cumulative r/x.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n + 1, kNone), parent_edge(n + 1, kNone), depth(n + 1, 0);
  std::vector<double> cum_r(n + 1, 0.0), cum_x(n + 1, 0.0);
  std::vector<bool> seen(n + 1, false);
  std::vector<std::size_t> queue{root_id};
  seen[root_id] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto u = queue[head];
    for (auto [w, e] : adj[u]) {
      if (e == parent_edge[u]) continue;
      if (seen[w])
        throw TopologyError("cycle detected through node " + (w == root_id ? root : order[w]));
      seen[w] = true;
      parent[w] = u;
      parent_edge[w] = e;
      depth[w] = depth[u] + 1;
      cum_r[w] = cum_r[u] + lines[e].r;
      cum_x[w] = cum_x[u] + lines[e].x;
      queue.push_back(w);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw TopologyError("node " + order[i] + " is not connected to root " + root);

  auto common_ancestor = [&](std::size_t a, std::size_t b) {
    while (depth[a] > depth[b]) a = parent[a];
    while (depth[b] > depth[a]) b = parent[b];
    while (a != b) {
      a = parent[a];
      b = parent[b];
    }
    return a;
  };

  const Index nn = static_cast<Index>(n);
  Matrix r(nn, nn), x(nn, nn);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto lca = common_ancestor(i, j);
      const double rv = 2.0 * cum_r[lca];
      const double xv = 2.0 * cum_x[lca];
      r(i, j) = r(j, i) = rv;
      x(i, j) = x(j, i) = xv;
    }
  }
  return FeederModel::single_phase(std::move(r), std::move(x), v0, order);
}

Scenario make_scenario(const FeederModel& model, const Vector& p_g, const Vector& p_l,
                       const Vector& q_l) {
  const Index n = model.size();
  if (p_g.size() != n || p_l.size() != n || q_l.size() != n)
    throw ValidationError("injection vectors must have length " + std::to_string(n));
  Scenario s;
  s.vtilde = model.resistance() * (p_g - p_l) - model.reactance() * q_l +
             Vector::Constant(n, model.v0());
  s.injections = Injections{p_g, p_l, q_l};
  return s;
}

Scenario scenario_from_vtilde(const FeederModel& model, Vector vtilde) {
  if (vtilde.size() != model.size())
    throw ValidationError("vtilde must have length " + std::to_string(model.size()));
  return Scenario{std::move(vtilde), std::nullopt};
}

Vector voltage(const FeederModel& model, const Vector& q, const Scenario& scenario) {
  if (q.size() != model.size() || scenario.vtilde.size() != model.size())
    throw ValidationError("voltage: dimension mismatch");
  return model.reactance() * q + scenario.vtilde;
}

}  // namespace voltvar
