#include "voltvar/twin.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "voltvar/errors.hpp"

namespace voltvar {

namespace {

double ramp(double x) { return x > 0.0 ? x : 0.0; }

struct Ramps {
  double r[4];
  bool on[4];
};

Ramps ramps(double vref, double delta, double sigma, double v) {
  Ramps out{{v - vref - delta, v - vref - sigma, vref - delta - v, vref - sigma - v}, {}};
  for (int k = 0; k < 4; ++k) {
    out.on[k] = out.r[k] > 0.0;
    out.r[k] = ramp(out.r[k]);
  }
  return out;
}

void check_params(const FeederModel& model, const TwinParams& p) {
  const Index n = model.size();
  if (p.vref.size() != n || p.alpha.size() != n || p.delta.size() != n || p.sigma.size() != n ||
      static_cast<Index>(p.der_mask.size()) != n)
    throw ValidationError("twin weights do not match the feeder size");
}

Vector layer(const TwinParams& p, const Vector& v) {
  Vector q = Vector::Zero(v.size());
  for (Index n = 0; n < v.size(); ++n)
    if (p.der_mask[static_cast<std::size_t>(n)])
      q(n) = block_forward(p.vref(n), p.alpha(n), p.delta(n), p.sigma(n), v(n));
  return q;
}

double half_sq_dev(const Vector& v) { return 0.5 * (v.array() - 1.0).square().sum(); }

/// Unscaled gradient of 1/2 ||v_out - 1||^2 for one scenario.
TwinGradient scenario_gradient(const FeederModel& model, const TwinConfig& config,
                               const TwinParams& p, const Scenario& s) {
  const TwinOutput out = forward(model, config, p, s);
  const Matrix& x = model.reactance();
  TwinGradient g = TwinGradient::zeros(model.size());
  g.loss = half_sq_dev(out.v_out);
  Vector gv = out.v_out.array() - 1.0;
  for (int t = out.layers_used; t >= 1; --t) {
    const Vector gq = x.transpose() * gv;
    const Vector& v_in = out.voltages[static_cast<std::size_t>(t - 1)];
    Vector gv_prev = Vector::Zero(gv.size());
    for (Index n = 0; n < gq.size(); ++n) {
      if (!p.der_mask[static_cast<std::size_t>(n)] || gq(n) == 0.0) continue;
      const Ramps r = ramps(p.vref(n), p.delta(n), p.sigma(n), v_in(n));
      const double a = p.alpha(n);
      const double i1 = r.on[0], i2 = r.on[1], i3 = r.on[2], i4 = r.on[3];
      g.alpha(n) += gq(n) * (-r.r[0] + r.r[1] + r.r[2] - r.r[3]);
      g.vref(n) += gq(n) * a * (i1 - i2 + i3 - i4);
      g.delta(n) += gq(n) * a * (i1 - i3);
      g.sigma(n) += gq(n) * a * (i4 - i2);
      gv_prev(n) = gq(n) * a * (-i1 + i2 - i3 + i4);
    }
    gv = std::move(gv_prev);
  }
  return g;
}

}  // namespace

TwinParams TwinParams::from_rule(const RuleParams& rule) {
  rule.check_structure();
  TwinParams p;
  p.vref = rule.vref;
  p.alpha = rule.slopes();
  p.delta = rule.delta;
  p.sigma = rule.sigma;
  p.qhat = rule.qhat;
  p.der_mask = rule.der_mask;
  return p;
}

RuleParams TwinParams::to_rule() const {
  RuleParams r;
  r.vref = vref;
  r.delta = delta;
  r.sigma = sigma;
  r.qhat = qhat;
  r.der_mask = der_mask;
  r.qbar = Vector::Zero(size());
  r.parameterization = Parameterization::VrefAlphaDeltaSigma;
  for (Index n = 0; n < size(); ++n) {
    if (!der_mask[static_cast<std::size_t>(n)]) continue;
    if (alpha(n) < 0.0) throw ValidationError("negative slope at node " + std::to_string(n + 1));
    r.qbar(n) = alpha(n) * (sigma(n) - delta(n));
  }
  r.check_structure();
  return r;
}

void TwinConfig::check() const {
  if (depth < 1) throw ValidationError("twin depth must be at least 1");
  if (adaptive && !(adaptive_tol > 0.0))
    throw ValidationError("adaptive depth needs a positive tolerance");
}

double block_forward(double vref, double alpha, double delta, double sigma, double v) {
  return -alpha * ramp(v - (vref + delta)) + alpha * ramp(v - (vref + sigma)) +
         alpha * ramp((vref - delta) - v) - alpha * ramp((vref - sigma) - v);
}

TwinOutput forward(const FeederModel& model, const TwinConfig& config, const TwinParams& params,
                   const Scenario& scenario) {
  config.check();
  check_params(model, params);
  if (scenario.vtilde.size() != model.size())
    throw ValidationError("scenario does not match the feeder size");
  const Matrix& x = model.reactance();
  const int cap = config.adaptive ? (config.max_depth > 0 ? config.max_depth : 10 * config.depth)
                                  : config.depth;

  TwinOutput out;
  out.voltages.reserve(static_cast<std::size_t>(cap) + 1);
  out.voltages.push_back(scenario.vtilde);
  Vector q = Vector::Zero(model.size());
  double prev = half_sq_dev(scenario.vtilde);
  for (int t = 1; t <= cap; ++t) {
    q = layer(params, out.voltages.back());
    out.voltages.push_back(x * q + scenario.vtilde);
    out.layers_used = t;
    if (config.adaptive) {
      const double obj = half_sq_dev(out.voltages.back());
      if (std::abs(obj - prev) < config.adaptive_tol) break;
      prev = obj;
    }
  }
  out.q_out = std::move(q);
  out.v_out = out.voltages.back();
  return out;
}

double loss(const std::vector<TwinOutput>& outputs) {
  if (outputs.empty()) throw ValidationError("loss needs at least one scenario");
  double total = 0.0;
  for (const auto& o : outputs) total += half_sq_dev(o.v_out);
  return total / static_cast<double>(outputs.size());
}

TwinGradient TwinGradient::zeros(Index n) {
  TwinGradient g;
  g.vref = Vector::Zero(n);
  g.alpha = Vector::Zero(n);
  g.delta = Vector::Zero(n);
  g.sigma = Vector::Zero(n);
  return g;
}

TwinGradient& TwinGradient::operator+=(const TwinGradient& other) {
  loss += other.loss;
  vref += other.vref;
  alpha += other.alpha;
  delta += other.delta;
  sigma += other.sigma;
  return *this;
}

TwinGradient backward(const FeederModel& model, const TwinConfig& config,
                      const TwinParams& params, const std::vector<const Scenario*>& batch,
                      int threads) {
  if (batch.empty()) throw ValidationError("gradient needs a non-empty batch");
  config.check();
  check_params(model, params);
  const std::size_t b = batch.size();
  std::vector<TwinGradient> parts(b);
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), b);
  if (workers <= 1) {
    for (std::size_t i = 0; i < b; ++i) parts[i] = scenario_gradient(model, config, params, *batch[i]);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < b; i += workers)
          parts[i] = scenario_gradient(model, config, params, *batch[i]);
      });
    for (auto& th : pool) th.join();
  }
  TwinGradient total = TwinGradient::zeros(model.size());
  for (const auto& p : parts) total += p;
  const double scale = 1.0 / static_cast<double>(b);
  total.loss *= scale;
  total.vref *= scale;
  total.alpha *= scale;
  total.delta *= scale;
  total.sigma *= scale;
  return total;
}

TwinGradient backward(const FeederModel& model, const TwinConfig& config,
                      const TwinParams& params, const ScenarioSet& scenarios, int threads) {
  std::vector<const Scenario*> batch;
  for (const auto& s : scenarios.scenarios) batch.push_back(&s);
  return backward(model, config, params, batch, threads);
}

}  // namespace voltvar
