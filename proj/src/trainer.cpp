#include "voltvar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "voltvar/dynamics.hpp"
#include "voltvar/errors.hpp"

namespace voltvar {

std::string to_string(OptimizerMode m) { return m == OptimizerMode::Plain ? "plain" : "adam"; }

OptimizerMode optimizer_mode_from_string(const std::string& name) {
  if (name == "plain" || name == "sgd") return OptimizerMode::Plain;
  if (name == "adam") return OptimizerMode::Adam;
  throw ValidationError("unknown optimizer mode '" + name + "' (plain or adam)");
}

void TrainConfig::check(std::size_t scenario_count) const {
  if (!(step_size >= 0.0) || !std::isfinite(step_size))
    throw ValidationError("step size must be a non-negative number");
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > scenario_count)
    throw ValidationError("batch size must lie in [1, " + std::to_string(scenario_count) + "]");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0,1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
    throw ValidationError("Adam rates must lie in [0,1) with a positive floor");
  if (!(alpha_floor > 0.0)) throw ValidationError("slope floor must be positive");
  if (depth < 0) throw ValidationError("depth must be non-negative");
  if (!(depth_accuracy > 0.0)) throw ValidationError("depth accuracy must be positive");
}

namespace {

void adam_block(const Vector& g, Vector& m, Vector& v, Vector& z, const TrainConfig& c,
                double bc1, double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
  for (Index i = 0; i < z.size(); ++i) {
    const double mh = m(i) / bc1;
    const double vh = v(i) / bc2;
    z(i) -= c.step_size * mh / (std::sqrt(vh) + c.adam_eps);
  }
}

TwinParams stock_init(const Vector& qhat, const DerMask& mask) {
  const Index n = qhat.size();
  TwinParams p;
  p.vref = Vector::Ones(n);
  p.alpha = Vector::Zero(n);
  p.delta = Vector::Constant(n, 0.02);
  p.sigma = Vector::Constant(n, 0.08);
  p.qhat = qhat;
  p.der_mask = mask;
  for (Index i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    p.vref(i) = 0.95;
    p.delta(i) = 0.1;
    p.sigma(i) = 0.3;
    p.alpha(i) = 1.5;
  }
  return p;
}

double full_loss(const FeederModel& model, const TwinConfig& cfg, const TwinParams& p,
                 const ScenarioSet& scenarios) {
  std::vector<TwinOutput> outs;
  outs.reserve(scenarios.size());
  for (const auto& s : scenarios.scenarios) outs.push_back(forward(model, cfg, p, s));
  return loss(outs);
}

}  // namespace

TwinParams sgd_step(const TwinParams& z, const TwinGradient& grad, const TrainConfig& config,
                    OptimizerState& state) {
  TwinParams x = z;
  if (config.mode == OptimizerMode::Plain) {
    x.vref -= config.step_size * grad.vref;
    x.alpha -= config.step_size * grad.alpha;
    x.delta -= config.step_size * grad.delta;
    x.sigma -= config.step_size * grad.sigma;
    return x;
  }
  const Index n = z.size();
  if (state.step == 0) {
    state.m = TwinGradient::zeros(n);
    state.v = TwinGradient::zeros(n);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  adam_block(grad.vref, state.m.vref, state.v.vref, x.vref, config, bc1, bc2);
  adam_block(grad.alpha, state.m.alpha, state.v.alpha, x.alpha, config, bc1, bc2);
  adam_block(grad.delta, state.m.delta, state.v.delta, x.delta, config, bc1, bc2);
  adam_block(grad.sigma, state.m.sigma, state.v.sigma, x.sigma, config, bc1, bc2);
  return x;
}

TwinParams initial_point(const FeederModel& model, const Vector& qhat, const DerMask& mask,
                         const TrainConfig& config) {
  const FeasibleSet set = FeasibleSet::build(model, qhat, mask, config.epsilon);
  TwinParams start = config.init ? TwinParams::from_rule(*config.init) : stock_init(qhat, mask);
  start.qhat = qhat;
  start.der_mask = mask;
  const auto conv = to_c_space(start, config.alpha_floor);
  const auto proj = set.project(conv.point);
  return from_c_space(proj.point, qhat, mask);
}

TrainReport train(const FeederModel& model, const ScenarioSet& scenarios, const Vector& qhat,
                  const DerMask& mask, const TrainConfig& config) {
  if (scenarios.empty()) throw ValidationError("training needs at least one scenario");
  config.check(scenarios.size());
  for (const auto& s : scenarios.scenarios)
    if (s.vtilde.size() != model.size()) throw ValidationError("scenario length mismatch");
  if (config.init && config.init->size() != model.size())
    throw ValidationError("initial rule does not match the feeder size");

  const FeasibleSet set = FeasibleSet::build(model, qhat, mask, config.epsilon);

  Vector qhat_der = Vector::Zero(qhat.size());
  for (Index n : der_indices(mask)) qhat_der(n) = qhat(n);
  TwinConfig twin;
  twin.depth = config.depth > 0
                   ? config.depth
                   : std::max(1, min_depth(model.reactance(), qhat_der, config.epsilon,
                                           config.depth_accuracy));
  twin.adaptive = config.adaptive_depth;
  twin.adaptive_tol = config.adaptive_tol;

  TrainReport report;
  report.depth = twin.depth;
  TwinParams z = initial_point(model, qhat, mask, config);
  report.initial_params = z.to_rule();
  report.initial_loss = full_loss(model, twin, z, scenarios);
  TwinParams best = z;
  double best_loss = report.initial_loss;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(scenarios.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  OptimizerState state;
  const std::size_t b = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double max_disp = 0.0, max_res = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += b) {
      std::vector<const Scenario*> batch;
      for (std::size_t k = lo; k < std::min(lo + b, order.size()); ++k)
        batch.push_back(&scenarios.scenarios[order[k]]);
      const TwinGradient grad = backward(model, twin, z, batch, config.threads);
      const TwinParams x = sgd_step(z, grad, config, state);
      const auto conv = to_c_space(x, config.alpha_floor);
      report.clamp_count += conv.clamped;
      const auto proj = set.project(conv.point);
      if (!(proj.residual <= 1e-8)) {
        const auto rows = set.violated_rows(proj.point, 1e-8);
        throw InfeasibleError("projection left residual " + std::to_string(proj.residual) +
                              " in epoch " + std::to_string(epoch) +
                              (rows.empty() ? std::string() : "; " + rows.front()));
      }
      max_disp = std::max(max_disp, proj.displacement);
      max_res = std::max(max_res, proj.residual);
      z = from_c_space(proj.point, qhat, mask);
    }
    const double l = full_loss(model, twin, z, scenarios);
    report.loss_per_epoch.push_back(l);
    report.displacement_per_epoch.push_back(max_disp);
    report.residual_per_epoch.push_back(max_res);
    report.seconds_per_epoch.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (l < best_loss) {
      best_loss = l;
      best = z;
      report.best_epoch = epoch;
    }
  }

  const TwinParams& final_z = config.keep_best ? best : z;
  if (!config.keep_best) report.best_epoch = config.epochs;
  report.final_params = final_z.to_rule();
  report.certificate = certify(model, final_z.alpha, config.epsilon);
  return report;
}

EvaluationResult evaluate(const FeederModel& model, const RuleParams& params,
                          const ScenarioSet& scenarios) {
  if (scenarios.empty()) throw ValidationError("evaluation needs at least one scenario");
  EvaluationResult out;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const Scenario& sc = scenarios.scenarios[s];
    try {
      const auto eq = equilibrium_fixed_point(model, params, sc);
      const double d = 0.5 * (eq.v_star.array() - 1.0).square().sum();
      out.per_scenario.push_back(d);
      out.voltages.push_back(eq.v_star);
      total += d;
      ++used;
    } catch (const ConvergenceError&) {
      out.per_scenario.push_back(std::numeric_limits<double>::quiet_NaN());
      out.voltages.emplace_back();
      out.excluded.push_back(s);
    }
  }
  out.objective = used > 0 ? total / static_cast<double>(used)
                           : std::numeric_limits<double>::quiet_NaN();
  return out;
}

EvaluationResult evaluate_no_compensation(const FeederModel& model, const ScenarioSet& scenarios) {
  if (scenarios.empty()) throw ValidationError("evaluation needs at least one scenario");
  EvaluationResult out;
  double total = 0.0;
  for (const auto& sc : scenarios.scenarios) {
    if (sc.vtilde.size() != model.size()) throw ValidationError("scenario length mismatch");
    const double d = 0.5 * (sc.vtilde.array() - 1.0).square().sum();
    out.per_scenario.push_back(d);
    out.voltages.push_back(sc.vtilde);
    total += d;
  }
  out.objective = total / static_cast<double>(scenarios.size());
  return out;
}

}  // namespace voltvar
