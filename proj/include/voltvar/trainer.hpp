#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voltvar/feeder.hpp"
#include "voltvar/projection.hpp"
#include "voltvar/rules.hpp"
#include "voltvar/stability.hpp"
#include "voltvar/twin.hpp"

namespace voltvar {

enum class OptimizerMode { Plain, Adam };

std::string to_string(OptimizerMode m);
OptimizerMode optimizer_mode_from_string(const std::string& name);

struct TrainConfig {
  double step_size = 0.01;
  int batch_size = 4;
  int epochs = 200;
  double epsilon = 0.5;
  OptimizerMode mode = OptimizerMode::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double alpha_floor = kAlphaFloor;
  std::uint64_t seed = 0;
  /// Starting curve; the same (vref, delta, sigma, alpha) = (0.95, 0.1, 0.3, 1.5)
  /// at every DER when unset. Projected before the first epoch either way.
  std::optional<RuleParams> init;
  /// Twin depth; 0 picks min_depth(X, qhat, epsilon, depth_accuracy).
  int depth = 0;
  double depth_accuracy = 1e-4;
  bool adaptive_depth = false;
  double adaptive_tol = 1e-7;
  /// Return the epoch-end iterate with the lowest full-set twin loss
  /// instead of the last one.
  bool keep_best = true;
  int threads = 1;

  void check(std::size_t scenario_count) const;
};

/// Adam moment state over the four weight blocks.
struct OptimizerState {
  TwinGradient m;
  TwinGradient v;
  long step = 0;
};

/// x = z - step·g (plain) or the bias-corrected Adam update of the same gradient.
TwinParams sgd_step(const TwinParams& z, const TwinGradient& grad, const TrainConfig& config,
                    OptimizerState& state);

struct TrainReport {
  std::vector<double> loss_per_epoch;          // full-set twin loss after each epoch
  std::vector<double> displacement_per_epoch;  // largest projection move within the epoch
  std::vector<double> residual_per_epoch;      // worst post-projection residual within the epoch
  std::vector<double> seconds_per_epoch;       // wall clock; kept out of the JSON report
  int clamp_count = 0;
  int depth = 0;
  int best_epoch = 0;  // 0 is the projected initialization
  double initial_loss = 0.0;
  RuleParams initial_params;  // projected initialization
  RuleParams final_params;
  StabilityCertificate certificate;
};

TrainReport train(const FeederModel& model, const ScenarioSet& scenarios,
                  const Vector& qhat, const DerMask& mask, const TrainConfig& config);

/// The projected initialization alone.
TwinParams initial_point(const FeederModel& model, const Vector& qhat, const DerMask& mask,
                         const TrainConfig& config);

struct EvaluationResult {
  double objective = 0.0;                  // over converged scenarios
  std::vector<double> per_scenario;        // 1/2 ||v* - 1||^2, NaN when excluded
  std::vector<std::size_t> excluded;       // scenarios without a converged equilibrium
  std::vector<Vector> voltages;            // v* per scenario (empty when excluded)
};

/// (1/2S) sum_s ||X q*_s + vtilde_s - 1||^2 at equilibria of the dynamics.
EvaluationResult evaluate(const FeederModel& model, const RuleParams& params,
                          const ScenarioSet& scenarios);

/// Same objective with q = 0 everywhere.
EvaluationResult evaluate_no_compensation(const FeederModel& model, const ScenarioSet& scenarios);

}  // namespace voltvar
