#pragma once

#include <vector>

#include "voltvar/feeder.hpp"
#include "voltvar/rules.hpp"

namespace voltvar {

/// Trainable weights of the twin: (vref, alpha, delta, sigma) per node.
/// qbar is implied by alpha·(sigma - delta). Masked nodes have alpha = 0.
struct TwinParams {
  Vector vref;
  Vector alpha;
  Vector delta;
  Vector sigma;
  Vector qhat;
  DerMask der_mask;

  Index size() const { return vref.size(); }
  static TwinParams from_rule(const RuleParams& rule);
  /// Throws ValidationError when some DER curve is degenerate (sigma <= delta, alpha < 0).
  RuleParams to_rule() const;
};

struct TwinConfig {
  int depth = 1;
  bool adaptive = false;
  double adaptive_tol = 1e-7;
  int max_depth = 0;  // adaptive cap; 0 means 10·depth

  void check() const;
};

struct TwinOutput {
  Vector v_out;
  Vector q_out;
  int layers_used = 0;
  /// v^0 .. v^T, v^0 = vtilde. Layer t maps v^{t-1} to q^t and v^t.
  std::vector<Vector> voltages;
};

/// One ReLU block: four ramps with hidden weights (1, 1, -1, -1) and output
/// weights (-alpha, alpha, alpha, -alpha).
double block_forward(double vref, double alpha, double delta, double sigma, double v);

TwinOutput forward(const FeederModel& model, const TwinConfig& config, const TwinParams& params,
                   const Scenario& scenario);

/// (1/2S) sum_s ||v_out_s - 1||^2
double loss(const std::vector<TwinOutput>& outputs);

struct TwinGradient {
  double loss = 0.0;
  Vector vref;
  Vector alpha;
  Vector delta;
  Vector sigma;

  static TwinGradient zeros(Index n);
  TwinGradient& operator+=(const TwinGradient& other);
};

/// Loss over the batch and its gradient with respect to the shared weights,
/// accumulated over all layers. Per-scenario work may be spread over
/// `threads`; partial results are summed in scenario order.
TwinGradient backward(const FeederModel& model, const TwinConfig& config,
                      const TwinParams& params, const std::vector<const Scenario*>& batch,
                      int threads = 1);

TwinGradient backward(const FeederModel& model, const TwinConfig& config,
                      const TwinParams& params, const ScenarioSet& scenarios, int threads = 1);

}  // namespace voltvar
