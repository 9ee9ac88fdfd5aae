#include "voltvar/rules.hpp"

#include <cmath>
#include <sstream>

#include "voltvar/errors.hpp"

namespace voltvar {

namespace {

using L = Ieee1547Limits;

bool masked_out(const DerMask& mask, Index n) {
  return !mask[static_cast<std::size_t>(n)];
}

void check_block_sizes(const RuleCoordinates& c, Index n) {
  for (const auto& b : c.blocks)
    if (b.size() != n) throw ValidationError("rule coordinate blocks differ in length");
}

}  // namespace

std::string to_string(Parameterization p) {
  switch (p) {
    case Parameterization::VrefDeltaSigmaQbar: return "vref,delta,sigma,qbar";
    case Parameterization::VrefAlphaDeltaQbar: return "vref,alpha,delta,qbar";
    case Parameterization::VrefAlphaDeltaSigma: return "vref,alpha,delta,sigma";
    case Parameterization::VrefCDeltaSigma: return "vref,c,delta,sigma";
    case Parameterization::VrefCDeltaQbar: return "vref,c,delta,qbar";
  }
  return "?";
}

Parameterization parameterization_from_string(const std::string& name) {
  for (auto p : {Parameterization::VrefDeltaSigmaQbar, Parameterization::VrefAlphaDeltaQbar,
                 Parameterization::VrefAlphaDeltaSigma, Parameterization::VrefCDeltaSigma,
                 Parameterization::VrefCDeltaQbar})
    if (to_string(p) == name) return p;
  throw ValidationError("unknown parameterization '" + name + "'");
}

std::string to_string(Bound b) {
  switch (b) {
    case Bound::VrefLow: return "vref >= 0.95";
    case Bound::VrefHigh: return "vref <= 1.05";
    case Bound::DeltaLow: return "delta >= 0";
    case Bound::DeltaHigh: return "delta <= 0.03";
    case Bound::SaturationGap: return "sigma >= delta + 0.02";
    case Bound::SigmaHigh: return "sigma <= 0.18";
    case Bound::QbarLow: return "qbar >= 0";
    case Bound::QbarHigh: return "qbar <= qhat";
  }
  return "?";
}

Vector RuleParams::slopes() const {
  Vector alpha = Vector::Zero(size());
  for (Index n = 0; n < size(); ++n)
    if (!masked_out(der_mask, n)) alpha(n) = qbar(n) / (sigma(n) - delta(n));
  return alpha;
}

void RuleParams::check_structure() const {
  const Index n = vref.size();
  if (delta.size() != n || sigma.size() != n || qbar.size() != n || qhat.size() != n ||
      static_cast<Index>(der_mask.size()) != n)
    throw ValidationError("rule parameter vectors differ in length");
  for (Index i = 0; i < n; ++i) {
    if (masked_out(der_mask, i)) continue;
    if (!std::isfinite(vref(i)) || !std::isfinite(delta(i)) || !std::isfinite(sigma(i)) ||
        !std::isfinite(qbar(i)))
      throw ValidationError("non-finite rule parameter at node " + std::to_string(i + 1));
    if (delta(i) < 0.0 || qbar(i) < 0.0)
      throw ValidationError("negative deadband or saturation at node " + std::to_string(i + 1));
    if (!(sigma(i) > delta(i)))
      throw ValidationError("sigma must exceed delta at node " + std::to_string(i + 1));
  }
}

RuleParams default_rule(const Vector& qhat, DerMask mask) {
  const Index n = qhat.size();
  if (static_cast<Index>(mask.size()) != n)
    throw ValidationError("DER mask length does not match capability vector");
  RuleParams p;
  p.vref = Vector::Ones(n);
  p.delta = Vector::Constant(n, 0.02);
  p.sigma = Vector::Constant(n, 0.08);
  p.qbar = qhat;
  p.qhat = qhat;
  p.der_mask = std::move(mask);
  for (Index i = 0; i < n; ++i)
    if (masked_out(p.der_mask, i)) p.qbar(i) = 0.0;
  return p;
}

double curve_value(double vref, double delta, double sigma, double qbar, double v) {
  const double u = v - vref;
  const double alpha = qbar / (sigma - delta);
  if (u >= sigma) return -qbar;
  if (u > delta) return -alpha * (u - delta);
  if (u >= -delta) return 0.0;
  if (u > -sigma) return -alpha * (u + delta);
  return qbar;
}

double eval_rule(const RuleParams& params, Index node, double v) {
  params.check_structure();
  if (node < 0 || node >= params.size()) throw ValidationError("node index out of range");
  if (masked_out(params.der_mask, node)) return 0.0;
  return curve_value(params.vref(node), params.delta(node), params.sigma(node), params.qbar(node),
                     v);
}

Vector eval_rule_vector(const RuleParams& params, const Vector& v) {
  params.check_structure();
  if (v.size() != params.size()) throw ValidationError("eval_rule_vector: dimension mismatch");
  Vector q = Vector::Zero(v.size());
  for (Index n = 0; n < v.size(); ++n)
    if (!masked_out(params.der_mask, n))
      q(n) = curve_value(params.vref(n), params.delta(n), params.sigma(n), params.qbar(n), v(n));
  return q;
}

ValidationReport validate(const RuleParams& params, double tol) {
  ValidationReport report;
  auto check = [&](Index n, Bound b, double excess) {
    if (excess > tol) report.violations.push_back({n, b, excess});
  };
  for (Index n = 0; n < params.size(); ++n) {
    if (masked_out(params.der_mask, n)) continue;
    const double v = params.vref(n), d = params.delta(n), s = params.sigma(n), q = params.qbar(n);
    check(n, Bound::VrefLow, L::kVrefMin - v);
    check(n, Bound::VrefHigh, v - L::kVrefMax);
    check(n, Bound::DeltaLow, -d);
    check(n, Bound::DeltaHigh, d - L::kDeltaMax);
    check(n, Bound::SaturationGap, d + L::kMinSaturationGap - s);
    check(n, Bound::SigmaHigh, s - L::kSigmaMax);
    check(n, Bound::QbarLow, -q);
    check(n, Bound::QbarHigh, q - params.qhat(n));
  }
  return report;
}

RuleCoordinates to_coordinates(const RuleParams& params, Parameterization kind) {
  const Index n = params.size();
  const bool needs_slope = kind != Parameterization::VrefDeltaSigmaQbar;
  Vector alpha = Vector::Zero(n), c = Vector::Zero(n);
  if (needs_slope) {
    for (Index i = 0; i < n; ++i) {
      if (masked_out(params.der_mask, i)) continue;
      const double gap = params.sigma(i) - params.delta(i);
      if (gap == 0.0)
        throw ValidationError("degenerate parameterization at node " + std::to_string(i + 1) +
                              ": sigma == delta gives an infinite slope");
      alpha(i) = params.qbar(i) / gap;
      if (kind == Parameterization::VrefCDeltaSigma || kind == Parameterization::VrefCDeltaQbar) {
        if (!(alpha(i) > 0.0))
          throw ValidationError("degenerate parameterization at node " + std::to_string(i + 1) +
                                ": zero slope has no reciprocal");
        c(i) = gap / params.qbar(i);
      }
    }
  }
  RuleCoordinates out;
  out.kind = kind;
  switch (kind) {
    case Parameterization::VrefDeltaSigmaQbar:
      out.blocks = {params.vref, params.delta, params.sigma, params.qbar};
      break;
    case Parameterization::VrefAlphaDeltaQbar:
      out.blocks = {params.vref, alpha, params.delta, params.qbar};
      break;
    case Parameterization::VrefAlphaDeltaSigma:
      out.blocks = {params.vref, alpha, params.delta, params.sigma};
      break;
    case Parameterization::VrefCDeltaSigma:
      out.blocks = {params.vref, c, params.delta, params.sigma};
      break;
    case Parameterization::VrefCDeltaQbar:
      out.blocks = {params.vref, c, params.delta, params.qbar};
      break;
  }
  return out;
}

RuleParams from_coordinates(const RuleCoordinates& coords, const Vector& qhat, DerMask mask) {
  const Index n = coords.blocks[0].size();
  check_block_sizes(coords, n);
  if (qhat.size() != n || static_cast<Index>(mask.size()) != n)
    throw ValidationError("capability vector or DER mask length mismatch");

  RuleParams p;
  p.vref = coords.blocks[0];
  p.qhat = qhat;
  p.der_mask = std::move(mask);
  p.parameterization = coords.kind;
  p.delta.resize(n);
  p.sigma.resize(n);
  p.qbar.resize(n);

  const auto& b = coords.blocks;
  for (Index i = 0; i < n; ++i) {
    const bool masked = masked_out(p.der_mask, i);
    auto degenerate = [&](const char* what) {
      return ValidationError("degenerate parameterization at node " + std::to_string(i + 1) +
                             ": " + what);
    };
    switch (coords.kind) {
      case Parameterization::VrefDeltaSigmaQbar:
        p.delta(i) = b[1](i);
        p.sigma(i) = b[2](i);
        p.qbar(i) = b[3](i);
        break;
      case Parameterization::VrefAlphaDeltaQbar: {
        p.delta(i) = b[2](i);
        p.qbar(i) = b[3](i);
        const double alpha = b[1](i);
        if (masked) {
          p.sigma(i) = p.delta(i) + L::kMinSaturationGap;
          p.qbar(i) = 0.0;
        } else {
          if (!(alpha > 0.0)) throw degenerate("non-positive slope");
          p.sigma(i) = p.delta(i) + p.qbar(i) / alpha;
        }
        break;
      }
      case Parameterization::VrefAlphaDeltaSigma:
        p.delta(i) = b[2](i);
        p.sigma(i) = b[3](i);
        p.qbar(i) = masked ? 0.0 : b[1](i) * (p.sigma(i) - p.delta(i));
        break;
      case Parameterization::VrefCDeltaSigma:
        p.delta(i) = b[2](i);
        p.sigma(i) = b[3](i);
        if (masked) {
          p.qbar(i) = 0.0;
        } else {
          if (!(b[1](i) > 0.0)) throw degenerate("non-positive c");
          p.qbar(i) = (p.sigma(i) - p.delta(i)) / b[1](i);
        }
        break;
      case Parameterization::VrefCDeltaQbar:
        p.delta(i) = b[2](i);
        p.qbar(i) = b[3](i);
        if (masked) {
          p.sigma(i) = p.delta(i) + L::kMinSaturationGap;
          p.qbar(i) = 0.0;
        } else {
          p.sigma(i) = p.delta(i) + b[1](i) * p.qbar(i);
        }
        break;
    }
    if (!masked && !(p.sigma(i) > p.delta(i))) throw degenerate("sigma == delta");
  }
  return p;
}

RuleParams convert(const RuleParams& params, Parameterization target) {
  params.check_structure();
  return from_coordinates(to_coordinates(params, target), params.qhat, params.der_mask);
}

}  // namespace voltvar
