// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/optimizer.hpp"

#include <cmath>

namespace motif {

Optimizer::Optimizer(const ParamSet& like, OptimizerConfig config) : config_(config) {
  if (config_.kind == OptimizerKind::kAdam) {
    m_.assign(like.count(), 0.0);
    v_.assign(like.count(), 0.0);
  }
}

void Optimizer::step(ParamSet& params, const ParamSet& grads, double lr, long step_count) {
  require(lr > 0.0 && std::isfinite(lr), "optimizer: lr must be positive");
  require(step_count >= 1, "optimizer: step_count is 1-based");
  require(params.same_structure(grads), "optimizer: gradients do not match parameters");
  if (!grads.all_finite()) throw NumericError("optimizer: non-finite gradient, step refused");

  if (config_.kind == OptimizerKind::kPlain) {
    for (std::size_t g = 0; g < params.groups.size(); ++g) {
      auto& p = params.groups[g].values;
      const auto& d = grads.groups[g].values;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
    }
    return;
  }
  require(m_.size() == params.count(), "optimizer: state size mismatch");
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
  std::size_t k = 0;
  for (std::size_t g = 0; g < params.groups.size(); ++g) {
    auto& p = params.groups[g].values;
    const auto& d = grads.groups[g].values;
    for (std::size_t i = 0; i < p.size(); ++i, ++k) {
      m_[k] = b1 * m_[k] + (1.0 - b1) * d[i];
      v_[k] = b2 * v_[k] + (1.0 - b2) * d[i] * d[i];
      p[i] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + config_.eps);
    }
  }
}

DenoiserParams optimizer_step(const DenoiserParams& params, const GradientSet& grads, double lr,
                              long step_count, Optimizer& state) {
  DenoiserParams next = params;
  state.step(next, grads, lr, step_count);
  return next;
}

}  // namespace motif
