// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "motif/denoiser.hpp"

namespace motif {

enum class OptimizerKind { kAdam, kPlain };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First-order optimizer with per-parameter moment state. kPlain is vanilla
// gradient descent (no state).
class Optimizer {
 public:
  explicit Optimizer(const ParamSet& like, OptimizerConfig config = {});

  // step_count is the 1-based index of this update, used for bias correction.
  // Throws NumericError and leaves params untouched on non-finite gradients.
  void step(ParamSet& params, const ParamSet& grads, double lr, long step_count);

  const OptimizerConfig& config() const { return config_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  OptimizerConfig config_;
  std::vector<double> m_, v_;
};

DenoiserParams optimizer_step(const DenoiserParams& params, const GradientSet& grads, double lr,
                              long step_count, Optimizer& state);

}  // namespace motif
