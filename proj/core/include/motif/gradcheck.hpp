// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "motif/denoiser.hpp"

namespace motif {

struct FiniteDiffOptions {
  double h = 1e-5;
  // 0 checks every parameter; otherwise a seeded random subset of this size.
  std::size_t max_samples = 0;
  std::uint64_t seed = 0;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

// Compares analytic gradients against central differences,
// |analytic - numeric| / max(|analytic|, 1e-12).
FiniteDiffReport finite_diff_check(std::span<const double> theta,
                                   std::span<const double> analytic,
                                   const std::function<double(std::span<const double>)>& loss,
                                   const FiniteDiffOptions& options = {});

using ParamLossFn = std::function<LossAndGrads(const DenoiserParams&)>;

FiniteDiffReport finite_diff_check(const DenoiserParams& params, const ParamLossFn& loss_fn,
                                   const FiniteDiffOptions& options = {});

}  // namespace motif
