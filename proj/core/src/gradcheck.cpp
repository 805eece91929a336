// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "motif/rng.hpp"

namespace motif {

FiniteDiffReport finite_diff_check(std::span<const double> theta,
                                   std::span<const double> analytic,
                                   const std::function<double(std::span<const double>)>& loss,
                                   const FiniteDiffOptions& options) {
  require(options.h > 0.0, "finite_diff_check: h must be positive");
  require(theta.size() == analytic.size(), "finite_diff_check: size mismatch");
  std::vector<std::size_t> indices(theta.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  if (options.max_samples > 0 && options.max_samples < indices.size()) {
    Rng rng(options.seed);
    std::shuffle(indices.begin(), indices.end(), rng.engine());
    indices.resize(options.max_samples);
    std::sort(indices.begin(), indices.end());
  }

  FiniteDiffReport report;
  std::vector<double> probe(theta.begin(), theta.end());
  for (std::size_t i : indices) {
    const double saved = probe[i];
    probe[i] = saved + options.h;
    const double up = loss(probe);
    probe[i] = saved - options.h;
    const double down = loss(probe);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * options.h);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-12);
    if (err > report.max_rel_error || report.checked == 0) {
      report.max_rel_error = std::max(err, report.max_rel_error);
      report.worst_index = i;
    }
    ++report.checked;
  }
  return report;
}

FiniteDiffReport finite_diff_check(const DenoiserParams& params, const ParamLossFn& loss_fn,
                                   const FiniteDiffOptions& options) {
  const LossAndGrads base = loss_fn(params);
  const std::vector<double> theta = params.flatten();
  const std::vector<double> analytic = base.grads.flatten();
  DenoiserParams probe = params;
  return finite_diff_check(
      theta, analytic,
      [&](std::span<const double> values) {
        probe.assign_flat(values);
        return loss_fn(probe).loss;
      },
      options);
}

}  // namespace motif
