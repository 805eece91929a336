// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "motif/tensor.hpp"

namespace motif {

// Which per-position weight the motion focal term applies.
enum class HeatmapMode { kMotif, kInverse, kNone };
// kSquared multiplies the residual inside the norm (weight enters squared).
enum class Weighting { kSquared, kLinear };
// Residual the focal term is computed on. The eps residual of a v-prediction
// model equals sqrt(alpha_bar_t) times the v residual.
enum class ResidualSpace { kV, kEps };

struct LossSpec {
  double lambda = 1.0;
  HeatmapMode mode = HeatmapMode::kMotif;
  Weighting weighting = Weighting::kSquared;
  ResidualSpace residual = ResidualSpace::kV;
};

struct LossTerms {
  double diffusion = 0.0;
  double motif = 0.0;
  double total = 0.0;
};

std::string to_string(HeatmapMode mode);
HeatmapMode parse_heatmap_mode(std::string_view text);
std::string to_string(Weighting w);
Weighting parse_weighting(std::string_view text);
std::string to_string(ResidualSpace r);
ResidualSpace parse_residual_space(std::string_view text);

// Mean squared residual over every element.
double diffusion_loss(const Latent& pred, const Latent& target);

// `heat` is L x H' x W' x 1 with entries in [0,1], broadcast over latent
// channels. `residual_scale` multiplies the residual before weighting.
double motif_loss(const Latent& pred, const Latent& target, const Tensor4<double>& heat,
                  HeatmapMode mode, Weighting weighting = Weighting::kSquared,
                  double residual_scale = 1.0);

double total_loss(const Latent& pred, const Latent& target, const Tensor4<double>& heat,
                  double lambda, HeatmapMode mode = HeatmapMode::kMotif);

LossTerms loss_terms(const Latent& pred, const Latent& target, const Tensor4<double>& heat,
                     const LossSpec& spec, double residual_scale = 1.0);

// Per-position weight w such that the focal term is mean((w * r)^2) or
// mean(w * r^2) depending on the weighting.
inline double heat_weight(double m, HeatmapMode mode) {
  switch (mode) {
    case HeatmapMode::kMotif:
      return m;
    case HeatmapMode::kInverse:
      return 1.0 - m;
    case HeatmapMode::kNone:
      return 0.0;
  }
  return 0.0;
}

void check_heat(const Tensor4<double>& heat, const Dims& latent_dims);

}  // namespace motif
