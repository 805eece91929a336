// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/losses.hpp"

namespace motif {

std::string to_string(HeatmapMode mode) {
  switch (mode) {
    case HeatmapMode::kMotif:
      return "motif";
    case HeatmapMode::kInverse:
      return "inverse";
    case HeatmapMode::kNone:
      return "none";
  }
  return "none";
}

HeatmapMode parse_heatmap_mode(std::string_view text) {
  if (text == "motif") return HeatmapMode::kMotif;
  if (text == "inverse") return HeatmapMode::kInverse;
  if (text == "none") return HeatmapMode::kNone;
  throw FormatError("unknown heatmap mode '" + std::string(text) + "'");
}

std::string to_string(Weighting w) { return w == Weighting::kSquared ? "squared" : "linear"; }

Weighting parse_weighting(std::string_view text) {
  if (text == "squared") return Weighting::kSquared;
  if (text == "linear") return Weighting::kLinear;
  throw FormatError("unknown weighting '" + std::string(text) + "'");
}

std::string to_string(ResidualSpace r) { return r == ResidualSpace::kV ? "v" : "eps"; }

ResidualSpace parse_residual_space(std::string_view text) {
  if (text == "v") return ResidualSpace::kV;
  if (text == "eps") return ResidualSpace::kEps;
  throw FormatError("unknown residual space '" + std::string(text) + "'");
}

void check_heat(const Tensor4<double>& heat, const Dims& d) {
  require(heat.frames() == d.frames && heat.height() == d.height && heat.width() == d.width &&
              heat.channels() == 1,
          "heatmap dims " + heat.dims().str() + " do not align with latent " + d.str());
  for (double v : heat.data()) {
    require(v >= 0.0 && v <= 1.0, "heatmap entry outside [0,1]");
  }
}

double diffusion_loss(const Latent& pred, const Latent& target) {
  require(pred.dims() == target.dims(), "diffusion_loss: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = target.data()[i] - pred.data()[i];
    sum += r * r;
  }
  return sum / static_cast<double>(pred.size());
}

double motif_loss(const Latent& pred, const Latent& target, const Tensor4<double>& heat,
                  HeatmapMode mode, Weighting weighting, double residual_scale) {
  require(pred.dims() == target.dims(), "motif_loss: shape mismatch");
  check_heat(heat, pred.dims());
  if (mode == HeatmapMode::kNone) return 0.0;
  const int c = pred.channels();
  double sum = 0.0;
  for (std::size_t p = 0; p < heat.size(); ++p) {
    const double w = heat_weight(heat.data()[p], mode);
    const double factor = weighting == Weighting::kSquared ? w * w : w;
    for (int k = 0; k < c; ++k) {
      const std::size_t i = p * c + k;
      const double r = residual_scale * (target.data()[i] - pred.data()[i]);
      sum += factor * r * r;
    }
  }
  return sum / static_cast<double>(pred.size());
}

double total_loss(const Latent& pred, const Latent& target, const Tensor4<double>& heat,
                  double lambda, HeatmapMode mode) {
  require(lambda >= 0.0 && std::isfinite(lambda), "total_loss: lambda must be finite and >= 0");
  return diffusion_loss(pred, target) + lambda * motif_loss(pred, target, heat, mode);
}

LossTerms loss_terms(const Latent& pred, const Latent& target, const Tensor4<double>& heat,
                     const LossSpec& spec, double residual_scale) {
  require(spec.lambda >= 0.0 && std::isfinite(spec.lambda), "lambda must be finite and >= 0");
  LossTerms t;
  t.diffusion = diffusion_loss(pred, target);
  const double rs = spec.residual == ResidualSpace::kEps ? residual_scale : 1.0;
  t.motif = motif_loss(pred, target, heat, spec.mode, spec.weighting, rs);
  t.total = t.diffusion + spec.lambda * t.motif;
  return t;
}

}  // namespace motif
