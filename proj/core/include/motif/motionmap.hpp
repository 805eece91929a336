// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motif/tensor.hpp"

namespace motif {

// Flow fields are (L-1) x H x W x 2 tensors holding (u, v) in px/frame, with
// u along the width axis and v along the height axis.
using FlowField = Tensor4<double>;

enum class FlowSource { kEstimated, kOracle };

struct FlowOptions {
  double alpha = 0.02;  // smoothness weight on the [0,1] luminance scale
  int iters = 100;      // Jacobi sweeps per pyramid level
  int levels = 2;       // coarse-to-fine pyramid depth
};

struct HeatmapParams {
  double gain = 100.0;
  double threshold = 0.05;
};

// Rec. 601 luminance; passes single-channel input through.
Tensor4<double> luminance(const Tensor4<double>& frames);

// Horn-Schunck flow from frame_a to frame_b (each 1 x H x W x C).
// Returns a 1 x H x W x 2 field.
FlowField estimate_flow(const Tensor4<double>& frame_a, const Tensor4<double>& frame_b,
                        const FlowOptions& options = {});
FlowField estimate_video_flow(const Tensor4<double>& video, const FlowOptions& options = {});

// Per-pixel sqrt(u^2 + v^2); (L-1) x H x W x 1.
Tensor4<double> flow_intensity(const FlowField& flow);

double normalize_value(double x, const HeatmapParams& params = {});
// Elementwise 1 / (1 + exp(k (tau - x))).
Tensor4<double> normalize_intensity(const Tensor4<double>& x, const HeatmapParams& params = {});

// Divisor that maps px/frame intensity onto the normalized domain.
inline double intensity_scale(int height, int width) { return std::max(height, width); }

// L x H x W x 1 heatmap from L-1 flow frames; the last frame repeats the
// previous one.
Tensor4<double> heatmap_from_flow(const FlowField& flow, const HeatmapParams& params = {});
Tensor4<double> heatmap_for_video(const Tensor4<double>& video, const FlowOptions& options = {},
                                  const HeatmapParams& params = {});

// p x p area-average pooling.
Tensor4<double> downsample_heatmap(const Tensor4<double>& m, int p);
Tensor4<double> binarize(const Tensor4<double>& m, double threshold = 0.5);

struct MotionHeatmap {
  Tensor4<double> m;        // L x H x W x 1
  Tensor4<double> m_prime;  // L x H/p x W/p x 1
  HeatmapParams params;
  int pool = 1;
};

MotionHeatmap make_heatmap(const FlowField& flow, int pool, const HeatmapParams& params = {});

struct MotionStats {
  double static_fraction = 1.0;
  double moving_fraction = 0.0;
  double mean_intensity = 0.0;  // px/frame
};

MotionStats motion_stats_from_flow(const FlowField& flow, const HeatmapParams& params = {},
                                   double mask_threshold = 0.5);
MotionStats motion_stats(const Tensor4<double>& video, const FlowOptions& options = {},
                         const HeatmapParams& params = {}, double mask_threshold = 0.5);

// Bilinear sample of channel c of frame l at continuous pixel-centre
// coordinates (x, y), clamped at the border.
double sample_bilinear(const Tensor4<double>& t, int l, double x, double y, int c = 0);

}  // namespace motif
