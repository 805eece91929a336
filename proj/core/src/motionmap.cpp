// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/motionmap.hpp"

#include <algorithm>
#include <cmath>

namespace motif {

namespace {

// Single-channel H x W image.
struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  Plane() = default;
  Plane(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}
  double& operator()(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
  double operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
  double clamped(int i, int j) const { return (*this)(std::clamp(i, 0, h - 1), std::clamp(j, 0, w - 1)); }
  double sample(double x, double y) const {
    x = std::clamp(x, 0.0, w - 1.0);
    y = std::clamp(y, 0.0, h - 1.0);
    const int j0 = std::min(static_cast<int>(x), w - 1), i0 = std::min(static_cast<int>(y), h - 1);
    const int j1 = std::min(j0 + 1, w - 1), i1 = std::min(i0 + 1, h - 1);
    const double fx = x - j0, fy = y - i0;
    return (1 - fy) * ((1 - fx) * (*this)(i0, j0) + fx * (*this)(i0, j1)) +
           fy * ((1 - fx) * (*this)(i1, j0) + fx * (*this)(i1, j1));
  }
};

Plane plane_of(const Tensor4<double>& lum, int l) {
  Plane p(lum.height(), lum.width());
  const auto f = lum.frame(l);
  std::copy(f.begin(), f.end(), p.v.begin());
  return p;
}

Plane halve(const Plane& p) {
  Plane out((p.h + 1) / 2, (p.w + 1) / 2);
  for (int i = 0; i < out.h; ++i) {
    for (int j = 0; j < out.w; ++j) {
      out(i, j) = 0.25 * (p.clamped(2 * i, 2 * j) + p.clamped(2 * i + 1, 2 * j) +
                          p.clamped(2 * i, 2 * j + 1) + p.clamped(2 * i + 1, 2 * j + 1));
    }
  }
  return out;
}

Plane upsample_flow(const Plane& coarse, int h, int w) {
  Plane out(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      out(i, j) = 2.0 * coarse.sample((j - 0.5) / 2.0, (i - 0.5) / 2.0);
    }
  }
  return out;
}

double neighbour_mean(const Plane& p, int i, int j) {
  return (p.clamped(i - 1, j) + p.clamped(i + 1, j) + p.clamped(i, j - 1) + p.clamped(i, j + 1)) /
             6.0 +
         (p.clamped(i - 1, j - 1) + p.clamped(i - 1, j + 1) + p.clamped(i + 1, j - 1) +
          p.clamped(i + 1, j + 1)) /
             12.0;
}

// Refines (u, v) in place at one pyramid level, linearizing around the
// incoming flow.
void refine(const Plane& a, const Plane& b, Plane& u, Plane& v, const FlowOptions& opt) {
  const int h = a.h, w = a.w;
  Plane bw(h, w), ix(h, w), iy(h, w), it(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) bw(i, j) = b.sample(j + u(i, j), i + v(i, j));
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      ix(i, j) = 0.25 * (a.clamped(i, j + 1) - a.clamped(i, j - 1) + bw.clamped(i, j + 1) -
                         bw.clamped(i, j - 1));
      iy(i, j) = 0.25 * (a.clamped(i + 1, j) - a.clamped(i - 1, j) + bw.clamped(i + 1, j) -
                         bw.clamped(i - 1, j));
      it(i, j) = bw(i, j) - a(i, j);
    }
  }
  const Plane u0 = u, v0 = v;
  const double a2 = opt.alpha * opt.alpha;
  Plane un(h, w), vn(h, w);
  for (int k = 0; k < opt.iters; ++k) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double ub = neighbour_mean(u, i, j), vb = neighbour_mean(v, i, j);
        const double gx = ix(i, j), gy = iy(i, j);
        const double r = gx * (ub - u0(i, j)) + gy * (vb - v0(i, j)) + it(i, j);
        const double d = a2 + gx * gx + gy * gy;
        un(i, j) = ub - gx * r / d;
        vn(i, j) = vb - gy * r / d;
      }
    }
    std::swap(u, un);
    std::swap(v, vn);
  }
}

void flow_pyramid(const Plane& a, const Plane& b, Plane& u, Plane& v, int levels,
                  const FlowOptions& opt) {
  if (levels > 1 && a.h >= 8 && a.w >= 8) {
    Plane uc, vc;
    flow_pyramid(halve(a), halve(b), uc, vc, levels - 1, opt);
    u = upsample_flow(uc, a.h, a.w);
    v = upsample_flow(vc, a.h, a.w);
  } else {
    u = Plane(a.h, a.w);
    v = Plane(a.h, a.w);
  }
  refine(a, b, u, v, opt);
}

}  // namespace

Tensor4<double> luminance(const Tensor4<double>& frames) {
  const int C = frames.channels();
  require(C == 1 || C == 3, "luminance: expected 1 or 3 channels");
  if (C == 1) return frames;
  Tensor4<double> out({frames.frames(), frames.height(), frames.width(), 1});
  const auto& in = frames.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = 0.299 * in[3 * i] + 0.587 * in[3 * i + 1] + 0.114 * in[3 * i + 2];
  }
  return out;
}

FlowField estimate_flow(const Tensor4<double>& frame_a, const Tensor4<double>& frame_b,
                        const FlowOptions& options) {
  require(frame_a.dims() == frame_b.dims(), "estimate_flow: frames differ in dims");
  require(frame_a.frames() == 1, "estimate_flow: expected single frames");
  require(options.alpha > 0.0 && options.iters >= 0 && options.levels >= 1,
          "estimate_flow: invalid options");
  const int H = frame_a.height(), W = frame_a.width();
  FlowField out({1, H, W, 2});
  if (options.iters == 0) return out;
  require_finite(frame_a, "estimate_flow");
  require_finite(frame_b, "estimate_flow");
  const Plane a = plane_of(luminance(frame_a), 0), b = plane_of(luminance(frame_b), 0);
  Plane u, v;
  flow_pyramid(a, b, u, v, options.levels, options);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      out.at(0, i, j, 0) = u(i, j);
      out.at(0, i, j, 1) = v(i, j);
    }
  }
  return out;
}

FlowField estimate_video_flow(const Tensor4<double>& video, const FlowOptions& options) {
  require(video.frames() >= 2, "estimate_video_flow: need at least 2 frames");
  const int L = video.frames(), H = video.height(), W = video.width(), C = video.channels();
  FlowField flow({L - 1, H, W, 2});
  auto single = [&](int l) {
    const auto f = video.frame(l);
    return Tensor4<double>({1, H, W, C}, std::vector<double>(f.begin(), f.end()));
  };
  Tensor4<double> a = single(0);
  for (int l = 0; l + 1 < L; ++l) {
    Tensor4<double> b = single(l + 1);
    const FlowField f = estimate_flow(a, b, options);
    std::copy(f.data().begin(), f.data().end(), flow.frame(l).begin());
    a = std::move(b);
  }
  return flow;
}

Tensor4<double> flow_intensity(const FlowField& flow) {
  require(flow.channels() == 2, "flow_intensity: flow needs 2 channels");
  Tensor4<double> out({flow.frames(), flow.height(), flow.width(), 1});
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = std::hypot(flow.data()[2 * i], flow.data()[2 * i + 1]);
  }
  return out;
}

double normalize_value(double x, const HeatmapParams& p) {
  return 1.0 / (1.0 + std::exp(p.gain * (p.threshold - x)));
}

Tensor4<double> normalize_intensity(const Tensor4<double>& x, const HeatmapParams& params) {
  Tensor4<double> out(x.dims());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(),
                 [&](double v) { return normalize_value(v, params); });
  return out;
}

Tensor4<double> heatmap_from_flow(const FlowField& flow, const HeatmapParams& params) {
  const Tensor4<double> intensity = flow_intensity(flow);
  const int L = flow.frames() + 1;
  const double scale = intensity_scale(flow.height(), flow.width());
  Tensor4<double> m({L, flow.height(), flow.width(), 1});
  for (int l = 0; l < L; ++l) {
    const auto src = intensity.frame(std::min(l, L - 2));
    auto dst = m.frame(l);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = normalize_value(src[i] / scale, params);
  }
  return m;
}

Tensor4<double> heatmap_for_video(const Tensor4<double>& video, const FlowOptions& options,
                                  const HeatmapParams& params) {
  require(video.frames() >= 2, "heatmap_for_video: need at least 2 frames");
  return heatmap_from_flow(estimate_video_flow(video, options), params);
}

Tensor4<double> downsample_heatmap(const Tensor4<double>& m, int p) {
  require(p >= 1, "downsample_heatmap: pool factor must be >= 1");
  require(m.height() % p == 0 && m.width() % p == 0,
          "downsample_heatmap: pool factor " + std::to_string(p) + " does not divide " +
              std::to_string(m.height()) + "x" + std::to_string(m.width()));
  const int Hp = m.height() / p, Wp = m.width() / p, C = m.channels();
  Tensor4<double> out({m.frames(), Hp, Wp, C});
  const double inv = 1.0 / (p * p);
  for (int l = 0; l < m.frames(); ++l) {
    for (int i = 0; i < Hp; ++i) {
      for (int j = 0; j < Wp; ++j) {
        for (int c = 0; c < C; ++c) {
          double s = 0.0;
          for (int a = 0; a < p; ++a) {
            for (int b = 0; b < p; ++b) s += m.at(l, i * p + a, j * p + b, c);
          }
          out.at(l, i, j, c) = std::clamp(s * inv, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

Tensor4<double> binarize(const Tensor4<double>& m, double threshold) {
  Tensor4<double> out(m.dims());
  std::transform(m.data().begin(), m.data().end(), out.data().begin(),
                 [&](double v) { return v >= threshold ? 1.0 : 0.0; });
  return out;
}

MotionHeatmap make_heatmap(const FlowField& flow, int pool, const HeatmapParams& params) {
  MotionHeatmap h;
  h.m = heatmap_from_flow(flow, params);
  h.m_prime = downsample_heatmap(h.m, pool);
  h.params = params;
  h.pool = pool;
  return h;
}

MotionStats motion_stats_from_flow(const FlowField& flow, const HeatmapParams& params,
                                   double mask_threshold) {
  const Tensor4<double> mask = binarize(heatmap_from_flow(flow, params), mask_threshold);
  const Tensor4<double> intensity = flow_intensity(flow);
  MotionStats s;
  double moving = 0.0;
  for (double v : mask.data()) moving += v;
  s.moving_fraction = moving / static_cast<double>(mask.size());
  s.static_fraction = 1.0 - s.moving_fraction;
  double total = 0.0;
  for (double v : intensity.data()) total += v;
  s.mean_intensity = total / static_cast<double>(intensity.size());
  return s;
}

MotionStats motion_stats(const Tensor4<double>& video, const FlowOptions& options,
                         const HeatmapParams& params, double mask_threshold) {
  require(video.frames() >= 2, "motion_stats: need at least 2 frames");
  return motion_stats_from_flow(estimate_video_flow(video, options), params, mask_threshold);
}

double sample_bilinear(const Tensor4<double>& t, int l, double x, double y, int c) {
  const int H = t.height(), W = t.width();
  x = std::clamp(x, 0.0, W - 1.0);
  y = std::clamp(y, 0.0, H - 1.0);
  const int j0 = std::min(static_cast<int>(x), W - 1), i0 = std::min(static_cast<int>(y), H - 1);
  const int j1 = std::min(j0 + 1, W - 1), i1 = std::min(i0 + 1, H - 1);
  const double fx = x - j0, fy = y - i0;
  return (1 - fy) * ((1 - fx) * t.at(l, i0, j0, c) + fx * t.at(l, i0, j1, c)) +
         fy * ((1 - fx) * t.at(l, i1, j0, c) + fx * t.at(l, i1, j1, c));
}

}  // namespace motif
