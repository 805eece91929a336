// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

#include "motif/diffusion.hpp"
#include "motif/rng.hpp"

namespace motif {

std::string to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::kXCat:
      return "x_cat";
    case ConditioningMode::kGlobalFeat:
      return "global_feat";
    case ConditioningMode::kBoth:
      return "both";
  }
  return "x_cat";
}

ConditioningMode parse_conditioning_mode(std::string_view text) {
  if (text == "x_cat") return ConditioningMode::kXCat;
  if (text == "global_feat") return ConditioningMode::kGlobalFeat;
  if (text == "both") return ConditioningMode::kBoth;
  throw FormatError("unknown conditioning mode '" + std::string(text) + "'");
}

void DenoiserConfig::validate() const {
  require(latent_channels >= 1 && width >= 1 && time_dim >= 0 && prompt_dim >= 0 &&
              vocab_size >= 1 && timesteps >= 1,
          "DenoiserConfig: sizes must be positive");
  require(time_dim % 2 == 0, "DenoiserConfig: time_dim must be even");
  require(!dilations.empty(), "DenoiserConfig: need at least one block");
  for (int d : dilations) require(d >= 1, "DenoiserConfig: dilation must be >= 1");
  require(cond_sigma >= 0.0 && std::isfinite(cond_sigma), "DenoiserConfig: cond_sigma must be >= 0");
}

// ---------------------------------------------------------------------------
// ParamSet

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.values.size();
  return n;
}

ParamGroup& ParamSet::group(std::string_view name) {
  for (auto& g : groups) {
    if (g.name == name) return g;
  }
  throw ContractError("no parameter group named '" + std::string(name) + "'");
}

const ParamGroup& ParamSet::group(std::string_view name) const {
  return const_cast<ParamSet*>(this)->group(name);
}

bool ParamSet::all_finite() const {
  for (const auto& g : groups) {
    for (double v : g.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool ParamSet::same_structure(const ParamSet& other) const {
  if (groups.size() != other.groups.size()) return false;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].name != other.groups[i].name || groups[i].shape != other.groups[i].shape ||
        groups[i].values.size() != other.groups[i].values.size()) {
      return false;
    }
  }
  return true;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& g : groups) out.insert(out.end(), g.values.begin(), g.values.end());
  return out;
}

void ParamSet::assign_flat(std::span<const double> flat) {
  require(flat.size() == count(), "assign_flat: size mismatch");
  std::size_t off = 0;
  for (auto& g : groups) {
    std::copy_n(flat.begin() + off, g.values.size(), g.values.begin());
    off += g.values.size();
  }
}

// ---------------------------------------------------------------------------
// Layout

namespace {

constexpr int kInW = 0;
constexpr int kInB = 1;
constexpr int kBlockBase = 2;
constexpr int kPerBlock = 8;
// Offsets inside a block.
constexpr int kSpW = 0, kSpB = 1, kTmW = 2, kTmB = 3, kScW = 4, kScB = 5, kShW = 6, kShB = 7;

int block_group(int b, int k) { return kBlockBase + kPerBlock * b + k; }
int out_w_group(const DenoiserConfig& c) { return kBlockBase + kPerBlock * c.blocks(); }
int out_b_group(const DenoiserConfig& c) { return out_w_group(c) + 1; }
int table_group(const DenoiserConfig& c) { return out_w_group(c) + 2; }

struct GroupSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in;  // 0 => bias (zero init)
};

std::vector<GroupSpec> layout(const DenoiserConfig& c) {
  const int f = c.width, cin = c.input_channels(), d = c.embed_dim(), co = c.latent_channels;
  std::vector<GroupSpec> specs;
  specs.push_back({"in.weight", {9, cin, f}, 9 * cin});
  specs.push_back({"in.bias", {f}, 0});
  for (int b = 0; b < c.blocks(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    specs.push_back({p + "spatial.weight", {9, f, f}, 9 * f});
    specs.push_back({p + "spatial.bias", {f}, 0});
    specs.push_back({p + "temporal.weight", {3, f, f}, 3 * f});
    specs.push_back({p + "temporal.bias", {f}, 0});
    specs.push_back({p + "scale.weight", {d, f}, std::max(d, 1)});
    specs.push_back({p + "scale.bias", {f}, 0});
    specs.push_back({p + "shift.weight", {d, f}, std::max(d, 1)});
    specs.push_back({p + "shift.bias", {f}, 0});
  }
  specs.push_back({"out.weight", {9, f, co}, 9 * f});
  specs.push_back({"out.bias", {co}, 0});
  specs.push_back({"prompt_table", {c.vocab_size + 1, c.prompt_dim}, -1});
  return specs;
}

std::size_t shape_size(const std::vector<int>& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

}  // namespace

DenoiserParams zero_denoiser(const DenoiserConfig& config) {
  config.validate();
  DenoiserParams p;
  p.config = config;
  for (auto& spec : layout(config)) {
    p.groups.push_back({spec.name, spec.shape, std::vector<double>(shape_size(spec.shape), 0.0)});
  }
  return p;
}

DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed) {
  DenoiserParams p = zero_denoiser(config);
  p.seed = seed;
  Rng rng(seed);
  const auto specs = layout(config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const int fan_in = specs[i].fan_in;
    if (fan_in == 0) continue;
    const double stddev = fan_in > 0 ? std::sqrt(2.0 / fan_in) : 1.0;
    for (double& v : p.groups[i].values) v = stddev * rng.normal();
  }
  // Null token row starts at zero.
  auto& table = p.groups.back().values;
  std::fill(table.end() - config.prompt_dim, table.end(), 0.0);
  return p;
}

GradientSet zero_gradients(const ParamSet& like) {
  GradientSet g;
  g.groups = like.groups;
  for (auto& grp : g.groups) std::fill(grp.values.begin(), grp.values.end(), 0.0);
  return g;
}

std::vector<double> time_embedding(int t_index, int dim) {
  std::vector<double> e(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / std::max(half, 1));
    e[2 * k] = std::sin(t_index * freq);
    e[2 * k + 1] = std::cos(t_index * freq);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Kernels. Activations are channel-last: [frame][row][col][channel].

namespace {

template <class T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <class T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

template <class T>
void silu(const Buffer<T>& x, Buffer<T>& y) {
  y.resize(x.size());
  ConstArrayMap<T> xa(x.data(), x.size());
  ArrayMap<T>(y.data(), y.size()) = xa / (T(1) + (-xa).exp());
}

// g *= silu'(x)
template <class T>
void silu_backward(const Buffer<T>& x, Buffer<T>& g) {
  ConstArrayMap<T> xa(x.data(), x.size());
  ArrayMap<T> ga(g.data(), g.size());
  const auto s = (T(1) + (-xa).exp()).inverse();
  ga *= s * (T(1) + xa * (T(1) - s));
}

struct Geometry {
  int frames, height, width;
  std::size_t positions() const { return static_cast<std::size_t>(frames) * height * width; }
};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Gathers the 3x3 (dilated) neighbourhood of every position into one row;
// out-of-frame taps are zero.
template <class T>
void im2col_spatial(const Geometry& g, const T* in, int cin, int dil, Buffer<T>& col) {
  const std::size_t k = 9 * static_cast<std::size_t>(cin);
  col.assign(g.positions() * k, T(0));
  std::size_t row = 0;
  for (int l = 0; l < g.frames; ++l) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x, ++row) {
        T* dst = col.data() + row * k;
        for (int ky = 0; ky < 3; ++ky) {
          const int yy = y + (ky - 1) * dil;
          if (yy < 0 || yy >= g.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int xx = x + (kx - 1) * dil;
            if (xx < 0 || xx >= g.width) continue;
            const T* src = in + ((static_cast<std::size_t>(l) * g.height + yy) * g.width + xx) * cin;
            std::copy(src, src + cin, dst + (ky * 3 + kx) * cin);
          }
        }
      }
    }
  }
}

// Adjoint of im2col_spatial: scatters row gradients back onto the input.
template <class T>
void col2im_spatial(const Geometry& g, const Buffer<T>& col, int cin, int dil, T* grad_in) {
  const std::size_t k = 9 * static_cast<std::size_t>(cin);
  std::size_t row = 0;
  for (int l = 0; l < g.frames; ++l) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x, ++row) {
        const T* src = col.data() + row * k;
        for (int ky = 0; ky < 3; ++ky) {
          const int yy = y + (ky - 1) * dil;
          if (yy < 0 || yy >= g.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int xx = x + (kx - 1) * dil;
            if (xx < 0 || xx >= g.width) continue;
            T* dst = grad_in + ((static_cast<std::size_t>(l) * g.height + yy) * g.width + xx) * cin;
            const T* s = src + (ky * 3 + kx) * cin;
            for (int ci = 0; ci < cin; ++ci) dst[ci] += s[ci];
          }
        }
      }
    }
  }
}

// Three-frame window per position, zero outside the clip.
template <class T>
void im2col_temporal(const Geometry& g, const T* in, int f, Buffer<T>& col) {
  const std::size_t per_frame = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t k = 3 * static_cast<std::size_t>(f);
  col.assign(g.positions() * k, T(0));
  for (int l = 0; l < g.frames; ++l) {
    for (std::size_t p = 0; p < per_frame; ++p) {
      T* dst = col.data() + (l * per_frame + p) * k;
      for (int t = 0; t < 3; ++t) {
        const int ll = l + t - 1;
        if (ll < 0 || ll >= g.frames) continue;
        const T* src = in + (ll * per_frame + p) * f;
        std::copy(src, src + f, dst + t * f);
      }
    }
  }
}

template <class T>
void col2im_temporal(const Geometry& g, const Buffer<T>& col, int f, T* grad_in) {
  const std::size_t per_frame = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t k = 3 * static_cast<std::size_t>(f);
  for (int l = 0; l < g.frames; ++l) {
    for (std::size_t p = 0; p < per_frame; ++p) {
      const T* src = col.data() + (l * per_frame + p) * k;
      for (int t = 0; t < 3; ++t) {
        const int ll = l + t - 1;
        if (ll < 0 || ll >= g.frames) continue;
        T* dst = grad_in + (ll * per_frame + p) * f;
        for (int ci = 0; ci < f; ++ci) dst[ci] += src[t * f + ci];
      }
    }
  }
}

// out[P x cout] = col[P x k] * w[k x cout] + bias
template <class T>
void gemm_forward(const Buffer<T>& col, std::size_t rows, std::size_t k, const T* w,
                  const T* bias, int cout, T* out) {
  ConstMapMat<T> a(col.data(), rows, k);
  ConstMapMat<T> b(w, k, cout);
  MapMat<T> c(out, rows, cout);
  c.noalias() = a * b;
  c.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias, cout);
}

// grad_w += col^T * gout, grad_b += colsum(gout), gcol = gout * w^T (if wanted).
template <class T>
void gemm_backward(const Buffer<T>& col, std::size_t rows, std::size_t k, const T* w,
                   int cout, const T* gout, T* grad_w, T* grad_b, Buffer<T>* gcol) {
  ConstMapMat<T> a(col.data(), rows, k);
  ConstMapMat<T> go(gout, rows, cout);
  MapMat<T> gw(grad_w, k, cout);
  gw.noalias() += a.transpose() * go;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grad_b, cout) += go.colwise().sum();
  if (gcol != nullptr) {
    gcol->resize(rows * k);
    MapMat<T> gc(gcol->data(), rows, k);
    gc.noalias() = go * ConstMapMat<T>(w, k, cout).transpose();
  }
}

template <class T>
void spatial_forward(const Geometry& g, const T* in, int cin, const T* w, const T* bias, int cout,
                     int dil, T* out, Buffer<T>& col) {
  im2col_spatial(g, in, cin, dil, col);
  gemm_forward(col, g.positions(), 9 * static_cast<std::size_t>(cin), w, bias, cout, out);
}

// grad_in may be null (input gradient not needed).
template <class T>
void spatial_backward(const Geometry& g, const T* in, int cin, const T* w, int cout, int dil,
                      const T* gout, T* grad_in, T* grad_w, T* grad_b, Buffer<T>& col,
                      Buffer<T>& gcol) {
  im2col_spatial(g, in, cin, dil, col);
  gemm_backward(col, g.positions(), 9 * static_cast<std::size_t>(cin), w, cout, gout, grad_w,
                grad_b, grad_in != nullptr ? &gcol : nullptr);
  if (grad_in != nullptr) col2im_spatial(g, gcol, cin, dil, grad_in);
}

template <class T>
void temporal_forward(const Geometry& g, const T* in, const T* w, const T* bias, int f, T* out,
                      Buffer<T>& col) {
  im2col_temporal(g, in, f, col);
  gemm_forward(col, g.positions(), 3 * static_cast<std::size_t>(f), w, bias, f, out);
}

template <class T>
void temporal_backward(const Geometry& g, const T* in, const T* w, int f, const T* gout,
                       T* grad_in, T* grad_w, T* grad_b, Buffer<T>& col,
                       Buffer<T>& gcol) {
  im2col_temporal(g, in, f, col);
  gemm_backward(col, g.positions(), 3 * static_cast<std::size_t>(f), w, f, gout, grad_w, grad_b,
                &gcol);
  col2im_temporal(g, gcol, f, grad_in);
}

}  // namespace

// ---------------------------------------------------------------------------
// DenoiserNet

template <class T>
DenoiserNet<T>::DenoiserNet(const DenoiserParams& params) : config_(params.config) {
  config_.validate();
  require(params.same_structure(zero_denoiser(config_)),
          "DenoiserNet: parameter groups do not match config");
  w_.reserve(params.groups.size());
  for (const auto& g : params.groups) w_.emplace_back(g.values.begin(), g.values.end());
  if (config_.cond_sigma > 0.0) {
    const DiffusionSchedule schedule(config_.timesteps, config_.beta_start, config_.beta_end);
    for (int t = 1; t <= config_.timesteps; ++t) alpha_bar_.push_back(schedule.alpha_bar(t));
  }
}

template <class T>
typename DenoiserNet<T>::Grads DenoiserNet<T>::zero_grads() const {
  Grads g(w_.size());
  for (std::size_t i = 0; i < w_.size(); ++i) g[i].assign(w_[i].size(), T(0));
  return g;
}

template <class T>
Buffer<T> DenoiserNet<T>::forward(const Latent& noisy, const Latent& cond, int t_index,
                                       int prompt_index, Cache* cache) const {
  const DenoiserConfig& c = config_;
  require(noisy.channels() == c.latent_channels,
          "denoiser: latent has " + std::to_string(noisy.channels()) + " channels, expected " +
              std::to_string(c.latent_channels));
  require(cond.dims() == noisy.dims(),
          "denoiser: cond dims " + cond.dims().str() + " differ from noisy " + noisy.dims().str());
  require(t_index >= 0 && t_index < c.timesteps, "denoiser: t_index out of range");
  require(prompt_index >= 0 && prompt_index <= c.vocab_size, "denoiser: prompt_index out of range");
  if (!noisy.all_finite() || !cond.all_finite()) throw NumericError("denoiser: non-finite input");

  const Geometry geo{noisy.frames(), noisy.height(), noisy.width()};
  const std::size_t positions = geo.positions();
  const int f = c.width, cl = c.latent_channels, cin = c.input_channels();
  const std::size_t per_frame = static_cast<std::size_t>(geo.height) * geo.width;

  Cache local;
  Cache& k = cache != nullptr ? *cache : local;
  k.frames = geo.frames;
  k.height = geo.height;
  k.width = geo.width;
  k.prompt_index = prompt_index;

  const bool precond = c.cond_sigma > 0.0;
  double sa = 1.0, ss = 0.0, skip = 0.0, in_scale = 1.0, out_scale = 1.0;
  if (precond) {
    const double sig2 = c.cond_sigma * c.cond_sigma;
    sa = std::sqrt(alpha_bar_[t_index]);
    ss = std::sqrt(1.0 - alpha_bar_[t_index]);
    const double n2 = sa * sa * sig2 + ss * ss;
    skip = sa * ss * (1.0 - sig2) / n2;
    in_scale = 1.0 / std::sqrt(n2);
    out_scale = c.cond_sigma * in_scale;
  }
  k.out_scale = static_cast<T>(out_scale);

  // Input channels: noisy latent | condition latent | frame position.
  k.input.assign(positions * cin, T(0));
  for (std::size_t p = 0; p < positions; ++p) {
    T* dst = k.input.data() + p * cin;
    const double* zn = noisy.data().data() + p * cl;
    const double* zc0 = cond.data().data() + p * cl;
    for (int ch = 0; ch < cl; ++ch) {
      dst[ch] = static_cast<T>(precond ? in_scale * (zn[ch] - sa * zc0[ch]) : zn[ch]);
    }
    int off = cl;
    if (c.uses_xcat()) {
      const double* zc = cond.data().data() + p * cl;
      for (int ch = 0; ch < cl; ++ch) dst[off + ch] = static_cast<T>(zc[ch]);
      off += cl;
    }
    if (c.frame_channel) {
      const int l = static_cast<int>(p / per_frame);
      dst[off] = geo.frames > 1 ? static_cast<T>(2.0 * l / (geo.frames - 1) - 1.0) : T(0);
    }
  }

  // Embedding: time | prompt | pooled condition.
  const int d = c.embed_dim();
  k.embed.assign(d, T(0));
  const auto te = time_embedding(t_index, c.time_dim);
  for (int i = 0; i < c.time_dim; ++i) k.embed[i] = static_cast<T>(te[i]);
  const auto& table = w_[table_group(c)];
  for (int i = 0; i < c.prompt_dim; ++i) {
    k.embed[c.time_dim + i] = table[static_cast<std::size_t>(prompt_index) * c.prompt_dim + i];
  }
  if (c.uses_global()) {
    std::vector<double> pooled(cl, 0.0);
    for (std::size_t p = 0; p < positions; ++p) {
      for (int ch = 0; ch < cl; ++ch) pooled[ch] += cond.data()[p * cl + ch];
    }
    for (int ch = 0; ch < cl; ++ch) {
      k.embed[c.time_dim + c.prompt_dim + ch] = static_cast<T>(pooled[ch] / positions);
    }
  }

  const int nb = c.blocks();
  k.h.resize(nb);
  k.a.resize(nb);
  k.s.resize(nb);
  k.m.resize(nb);
  k.q.resize(nb);
  k.gamma.resize(nb);

  // Scratch reused across calls; fresh multi-megabyte buffers page-fault on
  // every pass.
  thread_local Buffer<T> col;
  Buffer<T> h(positions * f);
  spatial_forward(geo, k.input.data(), cin, w_[kInW].data(), w_[kInB].data(), f, 1, h.data(), col);

  Buffer<T> r(positions * f);
  for (int b = 0; b < nb; ++b) {
    k.h[b] = h;
    silu(h, k.a[b]);
    k.s[b].resize(positions * f);
    spatial_forward(geo, k.a[b].data(), f, w_[block_group(b, kSpW)].data(),
                    w_[block_group(b, kSpB)].data(), f, c.dilations[b], k.s[b].data(), col);
    // Per-channel scale and shift generated from the embedding.
    Buffer<T> gamma(w_[block_group(b, kScB)]);
    Buffer<T> beta(w_[block_group(b, kShB)]);
    const auto& wsc = w_[block_group(b, kScW)];
    const auto& wsh = w_[block_group(b, kShW)];
    for (int i = 0; i < d; ++i) {
      const T e = k.embed[i];
      for (int ch = 0; ch < f; ++ch) {
        gamma[ch] += e * wsc[static_cast<std::size_t>(i) * f + ch];
        beta[ch] += e * wsh[static_cast<std::size_t>(i) * f + ch];
      }
    }
    k.m[b].resize(positions * f);
    for (std::size_t p = 0; p < positions; ++p) {
      for (int ch = 0; ch < f; ++ch) {
        k.m[b][p * f + ch] = k.s[b][p * f + ch] * (T(1) + gamma[ch]) + beta[ch];
      }
    }
    k.gamma[b] = std::move(gamma);
    silu(k.m[b], k.q[b]);
    temporal_forward(geo, k.q[b].data(), w_[block_group(b, kTmW)].data(),
                     w_[block_group(b, kTmB)].data(), f, r.data(), col);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += r[i];
  }
  k.h_last = h;
  silu(h, k.a_last);

  Buffer<T> out(positions * cl);
  spatial_forward(geo, k.a_last.data(), f, w_[out_w_group(c)].data(), w_[out_b_group(c)].data(),
                  cl, 1, out.data(), col);
  if (precond) {
    const double* zn = noisy.data().data();
    const double* zc = cond.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double y = zn[i] - sa * zc[i];
      out[i] = static_cast<T>(skip * y - ss * zc[i] + out_scale * static_cast<double>(out[i]));
    }
  }
  return out;
}

template <class T>
Latent DenoiserNet<T>::predict(const Latent& noisy, const Latent& cond, int t_index,
                               int prompt_index) const {
  const auto out = forward(noisy, cond, t_index, prompt_index);
  Latent result(noisy.dims());
  std::copy(out.begin(), out.end(), result.data().begin());
  return result;
}

template <class T>
void DenoiserNet<T>::backward(const Cache& k, std::span<const T> grad_out, Grads& grads) const {
  const DenoiserConfig& c = config_;
  const Geometry geo{k.frames, k.height, k.width};
  const std::size_t positions = geo.positions();
  const int f = c.width, cl = c.latent_channels, cin = c.input_channels(), d = c.embed_dim();
  require(grad_out.size() == positions * cl, "backward: gradient size mismatch");

  thread_local Buffer<T> col, gcol;
  thread_local Buffer<T> gh, gq, ga, gout;
  gout.assign(grad_out.begin(), grad_out.end());
  if (k.out_scale != T(1)) {
    for (T& g : gout) g *= k.out_scale;
  }
  gh.assign(positions * f, T(0));
  gq.resize(positions * f);
  ga.resize(positions * f);
  spatial_backward(geo, k.a_last.data(), f, w_[out_w_group(c)].data(), cl, 1, gout.data(),
                   gh.data(), grads[out_w_group(c)].data(), grads[out_b_group(c)].data(), col,
                   gcol);
  silu_backward(k.h_last, gh);

  Buffer<T> ge(d, T(0));
  for (int b = c.blocks() - 1; b >= 0; --b) {
    std::fill(gq.begin(), gq.end(), T(0));
    temporal_backward(geo, k.q[b].data(), w_[block_group(b, kTmW)].data(), f, gh.data(),
                      gq.data(), grads[block_group(b, kTmW)].data(),
                      grads[block_group(b, kTmB)].data(), col, gcol);
    // gq becomes d/dm, then d/ds in place.
    silu_backward(k.m[b], gq);
    Buffer<T> ggamma(f, T(0)), gbeta(f, T(0));
    for (std::size_t p = 0; p < positions; ++p) {
      for (int ch = 0; ch < f; ++ch) {
        const T gm = gq[p * f + ch];
        ggamma[ch] += gm * k.s[b][p * f + ch];
        gbeta[ch] += gm;
        gq[p * f + ch] = gm * (T(1) + k.gamma[b][ch]);
      }
    }
    auto& gwsc = grads[block_group(b, kScW)];
    auto& gwsh = grads[block_group(b, kShW)];
    const auto& wsc = w_[block_group(b, kScW)];
    const auto& wsh = w_[block_group(b, kShW)];
    for (int i = 0; i < d; ++i) {
      const T e = k.embed[i];
      T acc = T(0);
      for (int ch = 0; ch < f; ++ch) {
        const std::size_t idx = static_cast<std::size_t>(i) * f + ch;
        gwsc[idx] += e * ggamma[ch];
        gwsh[idx] += e * gbeta[ch];
        acc += wsc[idx] * ggamma[ch] + wsh[idx] * gbeta[ch];
      }
      ge[i] += acc;
    }
    for (int ch = 0; ch < f; ++ch) {
      grads[block_group(b, kScB)][ch] += ggamma[ch];
      grads[block_group(b, kShB)][ch] += gbeta[ch];
    }
    std::fill(ga.begin(), ga.end(), T(0));
    spatial_backward(geo, k.a[b].data(), f, w_[block_group(b, kSpW)].data(), f, c.dilations[b],
                     gq.data(), ga.data(), grads[block_group(b, kSpW)].data(),
                     grads[block_group(b, kSpB)].data(), col, gcol);
    silu_backward(k.h[b], ga);
    for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += ga[i];
  }
  spatial_backward<T>(geo, k.input.data(), cin, w_[kInW].data(), f, 1, gh.data(), nullptr,
                      grads[kInW].data(), grads[kInB].data(), col, gcol);

  auto& gtable = grads[table_group(c)];
  for (int i = 0; i < c.prompt_dim; ++i) {
    gtable[static_cast<std::size_t>(k.prompt_index) * c.prompt_dim + i] += ge[c.time_dim + i];
  }
}

template class DenoiserNet<float>;
template class DenoiserNet<double>;

Latent denoiser_forward(const DenoiserParams& params, const Latent& noisy, const Latent& cond,
                        int t_index, int prompt_index) {
  return DenoiserNet<double>(params).predict(noisy, cond, t_index, prompt_index);
}

// ---------------------------------------------------------------------------
// Loss and gradients

template <class T>
LossAndGrads loss_and_grads(const DenoiserParams& params, const TrainingBatch& batch,
                            const LossSpec& spec) {
  require(!batch.empty(), "loss_and_grads: empty batch");
  require(spec.lambda >= 0.0 && std::isfinite(spec.lambda), "loss_and_grads: invalid lambda");
  const DenoiserNet<T> net(params);
  auto grads = net.zero_grads();
  typename DenoiserNet<T>::Cache cache;
  LossAndGrads result;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const auto& item : batch) {
    require(item.target.dims() == item.noisy.dims(), "loss_and_grads: target dims mismatch");
    check_heat(item.heat, item.noisy.dims());
    const auto out = net.forward(item.noisy, item.cond, item.t - 1, item.prompt_index, &cache);
    Latent pred(item.noisy.dims());
    std::copy(out.begin(), out.end(), pred.data().begin());
    const LossTerms terms = loss_terms(pred, item.target, item.heat, spec, item.residual_scale);
    if (!std::isfinite(terms.total)) throw NumericError("loss_and_grads: non-finite loss");
    result.terms.diffusion += terms.diffusion * inv_batch;
    result.terms.motif += terms.motif * inv_batch;
    result.terms.total += terms.total * inv_batch;

    // d/dpred of mean(r^2) + lambda * mean(factor * (s r)^2), r = target - pred.
    const int cl = pred.channels();
    const double n = static_cast<double>(pred.size());
    const double rs = spec.residual == ResidualSpace::kEps ? item.residual_scale : 1.0;
    Buffer<T> gout(pred.size());
    for (std::size_t p = 0; p < item.heat.size(); ++p) {
      const double w = heat_weight(item.heat.data()[p], spec.mode);
      const double factor = spec.weighting == Weighting::kSquared ? w * w : w;
      const double coef = -2.0 * (1.0 + spec.lambda * factor * rs * rs) / n * inv_batch;
      for (int ch = 0; ch < cl; ++ch) {
        const std::size_t i = p * cl + ch;
        gout[i] = static_cast<T>(coef * (item.target.data()[i] - pred.data()[i]));
      }
    }
    net.backward(cache, gout, grads);
  }
  result.loss = result.terms.total;
  result.grads = zero_gradients(params);
  for (std::size_t g = 0; g < grads.size(); ++g) {
    std::copy(grads[g].begin(), grads[g].end(), result.grads.groups[g].values.begin());
  }
  return result;
}

template LossAndGrads loss_and_grads<float>(const DenoiserParams&, const TrainingBatch&,
                                            const LossSpec&);
template LossAndGrads loss_and_grads<double>(const DenoiserParams&, const TrainingBatch&,
                                             const LossSpec&);

}  // namespace motif
