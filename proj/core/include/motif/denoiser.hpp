// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motif/losses.hpp"
#include "motif/tensor.hpp"

namespace motif {

// How the first-frame latent reaches the denoiser.
//   kXCat:       replicated over frames and concatenated on the channel axis.
//   kGlobalFeat: spatially pooled to one vector and fed through the
//                scale/shift generators (a pooled-feature stand-in for
//                cross-attention).
//   kBoth:       both of the above.
enum class ConditioningMode { kXCat, kGlobalFeat, kBoth };

std::string to_string(ConditioningMode mode);
ConditioningMode parse_conditioning_mode(std::string_view text);

struct DenoiserConfig {
  int latent_channels = 12;
  int width = 32;
  // One entry per residual block; each block applies a 3x3 spatial conv with
  // this dilation followed by a 3-tap temporal conv.
  std::vector<int> dilations = {1, 2};
  int time_dim = 16;
  int prompt_dim = 20;
  int vocab_size = 144;
  int timesteps = 1000;
  ConditioningMode conditioning = ConditioningMode::kXCat;
  // Appends a channel holding the normalized frame index to the input.
  bool frame_channel = true;
  // Preconditioning around the condition latent. With cond_sigma > 0 the
  // network F sees y = z_t - a*cond scaled to unit variance and the output is
  //   v = k*y - s*cond + c*F,  k = a*s*(1 - sigma^2)/n^2,  c = sigma/n,
  // n^2 = a^2*sigma^2 + s^2, where a, s are sqrt(alpha_bar), sqrt(1 - alpha_bar)
  // and sigma is the expected rms of z0 - cond. F = 0 gives the best linear
  // predictor of v under that prior. cond_sigma = 0 returns F unchanged.
  double cond_sigma = 0.0;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  int blocks() const { return static_cast<int>(dilations.size()); }
  bool uses_xcat() const { return conditioning != ConditioningMode::kGlobalFeat; }
  bool uses_global() const { return conditioning != ConditioningMode::kXCat; }
  int input_channels() const {
    return latent_channels * (uses_xcat() ? 2 : 1) + (frame_channel ? 1 : 0);
  }
  int embed_dim() const { return time_dim + prompt_dim + (uses_global() ? latent_channels : 0); }
  void validate() const;
  bool operator==(const DenoiserConfig&) const = default;
};

struct ParamGroup {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

// Named parameter groups in a fixed order. DenoiserParams and GradientSet
// share this structure.
class ParamSet {
 public:
  std::vector<ParamGroup> groups;

  std::size_t count() const;
  ParamGroup& group(std::string_view name);
  const ParamGroup& group(std::string_view name) const;
  bool all_finite() const;
  bool same_structure(const ParamSet& other) const;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);
};

struct DenoiserParams : ParamSet {
  DenoiserConfig config;
  std::uint64_t seed = 0;
};

struct GradientSet : ParamSet {};

// He-style fan-in initialization; biases start at zero.
DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed);
DenoiserParams zero_denoiser(const DenoiserConfig& config);
GradientSet zero_gradients(const ParamSet& like);

// Sinusoidal embedding of a timestep index.
std::vector<double> time_embedding(int t_index, int dim);

// One supervised example for the denoiser.
struct TrainingItem {
  Latent noisy;                 // z_t
  Latent target;                // v
  Tensor4<double> heat;         // m', L x H' x W' x 1
  Latent cond;                  // first-frame latent replicated over L frames
  int t = 1;                    // diffusion step in [1, T]
  int prompt_index = 0;         // vocab_size selects the null token
  double residual_scale = 1.0;  // sqrt(alpha_bar_t); used for eps-space focal loss
};

using TrainingBatch = std::vector<TrainingItem>;

// 64-byte aligned storage. Vectorized reductions peel differently with each
// start alignment, so unaligned buffers make float results run-dependent.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <class T>
class DenoiserNet {
 public:
  explicit DenoiserNet(const DenoiserParams& params);

  struct Cache {
    Buffer<T> input;
    Buffer<T> embed;
    std::vector<Buffer<T>> h, a, s, m, q, gamma;
    Buffer<T> h_last, a_last;
    int frames = 0, height = 0, width = 0;
    int prompt_index = 0;
    T out_scale = T(1);
  };

  // Gradient buffers mirror the parameter groups.
  using Grads = std::vector<Buffer<T>>;
  Grads zero_grads() const;

  // Returns the predicted v, flattened L x H' x W' x C'.
  Buffer<T> forward(const Latent& noisy, const Latent& cond, int t_index, int prompt_index,
                         Cache* cache = nullptr) const;
  Latent predict(const Latent& noisy, const Latent& cond, int t_index, int prompt_index) const;
  // Accumulates parameter gradients for d(loss)/d(output) = grad_out.
  void backward(const Cache& cache, std::span<const T> grad_out, Grads& grads) const;

  const DenoiserConfig& config() const { return config_; }

 private:
  DenoiserConfig config_;
  std::vector<Buffer<T>> w_;
  std::vector<double> alpha_bar_;  // by t_index, filled when cond_sigma > 0
};

extern template class DenoiserNet<float>;
extern template class DenoiserNet<double>;

// Predicted v for one noisy latent, in double precision.
Latent denoiser_forward(const DenoiserParams& params, const Latent& noisy, const Latent& cond,
                        int t_index, int prompt_index);

struct LossAndGrads {
  double loss = 0.0;
  LossTerms terms;  // batch means of each term
  GradientSet grads;
};

// Batch-mean total loss and its exact gradient. Float evaluation is for
// training throughput; gradient checks use double.
template <class T = double>
LossAndGrads loss_and_grads(const DenoiserParams& params, const TrainingBatch& batch,
                            const LossSpec& spec);

}  // namespace motif
