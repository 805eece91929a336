// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "motif/denoiser.hpp"
#include "motif/rng.hpp"
#include "motif/tensor.hpp"

namespace motif {

// Linear beta schedule. Index t runs over [1, T]; t = 0 denotes clean data
// (alpha_bar = 1).
class DiffusionSchedule {
 public:
  explicit DiffusionSchedule(int timesteps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

  int timesteps() const { return T_; }
  double beta(int t) const;
  double alpha_bar(int t) const;
  double sqrt_alpha_bar(int t) const;            // a_t
  double sqrt_one_minus_alpha_bar(int t) const;  // s_t
  double snr(int t) const { return alpha_bar(t) / (1.0 - alpha_bar(t)); }

 private:
  int T_;
  std::vector<double> beta_, alpha_bar_;
};

// Per-frame space-to-depth with factor p. Latent channel order within a
// p x p block is (dy, dx, c).
Latent encode(const Video& video, int p);
Video decode(const Latent& latent, int p);

// Model space: pixels in [0,1] map to [-1,1] before encoding.
Latent video_to_model(const Video& video, int p);
Video model_to_video(const Latent& latent, int p);  // clamps to [0,1]

Latent q_sample(const DiffusionSchedule& s, const Latent& z0, int t, const Latent& eps);
Latent v_target(const DiffusionSchedule& s, const Latent& z0, const Latent& eps, int t);
Latent z0_from_v(const DiffusionSchedule& s, const Latent& z_t, const Latent& v, int t);
Latent eps_from_v(const DiffusionSchedule& s, const Latent& z_t, const Latent& v, int t);
Latent gaussian_like(const Dims& dims, Rng& rng);

struct Condition {
  Latent cond;  // first-frame latent replicated over L frames
  int prompt_index = 0;
  bool dropped = false;
};

// The denoiser consumes the replicated latent in every mode; global-feature
// models pool it internally.
Condition make_condition(const Latent& first_frame, int frames, int prompt_index, bool drop,
                         int null_index);
bool draw_prompt_drop(Rng& rng, double probability = 0.1);
// Per-channel spatial mean of frame 0.
std::vector<double> global_feature(const Latent& latent);
Latent first_frame(const Latent& latent);

// Predicts v for (z_t, t in [1, T], prompt index).
using VPredictor = std::function<Latent(const Latent& z_t, int t, int prompt_index)>;

struct SampleOptions {
  int steps = 50;
  double guidance = 7.5;
  std::uint64_t seed = 0;
};

// Descending DDIM timesteps ending at 0.
std::vector<int> ddim_timesteps(int timesteps, int steps);

// Guided prediction v_null + g (v_cond - v_null); g = 1 and g = 0 return the
// conditional and unconditional predictions verbatim.
Latent guided_v(const VPredictor& model, const Latent& z_t, int t, int prompt_index,
                int null_index, double guidance);

// Deterministic (eta = 0) DDIM in v-parameterization from a seeded Gaussian.
Latent ddim_sample_latent(const DiffusionSchedule& schedule, const VPredictor& model,
                          const Dims& latent_dims, int prompt_index, int null_index,
                          const SampleOptions& options);
// Same, starting from a caller-supplied z_T.
Latent ddim_from(const DiffusionSchedule& schedule, const VPredictor& model, Latent z,
                 int prompt_index, int null_index, int steps, double guidance);

}  // namespace motif
