// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace motif {

DiffusionSchedule::DiffusionSchedule(int timesteps, double beta_start, double beta_end)
    : T_(timesteps) {
  require(timesteps >= 1, "schedule: need at least one timestep");
  require(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end,
          "schedule: need 0 < beta_start <= beta_end < 1");
  beta_.resize(T_);
  alpha_bar_.resize(T_);
  double prod = 1.0;
  for (int i = 0; i < T_; ++i) {
    beta_[i] = T_ == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (T_ - 1);
    prod *= 1.0 - beta_[i];
    alpha_bar_[i] = prod;
  }
}

double DiffusionSchedule::beta(int t) const {
  require(t >= 1 && t <= T_, "schedule: t out of range");
  return beta_[t - 1];
}

double DiffusionSchedule::alpha_bar(int t) const {
  require(t >= 0 && t <= T_, "schedule: t out of range");
  return t == 0 ? 1.0 : alpha_bar_[t - 1];
}

double DiffusionSchedule::sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar(t)); }
double DiffusionSchedule::sqrt_one_minus_alpha_bar(int t) const {
  return std::sqrt(1.0 - alpha_bar(t));
}

Latent encode(const Video& video, int p) {
  require(p >= 1, "encode: factor must be >= 1");
  require(video.height() % p == 0 && video.width() % p == 0,
          "encode: factor " + std::to_string(p) + " does not divide " +
              std::to_string(video.height()) + "x" + std::to_string(video.width()));
  const int L = video.frames(), C = video.channels();
  const int Hp = video.height() / p, Wp = video.width() / p;
  Latent z({L, Hp, Wp, C * p * p});
  for (int l = 0; l < L; ++l) {
    for (int i = 0; i < Hp; ++i) {
      for (int j = 0; j < Wp; ++j) {
        int k = 0;
        for (int dy = 0; dy < p; ++dy) {
          for (int dx = 0; dx < p; ++dx) {
            for (int c = 0; c < C; ++c) z.at(l, i, j, k++) = video.at(l, i * p + dy, j * p + dx, c);
          }
        }
      }
    }
  }
  return z;
}

Video decode(const Latent& latent, int p) {
  require(p >= 1, "decode: factor must be >= 1");
  require(latent.channels() % (p * p) == 0, "decode: channels not divisible by p^2");
  const int L = latent.frames(), C = latent.channels() / (p * p);
  const int Hp = latent.height(), Wp = latent.width();
  Video x({L, Hp * p, Wp * p, C});
  for (int l = 0; l < L; ++l) {
    for (int i = 0; i < Hp; ++i) {
      for (int j = 0; j < Wp; ++j) {
        int k = 0;
        for (int dy = 0; dy < p; ++dy) {
          for (int dx = 0; dx < p; ++dx) {
            for (int c = 0; c < C; ++c) x.at(l, i * p + dy, j * p + dx, c) = latent.at(l, i, j, k++);
          }
        }
      }
    }
  }
  return x;
}

Latent video_to_model(const Video& video, int p) {
  Latent z = encode(video, p);
  for (double& v : z.data()) v = 2.0 * v - 1.0;
  return z;
}

Video model_to_video(const Latent& latent, int p) {
  Video x = decode(latent, p);
  for (double& v : x.data()) v = std::clamp(0.5 * (v + 1.0), 0.0, 1.0);
  return x;
}

namespace {

Latent combine(double a, const Latent& x, double b, const Latent& y) {
  require(x.dims() == y.dims(), "latent dims mismatch: " + x.dims().str() + " vs " + y.dims().str());
  Latent out(x.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a * x.data()[i] + b * y.data()[i];
  return out;
}

}  // namespace

Latent q_sample(const DiffusionSchedule& s, const Latent& z0, int t, const Latent& eps) {
  require(t >= 1 && t <= s.timesteps(), "q_sample: t out of range");
  return combine(s.sqrt_alpha_bar(t), z0, s.sqrt_one_minus_alpha_bar(t), eps);
}

Latent v_target(const DiffusionSchedule& s, const Latent& z0, const Latent& eps, int t) {
  require(t >= 1 && t <= s.timesteps(), "v_target: t out of range");
  return combine(s.sqrt_alpha_bar(t), eps, -s.sqrt_one_minus_alpha_bar(t), z0);
}

Latent z0_from_v(const DiffusionSchedule& s, const Latent& z_t, const Latent& v, int t) {
  return combine(s.sqrt_alpha_bar(t), z_t, -s.sqrt_one_minus_alpha_bar(t), v);
}

Latent eps_from_v(const DiffusionSchedule& s, const Latent& z_t, const Latent& v, int t) {
  return combine(s.sqrt_one_minus_alpha_bar(t), z_t, s.sqrt_alpha_bar(t), v);
}

Latent gaussian_like(const Dims& dims, Rng& rng) {
  Latent out(dims);
  for (double& v : out.data()) v = rng.normal();
  return out;
}

Latent first_frame(const Latent& latent) {
  const auto f = latent.frame(0);
  return Latent({1, latent.height(), latent.width(), latent.channels()},
                std::vector<double>(f.begin(), f.end()));
}

Condition make_condition(const Latent& first, int frames, int prompt_index, bool drop,
                         int null_index) {
  require(frames >= 1, "make_condition: frames must be >= 1");
  require(prompt_index >= 0 && prompt_index <= null_index, "make_condition: prompt out of range");
  Condition c;
  c.cond = Latent({frames, first.height(), first.width(), first.channels()});
  const auto src = first.frame(0);
  for (int l = 0; l < frames; ++l) std::copy(src.begin(), src.end(), c.cond.frame(l).begin());
  c.dropped = drop;
  c.prompt_index = drop ? null_index : prompt_index;
  return c;
}

bool draw_prompt_drop(Rng& rng, double probability) { return rng.bernoulli(probability); }

std::vector<double> global_feature(const Latent& latent) {
  const int C = latent.channels();
  std::vector<double> g(C, 0.0);
  const auto f = latent.frame(0);
  for (std::size_t i = 0; i < f.size(); ++i) g[i % C] += f[i];
  const double n = static_cast<double>(latent.height()) * latent.width();
  for (double& v : g) v /= n;
  return g;
}

std::vector<int> ddim_timesteps(int timesteps, int steps) {
  require(steps >= 1 && steps <= timesteps, "ddim: steps must be in [1, T]");
  std::vector<int> ts;
  for (int i = steps; i >= 1; --i) {
    ts.push_back(static_cast<int>((static_cast<long long>(i) * timesteps + steps - 1) / steps));
  }
  ts.push_back(0);
  return ts;
}

Latent guided_v(const VPredictor& model, const Latent& z_t, int t, int prompt_index,
                int null_index, double guidance) {
  require(guidance >= 0.0, "guidance must be >= 0");
  if (guidance == 1.0 || prompt_index == null_index) return model(z_t, t, prompt_index);
  const Latent v_null = model(z_t, t, null_index);
  if (guidance == 0.0) return v_null;
  const Latent v_cond = model(z_t, t, prompt_index);
  return combine(1.0 - guidance, v_null, guidance, v_cond);
}

Latent ddim_from(const DiffusionSchedule& schedule, const VPredictor& model, Latent z,
                 int prompt_index, int null_index, int steps, double guidance) {
  const auto ts = ddim_timesteps(schedule.timesteps(), steps);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const int t = ts[k], prev = ts[k + 1];
    const Latent v = guided_v(model, z, t, prompt_index, null_index, guidance);
    require_finite(v, "ddim: model prediction");
    const Latent z0 = z0_from_v(schedule, z, v, t);
    if (prev == 0) {
      z = z0;
      break;
    }
    const Latent eps = eps_from_v(schedule, z, v, t);
    z = combine(schedule.sqrt_alpha_bar(prev), z0, schedule.sqrt_one_minus_alpha_bar(prev), eps);
  }
  return z;
}

Latent ddim_sample_latent(const DiffusionSchedule& schedule, const VPredictor& model,
                          const Dims& latent_dims, int prompt_index, int null_index,
                          const SampleOptions& options) {
  Rng rng(options.seed);
  return ddim_from(schedule, model, gaussian_like(latent_dims, rng), prompt_index, null_index,
                   options.steps, options.guidance);
}

}  // namespace motif
