// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motif/checkpoint.hpp"
#include "motif/diffusion.hpp"
#include "motif/motionmap.hpp"
#include "motif/optimizer.hpp"
#include "motif/synthvid.hpp"

namespace motif {

enum class Precision { kFloat, kDouble };

struct TrainConfig {
  VideoConfig video;
  int pool = 2;
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  LossSpec loss;
  // Network shape; latent_channels, prompt_dim, vocab_size and timesteps are
  // derived from the other fields.
  DenoiserConfig model = default_model();
  bool structured_prompt_init = true;
  int max_sprites = 3;
  std::vector<Verb> verbs = all_verbs();
  FlowSource heatmap_source = FlowSource::kOracle;
  double prompt_dropout = 0.1;
  OptimizerConfig optimizer;
  double lr = 1e-3;
  long steps = 2000;
  int batch = 4;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat;
  int log_every = 100;
  int sample_steps = 50;
  double guidance = 7.5;

  static DenoiserConfig default_model();
  // Fills the derived model fields and checks ranges.
  void finalize();
  DiffusionSchedule schedule() const { return DiffusionSchedule(timesteps, beta_start, beta_end); }
};

nlohmann::ordered_json to_json(const TrainConfig& config);
// Rejects unknown keys at every level.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

struct StepMetrics {
  long step = 0;
  double diffusion = 0.0;
  double motif = 0.0;
  double total = 0.0;
  double seconds = 0.0;
  bool operator==(const StepMetrics& o) const {
    return step == o.step && diffusion == o.diffusion && motif == o.motif && total == o.total;
  }
};

nlohmann::ordered_json to_json(const StepMetrics& m);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepMetrics> metrics;
};

// Latent clip with its latent-aligned heatmap.
struct PreparedClip {
  Latent z0;
  Tensor4<double> heat;  // m', L x H' x W' x 1
  int prompt_index = 0;
};

PreparedClip prepare_clip(const Clip& clip, const TrainConfig& config);
TrainingItem noised_item(const PreparedClip& clip, const DiffusionSchedule& schedule, int t,
                         int prompt_index, ResidualSpace residual, Rng& rng);

DenoiserParams initial_params(const TrainConfig& config);

using StepCallback = std::function<void(const StepMetrics&)>;
TrainResult train(const TrainConfig& config, const StepCallback& on_step = {});

// Parameters plus the configuration they were trained under.
struct Model {
  TrainConfig config;
  DenoiserParams params;
};

Model load_model(const std::filesystem::path& checkpoint);
Model model_from_checkpoint(const Checkpoint& ckpt);

// Wraps a model as a v-predictor for a fixed condition latent.
VPredictor make_predictor(const Model& model, const Latent& cond, Precision precision);

// Samples one clip from a single start frame (1 x H x W x 3, pixels).
Video generate(const Model& model, const Video& start_frame, int prompt_index,
               const SampleOptions& options, Precision precision = Precision::kFloat);

}  // namespace motif
