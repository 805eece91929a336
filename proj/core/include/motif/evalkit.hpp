// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motif/motionmap.hpp"
#include "motif/synthvid.hpp"
#include "motif/train.hpp"

namespace motif {

// ---------------------------------------------------------------------------
// Loss ratio

struct Bucket {
  int lo = 1;  // inclusive
  int hi = 1;  // inclusive
};

// Equal-width buckets covering [1, T].
std::vector<Bucket> timestep_buckets(int timesteps, int buckets);

// Mean of squared[i] over mask[i] >= 0.5 divided by the mean over all i;
// nullopt when the mask is empty or the overall mean is zero.
std::optional<double> loss_ratio_of(const std::vector<double>& squared,
                                    const std::vector<double>& mask);

struct LossRatioCurve {
  std::vector<Bucket> buckets;
  std::vector<std::optional<double>> ratio;
  std::vector<double> masked_fraction;
};

struct LossRatioOptions {
  double mask_threshold = 0.5;
  int buckets = 5;
  int draws_per_bucket = 2;  // timesteps drawn per clip and bucket
  std::uint64_t seed = 0;
};

// Held-out clips drawn from the model's own data distribution.
std::vector<PreparedClip> make_valset(const TrainConfig& config, std::size_t count,
                                      std::uint64_t seed);

LossRatioCurve loss_ratio(const Model& model, const std::vector<PreparedClip>& valset,
                          const LossRatioOptions& options = {});

// ---------------------------------------------------------------------------
// Motion classification and per-video metrics

struct ClassifierOptions {
  double static_threshold = 0.3;  // px/frame
  double top_fraction = 0.1;
  FlowOptions flow;
};

Verb classify_flow(const FlowField& flow, const ClassifierOptions& options = {});
Verb classify_motion(const Video& video, const ClassifierOptions& options = {});

struct Fidelity {
  double mse = 0.0;
  double psnr = 0.0;  // dB, capped at 100
};

Fidelity first_frame_fidelity(const Video& generated, const Video& cond_image);
double dynamic_degree_from_flow(const FlowField& flow);
double dynamic_degree(const Video& video, const FlowOptions& options = {});
Video static_baseline(const Video& cond_image, int frames);

// ---------------------------------------------------------------------------
// Bench evaluation

// Produces a clip for one bench pair.
using VideoGenerator =
    std::function<Video(const Video& start_frame, const PromptSpec& prompt, std::uint64_t seed)>;

VideoGenerator model_generator(const Model& model, int steps, double guidance,
                               Precision precision = Precision::kFloat);
VideoGenerator static_generator(int frames);

struct PairResult {
  std::string image_id;
  std::string prompt_id;
  int scenario_id = 0;
  std::uint64_t seed = 0;
  Verb prompt_verb = Verb::kStatic;
  std::optional<Verb> predicted;  // set for classifier-supported verbs
  double fidelity_mse = 0.0;
  double dynamic_degree = 0.0;
};

struct PromptAccuracy {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

// Seed used to sample pair `index` under evaluation seed `seed`.
std::uint64_t pair_seed(std::uint64_t seed, std::size_t index);

// Pairs are spread over `threads` workers; results keep manifest order and do
// not depend on the thread count.
std::vector<PairResult> evaluate_pairs(const VideoGenerator& generator, const Bench& bench,
                                       const BenchManifest& manifest,
                                       const std::vector<std::uint64_t>& seeds,
                                       const ClassifierOptions& options = {}, int threads = 1);

PromptAccuracy prompt_accuracy(const std::vector<PairResult>& results);
PromptAccuracy prompt_accuracy(const VideoGenerator& generator, const Bench& bench,
                               const std::vector<std::uint64_t>& seeds,
                               const ClassifierOptions& options = {}, int threads = 1);

struct EvalReport {
  std::string model_id;
  std::map<std::string, double> metrics;  // prompt_accuracy, fidelity_mse, fidelity_psnr, dynamic_degree
  std::optional<LossRatioCurve> loss_ratio;
  std::map<int, double> scenario_accuracy;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> flags;
};

struct ModelEntry {
  std::string id;
  VideoGenerator generator;
  std::optional<LossRatioCurve> loss_ratio;
};

EvalReport summarize(const std::string& model_id, const std::vector<PairResult>& results,
                     const std::vector<std::uint64_t>& seeds);

// Adds pathology flags across a report set:
//   static_output       the model produces no motion (dynamic degree ~ 0)
//   dominated_by_static worse fidelity than a static-output model while
//                       better on no other metric
void flag_reports(std::vector<EvalReport>& reports);

std::vector<EvalReport> compare(const std::vector<ModelEntry>& models, const Bench& bench,
                                const std::vector<std::uint64_t>& seeds,
                                const ClassifierOptions& options = {}, int threads = 1);

nlohmann::ordered_json to_json(const EvalReport& report);
nlohmann::ordered_json reports_to_json(const std::vector<EvalReport>& reports);
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace motif
