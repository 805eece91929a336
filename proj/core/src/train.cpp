// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace motif {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw FormatError("unknown key '" + key + "' in " + (where.empty() ? "config" : where));
    }
  }
}

std::string precision_name(Precision p) { return p == Precision::kFloat ? "float" : "double"; }
Precision parse_precision(const std::string& s) {
  if (s == "float") return Precision::kFloat;
  if (s == "double") return Precision::kDouble;
  throw FormatError("unknown precision '" + s + "'");
}

std::string source_name(FlowSource s) { return s == FlowSource::kOracle ? "oracle" : "estimated"; }
FlowSource parse_source(const std::string& s) {
  if (s == "oracle") return FlowSource::kOracle;
  if (s == "estimated") return FlowSource::kEstimated;
  throw FormatError("unknown heatmap source '" + s + "'");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "plain"; }
OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "plain") return OptimizerKind::kPlain;
  throw FormatError("unknown optimizer '" + s + "'");
}

}  // namespace

DenoiserConfig TrainConfig::default_model() {
  DenoiserConfig m;
  m.dilations = {2, 4};
  m.cond_sigma = 0.1;
  return m;
}

void TrainConfig::finalize() {
  video.validate();
  require(pool >= 1 && video.height % pool == 0 && video.width % pool == 0,
          "train config: pool must divide the frame size");
  require(loss.lambda >= 0.0 && std::isfinite(loss.lambda), "train config: lambda must be >= 0");
  require(steps >= 0 && batch >= 1, "train config: steps >= 0 and batch >= 1 required");
  require(lr > 0.0, "train config: lr must be positive");
  require(prompt_dropout >= 0.0 && prompt_dropout <= 1.0, "train config: prompt_dropout in [0,1]");
  require(!verbs.empty(), "train config: verbs must not be empty");
  require(sample_steps >= 1 && sample_steps <= timesteps, "train config: sample_steps in [1, T]");
  require(guidance >= 0.0, "train config: guidance must be >= 0");
  model.latent_channels = 3 * pool * pool;
  model.timesteps = timesteps;
  model.beta_start = beta_start;
  model.beta_end = beta_end;
  model.vocab_size = PromptVocab::size();
  if (structured_prompt_init) model.prompt_dim = PromptVocab::embedding_dim();
  model.validate();
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["video"] = {{"frames", c.video.frames},
                {"height", c.video.height},
                {"width", c.video.width},
                {"slow_px", c.video.slow_px},
                {"fast_px", c.video.fast_px},
                {"slow_scale_rate", c.video.slow_scale_rate},
                {"fast_scale_rate", c.video.fast_scale_rate},
                {"stride", c.video.stride},
                {"enter_frame", c.video.enter_frame}};
  j["pool"] = c.pool;
  j["timesteps"] = c.timesteps;
  j["beta_start"] = c.beta_start;
  j["beta_end"] = c.beta_end;
  j["loss"] = {{"lambda", c.loss.lambda},
               {"mode", to_string(c.loss.mode)},
               {"weighting", to_string(c.loss.weighting)},
               {"residual", to_string(c.loss.residual)}};
  j["model"] = {{"width", c.model.width},
                {"dilations", c.model.dilations},
                {"time_dim", c.model.time_dim},
                {"prompt_dim", c.model.prompt_dim},
                {"conditioning", to_string(c.model.conditioning)},
                {"frame_channel", c.model.frame_channel}};
  j["structured_prompt_init"] = c.structured_prompt_init;
  j["max_sprites"] = c.max_sprites;
  std::vector<std::string> verbs;
  for (Verb v : c.verbs) verbs.emplace_back(verb_name(v));
  j["verbs"] = verbs;
  j["heatmap_source"] = source_name(c.heatmap_source);
  j["prompt_dropout"] = c.prompt_dropout;
  j["optimizer"] = {{"kind", optimizer_name(c.optimizer.kind)},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps}};
  j["lr"] = c.lr;
  j["steps"] = c.steps;
  j["batch"] = c.batch;
  j["seed"] = c.seed;
  j["precision"] = precision_name(c.precision);
  j["log_every"] = c.log_every;
  j["sample_steps"] = c.sample_steps;
  j["guidance"] = c.guidance;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j,
             {"video", "pool", "timesteps", "beta_start", "beta_end", "loss", "model",
              "structured_prompt_init", "max_sprites", "verbs", "heatmap_source", "prompt_dropout",
              "optimizer", "lr", "steps", "batch", "seed", "precision", "log_every",
              "sample_steps", "guidance"},
             "");
  TrainConfig c;
  try {
    if (j.contains("video")) {
      const auto& v = j["video"];
      check_keys(v,
                 {"frames", "height", "width", "slow_px", "fast_px", "slow_scale_rate",
                  "fast_scale_rate", "stride", "enter_frame"},
                 "video");
      c.video.frames = v.value("frames", c.video.frames);
      c.video.height = v.value("height", c.video.height);
      c.video.width = v.value("width", c.video.width);
      c.video.slow_px = v.value("slow_px", c.video.slow_px);
      c.video.fast_px = v.value("fast_px", c.video.fast_px);
      c.video.slow_scale_rate = v.value("slow_scale_rate", c.video.slow_scale_rate);
      c.video.fast_scale_rate = v.value("fast_scale_rate", c.video.fast_scale_rate);
      c.video.stride = v.value("stride", c.video.stride);
      c.video.enter_frame = v.value("enter_frame", c.video.enter_frame);
    }
    c.pool = j.value("pool", c.pool);
    c.timesteps = j.value("timesteps", c.timesteps);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      check_keys(l, {"lambda", "mode", "weighting", "residual"}, "loss");
      c.loss.lambda = l.value("lambda", c.loss.lambda);
      c.loss.mode = parse_heatmap_mode(l.value("mode", to_string(c.loss.mode)));
      c.loss.weighting = parse_weighting(l.value("weighting", to_string(c.loss.weighting)));
      c.loss.residual = parse_residual_space(l.value("residual", to_string(c.loss.residual)));
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      check_keys(m, {"width", "dilations", "time_dim", "prompt_dim", "conditioning", "frame_channel"},
                 "model");
      c.model.width = m.value("width", c.model.width);
      c.model.dilations = m.value("dilations", c.model.dilations);
      c.model.time_dim = m.value("time_dim", c.model.time_dim);
      c.model.prompt_dim = m.value("prompt_dim", c.model.prompt_dim);
      c.model.conditioning =
          parse_conditioning_mode(m.value("conditioning", to_string(c.model.conditioning)));
      c.model.frame_channel = m.value("frame_channel", c.model.frame_channel);
    }
    c.structured_prompt_init = j.value("structured_prompt_init", c.structured_prompt_init);
    c.max_sprites = j.value("max_sprites", c.max_sprites);
    if (j.contains("verbs")) {
      c.verbs.clear();
      for (const auto& v : j["verbs"]) c.verbs.push_back(parse_verb(v.get<std::string>()));
    }
    c.heatmap_source = parse_source(j.value("heatmap_source", source_name(c.heatmap_source)));
    c.prompt_dropout = j.value("prompt_dropout", c.prompt_dropout);
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      check_keys(o, {"kind", "beta1", "beta2", "eps"}, "optimizer");
      c.optimizer.kind = parse_optimizer(o.value("kind", optimizer_name(c.optimizer.kind)));
      c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
      c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
      c.optimizer.eps = o.value("eps", c.optimizer.eps);
    }
    c.lr = j.value("lr", c.lr);
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    c.precision = parse_precision(j.value("precision", precision_name(c.precision)));
    c.log_every = j.value("log_every", c.log_every);
    c.sample_steps = j.value("sample_steps", c.sample_steps);
    c.guidance = j.value("guidance", c.guidance);
  } catch (const json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  c.finalize();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

nlohmann::ordered_json to_json(const StepMetrics& m) {
  return {{"step", m.step},
          {"diffusion", m.diffusion},
          {"motif", m.motif},
          {"total", m.total},
          {"seconds", m.seconds}};
}

PreparedClip prepare_clip(const Clip& clip, const TrainConfig& config) {
  PreparedClip p;
  p.z0 = video_to_model(clip.video, config.pool);
  const FlowField flow = config.heatmap_source == FlowSource::kOracle
                             ? clip.flow
                             : estimate_video_flow(clip.video);
  p.heat = downsample_heatmap(heatmap_from_flow(flow), config.pool);
  p.prompt_index = clip.prompt.embedding_index();
  return p;
}

TrainingItem noised_item(const PreparedClip& clip, const DiffusionSchedule& schedule, int t,
                         int prompt_index, ResidualSpace residual, Rng& rng) {
  const Latent eps = gaussian_like(clip.z0.dims(), rng);
  TrainingItem item;
  item.noisy = q_sample(schedule, clip.z0, t, eps);
  item.target = v_target(schedule, clip.z0, eps, t);
  item.heat = clip.heat;
  item.cond = make_condition(first_frame(clip.z0), clip.z0.frames(), 0, false, 0).cond;
  item.t = t;
  item.prompt_index = prompt_index;
  item.residual_scale = residual == ResidualSpace::kEps ? schedule.sqrt_alpha_bar(t) : 1.0;
  return item;
}

DenoiserParams initial_params(const TrainConfig& config) {
  DenoiserParams p = init_denoiser(config.model, config.seed);
  if (config.structured_prompt_init) {
    p.group("prompt_table").values = PromptVocab::structured_table();
  }
  return p;
}

TrainResult train(const TrainConfig& input, const StepCallback& on_step) {
  TrainConfig config = input;
  config.finalize();
  const DiffusionSchedule schedule = config.schedule();
  TrainResult result;
  DenoiserParams params = initial_params(config);
  Optimizer optimizer(params, config.optimizer);

  DatasetConfig data;
  data.video = config.video;
  data.size = static_cast<std::size_t>(config.steps) * config.batch;
  data.verbs = config.verbs;
  data.max_sprites = config.max_sprites;
  ClipStream stream(data, mix_seed(config.seed, 1));
  Rng rng(mix_seed(config.seed, 2));
  const auto start = std::chrono::steady_clock::now();

  for (long step = 1; step <= config.steps; ++step) {
    TrainingBatch batch;
    for (int b = 0; b < config.batch; ++b) {
      const PreparedClip clip = prepare_clip(stream.next(), config);
      const int t = rng.uniform_int(1, config.timesteps);
      const Condition cond = make_condition(first_frame(clip.z0), clip.z0.frames(),
                                            clip.prompt_index,
                                            draw_prompt_drop(rng, config.prompt_dropout),
                                            PromptVocab::null_index());
      batch.push_back(noised_item(clip, schedule, t, cond.prompt_index, config.loss.residual, rng));
    }
    const LossAndGrads lg = config.precision == Precision::kFloat
                                ? loss_and_grads<float>(params, batch, config.loss)
                                : loss_and_grads<double>(params, batch, config.loss);
    if (!std::isfinite(lg.loss)) {
      std::ostringstream msg;
      msg << "training diverged at step " << step << ": diffusion=" << lg.terms.diffusion
          << " motif=" << lg.terms.motif << " (lower lr or check inputs)";
      throw NumericError(msg.str());
    }
    optimizer.step(params, lg.grads, config.lr, step);
    StepMetrics m{step, lg.terms.diffusion, lg.terms.motif, lg.loss,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.metrics.push_back(m);
    if (on_step) on_step(m);
  }
  result.checkpoint.config_echo = to_json(config).dump();
  result.checkpoint.step = static_cast<std::uint64_t>(config.steps);
  result.checkpoint.params = std::move(params);
  return result;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model m;
  try {
    m.config = train_config_from_json(json::parse(ckpt.config_echo));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint config echo: ") + e.what());
  }
  require(m.config.model == ckpt.params.config,
          "checkpoint: config echo does not match the stored network config");
  m.params = ckpt.params;
  return m;
}

Model load_model(const std::filesystem::path& checkpoint) {
  return model_from_checkpoint(load_checkpoint(checkpoint));
}

VPredictor make_predictor(const Model& model, const Latent& cond, Precision precision) {
  if (precision == Precision::kFloat) {
    auto net = std::make_shared<DenoiserNet<float>>(model.params);
    return [net, cond](const Latent& z, int t, int prompt) { return net->predict(z, cond, t - 1, prompt); };
  }
  auto net = std::make_shared<DenoiserNet<double>>(model.params);
  return [net, cond](const Latent& z, int t, int prompt) { return net->predict(z, cond, t - 1, prompt); };
}

Video generate(const Model& model, const Video& start_frame, int prompt_index,
               const SampleOptions& options, Precision precision) {
  const TrainConfig& c = model.config;
  require(start_frame.frames() == 1 && start_frame.height() == c.video.height &&
              start_frame.width() == c.video.width && start_frame.channels() == 3,
          "generate: start frame must be 1 x " + std::to_string(c.video.height) + " x " +
              std::to_string(c.video.width) + " x 3");
  const Latent first = video_to_model(start_frame, c.pool);
  const Latent cond =
      make_condition(first, c.video.frames, prompt_index, false, PromptVocab::null_index()).cond;
  const VPredictor predictor = make_predictor(model, cond, precision);
  const DiffusionSchedule schedule = c.schedule();
  const Dims dims{c.video.frames, first.height(), first.width(), first.channels()};
  const Latent z = ddim_sample_latent(schedule, predictor, dims, prompt_index,
                                      PromptVocab::null_index(), options);
  return model_to_video(z, c.pool);
}

}  // namespace motif
