// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

// motif: command-line entry point.
//
//   motif data     render a training clip set
//   motif bench    build the synthetic image/prompt benchmark
//   motif flow     estimate optical flow for a clip
//   motif heatmap  motion heatmap for a clip or flow file
//   motif train    train a denoiser from a config file
//   motif gen      sample a video from a checkpoint
//   motif eval     evaluate checkpoints on a bench
//   motif serve    run the annotation service
//   motif tally    recompute annotation aggregates from a vote log
//
// Environment: MOTIF_OUT_DIR sets the default output directory and
// MOTIF_THREADS the default worker count for evaluation.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "motif/annohttp.hpp"
#include "motif/annoservice.hpp"
#include "motif/evalkit.hpp"
#include "motif/motionmap.hpp"
#include "motif/synthvid.hpp"
#include "motif/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

int env_threads() {
  const char* v = std::getenv("MOTIF_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  try {
    const int n = std::stoi(v);
    if (n >= 1) return n;
  } catch (const std::exception&) {
  }
  throw motif::FormatError(std::string("MOTIF_THREADS must be a positive integer, got '") + v +
                           "'");
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// Config echo for single-file outputs: <out>.config.json.
fs::path echo_path(const fs::path& out) { return fs::path(out.string() + ".config.json"); }

std::vector<motif::Verb> parse_verb_list(const std::string& text) {
  if (text == "all") return motif::all_verbs();
  if (text == "classifier") return motif::classifier_verbs();
  std::vector<motif::Verb> verbs;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) verbs.push_back(motif::parse_verb(item));
  if (verbs.empty()) throw motif::FormatError("empty verb list");
  return verbs;
}

json verbs_json(const std::vector<motif::Verb>& verbs) {
  json a = json::array();
  for (auto v : verbs) a.push_back(std::string(motif::verb_name(v)));
  return a;
}

json video_json(const motif::VideoConfig& v) {
  return {{"frames", v.frames}, {"height", v.height}, {"width", v.width}, {"stride", v.stride}};
}

// ---------------------------------------------------------------------------

struct DataArgs {
  std::string out_dir;
  std::size_t count = 64;
  std::uint64_t seed = 0;
  int frames = 8, size = 32, stride = 1, max_sprites = 3;
  std::string verbs = "all";
};

int run_data(const DataArgs& a) {
  motif::DatasetConfig cfg;
  cfg.video.frames = a.frames;
  cfg.video.height = cfg.video.width = a.size;
  cfg.video.stride = a.stride;
  cfg.size = a.count;
  cfg.verbs = parse_verb_list(a.verbs);
  cfg.max_sprites = a.max_sprites;
  const fs::path dir = a.out_dir;
  fs::create_directories(dir / "clips");
  write_json(dir / "config.json", {{"command", "data"},
                                   {"count", a.count},
                                   {"seed", a.seed},
                                   {"video", video_json(cfg.video)},
                                   {"verbs", verbs_json(cfg.verbs)},
                                   {"max_sprites", a.max_sprites}});
  motif::ClipStream stream = motif::gen_dataset(cfg, a.seed);
  std::ofstream index(dir / "index.jsonl");
  char name[32];
  while (!stream.done()) {
    const std::size_t i = stream.index();
    const motif::Clip clip = stream.next();
    std::snprintf(name, sizeof name, "%05zu", i);
    const std::string stem = std::string("clips/") + name;
    motif::write_clip(dir / (stem + ".clip"), clip.video, clip.seed);
    motif::write_clip(dir / (stem + ".flow"), clip.flow, clip.seed);
    motif::write_clip(dir / (stem + ".mask"), clip.mask, clip.seed);
    json line = {{"index", i},
                 {"clip", stem + ".clip"},
                 {"flow", stem + ".flow"},
                 {"mask", stem + ".mask"},
                 {"prompt", clip.prompt.text(motif::Shape::kSquare)},
                 {"embedding_index", clip.prompt.embedding_index()},
                 {"seed", clip.seed}};
    index << line.dump() << "\n";
  }
  std::printf("data: %zu clips written to %s\n", a.count, dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  int scenarios = 22, images = 4, pairs = 320;
  std::string verbs = "all";
};

int run_bench(const BenchArgs& a) {
  motif::BenchConfig cfg;
  cfg.scenarios = a.scenarios;
  cfg.images_per_scenario = a.images;
  cfg.target_pairs = a.pairs;
  cfg.verbs = parse_verb_list(a.verbs);
  const motif::Bench bench = motif::build_bench(cfg, a.seed);
  motif::write_bench(a.out_dir, bench);
  write_json(fs::path(a.out_dir) / "config.json", {{"command", "bench"},
                                                   {"seed", a.seed},
                                                   {"scenarios", a.scenarios},
                                                   {"images_per_scenario", a.images},
                                                   {"target_pairs", a.pairs},
                                                   {"video", video_json(cfg.video)},
                                                   {"verbs", verbs_json(cfg.verbs)}});
  const auto c = bench.manifest.counts();
  std::printf("bench: pairs=%zu images=%zu prompts=%zu unique_texts=%zu scenarios=%zu\n", c.pairs,
              c.images, c.prompts, c.unique_prompt_texts, c.scenarios);
  return 0;
}

// ---------------------------------------------------------------------------

struct FlowArgs {
  std::string in, out;
  motif::FlowOptions flow;
};

json flow_json(const motif::FlowOptions& f) {
  return {{"alpha", f.alpha}, {"iterations", f.iters}, {"levels", f.levels}};
}

void print_stats(const char* tag, const motif::MotionStats& s) {
  std::printf("%s: static_fraction=%.4f moving_fraction=%.4f mean_intensity=%.4f\n", tag,
              s.static_fraction, s.moving_fraction, s.mean_intensity);
}

int run_flow(const FlowArgs& a) {
  const motif::ClipFile clip = motif::read_clip(a.in);
  const motif::FlowField flow = motif::estimate_video_flow(clip.data, a.flow);
  motif::write_clip(a.out, flow, clip.seed);
  write_json(echo_path(a.out), {{"command", "flow"}, {"in", a.in}, {"flow", flow_json(a.flow)}});
  print_stats("flow", motif::motion_stats_from_flow(flow));
  return 0;
}

struct HeatmapArgs {
  std::string in, out, pooled_out;
  int pool = 1;
  motif::FlowOptions flow;
  motif::HeatmapParams params;
};

int run_heatmap(const HeatmapArgs& a) {
  const motif::ClipFile clip = motif::read_clip(a.in);
  // Two-channel input is already a flow field.
  const motif::FlowField flow = clip.data.channels() == 2
                                    ? clip.data
                                    : motif::estimate_video_flow(clip.data, a.flow);
  const motif::MotionHeatmap hm = motif::make_heatmap(flow, a.pool, a.params);
  motif::write_clip(a.out, hm.m, clip.seed);
  if (!a.pooled_out.empty()) motif::write_clip(a.pooled_out, hm.m_prime, clip.seed);
  write_json(echo_path(a.out), {{"command", "heatmap"},
                                {"in", a.in},
                                {"pool", a.pool},
                                {"gain", a.params.gain},
                                {"threshold", a.params.threshold},
                                {"flow", flow_json(a.flow)}});
  print_stats("heatmap", motif::motion_stats_from_flow(flow, a.params));
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
};

int run_train(const TrainArgs& a) {
  motif::TrainConfig cfg = motif::load_train_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.steps = *a.steps;
  cfg.finalize();
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  write_json(dir / "config.json", motif::to_json(cfg));
  std::ofstream log(dir / "metrics.jsonl");
  const long every = std::max(1, cfg.log_every);
  const motif::TrainResult result = motif::train(cfg, [&](const motif::StepMetrics& m) {
    log << motif::to_json(m).dump() << "\n";
    if (m.step % every == 0 || m.step == cfg.steps) {
      std::printf("train: step %ld/%ld diffusion=%.5f motif=%.5f total=%.5f elapsed=%.1fs\n",
                  m.step, cfg.steps, m.diffusion, m.motif, m.total, m.seconds);
      std::fflush(stdout);
    }
  });
  motif::save_checkpoint(dir / "model.ckpt", result.checkpoint);
  std::printf("train: wrote %s\n", (dir / "model.ckpt").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string ckpt, image, prompt, out, preview;
  std::uint64_t seed = 0;
  int steps = 50;
  double guidance = 7.5;
  std::string precision = "float";
};

motif::Precision parse_precision(const std::string& s) {
  if (s == "float") return motif::Precision::kFloat;
  if (s == "double") return motif::Precision::kDouble;
  throw motif::FormatError("precision must be float or double");
}

int run_gen(const GenArgs& a) {
  const motif::Model model = motif::load_model(a.ckpt);
  const motif::PromptSpec prompt = motif::parse_prompt_text(a.prompt);
  const motif::Video image = motif::first_frame(motif::read_clip(a.image).data);
  const motif::Video video = motif::generate(model, image, prompt.embedding_index(),
                                             {a.steps, a.guidance, a.seed},
                                             parse_precision(a.precision));
  motif::write_clip(a.out, video, a.seed);
  if (!a.preview.empty()) motif::export_frames(a.preview, video);
  write_json(echo_path(a.out), {{"command", "gen"},
                                {"ckpt", a.ckpt},
                                {"image", a.image},
                                {"prompt", a.prompt},
                                {"embedding_index", prompt.embedding_index()},
                                {"seed", a.seed},
                                {"steps", a.steps},
                                {"guidance", a.guidance},
                                {"precision", a.precision}});
  std::printf("gen: wrote %s (dynamic_degree=%.4f)\n", a.out.c_str(), motif::dynamic_degree(video));
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> ckpts;
  std::string bench, out;
  std::vector<std::uint64_t> seeds{0};
  bool static_baseline = false;
  int steps = 50;
  double guidance = 7.5;
  int loss_ratio_clips = 0;
  int threads = 0;
};

int run_eval(const EvalArgs& a) {
  const motif::Bench bench = motif::read_bench(a.bench);
  const int threads = a.threads > 0 ? a.threads : env_threads();
  std::vector<motif::ModelEntry> entries;
  std::vector<motif::Model> models;
  models.reserve(a.ckpts.size());
  for (const auto& spec : a.ckpts) {
    // "id=path" names the model; a bare path uses its stem.
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    std::string id = eq == std::string::npos ? fs::path(path).parent_path().filename().string()
                                             : spec.substr(0, eq);
    if (id.empty()) id = fs::path(path).stem().string();
    models.push_back(motif::load_model(path));
    motif::ModelEntry e{id, motif::model_generator(models.back(), a.steps, a.guidance), {}};
    if (a.loss_ratio_clips > 0) {
      const auto valset = motif::make_valset(models.back().config, a.loss_ratio_clips, 1);
      e.loss_ratio = motif::loss_ratio(models.back(), valset);
    }
    entries.push_back(std::move(e));
  }
  if (a.static_baseline) {
    const int frames = models.empty() ? motif::VideoConfig{}.frames : models.front().config.video.frames;
    entries.push_back({"static", motif::static_generator(frames), {}});
  }
  if (entries.empty()) throw motif::ContractError("eval: give at least one --ckpt or --static-baseline");
  const auto reports = motif::compare(entries, bench, a.seeds, {}, threads);
  write_json(a.out, motif::reports_to_json(reports));
  write_json(echo_path(a.out), {{"command", "eval"},
                                {"ckpts", a.ckpts},
                                {"bench", a.bench},
                                {"seeds", a.seeds},
                                {"static_baseline", a.static_baseline},
                                {"steps", a.steps},
                                {"guidance", a.guidance},
                                {"loss_ratio_clips", a.loss_ratio_clips}});
  std::fputs(motif::render_table(reports).c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string session_config, log_dir, asset_root = ".";
};

int run_serve(const ServeArgs& a) {
  // Block termination signals before any server thread starts so a
  // dedicated waiter receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::ifstream in(a.session_config);
  if (!in) throw std::runtime_error("cannot open " + a.session_config);
  const auto config = motif::anno::session_config_from_json(nlohmann::json::parse(in));
  motif::anno::AnnoServer server({a.log_dir, a.asset_root});
  const std::string id = server.create_session(config);
  const int port = server.bind(a.host, a.port);
  std::printf("serve: session %s on http://%s:%d (log %s)\n", id.c_str(), a.host.c_str(), port,
              (fs::path(a.log_dir) / (id + ".jsonl")).string().c_str());
  std::fflush(stdout);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // listen() also returns on bind loss; wake the waiter in that case.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

struct TallyArgs {
  std::string log;
  bool as_json = false;
};

int run_tally(const TallyArgs& a) {
  const motif::anno::SessionLog log = motif::anno::read_log(a.log);
  const auto result = motif::anno::aggregate(log.session, log.votes);
  if (a.as_json) {
    std::printf("%s\n", motif::anno::to_json(result).dump(2).c_str());
  } else {
    std::fputs(motif::anno::render_aggregate(result).c_str(), stdout);
  }
  return 0;
}

void add_flow_options(CLI::App* cmd, motif::FlowOptions& f) {
  cmd->add_option("--alpha", f.alpha, "Horn-Schunck smoothness weight")->capture_default_str();
  cmd->add_option("--iterations", f.iters, "Jacobi sweeps per level")->capture_default_str();
  cmd->add_option("--levels", f.levels, "pyramid levels")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motif: motion-focused image-to-video toolkit"};
  app.require_subcommand(1);
  const std::string out_default = env_or("MOTIF_OUT_DIR", "out");

  DataArgs data;
  data.out_dir = out_default + "/data";
  auto* data_cmd = app.add_subcommand("data", "render a training clip set");
  data_cmd->add_option("--out-dir", data.out_dir, "output directory")->capture_default_str();
  data_cmd->add_option("--count", data.count, "number of clips")->capture_default_str();
  data_cmd->add_option("--seed", data.seed, "dataset seed")->capture_default_str();
  data_cmd->add_option("--frames", data.frames, "frames per clip")->capture_default_str();
  data_cmd->add_option("--size", data.size, "frame height and width")->capture_default_str();
  data_cmd->add_option("--stride", data.stride, "frame stride")->capture_default_str();
  data_cmd->add_option("--max-sprites", data.max_sprites, "sprites per clip")->capture_default_str();
  data_cmd->add_option("--verbs", data.verbs, "all, classifier, or a comma list")->capture_default_str();

  BenchArgs bench;
  bench.out_dir = out_default + "/bench";
  auto* bench_cmd = app.add_subcommand("bench", "build the synthetic benchmark");
  bench_cmd->add_option("--out-dir", bench.out_dir, "output directory")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "bench seed")->capture_default_str();
  bench_cmd->add_option("--scenarios", bench.scenarios, "scenario count")->capture_default_str();
  bench_cmd->add_option("--images", bench.images, "start images per scenario (3..5)")->capture_default_str();
  bench_cmd->add_option("--pairs", bench.pairs, "target pair count; 0 draws 3..5 prompts per scenario")
      ->capture_default_str();
  bench_cmd->add_option("--verbs", bench.verbs, "all, classifier, or a comma list")->capture_default_str();

  FlowArgs flow;
  auto* flow_cmd = app.add_subcommand("flow", "estimate optical flow for a clip");
  flow_cmd->add_option("--in", flow.in, "input clip")->required();
  flow_cmd->add_option("--out", flow.out, "output flow file")->required();
  add_flow_options(flow_cmd, flow.flow);

  HeatmapArgs heat;
  auto* heat_cmd = app.add_subcommand("heatmap", "motion heatmap for a clip or flow file");
  heat_cmd->add_option("--in", heat.in, "input clip or 2-channel flow file")->required();
  heat_cmd->add_option("--out", heat.out, "output heatmap file")->required();
  heat_cmd->add_option("--pool", heat.pool, "latent pooling factor")->capture_default_str();
  heat_cmd->add_option("--pooled-out", heat.pooled_out, "also write the pooled heatmap here");
  heat_cmd->add_option("--gain", heat.params.gain, "sigmoid gain")->capture_default_str();
  heat_cmd->add_option("--threshold", heat.params.threshold, "sigmoid midpoint")->capture_default_str();
  add_flow_options(heat_cmd, heat.flow);

  TrainArgs train;
  train.out_dir = out_default + "/train";
  std::uint64_t train_seed = 0;
  long train_steps = 0;
  auto* train_cmd = app.add_subcommand("train", "train a denoiser");
  train_cmd->add_option("--config", train.config, "JSON training config")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "output directory")->capture_default_str();
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "override the config seed");
  auto* steps_opt = train_cmd->add_option("--steps", train_steps, "override the step count");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "sample a video");
  gen_cmd->add_option("--ckpt", gen.ckpt, "checkpoint")->required();
  gen_cmd->add_option("--image", gen.image, "clip file whose first frame conditions the video")->required();
  gen_cmd->add_option("--prompt", gen.prompt, "prompt text, e.g. \"the red square moves left slowly\"")
      ->required();
  gen_cmd->add_option("--out", gen.out, "output clip")->required();
  gen_cmd->add_option("--seed", gen.seed, "sampling seed")->capture_default_str();
  gen_cmd->add_option("--steps", gen.steps, "DDIM steps")->capture_default_str();
  gen_cmd->add_option("--guidance", gen.guidance, "classifier-free guidance scale")->capture_default_str();
  gen_cmd->add_option("--precision", gen.precision, "float or double")->capture_default_str();
  gen_cmd->add_option("--preview", gen.preview, "PPM frame prefix");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on a bench");
  eval_cmd->add_option("--ckpt", eval.ckpts, "checkpoint, optionally id=path (repeatable)");
  eval_cmd->add_option("--bench", eval.bench, "bench directory")->required();
  eval_cmd->add_option("--out", eval.out, "report JSON")->required();
  eval_cmd->add_option("--seeds", eval.seeds, "sampling seeds")->delimiter(',')->capture_default_str();
  eval_cmd->add_flag("--static-baseline", eval.static_baseline, "add the first-frame-repeat model");
  eval_cmd->add_option("--steps", eval.steps, "DDIM steps")->capture_default_str();
  eval_cmd->add_option("--guidance", eval.guidance, "guidance scale")->capture_default_str();
  eval_cmd->add_option("--loss-ratio-clips", eval.loss_ratio_clips,
                       "held-out clips for the high-motion loss ratio (0 skips it)")
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval.threads, "workers (default MOTIF_THREADS or 1)");

  ServeArgs serve;
  serve.log_dir = out_default + "/annotations";
  auto* serve_cmd = app.add_subcommand("serve", "run the annotation service");
  serve_cmd->add_option("--session-config", serve.session_config, "session JSON")->required();
  serve_cmd->add_option("--host", serve.host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "port (0 picks one)")->capture_default_str();
  serve_cmd->add_option("--log-dir", serve.log_dir, "vote log directory")->capture_default_str();
  serve_cmd->add_option("--asset-root", serve.asset_root, "root for image and video refs")
      ->capture_default_str();

  TallyArgs tally;
  auto* tally_cmd = app.add_subcommand("tally", "aggregate a vote log offline");
  tally_cmd->add_option("--log", tally.log, "session log")->required();
  tally_cmd->add_flag("--json", tally.as_json, "print JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*data_cmd) return run_data(data);
    if (*bench_cmd) return run_bench(bench);
    if (*flow_cmd) return run_flow(flow);
    if (*heat_cmd) return run_heatmap(heat);
    if (*train_cmd) {
      if (*seed_opt) train.seed = train_seed;
      if (*steps_opt) train.steps = train_steps;
      return run_train(train);
    }
    if (*gen_cmd) return run_gen(gen);
    if (*eval_cmd) return run_eval(eval);
    if (*serve_cmd) return run_serve(serve);
    if (*tally_cmd) return run_tally(tally);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "motif: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
