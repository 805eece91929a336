// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace motif {

std::vector<Bucket> timestep_buckets(int timesteps, int buckets) {
  require(buckets >= 1 && buckets <= timesteps, "timestep_buckets: need 1 <= buckets <= T");
  std::vector<Bucket> out;
  for (int b = 0; b < buckets; ++b) {
    const int lo = 1 + static_cast<int>(static_cast<long long>(b) * timesteps / buckets);
    const int hi = static_cast<int>(static_cast<long long>(b + 1) * timesteps / buckets);
    out.push_back({lo, hi});
  }
  return out;
}

std::optional<double> loss_ratio_of(const std::vector<double>& squared,
                                    const std::vector<double>& mask) {
  require(squared.size() == mask.size(), "loss_ratio_of: size mismatch");
  double in = 0.0, all = 0.0;
  std::size_t n_in = 0;
  for (std::size_t i = 0; i < squared.size(); ++i) {
    all += squared[i];
    if (mask[i] >= 0.5) {
      in += squared[i];
      ++n_in;
    }
  }
  if (n_in == 0 || all <= 0.0) return std::nullopt;
  return (in / static_cast<double>(n_in)) / (all / static_cast<double>(squared.size()));
}

std::vector<PreparedClip> make_valset(const TrainConfig& config, std::size_t count,
                                      std::uint64_t seed) {
  DatasetConfig data;
  data.video = config.video;
  data.size = count;
  data.verbs = config.verbs;
  data.max_sprites = config.max_sprites;
  ClipStream stream(data, seed);
  std::vector<PreparedClip> out;
  while (!stream.done()) out.push_back(prepare_clip(stream.next(), config));
  return out;
}

LossRatioCurve loss_ratio(const Model& model, const std::vector<PreparedClip>& valset,
                          const LossRatioOptions& options) {
  require(!valset.empty(), "loss_ratio: empty validation set");
  require(options.draws_per_bucket >= 1, "loss_ratio: draws_per_bucket must be >= 1");
  const DiffusionSchedule schedule = model.config.schedule();
  const DenoiserNet<float> net(model.params);
  LossRatioCurve curve;
  curve.buckets = timestep_buckets(schedule.timesteps(), options.buckets);
  Rng rng(options.seed);
  for (const Bucket& bucket : curve.buckets) {
    std::vector<double> squared, mask;
    for (const PreparedClip& clip : valset) {
      const Tensor4<double> bin = binarize(clip.heat, options.mask_threshold);
      const Latent cond =
          make_condition(first_frame(clip.z0), clip.z0.frames(), 0, false, 0).cond;
      const int C = clip.z0.channels();
      for (int k = 0; k < options.draws_per_bucket; ++k) {
        const int t = rng.uniform_int(bucket.lo, bucket.hi);
        const Latent eps = gaussian_like(clip.z0.dims(), rng);
        const Latent zt = q_sample(schedule, clip.z0, t, eps);
        const Latent v = v_target(schedule, clip.z0, eps, t);
        const Latent pred = net.predict(zt, cond, t - 1, clip.prompt_index);
        for (std::size_t i = 0; i < v.size(); ++i) {
          const double r = v.data()[i] - pred.data()[i];
          squared.push_back(r * r);
          mask.push_back(bin.data()[i / C]);
        }
      }
    }
    curve.ratio.push_back(loss_ratio_of(squared, mask));
    double m = 0.0;
    for (double x : mask) m += x;
    curve.masked_fraction.push_back(m / static_cast<double>(mask.size()));
  }
  return curve;
}

Verb classify_flow(const FlowField& flow, const ClassifierOptions& options) {
  require(options.top_fraction > 0.0 && options.top_fraction <= 1.0,
          "classify: top_fraction must be in (0, 1]");
  const Tensor4<double> intensity = flow_intensity(flow);
  std::vector<double> sorted = intensity.data();
  const std::size_t k = std::min(sorted.size() - 1,
                                 static_cast<std::size_t>((1.0 - options.top_fraction) * sorted.size()));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  const double cut = sorted[k];
  double u = 0.0, v = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    if (intensity.data()[i] >= cut) {
      u += flow.data()[2 * i];
      v += flow.data()[2 * i + 1];
      ++n;
    }
  }
  u /= static_cast<double>(n);
  v /= static_cast<double>(n);
  if (std::hypot(u, v) < options.static_threshold) return Verb::kStatic;
  // Bins of 45 degrees centred on the eight compass directions (y down).
  static constexpr Verb kBins[8] = {Verb::kRight, Verb::kDownRight, Verb::kDown, Verb::kDownLeft,
                                    Verb::kLeft,  Verb::kUpLeft,    Verb::kUp,   Verb::kUpRight};
  const long bin = std::lround(std::atan2(v, u) / (std::numbers::pi / 4.0));
  return kBins[((bin % 8) + 8) % 8];
}

Verb classify_motion(const Video& video, const ClassifierOptions& options) {
  return classify_flow(estimate_video_flow(video, options.flow), options);
}

Fidelity first_frame_fidelity(const Video& generated, const Video& cond_image) {
  require(generated.height() == cond_image.height() && generated.width() == cond_image.width() &&
              generated.channels() == cond_image.channels(),
          "first_frame_fidelity: dims mismatch");
  const auto a = generated.frame(0);
  const auto b = cond_image.frame(0);
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  Fidelity f;
  f.mse = se / static_cast<double>(a.size());
  f.psnr = std::min(100.0, 10.0 * std::log10(1.0 / std::max(f.mse, 1e-10)));
  return f;
}

double dynamic_degree_from_flow(const FlowField& flow) {
  const Tensor4<double> intensity = flow_intensity(flow);
  const double scale = intensity_scale(flow.height(), flow.width());
  double s = 0.0;
  for (double x : intensity.data()) s += x;
  return s / static_cast<double>(intensity.size()) / scale;
}

double dynamic_degree(const Video& video, const FlowOptions& options) {
  require(video.frames() >= 2, "dynamic_degree: need at least 2 frames");
  return dynamic_degree_from_flow(estimate_video_flow(video, options));
}

Video static_baseline(const Video& cond_image, int frames) {
  require(frames >= 1, "static_baseline: frames must be >= 1");
  Video out({frames, cond_image.height(), cond_image.width(), cond_image.channels()});
  const auto src = cond_image.frame(0);
  for (int l = 0; l < frames; ++l) std::copy(src.begin(), src.end(), out.frame(l).begin());
  return out;
}

VideoGenerator model_generator(const Model& model, int steps, double guidance,
                               Precision precision) {
  return [model, steps, guidance, precision](const Video& start, const PromptSpec& prompt,
                                             std::uint64_t seed) {
    return generate(model, start, prompt.embedding_index(), {steps, guidance, seed}, precision);
  };
}

VideoGenerator static_generator(int frames) {
  return [frames](const Video& start, const PromptSpec&, std::uint64_t) {
    return static_baseline(start, frames);
  };
}

std::uint64_t pair_seed(std::uint64_t seed, std::size_t index) { return mix_seed(seed, index); }

std::vector<PairResult> evaluate_pairs(const VideoGenerator& generator, const Bench& bench,
                                       const BenchManifest& manifest,
                                       const std::vector<std::uint64_t>& seeds,
                                       const ClassifierOptions& options, int threads) {
  require(threads >= 1, "evaluate_pairs: threads must be >= 1");
  const auto& supported = classifier_verbs();
  const std::size_t per_seed = manifest.records.size();
  std::vector<PairResult> out(seeds.size() * per_seed);
  auto run = [&](std::size_t job) {
    const std::size_t i = job % per_seed;
    const BenchRecord& r = manifest.records[i];
    const PromptSpec prompt = bench.prompt(r);
    const Video& start = bench.start_frame(r.image_id);
    PairResult& res = out[job];
    res.image_id = r.image_id;
    res.prompt_id = r.prompt_id;
    res.scenario_id = r.scenario_id;
    res.seed = pair_seed(seeds[job / per_seed], i);
    res.prompt_verb = prompt.verb;
    const Video video = generator(start, prompt, res.seed);
    const FlowField flow = estimate_video_flow(video, options.flow);
    if (std::find(supported.begin(), supported.end(), prompt.verb) != supported.end()) {
      res.predicted = classify_flow(flow, options);
    }
    res.fidelity_mse = first_frame_fidelity(video, start).mse;
    res.dynamic_degree = dynamic_degree_from_flow(flow);
  };
  if (threads == 1 || out.size() < 2) {
    for (std::size_t job = 0; job < out.size(); ++job) run(job);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), out.size());
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t job = next++; job < out.size(); job = next++) {
        try {
          run(job);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = out.size();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

PromptAccuracy prompt_accuracy(const std::vector<PairResult>& results) {
  PromptAccuracy a;
  for (const auto& r : results) {
    if (!r.predicted) continue;
    ++a.total;
    if (*r.predicted == r.prompt_verb) ++a.correct;
  }
  a.accuracy = a.total > 0 ? static_cast<double>(a.correct) / static_cast<double>(a.total) : 0.0;
  return a;
}

PromptAccuracy prompt_accuracy(const VideoGenerator& generator, const Bench& bench,
                               const std::vector<std::uint64_t>& seeds,
                               const ClassifierOptions& options, int threads) {
  const BenchManifest m = filter_verbs(bench.manifest, classifier_verbs());
  return prompt_accuracy(evaluate_pairs(generator, bench, m, seeds, options, threads));
}

EvalReport summarize(const std::string& model_id, const std::vector<PairResult>& results,
                     const std::vector<std::uint64_t>& seeds) {
  EvalReport rep;
  rep.model_id = model_id;
  rep.seeds = seeds;
  if (results.empty()) return rep;
  double mse = 0.0, dyn = 0.0;
  std::map<int, std::pair<int, int>> per_scenario;
  for (const auto& r : results) {
    mse += r.fidelity_mse;
    dyn += r.dynamic_degree;
    if (r.predicted) {
      auto& [c, n] = per_scenario[r.scenario_id];
      c += *r.predicted == r.prompt_verb ? 1 : 0;
      ++n;
    }
  }
  const double n = static_cast<double>(results.size());
  const PromptAccuracy acc = prompt_accuracy(results);
  if (acc.total > 0) rep.metrics["prompt_accuracy"] = acc.accuracy;
  rep.metrics["fidelity_mse"] = mse / n;
  rep.metrics["fidelity_psnr"] = std::min(100.0, 10.0 * std::log10(1.0 / std::max(mse / n, 1e-10)));
  rep.metrics["dynamic_degree"] = dyn / n;
  for (const auto& [id, cn] : per_scenario) {
    rep.scenario_accuracy[id] = static_cast<double>(cn.first) / cn.second;
  }
  return rep;
}

namespace {

double metric_or(const EvalReport& r, const std::string& key, double fallback) {
  const auto it = r.metrics.find(key);
  return it == r.metrics.end() ? fallback : it->second;
}

}  // namespace

void flag_reports(std::vector<EvalReport>& reports) {
  constexpr double kStatic = 1e-6;
  for (auto& r : reports) {
    r.flags.erase(std::remove_if(r.flags.begin(), r.flags.end(),
                                 [](const std::string& f) {
                                   return f == "static_output" || f == "dominated_by_static";
                                 }),
                  r.flags.end());
    if (metric_or(r, "dynamic_degree", 0.0) < kStatic) r.flags.push_back("static_output");
  }
  for (auto& r : reports) {
    for (const auto& s : reports) {
      if (&s == &r || metric_or(s, "dynamic_degree", 0.0) >= kStatic) continue;
      const bool worse_fidelity = metric_or(r, "fidelity_mse", 0.0) > metric_or(s, "fidelity_mse", 0.0);
      const bool better_text = metric_or(r, "prompt_accuracy", 0.0) > metric_or(s, "prompt_accuracy", 0.0);
      const bool better_motion = metric_or(r, "dynamic_degree", 0.0) > metric_or(s, "dynamic_degree", 0.0);
      if (worse_fidelity && !better_text && !better_motion) {
        r.flags.push_back("dominated_by_static");
        break;
      }
    }
  }
}

std::vector<EvalReport> compare(const std::vector<ModelEntry>& models, const Bench& bench,
                                const std::vector<std::uint64_t>& seeds,
                                const ClassifierOptions& options, int threads) {
  require(!models.empty(), "compare: need at least one model");
  std::vector<EvalReport> reports;
  for (const auto& m : models) {
    EvalReport rep = summarize(m.id, evaluate_pairs(m.generator, bench, bench.manifest, seeds, options, threads),
                                 seeds);
    rep.loss_ratio = m.loss_ratio;
    reports.push_back(std::move(rep));
  }
  flag_reports(reports);
  return reports;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["model_id"] = r.model_id;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
  if (r.loss_ratio) {
    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < r.loss_ratio->buckets.size(); ++b) {
      nlohmann::ordered_json e;
      e["t_lo"] = r.loss_ratio->buckets[b].lo;
      e["t_hi"] = r.loss_ratio->buckets[b].hi;
      e["ratio"] = r.loss_ratio->ratio[b] ? nlohmann::ordered_json(*r.loss_ratio->ratio[b])
                                          : nlohmann::ordered_json(nullptr);
      curve.push_back(e);
    }
    j["loss_ratio"] = curve;
  }
  j["scenario_accuracy"] = nlohmann::ordered_json::object();
  for (const auto& [id, v] : r.scenario_accuracy) j["scenario_accuracy"][std::to_string(id)] = v;
  j["seeds"] = r.seeds;
  j["flags"] = r.flags;
  return j;
}

nlohmann::ordered_json reports_to_json(const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : reports) j.push_back(to_json(r));
  return j;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %10s %12s %9s %10s  %s\n", "model", "prompt_acc",
                "fidelity_mse", "psnr_db", "dyn_degree", "flags");
  out << line;
  for (const auto& r : reports) {
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : ",") + f;
    const auto acc = r.metrics.find("prompt_accuracy");
    char acc_text[32];
    if (acc == r.metrics.end()) {
      std::snprintf(acc_text, sizeof acc_text, "%s", "-");
    } else {
      std::snprintf(acc_text, sizeof acc_text, "%.3f", acc->second);
    }
    std::snprintf(line, sizeof line, "%-20s %10s %12.6f %9.2f %10.5f  %s\n", r.model_id.c_str(),
                  acc_text, metric_or(r, "fidelity_mse", 0.0), metric_or(r, "fidelity_psnr", 0.0),
                  metric_or(r, "dynamic_degree", 0.0), flags.c_str());
    out << line;
  }
  bool any_curve = false;
  for (const auto& r : reports) any_curve = any_curve || r.loss_ratio.has_value();
  if (any_curve) {
    out << "\nhigh-motion loss ratio by timestep bucket\n";
    for (const auto& r : reports) {
      if (!r.loss_ratio) continue;
      std::snprintf(line, sizeof line, "%-20s", r.model_id.c_str());
      out << line;
      for (const auto& v : r.loss_ratio->ratio) {
        if (v) {
          std::snprintf(line, sizeof line, " %8.4f", *v);
        } else {
          std::snprintf(line, sizeof line, " %8s", "n/a");
        }
        out << line;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace motif
