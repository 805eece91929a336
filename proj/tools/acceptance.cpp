// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "motif/annoservice.hpp"
#include "motif/denoiser.hpp"
#include "motif/diffusion.hpp"
#include "motif/evalkit.hpp"
#include "motif/gradcheck.hpp"
#include "motif/losses.hpp"
#include "motif/motionmap.hpp"
#include "motif/rng.hpp"
#include "motif/synthvid.hpp"
#include "motif/train.hpp"

namespace {

using namespace motif;
using json = nlohmann::ordered_json;

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> g_outcomes;
json g_details = json::object();

void record(int id, const std::string& name, bool pass, const std::string& detail) {
  g_outcomes.push_back({id, name, pass, detail});
  std::printf("  -> criterion %d %s: %s (%s)\n", id, name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void check_sigma() {
  // Reference values of 1 / (1 + e^{100 (0.05 - x)}) computed by hand.
  const std::vector<std::pair<double, double>> table = {
      {0.0, 6.692850924284856e-3}, {0.05, 0.5}, {0.1, 0.9933071490757153},
      {0.04, 0.2689414213699951},  {0.06, 0.7310585786300049}, {1.0, 1.0}};
  double worst = 0.0;
  for (const auto& [x, want] : table) worst = std::max(worst, std::abs(normalize_value(x) - want));
  Tensor4<double> t({1, 1, 1, 3});
  t.data() = {0.0, 0.05, 0.1};
  const Tensor4<double> n = normalize_intensity(t);
  const bool elementwise = n.data()[0] == normalize_value(0.0) && n.data()[2] == normalize_value(0.1);
  const bool fixed = normalize_value(0.05) == 0.5;
  record(1, "sigma", fixed && elementwise && worst < 1e-12,
         fmt("sigma(0.05)=%.17g max_abs_err=%.2e", normalize_value(0.05), worst));
}

Latent random_latent(const Dims& d, Rng& rng) {
  Latent x(d);
  for (double& v : x.data()) v = rng.normal();
  return x;
}

void check_losses() {
  Rng rng(3);
  const Dims d{4, 6, 6, 3};
  const Latent pred = random_latent(d, rng), target = random_latent(d, rng);
  Tensor4<double> heat({4, 6, 6, 1}), zeros({4, 6, 6, 1}), ones({4, 6, 6, 1}, 1.0), flipped({4, 6, 6, 1});
  for (std::size_t i = 0; i < heat.size(); ++i) {
    heat.data()[i] = rng.uniform();
    flipped.data()[i] = 1.0 - heat.data()[i];
  }
  // Independent plain and heat-weighted mean squared errors, the focal term
  // being mean((m * r)^2).
  double mse = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred.data()[i] - target.data()[i];
    mse += e * e;
    const double m = heat.data()[i / 3];
    weighted += m * m * e * e;
  }
  mse /= static_cast<double>(pred.size());
  weighted /= static_cast<double>(pred.size());

  double worst = 0.0;
  const auto gap = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  gap(diffusion_loss(pred, target), mse);
  gap(motif_loss(pred, target, zeros, HeatmapMode::kMotif), 0.0);
  gap(motif_loss(pred, target, ones, HeatmapMode::kMotif), mse);
  gap(motif_loss(pred, target, heat, HeatmapMode::kMotif), weighted);
  gap(motif_loss(pred, target, heat, HeatmapMode::kInverse), motif_loss(pred, target, flipped, HeatmapMode::kMotif));
  gap(total_loss(pred, target, heat, 0.0), mse);
  gap(total_loss(pred, target, heat, 1.0), mse + weighted);
  gap(loss_terms(pred, target, heat, {2.5}).total, mse + 2.5 * weighted);
  gap(motif_loss(target, target, heat, HeatmapMode::kInverse), 0.0);
  record(2, "loss identities", worst < 1e-12, fmt("max_abs_err=%.2e over 9 identities", worst));
}

void check_gradcheck() {
  DenoiserConfig c;
  c.latent_channels = 2;
  c.width = 3;
  c.dilations = {1};
  c.time_dim = 2;
  c.prompt_dim = 2;
  c.vocab_size = 3;
  c.timesteps = 10;
  c.cond_sigma = 0.1;
  const DenoiserParams p = init_denoiser(c, 21);
  Rng rng(5);
  TrainingBatch batch;
  const Dims d{3, 4, 4, 2};
  for (int i = 0; i < 2; ++i) {
    TrainingItem it;
    it.noisy = random_latent(d, rng);
    it.target = random_latent(d, rng);
    it.cond = random_latent(d, rng);
    it.heat = Tensor4<double>({3, 4, 4, 1});
    for (double& v : it.heat.data()) v = rng.uniform();
    it.t = rng.uniform_int(1, c.timesteps);
    it.prompt_index = rng.uniform_int(0, c.vocab_size);
    batch.push_back(std::move(it));
  }
  double worst = 0.0;
  std::size_t checked = 0;
  for (HeatmapMode mode : {HeatmapMode::kMotif, HeatmapMode::kInverse}) {
    const LossSpec spec{1.0, mode};
    const FiniteDiffReport r = finite_diff_check(
        p, [&](const DenoiserParams& q) { return loss_and_grads<double>(q, batch, spec); });
    worst = std::max(worst, r.max_rel_error);
    checked = r.checked;
  }
  record(3, "gradcheck", p.count() <= 500 && checked == p.count() && worst < 1e-4,
         fmt("params=%zu max_rel_err=%.2e", p.count(), worst));
}

void check_encoder() {
  Rng rng(17);
  bool ok = true;
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int L = 1 + n % 8;
    const int H = 4 * (1 + n % 5), W = 4 * (1 + (n / 5) % 4);
    Video v({L, H, W, 3});
    for (double& x : v.data()) x = rng.uniform();
    for (int p : {1, 2, 4}) {
      const Latent z = encode(v, p);
      ok = ok && z.height() == H / p && z.width() == W / p && z.channels() == 3 * p * p && z.size() == v.size();
      // Channel order within a block is (dy, dx, c).
      for (int probe = 0; probe < 8; ++probe) {
        const int l = rng.uniform_int(0, L - 1), i = rng.uniform_int(0, H - 1), j = rng.uniform_int(0, W - 1),
                  c = rng.uniform_int(0, 2);
        const int dy = i % p, dx = j % p;
        ok = ok && z.at(l, i / p, j / p, (dy * p + dx) * 3 + c) == v.at(l, i, j, c);
      }
      const Video back = decode(z, p);
      for (std::size_t k = 0; k < v.size(); ++k) worst = std::max(worst, std::abs(back.data()[k] - v.data()[k]));
      const Latent again = encode(back, p);
      ok = ok && again.data() == z.data();
    }
  }
  record(4, "encoder bijective", ok && worst == 0.0,
         fmt("100 videos x p in {1,2,4}, max_abs_err=%.1e", worst));
}

void check_flow_oracle() {
  DatasetConfig cfg;
  cfg.size = 50;
  ClipStream stream = gen_dataset(cfg, 404);
  double mad_sum = 0.0, mad_max = 0.0;
  int n = 0;
  while (!stream.done()) {
    const Clip clip = stream.next();
    const Tensor4<double> oracle = heatmap_from_flow(clip.flow);
    const Tensor4<double> est = heatmap_for_video(clip.video);
    double mad = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) mad += std::abs(oracle.data()[i] - est.data()[i]);
    mad /= static_cast<double>(oracle.size());
    mad_sum += mad;
    mad_max = std::max(mad_max, mad);
    ++n;
  }
  const double mad_mean = mad_sum / n;

  // Zero motion: a frozen clip.
  const Scenario s = random_scenario_for(Verb::kStatic, Speed::kSlow, {}, 3, 9);
  const Clip still = gen_clip(s, {s.id, s.sprites[0].color, Verb::kStatic, Speed::kSlow}, 4, {});
  const Tensor4<double> heat = heatmap_for_video(still.video);
  const double peak = *std::max_element(heat.data().begin(), heat.data().end());
  record(5, "flow oracle", mad_mean < 0.1 && peak < 0.01,
         fmt("clips=%d mean_MAD=%.4f max_MAD=%.4f static_max=%.2e", n, mad_mean, mad_max, peak));
}

// ---------------------------------------------------------------------------

struct Trained {
  std::string variant;
  std::uint64_t seed = 0;
  Model model;
  LossRatioCurve curve;
  double mean_ratio = 0.0;
  PromptAccuracy accuracy;
};

double mean_defined(const LossRatioCurve& c) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : c.ratio) {
    if (r) {
      s += *r;
      ++n;
    }
  }
  return n ? s / n : std::nan("");
}

// Index of the median element by key among three or more runs.
template <class Key>
std::size_t median_index(const std::vector<const Trained*>& runs, Key key) {
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(*runs[a]) < key(*runs[b]); });
  return order[order.size() / 2];
}

struct RunOptions {
  long steps = 2000;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t val_clips = 64;
  int bench_scenarios = 6;
  int sample_steps = 50;
  std::string json_out;
};

void check_training(const RunOptions& o) {
  const std::vector<std::pair<std::string, LossSpec>> variants = {
      {"baseline", {0.0, HeatmapMode::kMotif}},
      {"motif", {1.0, HeatmapMode::kMotif}},
      {"inv_motif", {1.0, HeatmapMode::kInverse}}};

  BenchConfig bc;
  bc.verbs = classifier_verbs();
  bc.scenarios = o.bench_scenarios;
  bc.images_per_scenario = 3;
  bc.target_pairs = 0;
  const Bench bench = build_bench(bc, 11);
  std::printf("bench: %zu pairs over classifier-supported verbs\n", bench.manifest.records.size());

  std::vector<Trained> runs;
  const auto t_all = std::chrono::steady_clock::now();
  for (const auto& [name, spec] : variants) {
    for (std::uint64_t seed : o.seeds) {
      TrainConfig cfg;
      cfg.loss = spec;
      cfg.steps = o.steps;
      cfg.seed = seed;
      cfg.finalize();
      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult r = train(cfg);
      Trained t;
      t.variant = name;
      t.seed = seed;
      t.model = model_from_checkpoint(r.checkpoint);
      const double t_train = elapsed(t0);
      // Same held-out clips and timestep draws for every model.
      const auto valset = make_valset(cfg, o.val_clips, 1000);
      t.curve = loss_ratio(t.model, valset, {.seed = 77});
      t.mean_ratio = mean_defined(t.curve);
      t.accuracy = prompt_accuracy(model_generator(t.model, o.sample_steps, cfg.guidance), bench, {0});
      std::printf("%-9s seed=%llu steps=%ld final_diff=%.4f train=%.0fs ratio=[", name.c_str(),
                  static_cast<unsigned long long>(seed), cfg.steps, r.metrics.back().diffusion, t_train);
      for (const auto& v : t.curve.ratio) std::printf(" %.3f", v.value_or(std::nan("")));
      std::printf(" ] acc=%.3f (%zu/%zu) total=%.0fs\n", t.accuracy.accuracy, t.accuracy.correct,
                  t.accuracy.total, elapsed(t_all));
      std::fflush(stdout);
      json entry = {{"variant", name}, {"seed", seed}, {"prompt_accuracy", t.accuracy.accuracy}};
      json ratios = json::array();
      for (const auto& v : t.curve.ratio) ratios.push_back(v ? json(*v) : json(nullptr));
      entry["loss_ratio"] = ratios;
      g_details["runs"].push_back(entry);
      runs.push_back(std::move(t));
    }
  }
  const double total = elapsed(t_all);

  const auto of = [&](const std::string& v) {
    std::vector<const Trained*> out;
    for (const auto& r : runs) {
      if (r.variant == v) out.push_back(&r);
    }
    return out;
  };
  const auto base = of("baseline"), mot = of("motif"), inv = of("inv_motif");

  // Criterion 6: median seed by mean ratio within each variant.
  const Trained& b6 = *base[median_index(base, [](const Trained& t) { return t.mean_ratio; })];
  const Trained& m6 = *mot[median_index(mot, [](const Trained& t) { return t.mean_ratio; })];
  int wins = 0, buckets = 0;
  for (std::size_t k = 0; k < b6.curve.ratio.size(); ++k) {
    if (!b6.curve.ratio[k] || !m6.curve.ratio[k]) continue;
    ++buckets;
    wins += *m6.curve.ratio[k] <= *b6.curve.ratio[k];
  }
  record(6, "loss-ratio trend",
         buckets == 5 && wins >= 4 && o.steps >= 2000 && o.seeds.size() >= 3,
         fmt("motif<=baseline in %d/%d buckets (median seeds %llu vs %llu), %zu runs in %.0fs", wins, buckets,
             static_cast<unsigned long long>(m6.seed), static_cast<unsigned long long>(b6.seed), runs.size(),
             total));

  // Criterion 7: median seed by prompt accuracy.
  const auto acc = [](const Trained& t) { return t.accuracy.accuracy; };
  const double a_base = base[median_index(base, acc)]->accuracy.accuracy;
  const double a_mot = mot[median_index(mot, acc)]->accuracy.accuracy;
  const double a_inv = inv[median_index(inv, acc)]->accuracy.accuracy;
  record(7, "prompt accuracy",
         a_mot >= a_base + 0.05 && a_inv <= a_base + 0.02,
         fmt("baseline=%.1f%% motif=%.1f%% inv_motif=%.1f%% (chance ~%.1f%%)", 100 * a_base, 100 * a_mot,
             100 * a_inv, 100.0 / (classifier_verbs().size())));

  // Criterion 8: static baseline against the median MotiF model.
  const Trained& m7 = *mot[median_index(mot, acc)];
  const auto reports =
      compare({{"static", static_generator(m7.model.config.video.frames), {}},
               {"motif", model_generator(m7.model, o.sample_steps, m7.model.config.guidance), {}}},
              bench, {0});
  std::printf("%s", render_table(reports).c_str());
  const EvalReport& st = reports[0];
  const bool flagged = std::find(st.flags.begin(), st.flags.end(), "static_output") != st.flags.end();
  record(8, "static baseline", st.metrics.at("fidelity_mse") == 0.0 && st.metrics.at("dynamic_degree") == 0.0 && flagged,
         fmt("mse=%.3g dyn=%.3g flagged=%s", st.metrics.at("fidelity_mse"), st.metrics.at("dynamic_degree"),
             flagged ? "yes" : "no"));
  g_details["compare"] = reports_to_json(reports);
}

// ---------------------------------------------------------------------------

void check_aggregation() {
  using namespace motif::anno;
  Rng rng(2026);
  bool match = true, flip_ok = true, no_ties = true;
  for (int trial = 0; trial < 1000; ++trial) {
    SessionConfig c;
    c.model_x = "x";
    c.model_y = "y";
    c.seed = static_cast<std::uint64_t>(trial);
    c.required_annotators = 2 * rng.uniform_int(0, 3) + 1;
    const int n = rng.uniform_int(1, 12);
    for (int i = 0; i < n; ++i) {
      PairSpec p;
      p.image_id = "i" + std::to_string(i);
      p.prompt_id = "p" + std::to_string(i);
      p.video_x = "vx" + std::to_string(i);
      p.video_y = "vy" + std::to_string(i);
      c.pairs.push_back(p);
    }
    const Session s = build_session(c);
    std::vector<VoteRecord> votes;
    std::map<std::string, std::pair<int, int>> tally;  // canonical X, Y
    for (const auto& t : s.tasks) {
      const int k = rng.uniform_int(0, s.required_annotators);
      for (int a = 0; a < k; ++a) {
        VoteRecord v;
        v.task_id = t.task_id;
        v.annotator = "a" + std::to_string(a);
        v.choice = rng.uniform() < 0.5 ? Choice::kLeft : Choice::kRight;
        v.justifications = {Axis::kObjectMotion};
        const bool for_x = (v.choice == Choice::kLeft) != t.swapped;
        (for_x ? tally[t.task_id].first : tally[t.task_id].second)++;
        votes.push_back(v);
      }
    }
    std::size_t wx = 0, wy = 0;
    for (const auto& [id, xy] : tally) {
      if (xy.first + xy.second < s.required_annotators) continue;
      (xy.first > xy.second ? wx : wy)++;
    }
    const AggregateResult r = aggregate(s, votes);
    const std::size_t decided = wx + wy;
    const double sx = decided ? 100.0 * wx / decided : 0.0;
    match = match && r.wins_x == wx && r.wins_y == wy && std::abs(r.score_x - sx) < 1e-9;
    no_ties = no_ties && r.tasks_tied == 0;

    // Swapping the display of every task and mirroring the clicks changes nothing.
    Session flipped = s;
    for (auto& t : flipped.tasks) t.swapped = !t.swapped;
    std::vector<VoteRecord> mirrored = votes;
    for (auto& v : mirrored) v.choice = v.choice == Choice::kLeft ? Choice::kRight : Choice::kLeft;
    flip_ok = flip_ok && aggregate(flipped, mirrored) == r;
  }

  AggregateResult fixed;
  fixed.model_x = "motif";
  fixed.model_y = "baseline";
  fixed.wins_x = 202;
  fixed.wins_y = 118;
  fixed.score_x = 100.0 * 202 / 320;
  fixed.score_y = 100.0 * 118 / 320;
  const std::string rendered = fmt("%.1f/%.1f", fixed.score_x, fixed.score_y);
  const std::string table = render_aggregate(fixed);
  const bool split = rendered == "63.1/36.9" && table.find("63.1") != std::string::npos &&
                     table.find("36.9") != std::string::npos;
  record(9, "aggregation", match && flip_ok && no_ties && split,
         fmt("oracle=%s flip=%s ties=%s 202/118->%s", match ? "ok" : "mismatch", flip_ok ? "ok" : "broken",
             no_ties ? "none" : "present", rendered.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motif acceptance run"};
  RunOptions o;
  app.add_option("--steps", o.steps, "training steps per model")->capture_default_str();
  app.add_option("--seeds", o.seeds, "training seeds")->delimiter(',');
  app.add_option("--val-clips", o.val_clips, "held-out clips for the loss ratio")->capture_default_str();
  app.add_option("--bench-scenarios", o.bench_scenarios, "bench scenarios for prompt accuracy")
      ->capture_default_str();
  app.add_option("--sample-steps", o.sample_steps, "DDIM steps")->capture_default_str();
  app.add_option("--json", o.json_out, "write per-run details here");
  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    check_sigma();
    check_losses();
    check_gradcheck();
    check_encoder();
    check_flow_oracle();
    check_training(o);
    check_aggregation();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: error: %s\n", e.what());
    return 1;
  }

  std::printf("\n");
  bool all = true;
  std::sort(g_outcomes.begin(), g_outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  for (const auto& r : g_outcomes) {
    std::printf("%s %d %s: %s\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.detail.c_str());
    all = all && r.pass;
  }
  std::printf("elapsed %.0fs\n", elapsed(t0));
  if (!o.json_out.empty()) {
    json out = g_details;
    for (const auto& r : g_outcomes) out["criteria"].push_back({{"id", r.id}, {"pass", r.pass}, {"detail", r.detail}});
    std::ofstream(o.json_out) << out.dump(2) << "\n";
  }
  return all ? 0 : 1;
}
