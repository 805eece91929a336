// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "motif/evalkit.hpp"
#include "motif/rng.hpp"

namespace motif {
namespace {

FlowField uniform_flow(int frames, int h, int w, double u, double v) {
  FlowField f({frames, h, w, 2});
  for (int l = 0; l < frames; ++l) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        f.at(l, i, j, 0) = u;
        f.at(l, i, j, 1) = v;
      }
    }
  }
  return f;
}

Video frame0(const Video& v) {
  Video out({1, v.height(), v.width(), v.channels()});
  std::copy(v.frame(0).begin(), v.frame(0).end(), out.data().begin());
  return out;
}

Bench small_bench() {
  BenchConfig cfg;
  cfg.scenarios = 3;
  cfg.images_per_scenario = 3;
  cfg.target_pairs = 0;
  cfg.verbs = classifier_verbs();
  return build_bench(cfg, 5);
}

TEST(Buckets, EqualWidthCoverRange) {
  const auto b = timestep_buckets(1000, 5);
  ASSERT_EQ(b.size(), 5u);
  EXPECT_EQ(b.front().lo, 1);
  EXPECT_EQ(b.back().hi, 1000);
  for (std::size_t k = 0; k < b.size(); ++k) {
    EXPECT_EQ(b[k].hi - b[k].lo + 1, 200);
    if (k > 0) {
      EXPECT_EQ(b[k].lo, b[k - 1].hi + 1);
    }
  }
  EXPECT_THROW(timestep_buckets(4, 5), ContractError);
}

TEST(LossRatio, UniformResidualGivesOne) {
  const std::vector<double> sq(100, 0.37);
  std::vector<double> mask(100, 0.0);
  for (int i = 0; i < 30; ++i) mask[i] = 1.0;
  EXPECT_DOUBLE_EQ(*loss_ratio_of(sq, mask), 1.0);
}

TEST(LossRatio, ResidualOnlyInTenPercentMaskGivesTen) {
  std::vector<double> sq(1000, 0.0), mask(1000, 0.0);
  for (int i = 0; i < 100; ++i) {
    sq[i * 10] = 2.0;
    mask[i * 10] = 1.0;
  }
  EXPECT_NEAR(*loss_ratio_of(sq, mask), 10.0, 1e-12);
}

TEST(LossRatio, EmptyMaskOrZeroLossUndefined) {
  EXPECT_FALSE(loss_ratio_of(std::vector<double>(10, 1.0), std::vector<double>(10, 0.0)));
  EXPECT_FALSE(loss_ratio_of(std::vector<double>(10, 0.0), std::vector<double>(10, 1.0)));
  EXPECT_THROW(loss_ratio_of({1.0}, {1.0, 0.0}), ContractError);
}

TEST(LossRatio, CurveOnUntrainedModelIsDeterministic) {
  TrainConfig c;
  c.video.height = c.video.width = 16;
  c.video.frames = 4;
  c.model.width = 8;
  c.steps = 0;
  c.finalize();
  const Model m{c, initial_params(c)};
  const auto val = make_valset(c, 6, 3);
  ASSERT_EQ(val.size(), 6u);
  const LossRatioCurve a = loss_ratio(m, val), b = loss_ratio(m, val);
  ASSERT_EQ(a.buckets.size(), 5u);
  EXPECT_EQ(a.ratio, b.ratio);
  for (const auto& r : a.ratio) {
    if (r) {
      EXPECT_TRUE(std::isfinite(*r));
    }
  }
}

TEST(Classifier, DirectionsFromUniformFlow) {
  const std::vector<std::pair<Verb, std::array<double, 2>>> cases = {
      {Verb::kRight, {1, 0}},       {Verb::kLeft, {-1, 0}},     {Verb::kDown, {0, 1}},
      {Verb::kUp, {0, -1}},         {Verb::kDownRight, {1, 1}}, {Verb::kUpLeft, {-1, -1}},
      {Verb::kUpRight, {1, -1}},    {Verb::kDownLeft, {-1, 1}},
  };
  for (const auto& [verb, d] : cases) {
    EXPECT_EQ(classify_flow(uniform_flow(3, 8, 8, 2 * d[0], 2 * d[1])), verb) << verb_name(verb);
  }
  EXPECT_EQ(classify_flow(uniform_flow(3, 8, 8, 0.1, 0.0)), Verb::kStatic);
  EXPECT_EQ(classify_flow(uniform_flow(3, 8, 8, 0.0, 0.0)), Verb::kStatic);
}

TEST(Classifier, TopDecileIgnoresWeakBackground) {
  FlowField f = uniform_flow(2, 10, 10, 0.0, 0.5);  // weak downward drift everywhere
  for (int l = 0; l < 2; ++l) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) f.at(l, i, j, 0) = -3.0;  // strong leftward patch, 12% of pixels
    }
  }
  EXPECT_EQ(classify_flow(f), Verb::kLeft);
}

TEST(Classifier, OracleClipsClassifiedCorrectly) {
  DatasetConfig cfg;
  cfg.size = 90;
  cfg.verbs = classifier_verbs();
  ClipStream stream(cfg, 21);
  int correct = 0, total = 0;
  while (!stream.done()) {
    const Clip c = stream.next();
    correct += classify_motion(c.video) == c.prompt.verb ? 1 : 0;
    ++total;
  }
  EXPECT_GE(static_cast<double>(correct) / total, 0.98);
}

TEST(Classifier, FrozenRepeatIsStatic) {
  const Scenario s = random_scenario_for(Verb::kRight, Speed::kFast, {}, 3, 9);
  const Clip c = gen_clip(s, s.prompts.front(), 0, {});
  EXPECT_EQ(classify_motion(static_baseline(frame0(c.video), 8)), Verb::kStatic);
}

TEST(Fidelity, StaticBaselineAndVariance) {
  const Scenario s = random_scenario_for(Verb::kRight, Speed::kFast, {}, 3, 9);
  const Clip c = gen_clip(s, s.prompts.front(), 0, {});
  const Video cond = frame0(c.video);
  const Fidelity f = first_frame_fidelity(static_baseline(cond, 8), cond);
  EXPECT_EQ(f.mse, 0.0);
  EXPECT_EQ(f.psnr, 100.0);
  double mean = 0.0;
  for (double x : cond.data()) mean += x;
  mean /= static_cast<double>(cond.size());
  double var = 0.0;
  for (double x : cond.data()) var += (x - mean) * (x - mean);
  var /= static_cast<double>(cond.size());
  const Video gray({8, cond.height(), cond.width(), 3}, mean);
  EXPECT_NEAR(first_frame_fidelity(gray, cond).mse, var, 1e-12);
  EXPECT_THROW(first_frame_fidelity(Video({2, 4, 4, 3}), cond), ContractError);
}

TEST(DynamicDegree, StaticZeroAndPanScaled) {
  const Video still = static_baseline(Video({1, 16, 16, 3}, 0.3), 4);
  EXPECT_NEAR(dynamic_degree(still), 0.0, 1e-6);
  EXPECT_DOUBLE_EQ(dynamic_degree_from_flow(uniform_flow(3, 64, 64, 2.0, 0.0)), 2.0 / 64.0);
  EXPECT_THROW(dynamic_degree(Video({1, 4, 4, 3})), ContractError);
}

TEST(DynamicDegree, MovingClipAboveStatic) {
  const Scenario s = random_scenario_for(Verb::kDown, Speed::kFast, {}, 1, 4);
  const Clip c = gen_clip(s, s.prompts.front(), 0, {});
  EXPECT_GT(dynamic_degree(c.video), dynamic_degree(static_baseline(frame0(c.video), 8)));
}

TEST(PromptAccuracy, StaticGeneratorHitsOnlyStaticPrompts) {
  const Bench b = small_bench();
  const auto results = evaluate_pairs(static_generator(8), b, b.manifest, {0});
  ASSERT_EQ(results.size(), b.manifest.records.size());
  std::size_t statics = 0;
  for (const auto& r : results) {
    ASSERT_TRUE(r.predicted);
    EXPECT_EQ(*r.predicted, Verb::kStatic);
    EXPECT_EQ(r.fidelity_mse, 0.0);
    EXPECT_EQ(r.dynamic_degree, 0.0);
    statics += r.prompt_verb == Verb::kStatic ? 1 : 0;
  }
  const PromptAccuracy acc = prompt_accuracy(results);
  EXPECT_EQ(acc.total, results.size());
  EXPECT_EQ(acc.correct, statics);
}

TEST(PromptAccuracy, OracleGeneratorIsNearPerfect) {
  const Bench b = small_bench();
  const VideoGenerator oracle = [&](const Video&, const PromptSpec& p, std::uint64_t seed) {
    for (const auto& r : b.manifest.records) {
      if (b.prompt(r) == p) return gen_clip(b.scenario(r.scenario_id), p, seed, {}).video;
    }
    throw ContractError("unknown prompt");
  };
  EXPECT_GE(prompt_accuracy(oracle, b, {0, 1}).accuracy, 0.98);
}

TEST(PromptAccuracy, ThreadCountDoesNotChangeResults) {
  const Bench b = small_bench();
  const VideoGenerator noisy = [](const Video& start, const PromptSpec&, std::uint64_t seed) {
    Rng rng(seed);
    Video v = static_baseline(start, 4);
    for (double& x : v.data()) x = std::clamp(x + 0.05 * rng.normal(), 0.0, 1.0);
    return v;
  };
  const auto one = evaluate_pairs(noisy, b, b.manifest, {3, 4}, {}, 1);
  const auto many = evaluate_pairs(noisy, b, b.manifest, {3, 4}, {}, 3);
  ASSERT_EQ(one.size(), many.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].seed, many[i].seed);
    EXPECT_EQ(one[i].predicted, many[i].predicted);
    EXPECT_EQ(one[i].fidelity_mse, many[i].fidelity_mse);
    EXPECT_EQ(one[i].dynamic_degree, many[i].dynamic_degree);
  }
}

TEST(Compare, StaticBaselineFlagsAndDominance) {
  const Bench b = small_bench();
  // Ignores the start frame and never moves.
  const VideoGenerator blank = [](const Video& start, const PromptSpec&, std::uint64_t) {
    Video v({8, start.height(), start.width(), 3}, 0.5);
    return v;
  };
  const auto reports = compare({{"static", static_generator(8), {}}, {"blank", blank, {}}}, b, {0});
  ASSERT_EQ(reports.size(), 2u);
  const auto has = [](const EvalReport& r, const std::string& f) {
    return std::find(r.flags.begin(), r.flags.end(), f) != r.flags.end();
  };
  EXPECT_EQ(reports[0].metrics.at("fidelity_mse"), 0.0);
  EXPECT_EQ(reports[0].metrics.at("dynamic_degree"), 0.0);
  EXPECT_TRUE(has(reports[0], "static_output"));
  EXPECT_FALSE(has(reports[0], "dominated_by_static"));
  EXPECT_TRUE(has(reports[1], "static_output"));
  EXPECT_TRUE(has(reports[1], "dominated_by_static"));
  const std::string table = render_table(reports);
  EXPECT_NE(table.find("static"), std::string::npos);
  EXPECT_NE(table.find("blank"), std::string::npos);
}

TEST(Compare, IdenticalModelsGiveIdenticalRows) {
  const Bench b = small_bench();
  const auto reports =
      compare({{"a", static_generator(8), {}}, {"b", static_generator(8), {}}}, b, {0, 1});
  EXPECT_EQ(reports[0].metrics, reports[1].metrics);
  EXPECT_EQ(reports_to_json(reports)[0]["metrics"], reports_to_json(reports)[1]["metrics"]);
}

TEST(Compare, DominanceNeedsWorseFidelityAndNoGain) {
  const auto report = [](const std::string& id, double acc, double mse, double dyn) {
    EvalReport r;
    r.model_id = id;
    r.metrics = {{"prompt_accuracy", acc}, {"fidelity_mse", mse}, {"dynamic_degree", dyn}};
    return r;
  };
  std::vector<EvalReport> reports = {report("static", 0.11, 0.0, 0.0),
                                     report("frozen_gray", 0.11, 0.02, 0.0),
                                     report("mover", 0.05, 0.01, 0.02),
                                     report("aligned", 0.30, 0.01, 0.02)};
  flag_reports(reports);
  EXPECT_EQ(reports[0].flags, (std::vector<std::string>{"static_output"}));
  EXPECT_EQ(reports[1].flags, (std::vector<std::string>{"static_output", "dominated_by_static"}));
  EXPECT_TRUE(reports[2].flags.empty());  // more motion than static
  EXPECT_TRUE(reports[3].flags.empty());
  flag_reports(reports);  // idempotent
  EXPECT_EQ(reports[1].flags.size(), 2u);
}

}  // namespace
}  // namespace motif
