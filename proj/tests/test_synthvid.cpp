// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "motif/motionmap.hpp"
#include "motif/synthvid.hpp"
#include "test_util.hpp"

namespace motif {
namespace {

Scenario one_sprite(Shape shape, double size, double x, double y, Color color = Color::kRed) {
  Scenario s;
  s.id = 0;
  s.backgrounds = {0, 1, 2};
  Sprite sp;
  sp.shape = shape;
  sp.color = color;
  sp.size = size;
  sp.x = x;
  sp.y = y;
  s.sprites.push_back(sp);
  return s;
}

double mask_sum(const Tensor4<double>& m, int l) {
  double s = 0.0;
  for (double v : m.frame(l)) s += v;
  return s;
}

TEST(Vocabulary, NamesRoundTrip) {
  for (Verb v : all_verbs()) EXPECT_EQ(parse_verb(verb_name(v)), v);
  for (int c = 0; c < kColorCount; ++c) {
    EXPECT_EQ(parse_color(color_name(static_cast<Color>(c))), static_cast<Color>(c));
  }
  EXPECT_THROW(parse_verb("sideways"), FormatError);
  EXPECT_EQ(classifier_verbs().size(), 9u);
}

TEST(Vocabulary, EmbeddingIndexUniqueAndBelowNull) {
  std::set<int> seen;
  for (int c = 0; c < kColorCount; ++c) {
    for (Verb v : all_verbs()) {
      for (Speed s : {Speed::kSlow, Speed::kFast}) {
        const int idx = PromptSpec{0, static_cast<Color>(c), v, s}.embedding_index();
        EXPECT_LT(idx, PromptVocab::null_index());
        EXPECT_TRUE(seen.insert(idx).second);
      }
    }
  }
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(PromptVocab::size()));
}

TEST(Vocabulary, StructuredTableIsOneHotPerFactor) {
  const auto table = PromptVocab::structured_table();
  const int dim = PromptVocab::embedding_dim();
  ASSERT_EQ(table.size(), static_cast<std::size_t>(PromptVocab::size() + 1) * dim);
  const PromptSpec p{0, Color::kBlue, Verb::kDownLeft, Speed::kFast};
  const double* row = table.data() + static_cast<std::size_t>(p.embedding_index()) * dim;
  EXPECT_EQ(std::count(row, row + dim, 1.0), 3);
  EXPECT_EQ(row[static_cast<int>(Color::kBlue)], 1.0);
  EXPECT_EQ(row[kColorCount + static_cast<int>(Verb::kDownLeft)], 1.0);
  EXPECT_EQ(row[kColorCount + kVerbCount + 1], 1.0);
  const double* null_row = table.data() + static_cast<std::size_t>(PromptVocab::null_index()) * dim;
  EXPECT_EQ(std::count(null_row, null_row + dim, 0.0), dim);
}

TEST(Vocabulary, PromptTextParsesBack) {
  for (Verb v : all_verbs()) {
    for (Speed s : {Speed::kSlow, Speed::kFast}) {
      const PromptSpec p{0, Color::kMagenta, v, v == Verb::kStatic ? Speed::kSlow : s};
      EXPECT_EQ(parse_prompt_text(p.text(Shape::kDiamond)), p) << p.text(Shape::kDiamond);
    }
  }
  EXPECT_EQ(PromptSpec({0, Color::kRed, Verb::kLeft, Speed::kSlow}).text(Shape::kSquare),
            "the red square moves left slowly");
  EXPECT_THROW(parse_prompt_text("the red square dances"), FormatError);
  EXPECT_THROW(parse_prompt_text("red"), FormatError);
}

TEST(GenClip, StaticVerbHasNoFlowAndEmptyMask) {
  const Scenario s = one_sprite(Shape::kSquare, 8, 16, 16);
  const Clip c = gen_clip(s, {0, Color::kRed, Verb::kStatic, Speed::kSlow}, 3, {});
  for (double v : c.flow.data()) EXPECT_EQ(v, 0.0);
  for (double v : c.mask.data()) EXPECT_EQ(v, 0.0);
  for (int l = 1; l < c.video.frames(); ++l) {
    EXPECT_TRUE(std::equal(c.video.frame(0).begin(), c.video.frame(0).end(), c.video.frame(l).begin()));
  }
}

TEST(GenClip, FastRightHasIntensityTwoInsideZeroOutside) {
  const Scenario s = one_sprite(Shape::kSquare, 8, 10, 16);
  const Clip c = gen_clip(s, {0, Color::kRed, Verb::kRight, Speed::kFast}, 1, {});
  const auto in = flow_intensity(c.flow);
  std::size_t inside = 0;
  for (int l = 0; l < in.frames(); ++l) {
    for (int i = 0; i < in.height(); ++i) {
      for (int j = 0; j < in.width(); ++j) {
        if (c.mask.at(l, i, j) > 0.5) {
          EXPECT_EQ(in.at(l, i, j), 2.0);
          ++inside;
        } else {
          EXPECT_EQ(in.at(l, i, j), 0.0);
        }
      }
    }
  }
  EXPECT_GT(inside, 0u);
}

TEST(GenClip, TenPixelSpriteIn64FrameMovesAboutTwoPointFourPercent) {
  VideoConfig v;
  v.height = v.width = 64;
  const Scenario s = one_sprite(Shape::kSquare, 10, 24, 32);
  const Clip c = gen_clip(s, {0, Color::kRed, Verb::kRight, Speed::kFast}, 2, v);
  double moving = 0.0;
  for (double m : c.mask.data()) moving += m;
  const double fraction = moving / static_cast<double>(c.mask.size());
  EXPECT_NEAR(fraction, 100.0 / 4096.0, 0.004);
}

TEST(GenClip, InapplicablePromptIsRejected) {
  const Scenario s = one_sprite(Shape::kSquare, 8, 4, 16);  // at the left edge
  EXPECT_THROW(gen_clip(s, {0, Color::kRed, Verb::kLeft, Speed::kFast}, 0, {}), ContractError);
  EXPECT_THROW(gen_clip(s, {0, Color::kBlue, Verb::kRight, Speed::kFast}, 0, {}), ContractError);
  EXPECT_THROW(gen_clip(s, {0, Color::kRed, Verb::kEnter, Speed::kFast}, 0, {}), ContractError);
}

TEST(GenClip, DeterministicInScenarioPromptSeed) {
  const Scenario s = random_scenario_for(Verb::kUpLeft, Speed::kSlow, {}, 3, 5);
  const PromptSpec p = s.prompts.front();
  EXPECT_EQ(gen_clip(s, p, 9, {}).video, gen_clip(s, p, 9, {}).video);
  EXPECT_NE(gen_clip(s, p, 9, {}).video, gen_clip(s, p, 10, {}).video);
}

TEST(GenClip, EnteringSpriteAbsentFromFrameZero) {
  Scenario s = one_sprite(Shape::kDisc, 8, 16, 16);
  s.sprites[0].enters = true;
  s.sprites[0].enter_side = 1;
  const Clip c = gen_clip(s, {0, Color::kRed, Verb::kEnter, Speed::kFast}, 0, {});
  EXPECT_EQ(mask_sum(c.mask, 0), 0.0);
  EXPECT_GT(mask_sum(c.mask, c.video.frames() - 1), 0.0);
}

TEST(GenClip, GrowAndShrinkChangeArea) {
  const Scenario s = one_sprite(Shape::kSquare, 8, 16, 16);
  VideoConfig v;
  const auto area = [&](Verb verb, int l) {
    const Clip c = gen_clip(s, {0, Color::kRed, verb, Speed::kFast}, 0, v);
    double red = 0.0;
    for (int i = 0; i < v.height; ++i) {
      for (int j = 0; j < v.width; ++j) {
        if (c.video.at(l, i, j, 0) > 0.6 && c.video.at(l, i, j, 1) < 0.4) red += 1.0;
      }
    }
    return red;
  };
  EXPECT_GT(area(Verb::kGrow, 7), area(Verb::kGrow, 0) * 1.5);
  EXPECT_LT(area(Verb::kShrink, 7), area(Verb::kShrink, 0) * 0.7);
}

// Warping frame l by the oracle flow reproduces frame l+1 wherever the 5x5
// neighbourhood is entirely sprite interior or entirely static background.
TEST(GenClip, OracleFlowWarpReconstructsNextFrame) {
  DatasetConfig cfg;
  cfg.size = 24;
  cfg.verbs = classifier_verbs();
  ClipStream stream(cfg, 17);
  while (!stream.done()) {
    const Clip c = stream.next();
    const int H = c.video.height(), W = c.video.width();
    double se = 0.0;
    std::size_t count = 0;
    for (int l = 0; l + 1 < c.video.frames(); ++l) {
      for (int i = 2; i < H - 2; ++i) {
        for (int j = 2; j < W - 2; ++j) {
          double m0 = 0.0, m1 = 0.0, mx = 0.0;
          for (int a = -2; a <= 2; ++a) {
            for (int b = -2; b <= 2; ++b) {
              m0 += c.mask.at(l, i + a, j + b);
              m1 += c.mask.at(l + 1, i + a, j + b);
              mx = std::max(mx, c.mask.at(l, i + a, j + b));
            }
          }
          const bool interior = m0 == 25.0;
          const bool background = m0 == 0.0 && m1 == 0.0;
          if (!interior && !background) continue;
          if (interior) {
            // The landing site must be interior in the next frame too.
            const int ti = static_cast<int>(std::lround(i + c.flow.at(l, i, j, 1)));
            const int tj = static_cast<int>(std::lround(j + c.flow.at(l, i, j, 0)));
            if (ti < 2 || tj < 2 || ti >= H - 2 || tj >= W - 2) continue;
            bool ok = true;
            for (int a = -2; a <= 2 && ok; ++a) {
              for (int b = -2; b <= 2 && ok; ++b) ok = c.mask.at(l + 1, ti + a, tj + b) > 0.5;
            }
            if (!ok) continue;
          }
          const double x = j + c.flow.at(l, i, j, 0), y = i + c.flow.at(l, i, j, 1);
          for (int ch = 0; ch < 3; ++ch) {
            const double d = sample_bilinear(c.video, l + 1, x, y, ch) - c.video.at(l, i, j, ch);
            se += d * d;
            ++count;
          }
        }
      }
    }
    ASSERT_GT(count, 0u);
    EXPECT_LT(se / static_cast<double>(count), 1e-6) << verb_name(c.prompt.verb);
  }
}

TEST(GenClip, MeanOracleFlowPointsAlongVerb) {
  for (Verb verb : classifier_verbs()) {
    if (verb == Verb::kStatic) continue;
    for (Speed speed : {Speed::kSlow, Speed::kFast}) {
      const Scenario s = random_scenario_for(verb, speed, {}, 3, 31 + static_cast<int>(verb));
      const Clip c = gen_clip(s, s.prompts.front(), 4, {});
      double u = 0.0, v = 0.0;
      for (int l = 0; l < c.flow.frames(); ++l) {
        for (int i = 0; i < c.flow.height(); ++i) {
          for (int j = 0; j < c.flow.width(); ++j) {
            if (c.mask.at(l, i, j) < 0.5) continue;
            u += c.flow.at(l, i, j, 0);
            v += c.flow.at(l, i, j, 1);
          }
        }
      }
      const auto d = verb_direction(verb);
      const double cosang = (u * d[0] + v * d[1]) / std::hypot(u, v);
      EXPECT_GT(cosang, std::cos(22.5 * std::numbers::pi / 180.0)) << verb_name(verb);
    }
  }
}

TEST(Dataset, EmptyStreamIsDone) {
  ClipStream stream({}, 1);
  EXPECT_TRUE(stream.done());
}

TEST(Dataset, SameSeedSameBytes) {
  DatasetConfig cfg;
  cfg.size = 6;
  ClipStream a(cfg, 12), b(cfg, 12);
  while (!a.done()) {
    const Clip x = a.next(), y = b.next();
    EXPECT_EQ(x.video, y.video);
    EXPECT_EQ(x.flow, y.flow);
    EXPECT_EQ(x.prompt, y.prompt);
  }
  EXPECT_EQ(ClipStream(cfg, 12).at(4).video, ClipStream(cfg, 12).at(4).video);
}

TEST(Dataset, VerbHistogramWithinFivePercentOfUniform) {
  DatasetConfig cfg;
  cfg.size = 1000;
  // Only prompts are needed; at() renders, so count verbs through the stream.
  ClipStream stream(cfg, 3);
  std::map<Verb, int> hist;
  while (!stream.done()) hist[stream.next().prompt.verb]++;
  const double uniform = 1000.0 / static_cast<double>(all_verbs().size());
  for (Verb v : all_verbs()) EXPECT_NEAR(hist[v], uniform, 0.05 * uniform) << verb_name(v);
}

TEST(Bench, DefaultConfigGivesAboutThreeHundredTwentyPairs) {
  const Bench b = build_bench({}, 0);
  const BenchCounts c = b.manifest.counts();
  EXPECT_EQ(c.scenarios, 22u);
  EXPECT_NEAR(static_cast<double>(c.pairs), 320.0, 8.0);
  EXPECT_EQ(c.images, 88u);
  bool multi = false, novel = false;
  for (const auto& s : b.scenarios) {
    multi = multi || s.multi_object;
    novel = novel || s.novel_object;
    if (s.multi_object) {
      std::set<Color> colors;
      for (const auto& sp : s.sprites) colors.insert(sp.color);
      EXPECT_GE(colors.size(), 2u);
    }
  }
  EXPECT_TRUE(multi);
  EXPECT_TRUE(novel);
}

TEST(Bench, GridIsThreeToFiveAndPairsUnique) {
  const Bench b = build_bench({}, 4);
  std::map<std::string, int> per_image;
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : b.manifest.records) {
    per_image[r.image_id]++;
    EXPECT_TRUE(pairs.insert({r.image_id, r.prompt_id}).second);
  }
  for (const auto& [id, n] : per_image) {
    EXPECT_GE(n, 3) << id;
    EXPECT_LE(n, 5) << id;
  }
  for (const auto& s : b.scenarios) {
    EXPECT_GE(s.backgrounds.size(), 3u);
    EXPECT_GE(s.prompts.size(), 3u);
    EXPECT_LE(s.prompts.size(), 5u);
    for (const auto& p : s.prompts) EXPECT_TRUE(s.applicable(p, {}));
  }
}

TEST(Bench, NovelPromptsReferenceAbsentSprite) {
  const Bench b = build_bench({}, 2);
  int checked = 0;
  for (const auto& r : b.manifest.records) {
    const PromptSpec p = b.prompt(r);
    if (p.verb != Verb::kEnter) continue;
    const Scenario& s = b.scenario(r.scenario_id);
    const Clip c = gen_clip(s, p, r.image_seed, {});
    EXPECT_EQ(mask_sum(c.mask, 0), 0.0);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Bench, OneScenarioThreeImagesThreePromptsIsNinePairs) {
  BenchConfig cfg;
  cfg.scenarios = 1;
  cfg.images_per_scenario = 3;
  cfg.target_pairs = 9;
  EXPECT_EQ(build_bench(cfg, 0).manifest.records.size(), 9u);
}

TEST(Bench, ManifestRoundTrips) {
  const Bench b = build_bench({}, 1);
  EXPECT_EQ(manifest_from_string(manifest_to_string(b.manifest)), b.manifest);
  const std::string dir = testing::TempDir() + "/synthvid_bench";
  write_bench(dir, b);
  const Bench back = read_bench(dir);
  EXPECT_EQ(back.manifest, b.manifest);
  ASSERT_EQ(back.start_frames.size(), b.start_frames.size());
  for (const auto& [id, frame] : b.start_frames) EXPECT_EQ(back.start_frame(id), frame);
}

TEST(Bench, DuplicatePairInManifestRejected) {
  const Bench b = build_bench({}, 1);
  BenchManifest m = b.manifest;
  m.records.push_back(m.records.front());
  EXPECT_THROW(manifest_from_string(manifest_to_string(m)), FormatError);
}

TEST(ClipFile, RoundTripsBitExact) {
  const Scenario s = one_sprite(Shape::kDiamond, 8, 16, 16);
  const Clip c = gen_clip(s, {0, Color::kRed, Verb::kDown, Speed::kSlow}, 77, {});
  const std::string path = testing::TempDir() + "/synthvid.clip";
  write_clip(path, c.video, 77);
  const ClipFile back = read_clip(path);
  EXPECT_EQ(back.data, c.video);
  EXPECT_EQ(back.seed, 77u);
}

TEST(ClipFile, RejectsBadMagicAndTruncation) {
  const std::string path = testing::TempDir() + "/synthvid_bad.clip";
  test::write_text(path, "NOTACLIP");
  EXPECT_THROW(read_clip(path), FormatError);
  write_clip(path, Tensor4<double>({2, 2, 2, 1}, 0.5));
  std::string bytes = test::read_text(path);
  test::write_text(path, bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_clip(path), FormatError);
}

TEST(ClipFile, ExportWritesOnePreviewPerFrame) {
  const Scenario s = one_sprite(Shape::kSquare, 8, 16, 16);
  const Clip c = gen_clip(s, {0, Color::kRed, Verb::kStatic, Speed::kSlow}, 0, {});
  const std::string prefix = testing::TempDir() + "/synthvid_preview";
  export_frames(prefix, c.video);
  for (int l = 0; l < c.video.frames(); ++l) {
    char name[16];
    std::snprintf(name, sizeof name, "_%02d.ppm", l);
    const std::string ppm = test::read_text(prefix + name);
    EXPECT_EQ(ppm.rfind("P6\n32 32\n255\n", 0), 0u);
    EXPECT_EQ(ppm.size(), std::string("P6\n32 32\n255\n").size() + 32 * 32 * 3);
  }
}

}  // namespace
}  // namespace motif
