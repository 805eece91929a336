// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <string>

#include <gtest/gtest.h>

#include "motif/annoservice.hpp"
#include "motif/motionmap.hpp"
#include "motif/synthvid.hpp"
#include "motif/train.hpp"

#ifndef MOTIF_CLI_PATH
#error "MOTIF_CLI_PATH must point at the motif binary"
#endif

namespace motif {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(MOTIF_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run("heatmap --pool").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("train --steps 3").code, 2);  // --config is required
}

TEST(Cli, HelpExitsZero) {
  const RunResult r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("heatmap"), std::string::npos);
}

TEST(Cli, RuntimeErrorExitsOne) {
  const RunResult r = run("heatmap --in /nonexistent.clip --out /tmp/x.clip");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("motif: error:"), std::string::npos);
}

TEST(Cli, HeatmapPrintsStatsMatchingLibrary) {
  const fs::path dir = scratch("heatmap");
  const RunResult data = run("data --out-dir " + dir.string() + " --count 2 --seed 5");
  ASSERT_EQ(data.code, 0) << data.out;
  const fs::path flow = dir / "clips" / "00001.flow";
  const RunResult hm = run("heatmap --in " + flow.string() + " --out " + (dir / "h.clip").string() +
                           " --pool 2 --pooled-out " + (dir / "hp.clip").string());
  ASSERT_EQ(hm.code, 0) << hm.out;

  std::smatch m;
  const std::regex line(
      R"(heatmap: static_fraction=([0-9.]+) moving_fraction=([0-9.]+) mean_intensity=([0-9.]+))");
  ASSERT_TRUE(std::regex_search(hm.out, m, line)) << hm.out;
  const MotionStats s = motion_stats_from_flow(read_clip(flow).data);
  EXPECT_NEAR(std::stod(m[1]), s.static_fraction, 1e-4);
  EXPECT_NEAR(std::stod(m[2]), s.moving_fraction, 1e-4);
  EXPECT_NEAR(std::stod(m[3]), s.mean_intensity, 1e-4);

  const ClipFile full = read_clip(dir / "h.clip");
  const ClipFile pooled = read_clip(dir / "hp.clip");
  EXPECT_EQ(full.data.frames(), 8);
  EXPECT_EQ(pooled.data.height(), full.data.height() / 2);
  EXPECT_TRUE(fs::exists(dir / "h.clip.config.json"));
}

TEST(Cli, TrainIsDeterministic) {
  const fs::path dir = scratch("train");
  TrainConfig cfg;
  cfg.model.width = 8;
  cfg.steps = 3;
  cfg.batch = 2;
  cfg.seed = 9;
  std::ofstream(dir / "cfg.json") << to_json(cfg).dump(2);

  for (const char* sub : {"a", "b"}) {
    const RunResult r =
        run("train --config " + (dir / "cfg.json").string() + " --out-dir " + (dir / sub).string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("train: step 3/3"), std::string::npos) << r.out;
  }
  const std::string a = slurp(dir / "a" / "model.ckpt");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "model.ckpt"));

  const RunResult other = run("train --config " + (dir / "cfg.json").string() + " --seed 10 --out-dir " +
                              (dir / "c").string());
  ASSERT_EQ(other.code, 0) << other.out;
  EXPECT_NE(a, slurp(dir / "c" / "model.ckpt"));
}

TEST(Cli, TallyMatchesService) {
  const fs::path dir = scratch("tally");
  anno::SessionConfig c;
  c.session_id = "t";
  c.model_x = "motif";
  c.model_y = "baseline";
  c.required_annotators = 3;
  for (int i = 0; i < 6; ++i) {
    anno::PairSpec p;
    p.image_id = "img" + std::to_string(i);
    p.prompt_id = "p" + std::to_string(i);
    p.prompt_text = "the blue circle moves down";
    p.image_ref = p.image_id + ".ppm";
    p.video_x = "x" + std::to_string(i);
    p.video_y = "y" + std::to_string(i);
    c.pairs.push_back(p);
  }
  double now = 0.0;
  const fs::path log = dir / "t.jsonl";
  {
    anno::Service svc(anno::build_session(c), log, [&now] { return now; });
    int k = 0;
    for (const char* who : {"a", "b", "c"}) {
      while (auto t = svc.next_task(who)) {
        now += 61.0;
        anno::VoteRecord v;
        v.task_id = t->task_id;
        v.annotator = who;
        v.choice = (k++ % 3 == 0) ? anno::Choice::kRight : anno::Choice::kLeft;
        v.justifications = {anno::Axis::kObjectMotion, anno::Axis::kOverallQuality};
        v.watch_seconds = 61.0;
        ASSERT_EQ(svc.submit(v), anno::Verdict::kAccepted);
      }
    }
    const RunResult r = run("tally --json --log " + log.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(nlohmann::json::parse(r.out), nlohmann::json::parse(anno::to_json(svc.aggregate()).dump()));

    const RunResult table = run("tally --log " + log.string());
    ASSERT_EQ(table.code, 0);
    EXPECT_EQ(table.out, anno::render_aggregate(svc.aggregate()));
  }
}

}  // namespace
}  // namespace motif
