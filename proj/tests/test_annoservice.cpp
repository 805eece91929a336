// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <thread>

#include <gtest/gtest.h>

#include "motif/annoservice.hpp"
#include "motif/error.hpp"
#include "motif/rng.hpp"
#include "test_util.hpp"

namespace motif::anno {
namespace {

SessionConfig make_config(int pairs, std::uint64_t seed = 1) {
  SessionConfig c;
  c.session_id = "s" + std::to_string(seed);
  c.model_x = "motif";
  c.model_y = "baseline";
  c.seed = seed;
  for (int i = 0; i < pairs; ++i) {
    PairSpec p;
    p.image_id = "img" + std::to_string(i / 4);
    p.prompt_id = "p" + std::to_string(i);
    p.prompt_text = "the red square moves left";
    p.image_ref = "images/" + p.image_id + ".ppm";
    p.video_x = "x/" + p.prompt_id + ".clip";
    p.video_y = "y/" + p.prompt_id + ".clip";
    c.pairs.push_back(p);
  }
  return c;
}

struct FakeClock {
  double now = 1000.0;
  Clock fn() {
    return [this] { return now; };
  }
};

std::string temp_log(const std::string& name) {
  return testing::TempDir() + "/anno_" + name + ".jsonl";
}

VoteRecord vote(const PairTask& t, const std::string& who, Choice c,
                std::vector<Axis> why = {Axis::kObjectMotion}) {
  VoteRecord v;
  v.task_id = t.task_id;
  v.annotator = who;
  v.choice = c;
  v.justifications = std::move(why);
  v.watch_seconds = 61.0;
  return v;
}

Choice display_choice_for(const PairTask& t, bool want_x) {
  // choice_is_x(kLeft) == !swapped
  return (want_x != t.swapped) ? Choice::kLeft : Choice::kRight;
}

// Brute-force majority and axis tallies straight from canonical choices.
AggregateResult brute_force(const Session& s, const std::vector<VoteRecord>& votes) {
  AggregateResult a;
  a.model_x = s.model_x;
  a.model_y = s.model_y;
  a.tasks_total = s.tasks.size();
  std::map<std::string, int> x, y;
  std::array<int, kAxisCount> ax{}, ay{};
  for (const auto& v : votes) {
    const PairTask* t = s.find(v.task_id);
    const bool left_is_x = !t->swapped;
    const bool for_x = (v.choice == Choice::kLeft) == left_is_x;
    (for_x ? x : y)[v.task_id]++;
    (for_x ? a.votes_x : a.votes_y)++;
    a.votes++;
    std::array<bool, kAxisCount> seen{};
    for (Axis ax_ : v.justifications) seen[static_cast<int>(ax_)] = true;
    for (int i = 0; i < kAxisCount; ++i) {
      if (seen[i]) (for_x ? ax : ay)[i]++;
    }
  }
  for (const auto& t : s.tasks) {
    const int vx = x[t.task_id], vy = y[t.task_id];
    if (vx + vy < t.required_annotators) {
      a.tasks_incomplete++;
      continue;
    }
    a.tasks_complete++;
    if (vx > vy) a.wins_x++;
    if (vy > vx) a.wins_y++;
    if (vx == vy) a.tasks_tied++;
  }
  const double decided = static_cast<double>(a.wins_x + a.wins_y);
  if (decided > 0) {
    a.score_x = 100.0 * a.wins_x / decided;
    a.score_y = 100.0 * a.wins_y / decided;
  }
  for (int i = 0; i < kAxisCount && a.votes > 0; ++i) {
    a.axis_x[i] = 100.0 * ax[i] / static_cast<double>(a.votes);
    a.axis_y[i] = 100.0 * ay[i] / static_cast<double>(a.votes);
  }
  return a;
}

TEST(Session, OneTaskPerPairAndSeededOrder) {
  const Session a = build_session(make_config(320, 7));
  EXPECT_EQ(a.tasks.size(), 320u);
  const Session b = build_session(make_config(320, 7));
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    EXPECT_EQ(a.tasks[i].swapped, b.tasks[i].swapped);
    EXPECT_EQ(a.tasks[i].task_id, b.tasks[i].task_id);
  }
  const Session c = build_session(make_config(320, 8));
  int differ = 0;
  for (std::size_t i = 0; i < a.tasks.size(); ++i) differ += a.tasks[i].swapped != c.tasks[i].swapped;
  EXPECT_GT(differ, 0);
}

TEST(Session, LeftRightBalanced) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Session s = build_session(make_config(320, seed));
    int swapped = 0;
    for (const auto& t : s.tasks) swapped += t.swapped ? 1 : 0;
    EXPECT_GE(swapped / 320.0, 0.45);
    EXPECT_LE(swapped / 320.0, 0.55);
  }
}

TEST(Session, MissingAssetsExcluded) {
  const SessionConfig cfg = make_config(6);
  const Session s = build_session(cfg, [](const std::string& ref) { return ref != "y/p3.clip"; });
  EXPECT_EQ(s.tasks.size(), 5u);
  ASSERT_EQ(s.excluded.size(), 1u);
  EXPECT_NE(s.excluded[0].find("p3"), std::string::npos);
}

TEST(Session, ConfigJsonRoundTrip) {
  const SessionConfig c = make_config(3);
  EXPECT_EQ(to_json(session_config_from_json(to_json(c))).dump(), to_json(c).dump());
  nlohmann::json bad = to_json(c);
  bad["extra"] = 1;
  EXPECT_THROW(session_config_from_json(bad), motif::FormatError);
}

TEST(Aggregate, MajorityOfFive) {
  Session s = build_session(make_config(1));
  const PairTask& t = s.tasks[0];
  std::vector<VoteRecord> votes;
  const bool pattern[5] = {true, true, false, true, false};  // A,A,B,A,B with A = X
  for (int i = 0; i < 5; ++i) {
    votes.push_back(vote(t, "a" + std::to_string(i), display_choice_for(t, pattern[i])));
  }
  const AggregateResult a = aggregate(s, votes);
  EXPECT_EQ(a.wins_x, 1u);
  EXPECT_EQ(a.wins_y, 0u);
  EXPECT_EQ(a.score_x, 100.0);
  EXPECT_EQ(a.votes_x, 3u);
}

TEST(Aggregate, PublishedSplitArithmetic) {
  Session s = build_session(make_config(320));
  std::vector<VoteRecord> votes;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const bool x_wins = i < 202;
    for (int k = 0; k < 5; ++k) {
      // 3-2 majorities keep the split honest without being unanimous.
      const bool for_x = k < 3 ? x_wins : !x_wins;
      votes.push_back(vote(s.tasks[i], "a" + std::to_string(k), display_choice_for(s.tasks[i], for_x)));
    }
  }
  const AggregateResult a = aggregate(s, votes);
  EXPECT_EQ(a.wins_x, 202u);
  EXPECT_EQ(a.wins_y, 118u);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f/%.1f", a.score_x, a.score_y);
  EXPECT_STREQ(buf, "63.1/36.9");
  EXPECT_NEAR(a.score_x + a.score_y, 100.0, 1e-12);
}

TEST(Aggregate, RandomLogsMatchBruteForceAndFlipInvariant) {
  Rng rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    const int pairs = rng.uniform_int(1, 12);
    Session s = build_session(make_config(pairs, trial));
    std::vector<VoteRecord> votes;
    for (const auto& t : s.tasks) {
      const int n = rng.uniform_int(0, 5);
      for (int k = 0; k < n; ++k) {
        std::vector<Axis> why;
        for (int ax = 0; ax < kAxisCount; ++ax) {
          if (rng.bernoulli(0.4)) why.push_back(static_cast<Axis>(ax));
        }
        if (why.empty()) why.push_back(Axis::kOverallQuality);
        votes.push_back(vote(t, "a" + std::to_string(k), rng.bernoulli(0.5) ? Choice::kLeft : Choice::kRight,
                             why));
      }
    }
    const AggregateResult got = aggregate(s, votes);
    const AggregateResult want = brute_force(s, votes);
    ASSERT_EQ(got.wins_x, want.wins_x);
    ASSERT_EQ(got.wins_y, want.wins_y);
    ASSERT_EQ(got.tasks_incomplete, want.tasks_incomplete);
    ASSERT_EQ(got.votes_x, want.votes_x);
    for (int i = 0; i < kAxisCount; ++i) {
      ASSERT_NEAR(got.axis_x[i], want.axis_x[i], 1e-12);
      ASSERT_NEAR(got.axis_y[i], want.axis_y[i], 1e-12);
    }
    EXPECT_EQ(got.tasks_tied, 0u);

    // Flip every displayed order and mirror the recorded choices.
    Session flipped = s;
    for (auto& t : flipped.tasks) t.swapped = !t.swapped;
    std::vector<VoteRecord> mirrored = votes;
    for (auto& v : mirrored) v.choice = v.choice == Choice::kLeft ? Choice::kRight : Choice::kLeft;
    ASSERT_EQ(aggregate(flipped, mirrored), got);
  }
}

TEST(Service, FreshAnnotatorGetsFirstTaskAndIsRepeatedUntilVoting) {
  FakeClock clock;
  Service svc(build_session(make_config(3)), temp_log("fresh"), clock.fn());
  const auto t1 = svc.next_task("alice");
  ASSERT_TRUE(t1);
  EXPECT_EQ(t1->task_id, svc.session().tasks[0].task_id);
  EXPECT_EQ(svc.next_task("alice")->task_id, t1->task_id);
}

TEST(Service, GatesRejectWithReasons) {
  FakeClock clock;
  Service svc(build_session(make_config(2)), temp_log("gates"), clock.fn());
  const PairTask t = *svc.next_task("bob");
  VoteRecord v = vote(t, "bob", Choice::kLeft);

  clock.now += 30.0;
  EXPECT_EQ(svc.submit(v), Verdict::kUnderTime);  // server clock says 30 s
  clock.now += 40.0;
  v.watch_seconds = 59.0;
  EXPECT_EQ(svc.submit(v), Verdict::kUnderTime);  // client says 59 s
  v.watch_seconds = 60.0;
  v.justifications.clear();
  EXPECT_EQ(svc.submit(v), Verdict::kEmptyJustification);
  v.justifications = {Axis::kTextAlignment};
  EXPECT_EQ(svc.submit(v), Verdict::kAccepted);
  EXPECT_EQ(svc.submit(v), Verdict::kDuplicate);

  VoteRecord other = vote(t, "carol", Choice::kRight);
  EXPECT_EQ(svc.submit(other), Verdict::kNotAssigned);
  other.task_id = "nope";
  EXPECT_EQ(svc.submit(other), Verdict::kUnknownTask);
  EXPECT_EQ(svc.vote_count(t.task_id), 1u);
}

TEST(Service, TaskFullAfterRequiredVotes) {
  FakeClock clock;
  SessionConfig cfg = make_config(1);
  cfg.required_annotators = 3;
  Service svc(build_session(cfg), temp_log("full"), clock.fn());
  std::vector<std::string> who = {"a", "b", "c", "d"};
  for (const auto& w : who) ASSERT_TRUE(svc.next_task(w)) << w;
  clock.now += 61.0;
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(svc.submit(vote(svc.session().tasks[0], who[i], Choice::kLeft)), Verdict::kAccepted);
  }
  EXPECT_EQ(svc.submit(vote(svc.session().tasks[0], "d", Choice::kLeft)), Verdict::kTaskFull);
  EXPECT_FALSE(svc.next_task("e"));
}

TEST(Service, FiveAnnotatorsFillEveryTaskExactlyFive) {
  FakeClock clock;
  Service svc(build_session(make_config(12)), temp_log("five"), clock.fn());
  for (int a = 0; a < 5; ++a) {
    const std::string who = "ann" + std::to_string(a);
    while (auto t = svc.next_task(who)) {
      clock.now += 61.0;
      ASSERT_EQ(svc.submit(vote(*t, who, Choice::kRight)), Verdict::kAccepted);
    }
  }
  for (const auto& t : svc.session().tasks) EXPECT_EQ(svc.vote_count(t.task_id), 5u);
  EXPECT_FALSE(svc.next_task("ann0"));
  const AggregateResult a = svc.aggregate();
  EXPECT_EQ(a.tasks_complete, 12u);
  EXPECT_EQ(a.tasks_tied, 0u);
}

TEST(Service, LogReplayReproducesVotesAndAggregate) {
  FakeClock clock;
  const std::string path = temp_log("replay");
  std::vector<VoteRecord> accepted;
  AggregateResult before;
  {
    Service svc(build_session(make_config(4)), path, clock.fn());
    for (int a = 0; a < 3; ++a) {
      const std::string who = "r" + std::to_string(a);
      while (auto t = svc.next_task(who)) {
        clock.now += 75.0;
        VoteRecord v = vote(*t, who, a % 2 ? Choice::kLeft : Choice::kRight,
                            {Axis::kOverallQuality, Axis::kObjectMotion});
        v.timestamp = clock.now;
        ASSERT_EQ(svc.submit(v), Verdict::kAccepted);
      }
    }
    accepted = svc.votes();
    before = svc.aggregate();
  }
  const SessionLog log = read_log(path);
  EXPECT_EQ(log.votes, accepted);
  EXPECT_EQ(aggregate(log.session, log.votes), before);
  const auto again = Service::replay(path, clock.fn());
  EXPECT_EQ(again->aggregate(), before);
  // Duplicates stay rejected after replay, and new votes append.
  EXPECT_EQ(again->submit(accepted.front()), Verdict::kDuplicate);
  const auto t = again->next_task("late");
  ASSERT_TRUE(t);
  clock.now += 61.0;
  EXPECT_EQ(again->submit(vote(*t, "late", Choice::kLeft)), Verdict::kAccepted);
  EXPECT_EQ(read_log(path).votes.size(), accepted.size() + 1);
}

TEST(Service, CorruptLogRejected) {
  const std::string path = temp_log("corrupt");
  test::write_text(path, "{\"type\":\"vote\"}\n");
  EXPECT_THROW(read_log(path), motif::FormatError);
}

TEST(Service, ConcurrentSubmitsAreAtMostOnce) {
  FakeClock clock;
  Service svc(build_session(make_config(1)), temp_log("race"), clock.fn());
  const PairTask t = *svc.next_task("same");
  clock.now += 61.0;
  std::atomic<int> accepted{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      if (svc.submit(vote(t, "same", Choice::kLeft)) == Verdict::kAccepted) ++accepted;
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(accepted.load(), 1);
  EXPECT_EQ(read_log(temp_log("race")).votes.size(), 1u);
}

TEST(Render, AggregateTableMentionsModels) {
  Session s = build_session(make_config(1));
  const std::string text = render_aggregate(aggregate(s, {}));
  EXPECT_NE(text.find("motif"), std::string::npos);
  EXPECT_NE(text.find("baseline"), std::string::npos);
}

}  // namespace
}  // namespace motif::anno
