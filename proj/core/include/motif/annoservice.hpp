// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace motif::anno {

enum class Choice { kLeft, kRight };
enum class Axis { kObjectMotion, kTextAlignment, kImageAlignment, kOverallQuality };
inline constexpr int kAxisCount = 4;

std::string_view to_string(Choice c);
Choice parse_choice(std::string_view text);
std::string_view to_string(Axis a);
Axis parse_axis(std::string_view text);

// One (image, prompt) pair with the two models' videos.
struct PairSpec {
  std::string image_id;
  std::string prompt_id;
  std::string prompt_text;
  std::string image_ref;
  std::string video_x;
  std::string video_y;
};

struct SessionConfig {
  std::string session_id;  // generated when empty
  std::string model_x;
  std::string model_y;
  std::vector<PairSpec> pairs;
  std::uint64_t seed = 0;
  int required_annotators = 5;
  double min_watch_seconds = 60.0;
};

SessionConfig session_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SessionConfig& c);

struct PairTask {
  std::string task_id;
  PairSpec pair;
  bool swapped = false;  // true: Y is shown on the left
  int required_annotators = 5;
  double min_watch_seconds = 60.0;

  const std::string& left_ref() const { return swapped ? pair.video_y : pair.video_x; }
  const std::string& right_ref() const { return swapped ? pair.video_x : pair.video_y; }
  // True when the displayed choice favours model X.
  bool choice_is_x(Choice c) const { return (c == Choice::kLeft) != swapped; }
};

struct Session {
  std::string id;
  std::string model_x;
  std::string model_y;
  std::uint64_t seed = 0;
  int required_annotators = 5;
  double min_watch_seconds = 60.0;
  std::vector<PairTask> tasks;
  std::vector<std::string> excluded;  // pairs dropped for missing videos

  const PairTask* find(std::string_view task_id) const;
};

using AssetCheck = std::function<bool(const std::string& ref)>;

// One task per pair whose assets all exist; display orders are a seeded
// permutation with exactly floor(n/2) swaps.
Session build_session(const SessionConfig& config, const AssetCheck& exists = {});

struct VoteRecord {
  std::string task_id;
  std::string annotator;
  Choice choice = Choice::kLeft;
  std::vector<Axis> justifications;
  double watch_seconds = 0.0;
  double timestamp = 0.0;
  bool operator==(const VoteRecord&) const = default;
};

nlohmann::ordered_json to_json(const VoteRecord& v);
VoteRecord vote_from_json(const nlohmann::json& j);

enum class Verdict {
  kAccepted,
  kUnderTime,
  kDuplicate,
  kEmptyJustification,
  kTaskFull,
  kUnknownTask,
  kNotAssigned,
};
std::string_view to_string(Verdict v);

struct AggregateResult {
  std::string model_x;
  std::string model_y;
  std::size_t tasks_total = 0;
  std::size_t tasks_complete = 0;    // at least the required vote count
  std::size_t tasks_incomplete = 0;  // excluded from the TI2V score
  std::size_t tasks_tied = 0;        // only possible with an even requirement
  std::size_t wins_x = 0;
  std::size_t wins_y = 0;
  double score_x = 0.0;  // percent of decided tasks
  double score_y = 0.0;
  std::size_t votes = 0;
  std::size_t votes_x = 0;
  std::size_t votes_y = 0;
  // Percent of all accepted votes that chose the model and named the axis.
  std::array<double, kAxisCount> axis_x{};
  std::array<double, kAxisCount> axis_y{};
  bool operator==(const AggregateResult&) const = default;
};

nlohmann::ordered_json to_json(const AggregateResult& a);
std::string render_aggregate(const AggregateResult& a);

// Pure function of the session and its accepted votes.
AggregateResult aggregate(const Session& session, const std::vector<VoteRecord>& votes);

// Append-only line-delimited JSON: a session header line, then one line per
// accepted vote.
struct SessionLog {
  Session session;
  std::vector<VoteRecord> votes;
};

nlohmann::ordered_json session_header(const Session& s);
Session session_from_header(const nlohmann::json& j);
SessionLog read_log(const std::filesystem::path& path);

using Clock = std::function<double()>;  // seconds
Clock steady_clock_seconds();

class Service {
 public:
  // Starts a new log at `log_path` (truncating any existing file).
  Service(Session session, std::filesystem::path log_path, Clock clock = steady_clock_seconds());
  // Rebuilds the in-memory index from an existing log and keeps appending to it.
  static std::unique_ptr<Service> replay(const std::filesystem::path& log_path,
                                         Clock clock = steady_clock_seconds());

  // Fewest-votes-first task the annotator has not voted on; an outstanding
  // assignment is returned again. nullopt when the annotator is done.
  std::optional<PairTask> next_task(const std::string& annotator);
  Verdict submit(const VoteRecord& vote);
  AggregateResult aggregate() const;

  const Session& session() const { return session_; }
  std::vector<VoteRecord> votes() const;
  std::size_t vote_count(const std::string& task_id) const;

 private:
  Service(Session session, std::filesystem::path log_path, Clock clock, bool truncate);
  void append(const nlohmann::ordered_json& line);

  Session session_;
  std::filesystem::path log_path_;
  Clock clock_;
  std::ofstream log_;
  mutable std::mutex mu_;
  std::vector<VoteRecord> votes_;
  std::map<std::string, std::size_t> task_index_;
  std::vector<std::size_t> votes_per_task_;
  std::vector<std::size_t> pending_per_task_;
  std::set<std::pair<std::string, std::string>> voted_;  // (task, annotator)
  std::map<std::pair<std::string, std::string>, double> issued_;
};

}  // namespace motif::anno
