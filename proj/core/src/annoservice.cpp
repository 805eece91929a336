// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/annoservice.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "motif/error.hpp"
#include "motif/rng.hpp"

namespace motif::anno {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr std::array<std::string_view, kAxisCount> kAxisNames = {
    "object_motion", "text_alignment", "image_alignment", "overall_quality"};

}  // namespace

std::string_view to_string(Choice c) { return c == Choice::kLeft ? "left" : "right"; }

Choice parse_choice(std::string_view text) {
  if (text == "left") return Choice::kLeft;
  if (text == "right") return Choice::kRight;
  throw FormatError("choice must be 'left' or 'right', got '" + std::string(text) + "'");
}

std::string_view to_string(Axis a) { return kAxisNames[static_cast<int>(a)]; }

Axis parse_axis(std::string_view text) {
  for (int i = 0; i < kAxisCount; ++i) {
    if (kAxisNames[i] == text) return static_cast<Axis>(i);
  }
  throw FormatError("unknown justification axis '" + std::string(text) + "'");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kAccepted:
      return "accepted";
    case Verdict::kUnderTime:
      return "under_time";
    case Verdict::kDuplicate:
      return "duplicate";
    case Verdict::kEmptyJustification:
      return "empty_justification";
    case Verdict::kTaskFull:
      return "task_full";
    case Verdict::kUnknownTask:
      return "unknown_task";
    case Verdict::kNotAssigned:
      return "not_assigned";
  }
  return "unknown";
}

SessionConfig session_config_from_json(const json& j) {
  static const std::set<std::string> known = {"session_id", "model_x", "model_y", "pairs",
                                              "seed", "required_annotators", "min_watch_seconds"};
  static const std::set<std::string> pair_keys = {"image_id", "prompt_id", "prompt_text",
                                                  "image_ref", "video_x", "video_y"};
  if (!j.is_object()) throw FormatError("session config must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) throw FormatError("unknown session config key '" + k + "'");
  }
  SessionConfig c;
  try {
    c.session_id = j.value("session_id", c.session_id);
    c.model_x = j.at("model_x").get<std::string>();
    c.model_y = j.at("model_y").get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.required_annotators = j.value("required_annotators", c.required_annotators);
    c.min_watch_seconds = j.value("min_watch_seconds", c.min_watch_seconds);
    for (const auto& p : j.at("pairs")) {
      for (const auto& [k, _] : p.items()) {
        if (!pair_keys.contains(k)) throw FormatError("unknown pair key '" + k + "'");
      }
      PairSpec s;
      s.image_id = p.at("image_id").get<std::string>();
      s.prompt_id = p.at("prompt_id").get<std::string>();
      s.prompt_text = p.value("prompt_text", "");
      s.image_ref = p.value("image_ref", "");
      s.video_x = p.at("video_x").get<std::string>();
      s.video_y = p.at("video_y").get<std::string>();
      c.pairs.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("session config: ") + e.what());
  }
  require(c.required_annotators >= 1, "session config: required_annotators must be >= 1");
  require(c.min_watch_seconds >= 0.0, "session config: min_watch_seconds must be >= 0");
  return c;
}

namespace {

ojson pair_json(const PairSpec& p) {
  return {{"image_id", p.image_id},   {"prompt_id", p.prompt_id}, {"prompt_text", p.prompt_text},
          {"image_ref", p.image_ref}, {"video_x", p.video_x},     {"video_y", p.video_y}};
}

PairSpec pair_from_json(const json& p) {
  PairSpec s;
  s.image_id = p.at("image_id").get<std::string>();
  s.prompt_id = p.at("prompt_id").get<std::string>();
  s.prompt_text = p.at("prompt_text").get<std::string>();
  s.image_ref = p.at("image_ref").get<std::string>();
  s.video_x = p.at("video_x").get<std::string>();
  s.video_y = p.at("video_y").get<std::string>();
  return s;
}

}  // namespace

ojson to_json(const SessionConfig& c) {
  ojson j;
  j["session_id"] = c.session_id;
  j["model_x"] = c.model_x;
  j["model_y"] = c.model_y;
  j["seed"] = c.seed;
  j["required_annotators"] = c.required_annotators;
  j["min_watch_seconds"] = c.min_watch_seconds;
  j["pairs"] = ojson::array();
  for (const auto& p : c.pairs) j["pairs"].push_back(pair_json(p));
  return j;
}

const PairTask* Session::find(std::string_view task_id) const {
  for (const auto& t : tasks) {
    if (t.task_id == task_id) return &t;
  }
  return nullptr;
}

Session build_session(const SessionConfig& config, const AssetCheck& exists) {
  Session s;
  s.id = config.session_id.empty() ? "session-" + std::to_string(mix_seed(config.seed, 99) % 1000000)
                                   : config.session_id;
  s.model_x = config.model_x;
  s.model_y = config.model_y;
  s.seed = config.seed;
  s.required_annotators = config.required_annotators;
  s.min_watch_seconds = config.min_watch_seconds;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : config.pairs) {
    const std::string key = p.image_id + "/" + p.prompt_id;
    if (!seen.insert({p.image_id, p.prompt_id}).second) {
      throw ContractError("session config: duplicate pair " + key);
    }
    if (exists && (!exists(p.video_x) || !exists(p.video_y) ||
                   (!p.image_ref.empty() && !exists(p.image_ref)))) {
      s.excluded.push_back(key);
      continue;
    }
    PairTask t;
    t.task_id = "t" + std::to_string(s.tasks.size());
    t.pair = p;
    t.required_annotators = config.required_annotators;
    t.min_watch_seconds = config.min_watch_seconds;
    s.tasks.push_back(std::move(t));
  }
  std::vector<char> swaps(s.tasks.size(), 0);
  std::fill(swaps.begin(), swaps.begin() + static_cast<std::ptrdiff_t>(swaps.size() / 2), 1);
  Rng rng(mix_seed(config.seed, 7));
  std::shuffle(swaps.begin(), swaps.end(), rng.engine());
  for (std::size_t i = 0; i < s.tasks.size(); ++i) s.tasks[i].swapped = swaps[i] != 0;
  return s;
}

ojson to_json(const VoteRecord& v) {
  ojson j;
  j["task_id"] = v.task_id;
  j["annotator"] = v.annotator;
  j["choice"] = to_string(v.choice);
  j["justifications"] = ojson::array();
  for (Axis a : v.justifications) j["justifications"].push_back(to_string(a));
  j["watch_seconds"] = v.watch_seconds;
  j["timestamp"] = v.timestamp;
  return j;
}

VoteRecord vote_from_json(const json& j) {
  static const std::set<std::string> known = {"task_id",        "annotator",     "choice",
                                              "justifications", "watch_seconds", "timestamp", "type"};
  if (!j.is_object()) throw FormatError("vote must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) throw FormatError("unknown vote key '" + k + "'");
  }
  VoteRecord v;
  try {
    v.task_id = j.at("task_id").get<std::string>();
    v.annotator = j.at("annotator").get<std::string>();
    v.choice = parse_choice(j.at("choice").get<std::string>());
    for (const auto& a : j.value("justifications", json::array())) {
      v.justifications.push_back(parse_axis(a.get<std::string>()));
    }
    v.watch_seconds = j.at("watch_seconds").get<double>();
    v.timestamp = j.value("timestamp", 0.0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("vote: ") + e.what());
  }
  return v;
}

AggregateResult aggregate(const Session& session, const std::vector<VoteRecord>& votes) {
  AggregateResult a;
  a.model_x = session.model_x;
  a.model_y = session.model_y;
  a.tasks_total = session.tasks.size();
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // task -> (x, y)
  std::array<std::size_t, kAxisCount> ax{}, ay{};
  for (const auto& v : votes) {
    const PairTask* t = session.find(v.task_id);
    if (t == nullptr) continue;
    const bool for_x = t->choice_is_x(v.choice);
    auto& [x, y] = tally[v.task_id];
    (for_x ? x : y) += 1;
    (for_x ? a.votes_x : a.votes_y) += 1;
    ++a.votes;
    std::set<Axis> named(v.justifications.begin(), v.justifications.end());
    for (Axis axis : named) (for_x ? ax : ay)[static_cast<int>(axis)] += 1;
  }
  for (const auto& t : session.tasks) {
    const auto it = tally.find(t.task_id);
    const std::size_t x = it == tally.end() ? 0 : it->second.first;
    const std::size_t y = it == tally.end() ? 0 : it->second.second;
    if (x + y < static_cast<std::size_t>(t.required_annotators)) {
      ++a.tasks_incomplete;
      continue;
    }
    ++a.tasks_complete;
    if (x > y) {
      ++a.wins_x;
    } else if (y > x) {
      ++a.wins_y;
    } else {
      ++a.tasks_tied;
    }
  }
  const std::size_t decided = a.wins_x + a.wins_y;
  if (decided > 0) {
    a.score_x = 100.0 * static_cast<double>(a.wins_x) / static_cast<double>(decided);
    a.score_y = 100.0 * static_cast<double>(a.wins_y) / static_cast<double>(decided);
  }
  if (a.votes > 0) {
    for (int i = 0; i < kAxisCount; ++i) {
      a.axis_x[i] = 100.0 * static_cast<double>(ax[i]) / static_cast<double>(a.votes);
      a.axis_y[i] = 100.0 * static_cast<double>(ay[i]) / static_cast<double>(a.votes);
    }
  }
  return a;
}

ojson to_json(const AggregateResult& a) {
  ojson j;
  j["model_x"] = a.model_x;
  j["model_y"] = a.model_y;
  j["tasks_total"] = a.tasks_total;
  j["tasks_complete"] = a.tasks_complete;
  j["tasks_incomplete"] = a.tasks_incomplete;
  j["tasks_tied"] = a.tasks_tied;
  j["wins_x"] = a.wins_x;
  j["wins_y"] = a.wins_y;
  j["score_x"] = a.score_x;
  j["score_y"] = a.score_y;
  j["votes"] = a.votes;
  j["votes_x"] = a.votes_x;
  j["votes_y"] = a.votes_y;
  ojson axes_x, axes_y;
  for (int i = 0; i < kAxisCount; ++i) {
    axes_x[std::string(kAxisNames[i])] = a.axis_x[i];
    axes_y[std::string(kAxisNames[i])] = a.axis_y[i];
  }
  j["axis_x"] = axes_x;
  j["axis_y"] = axes_y;
  return j;
}

std::string render_aggregate(const AggregateResult& a) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "TI2V score  %s %.1f%% / %s %.1f%%  (%zu vs %zu wins, %zu decided, %zu incomplete)\n",
                a.model_x.c_str(), a.score_x, a.model_y.c_str(), a.score_y, a.wins_x, a.wins_y,
                a.wins_x + a.wins_y, a.tasks_incomplete);
  out << line;
  for (int i = 0; i < kAxisCount; ++i) {
    std::snprintf(line, sizeof line, "  %-16s %5.1f / %5.1f\n", std::string(kAxisNames[i]).c_str(),
                  a.axis_x[i], a.axis_y[i]);
    out << line;
  }
  return out.str();
}

ojson session_header(const Session& s) {
  ojson j;
  j["type"] = "session";
  j["id"] = s.id;
  j["model_x"] = s.model_x;
  j["model_y"] = s.model_y;
  j["seed"] = s.seed;
  j["required_annotators"] = s.required_annotators;
  j["min_watch_seconds"] = s.min_watch_seconds;
  j["tasks"] = ojson::array();
  for (const auto& t : s.tasks) {
    ojson tj = pair_json(t.pair);
    tj["task_id"] = t.task_id;
    tj["swapped"] = t.swapped;
    j["tasks"].push_back(tj);
  }
  j["excluded"] = s.excluded;
  return j;
}

Session session_from_header(const json& j) {
  Session s;
  try {
    if (j.at("type").get<std::string>() != "session") throw FormatError("log does not start with a session header");
    s.id = j.at("id").get<std::string>();
    s.model_x = j.at("model_x").get<std::string>();
    s.model_y = j.at("model_y").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.required_annotators = j.at("required_annotators").get<int>();
    s.min_watch_seconds = j.at("min_watch_seconds").get<double>();
    for (const auto& tj : j.at("tasks")) {
      PairTask t;
      t.task_id = tj.at("task_id").get<std::string>();
      t.pair = pair_from_json(tj);
      t.swapped = tj.at("swapped").get<bool>();
      t.required_annotators = s.required_annotators;
      t.min_watch_seconds = s.min_watch_seconds;
      s.tasks.push_back(std::move(t));
    }
    s.excluded = j.value("excluded", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw FormatError(std::string("session header: ") + e.what());
  }
  return s;
}

SessionLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vote log " + path.string());
  SessionLog log;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!header) {
      log.session = session_from_header(j);
      header = true;
      continue;
    }
    if (j.value("type", "") != "vote") {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected a vote line");
    }
    log.votes.push_back(vote_from_json(j));
  }
  if (!header) throw FormatError(path.string() + ": empty vote log");
  return log;
}

Clock steady_clock_seconds() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

Service::Service(Session session, std::filesystem::path log_path, Clock clock)
    : Service(std::move(session), std::move(log_path), std::move(clock), true) {}

Service::Service(Session session, std::filesystem::path log_path, Clock clock, bool truncate)
    : session_(std::move(session)), log_path_(std::move(log_path)), clock_(std::move(clock)) {
  for (std::size_t i = 0; i < session_.tasks.size(); ++i) task_index_[session_.tasks[i].task_id] = i;
  votes_per_task_.assign(session_.tasks.size(), 0);
  pending_per_task_.assign(session_.tasks.size(), 0);
  log_.open(log_path_, truncate ? std::ios::trunc : std::ios::app);
  if (!log_) throw std::runtime_error("cannot write vote log " + log_path_.string());
  if (truncate) append(session_header(session_));
}

std::unique_ptr<Service> Service::replay(const std::filesystem::path& log_path, Clock clock) {
  SessionLog log = read_log(log_path);
  auto svc = std::unique_ptr<Service>(new Service(log.session, log_path, std::move(clock), false));
  for (const auto& v : log.votes) {
    const auto it = svc->task_index_.find(v.task_id);
    if (it == svc->task_index_.end()) throw FormatError("vote log references unknown task " + v.task_id);
    if (!svc->voted_.insert({v.task_id, v.annotator}).second) {
      throw FormatError("vote log has a duplicate vote for " + v.task_id + "/" + v.annotator);
    }
    ++svc->votes_per_task_[it->second];
    svc->votes_.push_back(v);
  }
  return svc;
}

void Service::append(const ojson& line) {
  log_ << line.dump() << '\n';
  log_.flush();
  if (!log_) throw std::runtime_error("failed appending to vote log " + log_path_.string());
}

std::optional<PairTask> Service::next_task(const std::string& annotator) {
  std::lock_guard lock(mu_);
  for (const auto& [key, _] : issued_) {
    if (key.second == annotator && !voted_.contains(key)) {
      const std::size_t i = task_index_.at(key.first);
      if (votes_per_task_[i] < static_cast<std::size_t>(session_.tasks[i].required_annotators)) {
        return session_.tasks[i];
      }
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < session_.tasks.size(); ++i) {
    const auto& t = session_.tasks[i];
    if (votes_per_task_[i] >= static_cast<std::size_t>(t.required_annotators)) continue;
    if (voted_.contains({t.task_id, annotator})) continue;
    const std::size_t load = votes_per_task_[i] + pending_per_task_[i];
    if (!best || load < votes_per_task_[*best] + pending_per_task_[*best]) best = i;
  }
  if (!best) return std::nullopt;
  const auto& t = session_.tasks[*best];
  issued_[{t.task_id, annotator}] = clock_();
  ++pending_per_task_[*best];
  return t;
}

Verdict Service::submit(const VoteRecord& vote) {
  std::lock_guard lock(mu_);
  const auto it = task_index_.find(vote.task_id);
  if (it == task_index_.end()) return Verdict::kUnknownTask;
  const PairTask& task = session_.tasks[it->second];
  const std::pair<std::string, std::string> key{vote.task_id, vote.annotator};
  if (voted_.contains(key)) return Verdict::kDuplicate;
  if (vote.justifications.empty()) return Verdict::kEmptyJustification;
  const auto issued = issued_.find(key);
  if (issued == issued_.end()) return Verdict::kNotAssigned;
  // Server-side elapsed time is authoritative; the client's figure must agree.
  const double elapsed = clock_() - issued->second;
  if (vote.watch_seconds < task.min_watch_seconds || elapsed < task.min_watch_seconds) {
    return Verdict::kUnderTime;
  }
  if (votes_per_task_[it->second] >= static_cast<std::size_t>(task.required_annotators)) {
    return Verdict::kTaskFull;
  }
  VoteRecord stored = vote;
  std::sort(stored.justifications.begin(), stored.justifications.end());
  stored.justifications.erase(std::unique(stored.justifications.begin(), stored.justifications.end()),
                              stored.justifications.end());
  if (stored.timestamp == 0.0) stored.timestamp = clock_();
  ojson line = to_json(stored);
  line["type"] = "vote";
  append(line);
  voted_.insert(key);
  ++votes_per_task_[it->second];
  --pending_per_task_[it->second];
  votes_.push_back(std::move(stored));
  return Verdict::kAccepted;
}

AggregateResult Service::aggregate() const {
  std::lock_guard lock(mu_);
  return anno::aggregate(session_, votes_);
}

std::vector<VoteRecord> Service::votes() const {
  std::lock_guard lock(mu_);
  return votes_;
}

std::size_t Service::vote_count(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  const auto it = task_index_.find(task_id);
  return it == task_index_.end() ? 0 : votes_per_task_[it->second];
}

}  // namespace motif::anno
