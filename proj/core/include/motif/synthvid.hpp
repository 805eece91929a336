// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "motif/tensor.hpp"

namespace motif {

// ---------------------------------------------------------------------------
// Prompt vocabulary

enum class Verb {
  kLeft,
  kRight,
  kUp,
  kDown,
  kUpLeft,
  kUpRight,
  kDownLeft,
  kDownRight,
  kGrow,
  kShrink,
  kEnter,
  kStatic,
};
inline constexpr int kVerbCount = 12;

enum class Speed { kSlow, kFast };
inline constexpr int kSpeedCount = 2;

enum class Color { kRed, kGreen, kBlue, kYellow, kMagenta, kCyan };
inline constexpr int kColorCount = 6;

enum class Shape { kSquare, kDisc, kDiamond };
inline constexpr int kShapeCount = 3;

std::string_view verb_name(Verb v);
Verb parse_verb(std::string_view text);
std::string_view speed_name(Speed s);
Speed parse_speed(std::string_view text);
std::string_view color_name(Color c);
Color parse_color(std::string_view text);
std::string_view shape_name(Shape s);

bool is_translation(Verb v);
// Unit direction in image coordinates (x right, y down); zero for
// non-translation verbs.
std::array<double, 2> verb_direction(Verb v);
// The nine verbs the motion-direction classifier distinguishes.
const std::vector<Verb>& classifier_verbs();
const std::vector<Verb>& all_verbs();

struct PromptSpec {
  int scenario_id = 0;
  Color selector = Color::kRed;
  Verb verb = Verb::kStatic;
  Speed speed = Speed::kSlow;

  int embedding_index() const;
  std::string text(Shape shape) const;
  bool operator==(const PromptSpec&) const = default;
};

// Inverse of PromptSpec::text. The shape word is accepted but not kept, and a
// prompt without a speed adverb reads as slow.
PromptSpec parse_prompt_text(std::string_view text);

// Structured prompt encoding: index = (selector * verbs + verb) * speeds + speed.
// The null token used for guidance dropout sits at index size().
struct PromptVocab {
  static constexpr int size() { return kColorCount * kVerbCount * kSpeedCount; }
  static constexpr int null_index() { return size(); }
  static constexpr int embedding_dim() { return kColorCount + kVerbCount + kSpeedCount; }
  // (size()+1) x embedding_dim() rows of one-hot selector | verb | speed
  // features; the null row is zero. Used to seed the learned prompt table.
  static std::vector<double> structured_table();
};

// ---------------------------------------------------------------------------
// Scenarios

struct BackgroundStyle {
  std::string name;
  std::array<double, 3> low;
  std::array<double, 3> high;
  int cells = 4;  // value-noise lattice cells across the frame
};

const std::vector<BackgroundStyle>& background_styles();

struct Sprite {
  Shape shape = Shape::kSquare;
  Color color = Color::kRed;
  double size = 8.0;   // extent in px at scale 1
  double x = 0.0;      // start centre, px
  double y = 0.0;
  bool enters = false;  // absent from frame 0, appears only under an enter prompt
  int enter_side = 0;   // 0 left, 1 right, 2 top, 3 bottom
};

struct VideoConfig {
  int frames = 8;
  int height = 32;
  int width = 32;
  double slow_px = 1.0;  // px per frame
  double fast_px = 2.0;
  double slow_scale_rate = 0.04;  // grow/shrink: relative size change per frame
  double fast_scale_rate = 0.08;
  int stride = 1;        // frame stride: multiplies per-frame motion
  int enter_frame = 2;   // first frame an entering sprite is visible

  double speed_px(Speed s) const { return (s == Speed::kSlow ? slow_px : fast_px) * stride; }
  double scale_rate(Speed s) const {
    return (s == Speed::kSlow ? slow_scale_rate : fast_scale_rate) * stride;
  }
  void validate() const;
};

struct Scenario {
  int id = 0;
  std::string name;
  std::vector<int> backgrounds;  // indices into background_styles(), >= 3
  std::vector<Sprite> sprites;
  std::vector<PromptSpec> prompts;
  bool multi_object = false;
  bool novel_object = false;

  const Sprite& target(const PromptSpec& p) const;
  bool applicable(const PromptSpec& p, const VideoConfig& video) const;
};

// ---------------------------------------------------------------------------
// Clips

struct Clip {
  Video video;            // L x H x W x 3, values in [0,1]
  Tensor4<double> flow;   // (L-1) x H x W x 2, exact displacement l -> l+1 (px)
  Tensor4<double> mask;   // L x H x W x 1, 1 where the prompted sprite moves
  PromptSpec prompt;
  std::uint64_t seed = 0;
};

// Renders the scenario under the prompt. The seed picks the background style
// and noise; sprite poses come from the scenario.
Clip gen_clip(const Scenario& scenario, const PromptSpec& prompt, std::uint64_t seed,
              const VideoConfig& video);

// A one-off scenario whose single prompt (verb, speed) is executable.
Scenario random_scenario_for(Verb verb, Speed speed, const VideoConfig& video, int max_sprites,
                             std::uint64_t seed);

struct DatasetConfig {
  VideoConfig video;
  std::size_t size = 0;
  std::vector<Verb> verbs = all_verbs();
  int max_sprites = 3;
};

// Deterministic stream of training clips. Verbs are dealt in seeded
// permutations of `verbs`, so classes stay balanced at every prefix that is a
// multiple of verbs.size().
class ClipStream {
 public:
  ClipStream(DatasetConfig config, std::uint64_t seed);
  bool done() const { return index_ >= config_.size; }
  std::size_t index() const { return index_; }
  Clip next();
  // Clip at an absolute position, independent of iteration state.
  Clip at(std::size_t i) const;

 private:
  Verb verb_at(std::size_t i) const;
  DatasetConfig config_;
  std::uint64_t seed_;
  std::size_t index_ = 0;
};

ClipStream gen_dataset(const DatasetConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Benchmark

struct BenchConfig {
  VideoConfig video;
  int scenarios = 22;
  int images_per_scenario = 4;
  // When > 0, prompts per scenario are spread so the grid totals this many
  // pairs; otherwise each scenario draws 3..5 prompts.
  int target_pairs = 320;
  std::vector<Verb> verbs = all_verbs();
  int max_sprites = 3;
};

struct BenchRecord {
  std::string image_id;
  std::string start_frame;  // path of the rendered start frame, relative to the manifest
  std::string prompt_id;
  std::string prompt_text;
  int scenario_id = 0;
  std::string selector;
  std::string verb;
  std::string speed;
  int embedding_index = 0;
  std::uint64_t image_seed = 0;
  bool operator==(const BenchRecord&) const = default;
};

struct BenchCounts {
  std::size_t pairs = 0, images = 0, prompts = 0, unique_prompt_texts = 0, scenarios = 0;
};

struct BenchManifest {
  std::vector<BenchRecord> records;
  BenchCounts counts() const;
  bool operator==(const BenchManifest&) const = default;
};

struct Bench {
  BenchManifest manifest;
  std::vector<Scenario> scenarios;
  // Start frames keyed by image id, in manifest order of first appearance.
  std::vector<std::pair<std::string, Video>> start_frames;

  const Video& start_frame(const std::string& image_id) const;
  const Scenario& scenario(int id) const;
  PromptSpec prompt(const BenchRecord& r) const;
};

Bench build_bench(const BenchConfig& config, std::uint64_t seed);

// Keeps only pairs whose verb is in `verbs`.
BenchManifest filter_verbs(const BenchManifest& manifest, const std::vector<Verb>& verbs);

// JSON-lines, one record per pair, fields in BenchRecord order.
void write_manifest(const std::filesystem::path& path, const BenchManifest& manifest);
BenchManifest read_manifest(const std::filesystem::path& path);
std::string manifest_to_string(const BenchManifest& manifest);
BenchManifest manifest_from_string(const std::string& text);

// Writes manifest.jsonl plus images/<image_id>.clip under `dir`.
void write_bench(const std::filesystem::path& dir, const Bench& bench);
// Manifest and start frames written by write_bench; scenarios are not stored.
Bench read_bench(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Clip container
//
//   "MOTIFCLP" | u32 version | u32 frames | u32 height | u32 width |
//   u32 channels | u64 seed | f64 payload[frames*height*width*channels]
//
// Flow fields and heatmaps use the same layout with 2 and 1 channels.

inline constexpr std::uint32_t kClipVersion = 1;

struct ClipFile {
  Tensor4<double> data;
  std::uint64_t seed = 0;
};

void write_clip(const std::filesystem::path& path, const Tensor4<double>& data,
                std::uint64_t seed = 0);
ClipFile read_clip(const std::filesystem::path& path);

// 8-bit binary PPM/PGM preview, one file per frame: <prefix>_<frame>.ppm.
void export_frames(const std::filesystem::path& prefix, const Tensor4<double>& data);

}  // namespace motif
