// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/synthvid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "motif/binary_io.hpp"
#include "motif/rng.hpp"

namespace motif {

namespace {

constexpr std::array<std::string_view, kVerbCount> kVerbNames = {
    "left", "right", "up", "down", "up_left", "up_right", "down_left", "down_right",
    "grow", "shrink", "enter", "static"};
constexpr std::array<std::string_view, kVerbCount> kVerbPhrases = {
    "moves left",      "moves right",      "moves up",     "moves down",
    "moves up-left",   "moves up-right",   "moves down-left", "moves down-right",
    "grows",           "shrinks",          "enters the scene", "stays still"};
constexpr std::array<std::string_view, kSpeedCount> kSpeedNames = {"slow", "fast"};
constexpr std::array<std::string_view, kColorCount> kColorNames = {"red",    "green",  "blue",
                                                                   "yellow", "magenta", "cyan"};
constexpr std::array<std::string_view, kShapeCount> kShapeNames = {"square", "disc", "diamond"};

constexpr std::array<std::array<double, 3>, kColorCount> kColorRgb = {{
    {0.80, 0.20, 0.20},
    {0.25, 0.75, 0.25},
    {0.20, 0.30, 0.80},
    {0.80, 0.78, 0.22},
    {0.78, 0.25, 0.75},
    {0.22, 0.75, 0.78},
}};

// Shading is bilinear in sprite-local coordinates, so bilinear resampling of
// a translated or scaled sprite interior is exact.
constexpr std::array<double, 3> kShadeX = {0.08, 0.05, -0.06};
constexpr std::array<double, 3> kShadeY = {-0.05, 0.08, 0.06};
constexpr std::array<double, 3> kShadeXY = {0.06, -0.06, 0.08};

const std::array<std::string_view, 22> kScenarioNames = {
    "balloons",  "billiards", "aquarium",   "kites",     "marbles",   "playground",
    "harbor",    "orchard",   "snowfall",   "traffic",   "garden",    "beach",
    "workshop",  "skyline",   "pond",       "farmyard",  "stage",     "library",
    "riverbank", "market",    "courtyard",  "meadow"};

template <std::size_t N>
std::size_t lookup(const std::array<std::string_view, N>& names, std::string_view text,
                   const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return i;
  }
  throw FormatError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

std::string_view verb_name(Verb v) { return kVerbNames[static_cast<int>(v)]; }
Verb parse_verb(std::string_view t) { return static_cast<Verb>(lookup(kVerbNames, t, "verb")); }
std::string_view speed_name(Speed s) { return kSpeedNames[static_cast<int>(s)]; }
Speed parse_speed(std::string_view t) { return static_cast<Speed>(lookup(kSpeedNames, t, "speed")); }
std::string_view color_name(Color c) { return kColorNames[static_cast<int>(c)]; }
Color parse_color(std::string_view t) { return static_cast<Color>(lookup(kColorNames, t, "color")); }
std::string_view shape_name(Shape s) { return kShapeNames[static_cast<int>(s)]; }

bool is_translation(Verb v) { return static_cast<int>(v) <= static_cast<int>(Verb::kDownRight); }

std::array<double, 2> verb_direction(Verb v) {
  constexpr double d = 0.70710678118654752440;
  switch (v) {
    case Verb::kLeft:
      return {-1.0, 0.0};
    case Verb::kRight:
      return {1.0, 0.0};
    case Verb::kUp:
      return {0.0, -1.0};
    case Verb::kDown:
      return {0.0, 1.0};
    case Verb::kUpLeft:
      return {-d, -d};
    case Verb::kUpRight:
      return {d, -d};
    case Verb::kDownLeft:
      return {-d, d};
    case Verb::kDownRight:
      return {d, d};
    default:
      return {0.0, 0.0};
  }
}

const std::vector<Verb>& classifier_verbs() {
  static const std::vector<Verb> v = {Verb::kLeft,     Verb::kRight,     Verb::kUp,
                                      Verb::kDown,     Verb::kUpLeft,    Verb::kUpRight,
                                      Verb::kDownLeft, Verb::kDownRight, Verb::kStatic};
  return v;
}

const std::vector<Verb>& all_verbs() {
  static const std::vector<Verb> v = [] {
    std::vector<Verb> out;
    for (int i = 0; i < kVerbCount; ++i) out.push_back(static_cast<Verb>(i));
    return out;
  }();
  return v;
}

int PromptSpec::embedding_index() const {
  return (static_cast<int>(selector) * kVerbCount + static_cast<int>(verb)) * kSpeedCount +
         static_cast<int>(speed);
}

std::string PromptSpec::text(Shape shape) const {
  std::string s = verb == Verb::kEnter ? "a " : "the ";
  s += std::string(color_name(selector)) + " " + std::string(shape_name(shape)) + " " +
       std::string(kVerbPhrases[static_cast<int>(verb)]);
  if (verb != Verb::kStatic) s += speed == Speed::kSlow ? " slowly" : " quickly";
  return s;
}

PromptSpec parse_prompt_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  const auto bad = [&] { return FormatError("cannot parse prompt '" + std::string(text) + "'"); };
  if (words.size() < 4 || (words[0] != "the" && words[0] != "a")) throw bad();
  PromptSpec p;
  try {
    p.selector = parse_color(words[1]);
  } catch (const FormatError&) {
    throw bad();
  }
  std::size_t end = words.size();
  if (words.back() == "slowly" || words.back() == "quickly") {
    p.speed = words.back() == "slowly" ? Speed::kSlow : Speed::kFast;
    --end;
  }
  std::string phrase;
  for (std::size_t i = 3; i < end; ++i) phrase += (i > 3 ? " " : "") + words[i];
  const auto it = std::find(kVerbPhrases.begin(), kVerbPhrases.end(), phrase);
  if (it == kVerbPhrases.end()) throw bad();
  p.verb = static_cast<Verb>(it - kVerbPhrases.begin());
  return p;
}

std::vector<double> PromptVocab::structured_table() {
  const int dim = embedding_dim();
  std::vector<double> table(static_cast<std::size_t>(size() + 1) * dim, 0.0);
  for (int c = 0; c < kColorCount; ++c) {
    for (int v = 0; v < kVerbCount; ++v) {
      for (int s = 0; s < kSpeedCount; ++s) {
        const PromptSpec p{0, static_cast<Color>(c), static_cast<Verb>(v), static_cast<Speed>(s)};
        double* row = table.data() + static_cast<std::size_t>(p.embedding_index()) * dim;
        row[c] = 1.0;
        row[kColorCount + v] = 1.0;
        row[kColorCount + kVerbCount + s] = 1.0;
      }
    }
  }
  return table;
}

const std::vector<BackgroundStyle>& background_styles() {
  static const std::vector<BackgroundStyle> styles = {
      {"meadow", {0.30, 0.45, 0.25}, {0.55, 0.70, 0.40}, 4},
      {"dusk", {0.35, 0.25, 0.45}, {0.70, 0.50, 0.45}, 3},
      {"sand", {0.55, 0.50, 0.35}, {0.85, 0.78, 0.60}, 5},
      {"slate", {0.30, 0.32, 0.36}, {0.60, 0.62, 0.66}, 4},
      {"ocean", {0.15, 0.35, 0.50}, {0.40, 0.60, 0.75}, 3},
  };
  return styles;
}

void VideoConfig::validate() const {
  require(frames >= 2 && height >= 4 && width >= 4, "VideoConfig: need >= 2 frames and >= 4x4 px");
  require(slow_px > 0 && fast_px > 0 && stride >= 1, "VideoConfig: speeds and stride must be positive");
  require(enter_frame >= 1 && enter_frame < frames, "VideoConfig: enter_frame out of range");
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct Pose {
  double x = 0, y = 0, scale = 1;
  bool visible = true;
};

double half_extent(const Sprite& s) { return s.size * (s.shape == Shape::kDiamond ? 0.6 : 0.5); }

bool inside_shape(Shape shape, double qx, double qy, double r) {
  switch (shape) {
    case Shape::kSquare:
      return std::abs(qx) <= r && std::abs(qy) <= r;
    case Shape::kDisc:
      return qx * qx + qy * qy <= r * r;
    case Shape::kDiamond:
      return std::abs(qx) + std::abs(qy) <= 1.2 * r;
  }
  return false;
}

// Sprite-local coordinates of a pixel centre.
std::array<double, 2> local(const Pose& pose, double px, double py) {
  return {(px - pose.x) / pose.scale, (py - pose.y) / pose.scale};
}

// Coverage: bilinear interpolation of the shape sampled on a half-integer
// lattice in sprite-local coordinates.
double coverage(const Sprite& s, const Pose& pose, double px, double py) {
  const auto [qx, qy] = local(pose, px, py);
  const double r = s.size * 0.5;
  const double ux = qx - 0.5, uy = qy - 0.5;
  const double x0 = std::floor(ux), y0 = std::floor(uy);
  const double fx = ux - x0, fy = uy - y0;
  auto at = [&](double i, double j) { return inside_shape(s.shape, i + 0.5, j + 0.5, r) ? 1.0 : 0.0; };
  return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
         fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
}

std::array<double, 3> sprite_color(const Sprite& s, const Pose& pose, double px, double py) {
  const auto [qx, qy] = local(pose, px, py);
  const double r = s.size * 0.5;
  const double a = qx / r, b = qy / r;
  std::array<double, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    rgb[c] = kColorRgb[static_cast<int>(s.color)][c] + kShadeX[c] * a + kShadeY[c] * b +
             kShadeXY[c] * a * b;
  }
  return rgb;
}

bool is_target(const Sprite& s, const PromptSpec& p) { return s.color == p.selector; }

Pose pose_at(const Sprite& s, const PromptSpec& p, int l, const VideoConfig& v) {
  Pose pose{s.x, s.y, 1.0, true};
  if (!is_target(s, p)) {
    pose.visible = !s.enters;
    return pose;
  }
  const double speed = v.speed_px(p.speed);
  switch (p.verb) {
    case Verb::kGrow:
      pose.scale = 1.0 + v.scale_rate(p.speed) * l;
      break;
    case Verb::kShrink:
      pose.scale = std::max(0.25, 1.0 - v.scale_rate(p.speed) * l);
      break;
    case Verb::kEnter: {
      pose.visible = l >= v.enter_frame;
      const double r = half_extent(s);
      const double travel = speed * (l - v.enter_frame + 1);
      switch (s.enter_side) {
        case 0:
          pose.x = -r + travel;
          break;
        case 1:
          pose.x = v.width + r - travel;
          break;
        case 2:
          pose.y = -r + travel;
          break;
        default:
          pose.y = v.height + r - travel;
          break;
      }
      break;
    }
    case Verb::kStatic:
      break;
    default: {
      const auto d = verb_direction(p.verb);
      pose.x += d[0] * speed * l;
      pose.y += d[1] * speed * l;
    }
  }
  return pose;
}

// Displacement l -> l+1 of a point of the target sprite at pixel (px, py).
std::array<double, 2> velocity(const Sprite& s, const PromptSpec& p, int l, double px, double py,
                               const VideoConfig& v) {
  const Pose a = pose_at(s, p, l, v);
  const Pose b = pose_at(s, p, l + 1, v);
  if (!a.visible || !b.visible) return {0, 0};
  const double k = b.scale / a.scale;
  return {b.x + k * (px - a.x) - px, b.y + k * (py - a.y) - py};
}

void render_background(const BackgroundStyle& style, std::uint64_t seed, int height, int width,
                       std::vector<std::array<double, 3>>& out) {
  Rng rng(seed);
  auto lattice = [&](int cells) {
    std::vector<double> g(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (double& x : g) x = rng.uniform();
    return g;
  };
  const int c1 = style.cells, c2 = 2 * style.cells;
  const auto g1 = lattice(c1);
  const auto g2 = lattice(c2);
  auto sample = [](const std::vector<double>& g, int cells, double u, double v) {
    const double x = u * cells, y = v * cells;
    const int x0 = std::min(static_cast<int>(x), cells - 1), y0 = std::min(static_cast<int>(y), cells - 1);
    const double fx = smoothstep(x - x0), fy = smoothstep(y - y0);
    auto at = [&](int i, int j) { return g[static_cast<std::size_t>(j) * (cells + 1) + i]; };
    return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
           fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
  };
  out.resize(static_cast<std::size_t>(height) * width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double u = (j + 0.5) / width, v = (i + 0.5) / height;
      const double t = 0.7 * sample(g1, c1, u, v) + 0.3 * sample(g2, c2, u, v);
      for (int c = 0; c < 3; ++c) {
        out[static_cast<std::size_t>(i) * width + j][c] =
            style.low[c] + (style.high[c] - style.low[c]) * t;
      }
    }
  }
}

}  // namespace

const Sprite& Scenario::target(const PromptSpec& p) const {
  for (const auto& s : sprites) {
    if (s.color == p.selector) return s;
  }
  throw ContractError("scenario " + std::to_string(id) + " has no " +
                      std::string(color_name(p.selector)) + " sprite");
}

bool Scenario::applicable(const PromptSpec& p, const VideoConfig& v) const {
  const Sprite* t = nullptr;
  for (const auto& s : sprites) {
    if (s.color == p.selector) t = &s;
  }
  if (t == nullptr) return false;
  if ((p.verb == Verb::kEnter) != t->enters) return false;
  if (p.verb == Verb::kEnter || p.verb == Verb::kStatic || p.verb == Verb::kShrink) return true;
  // The target must stay fully inside the frame for every frame.
  for (int l = 0; l < v.frames; ++l) {
    const Pose pose = pose_at(*t, p, l, v);
    const double r = half_extent(*t) * pose.scale;
    if (pose.x - r < 0.0 || pose.x + r > v.width || pose.y - r < 0.0 || pose.y + r > v.height) {
      return false;
    }
  }
  return true;
}

Clip gen_clip(const Scenario& scenario, const PromptSpec& prompt, std::uint64_t seed,
              const VideoConfig& v) {
  v.validate();
  require(scenario.applicable(prompt, v),
          "gen_clip: prompt '" + std::string(verb_name(prompt.verb)) + "' on " +
              std::string(color_name(prompt.selector)) + " is not executable in scenario " +
              std::to_string(scenario.id));
  require(!scenario.backgrounds.empty(), "gen_clip: scenario has no background styles");

  const int L = v.frames, H = v.height, W = v.width;
  const auto& style = background_styles().at(
      scenario.backgrounds[seed % scenario.backgrounds.size()]);
  std::vector<std::array<double, 3>> bg;
  render_background(style, mix_seed(seed, 17), H, W, bg);

  Clip clip;
  clip.prompt = prompt;
  clip.seed = seed;
  clip.video = Video({L, H, W, 3});
  clip.flow = Tensor4<double>({L - 1, H, W, 2});
  clip.mask = Tensor4<double>({L, H, W, 1});

  // Target drawn last so it is never occluded.
  std::vector<const Sprite*> order;
  const Sprite* target = &scenario.target(prompt);
  for (const auto& s : scenario.sprites) {
    if (&s != target) order.push_back(&s);
  }
  order.push_back(target);
  const bool moving = prompt.verb != Verb::kStatic;

  for (int l = 0; l < L; ++l) {
    std::vector<Pose> poses;
    for (const Sprite* s : order) poses.push_back(pose_at(*s, prompt, l, v));
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        const double px = j + 0.5, py = i + 0.5;
        auto rgb = bg[static_cast<std::size_t>(i) * W + j];
        double target_alpha = 0.0;
        for (std::size_t k = 0; k < order.size(); ++k) {
          if (!poses[k].visible) continue;
          const double a = coverage(*order[k], poses[k], px, py);
          if (a <= 0.0) continue;
          const auto col = sprite_color(*order[k], poses[k], px, py);
          for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - a) * rgb[c] + a * col[c];
          if (order[k] == target) target_alpha = a;
        }
        for (int c = 0; c < 3; ++c) clip.video.at(l, i, j, c) = std::clamp(rgb[c], 0.0, 1.0);
        if (moving && target_alpha >= 0.5) {
          clip.mask.at(l, i, j) = 1.0;
          if (l < L - 1) {
            const auto d = velocity(*target, prompt, l, px, py, v);
            clip.flow.at(l, i, j, 0) = d[0];
            clip.flow.at(l, i, j, 1) = d[1];
          }
        }
      }
    }
  }
  return clip;
}

// ---------------------------------------------------------------------------
// Scenario construction

namespace {

std::vector<Color> draw_colors(Rng& rng, int n) {
  std::vector<int> idx(kColorCount);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  std::vector<Color> out;
  for (int i = 0; i < n && i < kColorCount; ++i) out.push_back(static_cast<Color>(idx[i]));
  return out;
}

Sprite draw_sprite(Rng& rng, Color color, const VideoConfig& v) {
  Sprite s;
  s.color = color;
  s.shape = static_cast<Shape>(rng.uniform_int(0, kShapeCount - 1));
  const double base = std::min(v.height, v.width);
  s.size = rng.uniform(0.18, 0.26) * base;
  return s;
}

// Bounding box of a sprite over the whole clip under a prompt.
struct Box {
  double x0, y0, x1, y1;
  bool overlaps(const Box& o, double pad) const {
    return x0 - pad < o.x1 && o.x0 - pad < x1 && y0 - pad < o.y1 && o.y0 - pad < y1;
  }
};

Box swept_box(const Sprite& s, const PromptSpec& p, const VideoConfig& v) {
  Box b{1e9, 1e9, -1e9, -1e9};
  for (int l = 0; l < v.frames; ++l) {
    const Pose pose = pose_at(s, p, l, v);
    if (!pose.visible && p.verb != Verb::kEnter) continue;
    const double r = half_extent(s) * pose.scale;
    b.x0 = std::min(b.x0, pose.x - r);
    b.y0 = std::min(b.y0, pose.y - r);
    b.x1 = std::max(b.x1, pose.x + r);
    b.y1 = std::max(b.y1, pose.y + r);
  }
  return b;
}

// Places a non-moving sprite fully inside the frame away from `avoid`.
bool place_static(Sprite& s, Rng& rng, const VideoConfig& v, const std::vector<Box>& avoid) {
  const double r = half_extent(s);
  for (int attempt = 0; attempt < 40; ++attempt) {
    s.x = rng.uniform(r, v.width - r);
    s.y = rng.uniform(r, v.height - r);
    const Box b{s.x - r, s.y - r, s.x + r, s.y + r};
    if (std::none_of(avoid.begin(), avoid.end(), [&](const Box& o) { return b.overlaps(o, 1.0); })) {
      return true;
    }
  }
  return false;
}

std::vector<int> draw_backgrounds(Rng& rng) {
  std::vector<int> idx(background_styles().size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(3);
  return idx;
}

}  // namespace

Scenario random_scenario_for(Verb verb, Speed speed, const VideoConfig& v, int max_sprites,
                             std::uint64_t seed) {
  v.validate();
  Rng rng(seed);
  Scenario sc;
  sc.id = -1;
  sc.name = "training";
  sc.backgrounds = draw_backgrounds(rng);
  const int n = rng.uniform_int(1, std::max(1, std::min(max_sprites, kColorCount)));
  const auto colors = draw_colors(rng, n);

  Sprite target = draw_sprite(rng, colors[0], v);
  const PromptSpec prompt{sc.id, target.color, verb, speed};
  if (verb == Verb::kEnter) {
    target.enters = true;
    target.enter_side = rng.uniform_int(0, 3);
    const double r = half_extent(target);
    target.x = rng.uniform(r, v.width - r);
    target.y = rng.uniform(r, v.height - r);
  } else {
    // Sample the start centre uniformly from the region that keeps the
    // whole trajectory in frame.
    const double r = half_extent(target);
    double lo_x = r, hi_x = v.width - r, lo_y = r, hi_y = v.height - r;
    if (is_translation(verb)) {
      const auto d = verb_direction(verb);
      const double travel = v.speed_px(speed) * (v.frames - 1);
      lo_x -= std::min(0.0, d[0] * travel);
      hi_x -= std::max(0.0, d[0] * travel);
      lo_y -= std::min(0.0, d[1] * travel);
      hi_y -= std::max(0.0, d[1] * travel);
    } else if (verb == Verb::kGrow) {
      const double grown = r * (1.0 + v.scale_rate(speed) * (v.frames - 1));
      lo_x = lo_y = grown;
      hi_x = v.width - grown;
      hi_y = v.height - grown;
    }
    require(lo_x <= hi_x && lo_y <= hi_y,
            "random_scenario_for: motion does not fit in the frame; reduce speed or frames");
    target.x = rng.uniform(lo_x, hi_x);
    target.y = rng.uniform(lo_y, hi_y);
  }
  sc.sprites.push_back(target);

  std::vector<Box> avoid = {swept_box(target, prompt, v)};
  for (int i = 1; i < n; ++i) {
    Sprite s = draw_sprite(rng, colors[i], v);
    if (place_static(s, rng, v, avoid)) {
      avoid.push_back({s.x - half_extent(s), s.y - half_extent(s), s.x + half_extent(s),
                       s.y + half_extent(s)});
      sc.sprites.push_back(s);
    }
  }
  sc.multi_object = sc.sprites.size() >= 2;
  sc.novel_object = verb == Verb::kEnter;
  sc.prompts = {prompt};
  return sc;
}

// ---------------------------------------------------------------------------
// Dataset

ClipStream::ClipStream(DatasetConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  config_.video.validate();
  require(!config_.verbs.empty(), "dataset: verb list is empty");
}

Verb ClipStream::verb_at(std::size_t i) const {
  const std::size_t k = config_.verbs.size();
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(mix_seed(seed_, 0x5eed0000ULL + i / k));
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  return config_.verbs[perm[i % k]];
}

Clip ClipStream::at(std::size_t i) const {
  const std::uint64_t clip_seed = mix_seed(seed_, i);
  Rng rng(clip_seed);
  const Verb verb = verb_at(i);
  const Speed speed = rng.bernoulli(0.5) ? Speed::kFast : Speed::kSlow;
  const Scenario sc =
      random_scenario_for(verb, speed, config_.video, config_.max_sprites, mix_seed(clip_seed, 1));
  return gen_clip(sc, sc.prompts.front(), mix_seed(clip_seed, 2), config_.video);
}

Clip ClipStream::next() {
  require(!done(), "ClipStream: exhausted");
  return at(index_++);
}

ClipStream gen_dataset(const DatasetConfig& config, std::uint64_t seed) {
  return ClipStream(config, seed);
}

// ---------------------------------------------------------------------------
// Benchmark

namespace {

bool verb_allowed(const BenchConfig& cfg, Verb v) {
  return std::find(cfg.verbs.begin(), cfg.verbs.end(), v) != cfg.verbs.end();
}

Scenario make_bench_scenario(int id, const BenchConfig& cfg, int prompt_count, bool multi,
                             bool novel, Rng& rng) {
  const VideoConfig& v = cfg.video;
  Scenario sc;
  sc.id = id;
  sc.name = std::string(kScenarioNames[id % kScenarioNames.size()]);
  if (id >= static_cast<int>(kScenarioNames.size())) sc.name += "_" + std::to_string(id);
  sc.backgrounds = draw_backgrounds(rng);

  const int visible = multi ? rng.uniform_int(2, std::max(2, std::min(cfg.max_sprites, 3)))
                            : 1;
  const auto colors = draw_colors(rng, visible + (novel ? 1 : 0));

  // Lead sprite near the centre so most motions are executable.
  Sprite lead = draw_sprite(rng, colors[0], v);
  lead.x = v.width * 0.5 + rng.uniform(-0.05, 0.05) * v.width;
  lead.y = v.height * 0.5 + rng.uniform(-0.05, 0.05) * v.height;
  sc.sprites.push_back(lead);
  std::vector<Box> avoid = {{lead.x - half_extent(lead) * 1.6, lead.y - half_extent(lead) * 1.6,
                             lead.x + half_extent(lead) * 1.6, lead.y + half_extent(lead) * 1.6}};
  for (int i = 1; i < visible; ++i) {
    Sprite s = draw_sprite(rng, colors[i], v);
    s.size *= 0.85;
    if (place_static(s, rng, v, avoid)) {
      avoid.push_back({s.x - half_extent(s), s.y - half_extent(s), s.x + half_extent(s),
                       s.y + half_extent(s)});
      sc.sprites.push_back(s);
    }
  }
  std::vector<PromptSpec> chosen;
  if (novel) {
    Sprite s = draw_sprite(rng, colors[visible], v);
    s.enters = true;
    s.enter_side = rng.uniform_int(0, 3);
    s.x = v.width * 0.5;
    s.y = v.height * 0.5;
    sc.sprites.push_back(s);
    chosen.push_back({id, s.color, Verb::kEnter, rng.bernoulli(0.5) ? Speed::kFast : Speed::kSlow});
  }

  std::vector<PromptSpec> candidates;
  for (const auto& s : sc.sprites) {
    if (s.enters) continue;
    for (Verb verb : cfg.verbs) {
      if (verb == Verb::kEnter) continue;
      for (int sp = 0; sp < kSpeedCount; ++sp) {
        if (verb == Verb::kStatic && sp == 1) continue;
        PromptSpec p{id, s.color, verb, static_cast<Speed>(sp)};
        if (sc.applicable(p, v)) candidates.push_back(p);
      }
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng.engine());
  // Prefer distinct verbs, then fill.
  std::set<Verb> used;
  for (const auto& c : chosen) used.insert(c.verb);
  for (const auto& c : candidates) {
    if (static_cast<int>(chosen.size()) >= prompt_count) break;
    if (!used.contains(c.verb)) {
      chosen.push_back(c);
      used.insert(c.verb);
    }
  }
  for (const auto& c : candidates) {
    if (static_cast<int>(chosen.size()) >= prompt_count) break;
    if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
  }
  sc.prompts = chosen;
  sc.multi_object = visible >= 2 && sc.sprites.size() - (novel ? 1 : 0) >= 2;
  sc.novel_object = novel;
  return sc;
}

std::string pad2(int i) { return (i < 10 ? "0" : "") + std::to_string(i); }

}  // namespace

const Video& Bench::start_frame(const std::string& image_id) const {
  for (const auto& [id, frame] : start_frames) {
    if (id == image_id) return frame;
  }
  throw ContractError("bench has no image '" + image_id + "'");
}

const Scenario& Bench::scenario(int id) const {
  for (const auto& s : scenarios) {
    if (s.id == id) return s;
  }
  throw ContractError("bench has no scenario " + std::to_string(id));
}

PromptSpec Bench::prompt(const BenchRecord& r) const {
  return {r.scenario_id, parse_color(r.selector), parse_verb(r.verb), parse_speed(r.speed)};
}

Bench build_bench(const BenchConfig& cfg, std::uint64_t seed) {
  cfg.video.validate();
  require(cfg.scenarios >= 1, "build_bench: need at least one scenario");
  require(cfg.images_per_scenario >= 3 && cfg.images_per_scenario <= 5,
          "build_bench: images per scenario must be 3..5");
  Rng rng(seed);

  // Prompts per scenario.
  std::vector<int> prompt_counts(cfg.scenarios);
  if (cfg.target_pairs > 0) {
    const int slots = cfg.target_pairs / cfg.images_per_scenario;
    const int base = std::clamp(slots / cfg.scenarios, 3, 5);
    int extra = std::max(0, slots - base * cfg.scenarios);
    std::vector<int> order(cfg.scenarios);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (int i = 0; i < cfg.scenarios; ++i) prompt_counts[i] = base;
    for (int i : order) {
      if (extra == 0) break;
      if (prompt_counts[i] < 5) {
        ++prompt_counts[i];
        --extra;
      }
    }
  } else {
    for (int& c : prompt_counts) c = rng.uniform_int(3, 5);
  }

  const bool enter_ok = verb_allowed(cfg, Verb::kEnter);
  Bench bench;
  for (int s = 0; s < cfg.scenarios; ++s) {
    const bool multi = cfg.scenarios >= 4 ? s % 4 == 1 || s % 4 == 2 : rng.bernoulli(0.3);
    const bool novel = enter_ok && (cfg.scenarios >= 4 ? s % 4 == 3 : false);
    Rng srng(mix_seed(seed, 1000 + s));
    Scenario sc = make_bench_scenario(s, cfg, prompt_counts[s], multi, novel, srng);
    const std::size_t nbg = sc.backgrounds.size();
    for (int k = 0; k < cfg.images_per_scenario; ++k) {
      const std::string image_id = "s" + pad2(s) + "_i" + std::to_string(k);
      std::uint64_t image_seed = mix_seed(seed, 100000 + s * 64 + k);
      image_seed = image_seed - image_seed % nbg + static_cast<std::uint64_t>(k) % nbg;
      Video start;
      for (std::size_t pi = 0; pi < sc.prompts.size(); ++pi) {
        const PromptSpec& p = sc.prompts[pi];
        const Sprite& t = sc.target(p);
        if (pi == 0) {
          const Clip c = gen_clip(sc, p, image_seed, cfg.video);
          start = Video({1, cfg.video.height, cfg.video.width, 3},
                        std::vector<double>(c.video.frame(0).begin(), c.video.frame(0).end()));
        }
        BenchRecord r;
        r.image_id = image_id;
        r.start_frame = "images/" + image_id + ".clip";
        r.prompt_id = "s" + pad2(s) + "_p" + std::to_string(pi);
        r.prompt_text = p.text(t.shape);
        r.scenario_id = s;
        r.selector = std::string(color_name(p.selector));
        r.verb = std::string(verb_name(p.verb));
        r.speed = std::string(speed_name(p.speed));
        r.embedding_index = p.embedding_index();
        r.image_seed = image_seed;
        bench.manifest.records.push_back(r);
      }
      bench.start_frames.emplace_back(image_id, std::move(start));
    }
    bench.scenarios.push_back(std::move(sc));
  }
  return bench;
}

BenchCounts BenchManifest::counts() const {
  BenchCounts c;
  std::set<std::string> images, prompts, texts;
  std::set<int> scen;
  for (const auto& r : records) {
    images.insert(r.image_id);
    prompts.insert(r.prompt_id);
    texts.insert(r.prompt_text);
    scen.insert(r.scenario_id);
  }
  c.pairs = records.size();
  c.images = images.size();
  c.prompts = prompts.size();
  c.unique_prompt_texts = texts.size();
  c.scenarios = scen.size();
  return c;
}

BenchManifest filter_verbs(const BenchManifest& manifest, const std::vector<Verb>& verbs) {
  BenchManifest out;
  for (const auto& r : manifest.records) {
    const Verb v = parse_verb(r.verb);
    if (std::find(verbs.begin(), verbs.end(), v) != verbs.end()) out.records.push_back(r);
  }
  return out;
}

std::string manifest_to_string(const BenchManifest& manifest) {
  std::ostringstream out;
  for (const auto& r : manifest.records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["start_frame"] = r.start_frame;
    j["prompt_id"] = r.prompt_id;
    j["prompt_text"] = r.prompt_text;
    j["scenario_id"] = r.scenario_id;
    j["selector"] = r.selector;
    j["verb"] = r.verb;
    j["speed"] = r.speed;
    j["embedding_index"] = r.embedding_index;
    j["image_seed"] = r.image_seed;
    out << j.dump() << '\n';
  }
  return out.str();
}

BenchManifest manifest_from_string(const std::string& text) {
  BenchManifest m;
  std::istringstream in(text);
  std::string line;
  std::set<std::pair<std::string, std::string>> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      BenchRecord r;
      r.image_id = j.at("image_id").get<std::string>();
      r.start_frame = j.at("start_frame").get<std::string>();
      r.prompt_id = j.at("prompt_id").get<std::string>();
      r.prompt_text = j.at("prompt_text").get<std::string>();
      r.scenario_id = j.at("scenario_id").get<int>();
      r.selector = j.at("selector").get<std::string>();
      r.verb = j.at("verb").get<std::string>();
      r.speed = j.at("speed").get<std::string>();
      r.embedding_index = j.at("embedding_index").get<int>();
      r.image_seed = j.at("image_seed").get<std::uint64_t>();
      parse_color(r.selector);
      parse_verb(r.verb);
      parse_speed(r.speed);
      if (!seen.insert({r.image_id, r.prompt_id}).second) {
        throw FormatError("duplicate (image, prompt) pair " + r.image_id + "/" + r.prompt_id);
      }
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const BenchManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest_to_string(manifest);
}

BenchManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifest_from_string(buf.str());
}

void write_bench(const std::filesystem::path& dir, const Bench& bench) {
  std::filesystem::create_directories(dir / "images");
  write_manifest(dir / "manifest.jsonl", bench.manifest);
  for (const auto& [id, frame] : bench.start_frames) write_clip(dir / "images" / (id + ".clip"), frame);
}

Bench read_bench(const std::filesystem::path& dir) {
  Bench bench;
  bench.manifest = read_manifest(dir / "manifest.jsonl");
  for (const auto& r : bench.manifest.records) {
    const bool seen = std::any_of(bench.start_frames.begin(), bench.start_frames.end(),
                                  [&](const auto& e) { return e.first == r.image_id; });
    if (!seen) bench.start_frames.emplace_back(r.image_id, read_clip(dir / r.start_frame).data);
  }
  return bench;
}

// ---------------------------------------------------------------------------
// Clip container

void write_clip(const std::filesystem::path& path, const Tensor4<double>& data, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write("MOTIFCLP", 8);
  binio::put<std::uint32_t>(out, kClipVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.frames()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.height()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.width()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.channels()));
  binio::put<std::uint64_t>(out, seed);
  binio::put_doubles(out, data.data());
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ClipFile read_clip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  binio::expect_magic(in, "MOTIFCLP");
  const auto version = binio::get<std::uint32_t>(in);
  if (version != kClipVersion) throw FormatError("unsupported clip version " + std::to_string(version));
  Dims d;
  d.frames = static_cast<int>(binio::get<std::uint32_t>(in));
  d.height = static_cast<int>(binio::get<std::uint32_t>(in));
  d.width = static_cast<int>(binio::get<std::uint32_t>(in));
  d.channels = static_cast<int>(binio::get<std::uint32_t>(in));
  if (!d.valid() || d.size() > (std::size_t{1} << 31)) throw FormatError("clip dims out of range");
  ClipFile f;
  f.seed = binio::get<std::uint64_t>(in);
  std::vector<double> payload(d.size());
  binio::get_doubles(in, payload);
  f.data = Tensor4<double>(d, std::move(payload));
  return f;
}

void export_frames(const std::filesystem::path& prefix, const Tensor4<double>& data) {
  require(data.channels() == 1 || data.channels() == 3, "export_frames: need 1 or 3 channels");
  for (int l = 0; l < data.frames(); ++l) {
    const std::string name = prefix.string() + "_" + pad2(l) + (data.channels() == 3 ? ".ppm" : ".pgm");
    std::ofstream out(name, std::ios::binary | std::ios::trunc);
    out << (data.channels() == 3 ? "P6\n" : "P5\n") << data.width() << ' ' << data.height()
        << "\n255\n";
    for (double v : data.frame(l)) {
      out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
}

}  // namespace motif
