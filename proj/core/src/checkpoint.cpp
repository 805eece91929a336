// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "motif/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <set>

#include "motif/binary_io.hpp"

namespace motif {

nlohmann::ordered_json to_json(const DenoiserConfig& c) {
  nlohmann::ordered_json j;
  j["latent_channels"] = c.latent_channels;
  j["width"] = c.width;
  j["dilations"] = c.dilations;
  j["time_dim"] = c.time_dim;
  j["prompt_dim"] = c.prompt_dim;
  j["vocab_size"] = c.vocab_size;
  j["timesteps"] = c.timesteps;
  j["conditioning"] = to_string(c.conditioning);
  j["frame_channel"] = c.frame_channel;
  j["cond_sigma"] = c.cond_sigma;
  j["beta_start"] = c.beta_start;
  j["beta_end"] = c.beta_end;
  return j;
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"latent_channels", "width",      "dilations",
                                              "time_dim",        "prompt_dim", "vocab_size",
                                              "timesteps",       "conditioning", "frame_channel",
                                              "cond_sigma",      "beta_start", "beta_end"};
  if (!j.is_object()) throw FormatError("denoiser config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw FormatError("unknown denoiser config key '" + key + "'");
  }
  DenoiserConfig c;
  try {
    c.latent_channels = j.value("latent_channels", c.latent_channels);
    c.width = j.value("width", c.width);
    c.dilations = j.value("dilations", c.dilations);
    c.time_dim = j.value("time_dim", c.time_dim);
    c.prompt_dim = j.value("prompt_dim", c.prompt_dim);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.timesteps = j.value("timesteps", c.timesteps);
    c.conditioning = parse_conditioning_mode(j.value("conditioning", to_string(c.conditioning)));
    c.frame_channel = j.value("frame_channel", c.frame_channel);
    c.cond_sigma = j.value("cond_sigma", c.cond_sigma);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("denoiser config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write("MOTIFCKP", 8);
  binio::put<std::uint32_t>(out, kCheckpointVersion);
  binio::put_string(out, ckpt.config_echo);
  binio::put_string(out, to_json(ckpt.params.config).dump());
  binio::put<std::uint64_t>(out, ckpt.step);
  binio::put<std::uint64_t>(out, ckpt.params.seed);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.groups.size()));
  for (const auto& g : ckpt.params.groups) {
    binio::put_string(out, g.name);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.shape.size()));
    for (int d : g.shape) binio::put<std::int32_t>(out, d);
    binio::put<std::uint64_t>(out, g.values.size());
    binio::put_doubles(out, g.values);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  binio::expect_magic(in, "MOTIFCKP");
  const auto version = binio::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_echo = binio::get_string(in);
  nlohmann::json dj;
  try {
    dj = nlohmann::json::parse(binio::get_string(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint denoiser config: ") + e.what());
  }
  ckpt.params = zero_denoiser(denoiser_config_from_json(dj));
  ckpt.step = binio::get<std::uint64_t>(in);
  ckpt.params.seed = binio::get<std::uint64_t>(in);
  const auto groups = binio::get<std::uint32_t>(in);
  if (groups != ckpt.params.groups.size()) throw FormatError("checkpoint group count mismatch");
  for (auto& g : ckpt.params.groups) {
    if (binio::get_string(in) != g.name) throw FormatError("checkpoint group name mismatch");
    const auto rank = binio::get<std::uint32_t>(in);
    if (rank != g.shape.size()) throw FormatError("checkpoint rank mismatch for " + g.name);
    for (int d : g.shape) {
      if (binio::get<std::int32_t>(in) != d) throw FormatError("checkpoint shape mismatch for " + g.name);
    }
    if (binio::get<std::uint64_t>(in) != g.values.size()) {
      throw FormatError("checkpoint size mismatch for " + g.name);
    }
    binio::get_doubles(in, g.values);
  }
  return ckpt;
}

}  // namespace motif
