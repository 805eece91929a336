// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "motif/checkpoint.hpp"
#include "motif/denoiser.hpp"
#include "motif/gradcheck.hpp"
#include "motif/optimizer.hpp"
#include "motif/rng.hpp"
#include "test_util.hpp"

namespace motif {
namespace {

DenoiserConfig tiny_config() {
  DenoiserConfig c;
  c.latent_channels = 2;
  c.width = 3;
  c.dilations = {1};
  c.time_dim = 2;
  c.prompt_dim = 2;
  c.vocab_size = 3;
  c.timesteps = 10;
  return c;
}

Latent random_latent(Dims d, Rng& rng) {
  Latent x(d);
  for (double& v : x.data()) v = rng.normal();
  return x;
}

TrainingBatch random_batch(const DenoiserConfig& c, int items, std::uint64_t seed, bool zero_heat = false) {
  Rng rng(seed);
  TrainingBatch batch;
  const Dims d{3, 4, 4, c.latent_channels};
  for (int i = 0; i < items; ++i) {
    TrainingItem it;
    it.noisy = random_latent(d, rng);
    it.target = random_latent(d, rng);
    it.cond = random_latent(d, rng);
    it.heat = Tensor4<double>({3, 4, 4, 1});
    if (!zero_heat) {
      for (double& v : it.heat.data()) v = rng.uniform();
    }
    it.t = rng.uniform_int(1, c.timesteps);
    it.prompt_index = rng.uniform_int(0, c.vocab_size);
    batch.push_back(std::move(it));
  }
  return batch;
}

TEST(Tensor4, RejectsEmptyDims) {
  EXPECT_THROW(Tensor4<double>(Dims{0, 1, 1, 1}), ContractError);
  EXPECT_THROW(Tensor4<double>(Dims{1, 1, 1, 1}, std::vector<double>(2)), ContractError);
}

TEST(Tensor4, IndexIsChannelLastRowMajor) {
  Tensor4<double> t({2, 3, 4, 5});
  EXPECT_EQ(t.index(1, 2, 3, 4), t.size() - 1);
  EXPECT_EQ(t.index(0, 0, 1, 0), 5u);
  EXPECT_EQ(t.index(0, 1, 0, 0), 20u);
}

TEST(Denoiser, ZeroParamsGiveZeroOutput) {
  const DenoiserConfig c = tiny_config();
  Rng rng(1);
  const Dims d{3, 4, 4, 2};
  const Latent out = denoiser_forward(zero_denoiser(c), random_latent(d, rng), random_latent(d, rng), 4, 1);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Denoiser, OutputDimsMatchNoisyInput) {
  DenoiserConfig c;  // 12 latent channels
  Rng rng(2);
  const Dims d{8, 16, 16, 12};
  const Latent out = denoiser_forward(init_denoiser(c, 7), random_latent(d, rng), random_latent(d, rng), 0, 3);
  EXPECT_EQ(out.dims(), d);
}

TEST(Denoiser, DeterministicForFixedSeed) {
  const DenoiserConfig c = tiny_config();
  Rng rng(3);
  const Dims d{3, 4, 4, 2};
  const Latent z = random_latent(d, rng), cond = random_latent(d, rng);
  const Latent a = denoiser_forward(init_denoiser(c, 7), z, cond, 2, 0);
  const Latent b = denoiser_forward(init_denoiser(c, 7), z, cond, 2, 0);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, denoiser_forward(init_denoiser(c, 8), z, cond, 2, 0));
}

TEST(Denoiser, RejectsBadInputs) {
  const DenoiserConfig c = tiny_config();
  const DenoiserParams p = init_denoiser(c, 1);
  const Latent z({3, 4, 4, 2});
  EXPECT_THROW(denoiser_forward(p, z, Latent({3, 4, 5, 2}), 0, 0), ContractError);
  EXPECT_THROW(denoiser_forward(p, Latent({3, 4, 4, 3}), Latent({3, 4, 4, 3}), 0, 0), ContractError);
  EXPECT_THROW(denoiser_forward(p, z, z, c.timesteps, 0), ContractError);
  EXPECT_THROW(denoiser_forward(p, z, z, 0, c.vocab_size + 1), ContractError);
  Latent bad = z;
  bad.data()[5] = std::nan("");
  EXPECT_THROW(denoiser_forward(p, bad, z, 0, 0), NumericError);
}

TEST(Denoiser, PromptTableHasNullRow) {
  const DenoiserConfig c = tiny_config();
  const DenoiserParams p = init_denoiser(c, 5);
  const auto& table = p.group("prompt_table");
  ASSERT_EQ(table.values.size(), static_cast<std::size_t>(c.vocab_size + 1) * c.prompt_dim);
  for (int i = 0; i < c.prompt_dim; ++i) {
    EXPECT_EQ(table.values[static_cast<std::size_t>(c.vocab_size) * c.prompt_dim + i], 0.0);
  }
  EXPECT_EQ(p.count(), init_denoiser(c, 6).count());
}

TEST(Denoiser, FloatForwardTracksDouble) {
  DenoiserConfig c = tiny_config();
  c.width = 8;
  const DenoiserParams p = init_denoiser(c, 11);
  Rng rng(4);
  const Dims d{3, 4, 4, 2};
  const Latent z = random_latent(d, rng), cond = random_latent(d, rng);
  const Latent ref = DenoiserNet<double>(p).predict(z, cond, 3, 1);
  const Latent f = DenoiserNet<float>(p).predict(z, cond, 3, 1);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(f.data()[i], ref.data()[i], 1e-4);
}

TEST(LossAndGrads, LambdaZeroMatchesPlainDiffusion) {
  const DenoiserConfig c = tiny_config();
  const DenoiserParams p = init_denoiser(c, 9);
  const TrainingBatch batch = random_batch(c, 2, 1);
  const LossAndGrads with_heat = loss_and_grads<double>(p, batch, {0.0, HeatmapMode::kMotif});
  const LossAndGrads none = loss_and_grads<double>(p, batch, {1.0, HeatmapMode::kNone});
  EXPECT_EQ(with_heat.loss, none.loss);
  EXPECT_EQ(with_heat.grads.flatten(), none.grads.flatten());
}

TEST(LossAndGrads, ZeroHeatmapEqualsDiffusionLoss) {
  const DenoiserConfig c = tiny_config();
  const DenoiserParams p = init_denoiser(c, 9);
  const TrainingBatch batch = random_batch(c, 2, 2, /*zero_heat=*/true);
  const LossAndGrads lg = loss_and_grads<double>(p, batch, {1.0, HeatmapMode::kMotif});
  EXPECT_EQ(lg.terms.motif, 0.0);
  EXPECT_EQ(lg.loss, lg.terms.diffusion);
  const LossAndGrads plain = loss_and_grads<double>(p, batch, {0.0, HeatmapMode::kMotif});
  EXPECT_EQ(lg.grads.flatten(), plain.grads.flatten());
}

TEST(LossAndGrads, EmptyBatchIsRejected) {
  EXPECT_THROW(loss_and_grads<double>(init_denoiser(tiny_config(), 1), {}, {}), ContractError);
}

TEST(LossAndGrads, LossMatchesForwardRecomputation) {
  const DenoiserConfig c = tiny_config();
  const DenoiserParams p = init_denoiser(c, 4);
  const TrainingBatch batch = random_batch(c, 3, 3);
  const LossSpec spec{1.0, HeatmapMode::kMotif};
  double expect = 0.0;
  for (const auto& it : batch) {
    const Latent pred = denoiser_forward(p, it.noisy, it.cond, it.t - 1, it.prompt_index);
    expect += total_loss(pred, it.target, it.heat, 1.0);
  }
  expect /= static_cast<double>(batch.size());
  EXPECT_NEAR(loss_and_grads<double>(p, batch, spec).loss, expect, 1e-12);
}

TEST(FiniteDiff, LinearLossIsExact) {
  std::vector<double> theta = {0.3, -1.2, 2.5, 4.0};
  const std::vector<double> grad(theta.size(), 1.0);
  const auto loss = [](std::span<const double> t) { return std::accumulate(t.begin(), t.end(), 0.0); };
  EXPECT_LT(finite_diff_check(theta, grad, loss).max_rel_error, 1e-10);
}

TEST(FiniteDiff, QuadraticLossWithinTolerance) {
  std::vector<double> theta = {0.3, -1.2, 2.5, 4.0};
  std::vector<double> grad;
  for (double t : theta) grad.push_back(2.0 * t);
  const auto loss = [](std::span<const double> t) {
    double s = 0.0;
    for (double v : t) s += v * v;
    return s;
  };
  EXPECT_LT(finite_diff_check(theta, grad, loss, {1e-5}).max_rel_error, 1e-8);
}

TEST(FiniteDiff, DetectsWrongGradient) {
  std::vector<double> theta = {1.0, 2.0};
  const std::vector<double> grad = {2.0, 5.0};  // second entry should be 4
  const auto loss = [](std::span<const double> t) { return t[0] * t[0] + t[1] * t[1]; };
  const FiniteDiffReport r = finite_diff_check(theta, grad, loss);
  EXPECT_GT(r.max_rel_error, 0.1);
  EXPECT_EQ(r.worst_index, 1u);
}

TEST(FiniteDiff, RandomDenoiserLossUnderOneInTenThousand) {
  const DenoiserConfig c = tiny_config();
  const DenoiserParams p = init_denoiser(c, 21);
  ASSERT_LE(p.count(), 500u);
  const TrainingBatch batch = random_batch(c, 2, 5);
  const LossSpec spec{1.0, HeatmapMode::kMotif};
  const FiniteDiffReport r = finite_diff_check(
      p, [&](const DenoiserParams& q) { return loss_and_grads<double>(q, batch, spec); });
  EXPECT_EQ(r.checked, p.count());
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(FiniteDiff, PreconditionedDenoiserGradients) {
  DenoiserConfig c = tiny_config();
  c.cond_sigma = 0.2;
  const DenoiserParams p = init_denoiser(c, 22);
  const TrainingBatch batch = random_batch(c, 2, 6);
  const LossSpec spec{1.0, HeatmapMode::kInverse};
  const FiniteDiffReport r = finite_diff_check(
      p, [&](const DenoiserParams& q) { return loss_and_grads<double>(q, batch, spec); });
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Preconditioning, ZeroNetworkGivesLinearPrior) {
  DenoiserConfig c = tiny_config();
  c.cond_sigma = 0.3;
  Rng rng(8);
  const Dims d{3, 4, 4, 2};
  const Latent z = random_latent(d, rng), cond = random_latent(d, rng);
  const int t = 6;
  const Latent out = denoiser_forward(zero_denoiser(c), z, cond, t - 1, 0);
  const double ab = test::alpha_bar(c.timesteps, c.beta_start, c.beta_end, t);
  const double a = std::sqrt(ab), sg = std::sqrt(1.0 - ab);
  const double sig2 = 0.09, n2 = a * a * sig2 + sg * sg;
  const double k = a * sg * (1.0 - sig2) / n2;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = z.data()[i] - a * cond.data()[i];
    EXPECT_NEAR(out.data()[i], k * y - sg * cond.data()[i], 1e-12);
  }
}

ParamSet scalar_param(double w) {
  ParamSet p;
  p.groups.push_back({"w", {1}, {w}});
  return p;
}

TEST(Optimizer, ZeroGradsLeaveParamsUnchanged) {
  ParamSet p = scalar_param(0.7);
  Optimizer opt(p);
  opt.step(p, scalar_param(0.0), 0.1, 1);
  EXPECT_EQ(p.groups[0].values[0], 0.7);
}

TEST(Optimizer, PlainStepOnQuadratic) {
  ParamSet p = scalar_param(1.0);
  Optimizer opt(p, {OptimizerKind::kPlain});
  opt.step(p, scalar_param(2.0 * 1.0), 0.1, 1);
  EXPECT_DOUBLE_EQ(p.groups[0].values[0], 0.8);
}

TEST(Optimizer, TwoHundredStepsReduceQuadraticTenfold) {
  for (OptimizerKind kind : {OptimizerKind::kPlain, OptimizerKind::kAdam}) {
    ParamSet p = scalar_param(1.0);
    Optimizer opt(p, {kind});
    for (long s = 1; s <= 200; ++s) opt.step(p, scalar_param(2.0 * p.groups[0].values[0]), 0.01, s);
    const double w = p.groups[0].values[0];
    EXPECT_LE(w * w, 0.1) << "kind " << static_cast<int>(kind);
  }
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  ParamSet p = scalar_param(1.0);
  Optimizer opt(p);
  opt.step(p, scalar_param(3.0), 0.01, 1);
  // Bias-corrected first Adam step is lr * g / (|g| + eps).
  EXPECT_NEAR(p.groups[0].values[0], 1.0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(Optimizer, RefusesNonFiniteGradients) {
  ParamSet p = scalar_param(1.0);
  Optimizer opt(p);
  EXPECT_THROW(opt.step(p, scalar_param(std::nan("")), 0.1, 1), NumericError);
  EXPECT_EQ(p.groups[0].values[0], 1.0);
  EXPECT_EQ(opt.first_moment()[0], 0.0);
}

TEST(Checkpoint, RoundTripsExactly) {
  DenoiserConfig c = tiny_config();
  c.cond_sigma = 0.15;
  Checkpoint ck;
  ck.config_echo = R"({"note":"echo"})";
  ck.step = 42;
  ck.params = init_denoiser(c, 3);
  const auto path = testing::TempDir() + "/numcore_roundtrip.ckpt";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.config_echo, ck.config_echo);
  EXPECT_EQ(back.step, 42u);
  EXPECT_EQ(back.params.seed, 3u);
  EXPECT_EQ(back.params.config, c);
  EXPECT_EQ(back.params.flatten(), ck.params.flatten());
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = testing::TempDir() + "/numcore_bad.ckpt";
  test::write_text(path, "MOTIFCKX garbage");
  EXPECT_THROW(load_checkpoint(path), FormatError);
  EXPECT_THROW(load_checkpoint(testing::TempDir() + "/does_not_exist.ckpt"), std::runtime_error);
}

TEST(Checkpoint, UnknownConfigKeyRejected) {
  nlohmann::json j = to_json(tiny_config());
  j["widht"] = 3;
  EXPECT_THROW(denoiser_config_from_json(j), FormatError);
}

}  // namespace
}  // namespace motif
