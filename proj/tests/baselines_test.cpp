#include <cmath>
#include <set>
#include <gtest/gtest.h>

#include "asymdiff/baselines/arms.hpp"
#include "asymdiff/baselines/gaussian.hpp"
#include "asymdiff/dataset/synth.hpp"
#include "asymdiff/errors.hpp"
#include "trainer_oracles.hpp"

namespace asymdiff {
namespace {

TEST(GaussianForward, MarginalMoments) {
  const GaussianSchedule s = GaussianSchedule::linear(10, 1e-4, 0.1);
  const std::vector<double> z0{2.0};
  Rng rng = make_rng(1);
  const std::size_t k = 7;
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = gaussian_forward(z0, k, s, rng)[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  EXPECT_NEAR(mean, std::sqrt(s.alpha_bars[k - 1]) * 2.0, 0.01);
  EXPECT_NEAR(var, 1.0 - s.alpha_bars[k - 1], 0.01);
  EXPECT_THROW(gaussian_forward(z0, 11, s, rng), ConfigError);
}

TEST(GaussianReverse, IdentityDenoiserRecoversNoiselessLatent) {
  const auto schema = testing::tiny_schema(4, 3);
  ModelParams p = init_params(*schema, testing::tiny_config(), 1);
  const std::size_t n = 4, dz = 5;
  p.denoise_hidden = AffineParams(n + dz, 2 * dz);
  p.denoise_out = AffineParams(2 * dz, dz);
  for (std::size_t i = 0; i < dz; ++i) {
    p.denoise_hidden.weight(n + i, i) = 1.0;
    p.denoise_hidden.weight(n + i, dz + i) = -1.0;
    p.denoise_out.weight(i, i) = 1.0;
    p.denoise_out.weight(dz + i, i) = -1.0;
  }
  const GaussianSchedule s = GaussianSchedule::from_betas({0.0, 0.5});
  Rng rng = make_rng(2);
  const std::vector<double> z0{0.1, -0.2, 0.3, 0.4, -0.5};
  EXPECT_EQ(gaussian_reverse_loss(p, z0, 1, s, rng), 0.0);
  EXPECT_GT(gaussian_reverse_loss(p, z0, 2, s, rng), 0.0);
}

TEST(Arms, NamedConfigurations) {
  const ArmSpec base = ArmSpec::named("base");
  EXPECT_EQ(base.diffusion, DiffusionMode::kNone);
  EXPECT_EQ(base.serving, ServingPath::kBase);
  const ArmSpec full = ArmSpec::named("asymdiff");
  EXPECT_EQ(full.lambda_recon, 1.0);
  EXPECT_EQ(full.lambda_aux, 1.0);
  EXPECT_EQ(full.serving, ServingPath::kDenoised);
  EXPECT_EQ(ArmSpec::named("asymdiff_wo_recon").lambda_recon, 0.0);
  EXPECT_EQ(ArmSpec::named("asymdiff_wo_aux").lambda_aux, 0.0);
  EXPECT_EQ(ArmSpec::named("gauss_diff").diffusion, DiffusionMode::kGaussian);
  EXPECT_THROW(ArmSpec::named("nope"), ConfigError);
}

TEST(Arms, ShareEverythingButTheMechanism) {
  TrainConfig shared;
  const std::string h = shared_config_hash(ArmSpec::named("base").apply(shared));
  for (const std::string& name : ArmSpec::names()) {
    EXPECT_EQ(shared_config_hash(ArmSpec::named(name).apply(shared)), h) << name;
  }
  TrainConfig other = shared;
  other.adam.lr = 0.5;
  EXPECT_NE(shared_config_hash(other), h);
}

TEST(Arms, RunArmReportsServingPathAndSeed) {
  SynthSpec spec;
  spec.n_users = 30;
  spec.n_items = 20;
  spec.n_train = 400;
  spec.n_eval = 200;
  const SynthData d = generate(spec);
  TrainConfig shared;
  shared.model = testing::tiny_config();
  shared.batch_size = 32;
  const std::uint64_t seeds[] = {3};
  const auto res = run_arm(ArmSpec::named("gauss_diff"), d.train, d.eval, shared, seeds, 0.2);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].report.serving_path, "base");
  EXPECT_EQ(res[0].report.seed, 3u);
  EXPECT_EQ(res[0].report.arm, "gauss_diff");
  EXPECT_FALSE(res[0].report.config_hash.empty());
}

TEST(GaussianForward, FullyNoisedIsStandardNormal) {
  const GaussianSchedule s = GaussianSchedule::from_betas(std::vector<double>(10, 0.9));
  ASSERT_LT(s.alpha_bars.back(), 1e-9);
  const std::vector<double> z0{3.0};
  Rng rng = make_rng(4);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = gaussian_forward(z0, 10, s, rng)[0];
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0, 0.01);
}

TEST(GaussianForward, SeedReproducible) {
  const GaussianSchedule s = GaussianSchedule::linear(10, 1e-4, 0.1);
  const std::vector<double> z0{0.5, -1.0, 2.0};
  Rng a = make_rng(9), b = make_rng(9);
  for (std::size_t k = 1; k <= 10; ++k) EXPECT_EQ(gaussian_forward(z0, k, s, a), gaussian_forward(z0, k, s, b));
}

TEST(GaussianReverse, DenoiserLearnsNoiselessSchedule) {
  const auto schema = testing::tiny_schema(4, 3);
  ModelConfig cfg = testing::tiny_config();
  cfg.denoiser_hidden = 32;
  ModelParams p = init_params(*schema, cfg, 2);
  const GaussianSchedule s = GaussianSchedule::from_betas({0.0, 0.0, 0.0, 0.0});
  const Tensor2 z0 = testing::random_tensor(8, 5, 3);
  Tensor2 steps(8, 4);
  Rng rng = make_rng(5);
  Tensor2 z_k(8, 5);
  for (std::size_t b = 0; b < 8; ++b) {
    const std::size_t k = 1 + b % 4;
    const auto e = gaussian_step_embedding(k, 4);
    for (std::size_t i = 0; i < 4; ++i) steps(b, i) = e[i];
    const LatentRep noisy = gaussian_forward(z0.row(b), k, s, rng);
    for (std::size_t i = 0; i < 5; ++i) z_k(b, i) = noisy[i];
  }
  EXPECT_EQ(z_k, z0);
  AdamConfig acfg;
  acfg.lr = 1e-2;
  Adam adam(acfg);
  for (int it = 0; it < 3000; ++it) {
    DenoiserCache cache;
    const Tensor2 out = denoise_batch(p, steps, z_k, &cache);
    Tensor2 d(8, 5);
    for (std::size_t b = 0; b < 8; ++b)
      for (std::size_t i = 0; i < 5; ++i) d(b, i) = 2.0 * (out(b, i) - z0(b, i)) / 8.0;
    ModelParams g = p.zeros_like();
    denoise_backward(p, cache, d, g, nullptr);
    const ParamSlot slots[] = {{"w1", &p.denoise_hidden.weight, &g.denoise_hidden.weight},
                               {"b1", &p.denoise_hidden.bias, &g.denoise_hidden.bias},
                               {"w2", &p.denoise_out.weight, &g.denoise_out.weight},
                               {"b2", &p.denoise_out.bias, &g.denoise_out.bias}};
    adam.step(slots);
  }
  double loss = 0;
  for (std::size_t b = 0; b < 8; ++b) loss += gaussian_reverse_loss(p, z0.row(b), 1 + b % 4, s, rng) / 8.0;
  EXPECT_LT(loss, 1e-3);
}

TEST(Arms, BaseMatchesZeroWeightAsymmetricTraining) {
  const auto schema = testing::tiny_schema(4, 6);
  const auto train = testing::random_samples(*schema, 48, 7, 0.2);
  TrainConfig shared;
  shared.model = testing::tiny_config();
  shared.batch_size = 8;
  TrainConfig zero = ArmSpec::named("asymdiff").apply(shared);
  zero.model.lambda_recon = 0.0;
  zero.model.lambda_aux = 0.0;
  Trainer base(schema, ArmSpec::named("base").apply(shared)), asym(schema, zero);
  base.fit(train);
  asym.fit(train);
  EXPECT_TRUE(testing::extractor_and_head_equal(base.params(), asym.params()));
}

TEST(Arms, FiveSeedsGiveFiveReports) {
  SynthSpec spec;
  spec.n_users = 30;
  spec.n_items = 20;
  spec.n_train = 300;
  spec.n_eval = 200;
  const SynthData d = generate(spec);
  TrainConfig shared;
  shared.model = testing::tiny_config();
  shared.batch_size = 32;
  const std::uint64_t seeds[] = {1, 2, 3, 4, 5};
  const auto res = run_arm(ArmSpec::named("asymdiff"), d.train, d.eval, shared, seeds);
  ASSERT_EQ(res.size(), 5u);
  std::set<std::uint64_t> seen;
  std::set<double> aucs;
  for (const auto& r : res) {
    seen.insert(r.report.seed);
    aucs.insert(r.report.auc);
  }
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_GT(aucs.size(), 1u);
}

}  // namespace
}  // namespace asymdiff
