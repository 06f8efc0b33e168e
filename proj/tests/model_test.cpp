#include <algorithm>
#include <cmath>
#include <iostream>

#include <gtest/gtest.h>

#include "asymdiff/errors.hpp"
#include "asymdiff/model/checkpoint.hpp"
#include "asymdiff/model/networks.hpp"
#include "asymdiff/model/params.hpp"
#include "asymdiff/numeric/layers.hpp"
#include "asymdiff/trainer/trainer.hpp"
#include "test_util.hpp"

namespace asymdiff {
namespace {

using testing::random_samples;
using testing::tiny_config;
using testing::tiny_schema;

// g(s, z) = [I; -I]^T relu([0; I, -I]^T [s, z]) = relu(z) - relu(-z) = z
void make_identity_denoiser(ModelParams& p) {
  const std::size_t n = p.num_features(), dz = p.latent_dim();
  p.denoise_hidden = AffineParams(n + dz, 2 * dz);
  p.denoise_out = AffineParams(2 * dz, dz);
  for (std::size_t i = 0; i < dz; ++i) {
    p.denoise_hidden.weight(n + i, i) = 1.0;
    p.denoise_hidden.weight(n + i, dz + i) = -1.0;
    p.denoise_out.weight(i, i) = 1.0;
    p.denoise_out.weight(dz + i, i) = -1.0;
  }
}

TEST(ModelConfig, Validation) {
  ModelConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.latent_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  const ModelConfig back = ModelConfig::from_json(tiny_config().to_json());
  EXPECT_EQ(back, tiny_config());
}

TEST(Params, ShapesAndDeterministicInit) {
  const auto schema = tiny_schema(4, 6);
  const ModelParams p = init_params(*schema, tiny_config(), 1);
  EXPECT_EQ(p.num_features(), 4u);
  EXPECT_EQ(p.concat_dim(), 12u);
  EXPECT_EQ(p.cross.size(), 2u);
  EXPECT_EQ(p.cross[0].weight.rows(), 12u);
  EXPECT_EQ(p.mlp.back().weight.cols(), 5u);
  EXPECT_EQ(p.denoise_hidden.weight.rows(), 4u + 5u);
  EXPECT_EQ(p, init_params(*schema, tiny_config(), 1));
  EXPECT_NE(p, init_params(*schema, tiny_config(), 2));
  for (const auto& [name, t] : p.blocks()) {
    if (name.find("bias") != std::string::npos) {
      for (double v : t->values()) EXPECT_EQ(v, 0.0) << name;
    }
  }
}

TEST(Networks, CrossLayerByHand) {
  AffineParams layer(2, 2);
  layer.weight = Tensor2{{1, 0}, {0, 1}};
  layer.bias = Tensor2{{0.5, 0}};
  const Tensor2 x0{{1, 2}}, x{{3, 4}};
  // x0 * (x W + b) + x = [1 * 3.5 + 3, 2 * 4 + 4]
  EXPECT_EQ(cross_layer(x0, x, layer), (Tensor2{{6.5, 12}}));
}

TEST(Networks, SingleSampleMatchesBatchRow) {
  const auto schema = tiny_schema(4, 6);
  const ModelParams p = init_params(*schema, tiny_config(), 3);
  const auto samples = random_samples(*schema, 9, 4, 0.3);
  const Tensor2 z = extract_batch(p, TokenBatch::from(std::span<const Sample>(samples)));
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const LatentRep single = extract(p, samples[b]);
    for (std::size_t i = 0; i < single.size(); ++i) EXPECT_EQ(single[i], z(b, i));
  }
}

TEST(Networks, PredictorClampsProbabilities) {
  const auto schema = tiny_schema(2, 3);
  ModelParams p = init_params(*schema, tiny_config(), 1);
  p.head.bias[0] = 1000;
  const std::vector<double> z(5, 0.0);
  EXPECT_EQ(predict(p, z), 1.0 - kProbEpsilon);
  p.head.bias[0] = -1000;
  EXPECT_EQ(predict(p, z), kProbEpsilon);
}

TEST(Networks, DenoiserInputIsMaskThenLatent) {
  const auto schema = tiny_schema(3, 4);
  ModelParams p = init_params(*schema, tiny_config(), 1);
  p.denoise_hidden.weight.fill(0.0);
  p.denoise_hidden.weight(1, 0) = 1.0;  // reads mask bit of feature 1
  p.denoise_out.weight.fill(0.0);
  p.denoise_out.weight(0, 0) = 1.0;
  const std::vector<double> z(5, 7.0);
  const LatentRep on = denoise(p, DropoutMask{{0, 1, 0}}, z);
  const LatentRep off = denoise(p, DropoutMask{{1, 0, 1}}, z);
  EXPECT_EQ(on[0], 1.0);
  EXPECT_EQ(off[0], 0.0);
}

TEST(Serving, IdentityDenoiserMakesPathsAgree) {
  const auto schema = tiny_schema(4, 6);
  ModelParams p = init_params(*schema, tiny_config(), 5);
  make_identity_denoiser(p);
  for (const Sample& s : random_samples(*schema, 50, 6, 0.25)) {
    ServeTrace trace;
    const double served = serve_predict(p, s, &trace);
    EXPECT_EQ(served, base_predict(p, s));
    EXPECT_EQ(trace.denoised, trace.latent);
    EXPECT_EQ(trace.mask, mask_from_observed(s));
  }
}

TEST(Serving, BatchedMatchesPerSample) {
  const auto schema = tiny_schema(4, 6);
  const ModelParams p = init_params(*schema, tiny_config(), 7);
  const auto samples = random_samples(*schema, 23, 8, 0.25);
  const auto denoised = predict_samples(p, samples, ServingPath::kDenoised, 5);
  const auto base = predict_samples(p, samples, ServingPath::kBase, 5);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(denoised[i], serve_predict(p, samples[i]));
    EXPECT_EQ(base[i], base_predict(p, samples[i]));
  }
}

Checkpoint sample_checkpoint() {
  const auto schema = tiny_schema(3, 4);
  TrainConfig cfg;
  cfg.model = tiny_config();
  cfg.batch_size = 8;
  cfg.epochs = 1;
  Trainer t(schema, cfg);
  t.fit(random_samples(*schema, 32, 1));
  return t.checkpoint({{"arm", "asymdiff"}, {"serving", "denoised"}});
}

TEST(Checkpoint, RoundTripIsExact) {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(back.params, c.params);
  EXPECT_EQ(back.config, c.config);
  EXPECT_EQ(back.schema->hash(), c.schema->hash());
  EXPECT_EQ(back.meta, c.meta);
  ASSERT_TRUE(back.optimizer);
  EXPECT_EQ(back.optimizer->step, c.optimizer->step);
  EXPECT_EQ(back.optimizer->first_moments, c.optimizer->first_moments);
  EXPECT_EQ(back.optimizer->second_moments, c.optimizer->second_moments);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(parse_checkpoint(flipped), DataError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 9)), DataError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(parse_checkpoint(magic), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), DataError);
}

TEST(Checkpoint, SchemaMismatchRejectedAtServing) {
  const Checkpoint c = sample_checkpoint();
  Dataset other{tiny_schema(3, 5), random_samples(*tiny_schema(3, 5), 4, 2), {}};
  EXPECT_THROW(predict_dataset(c, other, ServingPath::kDenoised), DataError);
  Dataset same{c.schema, random_samples(*c.schema, 4, 2), {}};
  EXPECT_EQ(predict_dataset(c, same, ServingPath::kDenoised).size(), 4u);
}

TEST(Networks, CrossLayerFirstLayerCase) {
  AffineParams layer(2, 2);
  layer.weight = Tensor2{{2, 0}, {1, 1}};
  layer.bias = Tensor2{{0, 1}};
  const Tensor2 x0{{1, 3}};
  // x0 W + b = [5, 4]; x0 * [5, 4] + x0 = [6, 15]
  EXPECT_EQ(cross_layer(x0, x0, layer), (Tensor2{{6, 15}}));
}

TEST(Networks, ZeroWeightExtractorOutputsBias) {
  const auto schema = tiny_schema(3, 4);
  ModelConfig cfg = tiny_config();
  cfg.cross_layers = 0;
  ModelParams p = init_params(*schema, cfg, 2);
  for (AffineParams& l : p.mlp) l.weight.fill(0.0);
  for (std::size_t i = 0; i < p.mlp.back().bias.size(); ++i) p.mlp.back().bias[i] = 0.1 * i - 0.2;
  const LatentRep z = extract(p, random_samples(*schema, 1, 3)[0]);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z[i], p.mlp.back().bias[i]);
}

TEST(Networks, PredictorExamples) {
  const auto schema = tiny_schema(2, 3);
  ModelConfig cfg = tiny_config();
  cfg.latent_dim = 1;
  ModelParams p = init_params(*schema, cfg, 1);
  p.head.weight.fill(0.0);
  p.head.bias[0] = 0.0;
  EXPECT_EQ(predict(p, std::vector<double>{4.0}), 0.5);
  p.head.bias[0] = 30.0;
  EXPECT_GE(predict(p, std::vector<double>{0.0}), 1.0 - 1e-7);
  p.head.bias[0] = 0.0;
  p.head.weight[0] = 1.0;
  EXPECT_NEAR(predict(p, std::vector<double>{0.5}), 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
  EXPECT_NEAR(predict(p, std::vector<double>{0.5}), 0.62246, 1e-5);
}

TEST(Networks, ZeroWeightDenoiserOutputsBias) {
  const auto schema = tiny_schema(3, 4);
  ModelParams p = init_params(*schema, tiny_config(), 1);
  p.denoise_hidden.weight.fill(0.0);
  p.denoise_out.weight.fill(0.0);
  for (std::size_t i = 0; i < 5; ++i) p.denoise_out.bias[i] = i + 0.5;
  const LatentRep out = denoise(p, DropoutMask{{1, 0, 1}}, std::vector<double>{1, -2, 3, -4, 5});
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(out[i], i + 0.5);
}

TEST(Networks, DenoiserByHand) {
  const auto schema = tiny_schema(2, 3);
  ModelConfig cfg = tiny_config();
  cfg.latent_dim = 2;
  cfg.denoiser_hidden = 2;
  ModelParams p = init_params(*schema, cfg, 1);
  // input [s0, s1, z0, z1]
  p.denoise_hidden.weight = Tensor2{{1, 0}, {0, -1}, {1, 1}, {0, 2}};
  p.denoise_hidden.bias = Tensor2{{0, 0.5}};
  p.denoise_out.weight = Tensor2{{1, 2}, {3, 0}};
  p.denoise_out.bias = Tensor2{{0, -1}};
  // s = [1, 0], z = [2, -1]: pre = [3, 2 - 2 + 0.5] = [3, 0.5]; out = [3 + 1.5, 6 - 1]
  const LatentRep out = denoise(p, DropoutMask{{1, 0}}, std::vector<double>{2, -1});
  EXPECT_EQ(out, (LatentRep{4.5, 5}));
  // s = [0, 1], z = [-1, 0]: pre = [-1, -1 + 0.5] -> relu 0; out = bias
  EXPECT_EQ(denoise(p, DropoutMask{{0, 1}}, std::vector<double>{-1, 0}), (LatentRep{0, -1}));
}

TEST(Params, ShapesOnThreeFeatureSchema) {
  auto schema = std::make_shared<const FeatureSchema>(
      FeatureSchema(std::vector<FeatureDescriptor>{{"u", {"", "a", "b"}}, {"i", {"", "x"}}, {"c", {"", "p", "q", "r"}}}));
  ModelConfig cfg;
  cfg.embedding_dim = 4;
  cfg.latent_dim = 6;
  cfg.mlp_hidden = {5};
  cfg.cross_layers = 1;
  cfg.denoiser_hidden = 7;
  const ModelParams p = init_params(*schema, cfg, 1);
  EXPECT_EQ(p.embeddings[0].rows(), 3u);
  EXPECT_EQ(p.embeddings[1].rows(), 2u);
  EXPECT_EQ(p.embeddings[2].rows(), 4u);
  EXPECT_EQ(p.concat_dim(), 12u);
  EXPECT_EQ(p.cross[0].weight.rows(), 12u);
  EXPECT_EQ(p.cross[0].weight.cols(), 12u);
  EXPECT_EQ(p.mlp[0].weight.cols(), 5u);
  EXPECT_EQ(p.mlp[1].weight.cols(), 6u);
  EXPECT_EQ(p.head.weight.rows(), 6u);
  EXPECT_EQ(p.denoise_hidden.weight.rows(), 3u + 6u);
  EXPECT_EQ(p.denoise_hidden.weight.cols(), 7u);
  EXPECT_EQ(p.denoise_out.weight.cols(), 6u);
  const Sample s{1, 0, {1, 1, 3}};
  EXPECT_EQ(extract(p, s).size(), 6u);
  EXPECT_EQ(denoise(p, mask_from_observed(s), extract(p, s)).size(), 6u);
}

TEST(Serving, FullyObservedStillUsesDenoiserWithZeroMask) {
  const auto schema = tiny_schema(4, 6);
  const ModelParams p = init_params(*schema, tiny_config(), 9);
  const Sample s = random_samples(*schema, 1, 10, 0.0)[0];
  ServeTrace trace;
  const double served = serve_predict(p, s, &trace);
  EXPECT_EQ(trace.mask.count(), 0u);
  EXPECT_EQ(served, predict(p, denoise(p, DropoutMask{{0, 0, 0, 0}}, extract(p, s))));
  EXPECT_NE(served, base_predict(p, s));
}

TEST(Serving, DenoisedAndBaseDifferOnMaskedSamples) {
  const auto schema = tiny_schema(4, 6);
  const ModelParams p = init_params(*schema, tiny_config(), 11);
  std::vector<double> delta;
  for (const Sample& s : random_samples(*schema, 200, 12, 0.3)) {
    if (mask_from_observed(s).count() == 0) continue;
    delta.push_back(std::abs(serve_predict(p, s) - base_predict(p, s)));
  }
  ASSERT_FALSE(delta.empty());
  std::sort(delta.begin(), delta.end());
  const double median = delta[delta.size() / 2];
  std::cout << "|serve - base| over " << delta.size() << " masked samples: min " << delta.front()
            << " median " << median << " max " << delta.back() << "\n";
  EXPECT_GT(median, 0.0);
}

}  // namespace
}  // namespace asymdiff
