#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "asymdiff/featurespace/schema.hpp"
#include "asymdiff/numeric/adam.hpp"
#include "asymdiff/numeric/tensor.hpp"

namespace asymdiff {

struct ModelConfig {
  std::size_t embedding_dim = 16;
  std::size_t latent_dim = 128;
  std::vector<std::size_t> mlp_hidden{256, 128};
  std::size_t cross_layers = 2;
  std::size_t denoiser_hidden = 128;
  double lambda_main = 1.0;
  double lambda_recon = 1.0;
  double lambda_aux = 1.0;
  // Treat z0 as a constant target in the reconstruction loss.
  bool stop_gradient_target = true;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static ModelConfig from_json(const nlohmann::json& j);

  bool operator==(const ModelConfig&) const = default;
};

struct AffineParams {
  Tensor2 weight;  // d_in x d_out
  Tensor2 bias;    // 1 x d_out

  AffineParams() = default;
  AffineParams(std::size_t d_in, std::size_t d_out) : weight(d_in, d_out), bias(1, d_out) {}
  bool operator==(const AffineParams&) const = default;
};

// Learnable state of the extractor h, predictor f and denoiser g.
// The same type doubles as the gradient container.
struct ModelParams {
  std::vector<std::string> feature_names;
  std::vector<Tensor2> embeddings;  // per feature: vocab x embedding_dim
  std::vector<AffineParams> cross;  // D x D, D = N * embedding_dim
  std::vector<AffineParams> mlp;    // hidden layers, then the latent projection
  AffineParams head;                // latent_dim x 1
  AffineParams denoise_hidden;      // (N + latent_dim) x denoiser_hidden
  AffineParams denoise_out;         // denoiser_hidden x latent_dim

  std::size_t num_features() const noexcept { return embeddings.size(); }
  std::size_t concat_dim() const noexcept;
  std::size_t latent_dim() const noexcept { return head.weight.rows(); }

  // Same shapes, all zeros.
  ModelParams zeros_like() const;
  void set_zero();

  // Every block in a fixed order with a stable name.
  std::vector<std::pair<std::string, Tensor2*>> blocks();
  std::vector<std::pair<std::string, const Tensor2*>> blocks() const;

  bool all_finite() const;
  bool operator==(const ModelParams&) const = default;
};

// Zero-filled parameters with the shapes implied by schema and config.
ModelParams make_params(const FeatureSchema& schema, const ModelConfig& config);

// Embeddings ~ U[-0.05, 0.05], weights ~ U[+-sqrt(6 / (d_in + d_out))], biases 0.
ModelParams init_params(const FeatureSchema& schema, const ModelConfig& config, std::uint64_t seed);

// Optimizer slots pairing each parameter block with its gradient block.
std::vector<ParamSlot> param_slots(ModelParams& params, const ModelParams& grads);

}  // namespace asymdiff
