#pragma once

// Batched forward/backward passes of the three networks:
//   h  extractor  : tokens -> embeddings -> DCN-V2 cross layers -> ReLU MLP -> latent
//   f  predictor  : latent -> sigmoid(w.z + b)
//   g  denoiser   : [step embedding, noisy latent] -> affine -> ReLU -> affine -> latent
// Backward functions accumulate into a ModelParams-shaped gradient container.

#include <cstdint>
#include <span>
#include <vector>

#include "asymdiff/featurespace/schema.hpp"
#include "asymdiff/model/params.hpp"
#include "asymdiff/numeric/tensor.hpp"

namespace asymdiff {

using LatentRep = std::vector<double>;

// Row-major B x N token matrix.
struct TokenBatch {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::vector<std::uint32_t> tokens;

  static TokenBatch from(std::span<const Sample> samples);
  static TokenBatch from(std::span<const Sample* const> samples);
  std::uint32_t at(std::size_t b, std::size_t f) const { return tokens[b * features + f]; }
};

struct ExtractorCache {
  TokenBatch batch;
  Tensor2 input;                    // concatenated embeddings
  std::vector<Tensor2> cross_in;    // x_l entering cross layer l (x_0 == input)
  std::vector<Tensor2> cross_proj;  // x_l W_l + b_l
  std::vector<Tensor2> mlp_in;      // activation entering MLP layer l
  Tensor2 latent;
};

// h over a batch. The cache is optional; it is required for backward.
Tensor2 extract_batch(const ModelParams& params, const TokenBatch& batch,
                      ExtractorCache* cache = nullptr);
void extract_backward(const ModelParams& params, const ExtractorCache& cache,
                      const Tensor2& d_latent, ModelParams& grads);
LatentRep extract(const ModelParams& params, const Sample& sample);

// Single DCN-V2 cross layer over one batch: x0 * (x W + b) + x.
Tensor2 cross_layer(const Tensor2& x0, const Tensor2& x, const AffineParams& layer);

// f: B x 1 logits, and clamped probabilities.
Tensor2 predict_logits(const ModelParams& params, const Tensor2& latent);
std::vector<double> predict_batch(const ModelParams& params, const Tensor2& latent);
double predict(const ModelParams& params, std::span<const double> latent);
// d_latent is overwritten with the gradient w.r.t. the latent rows.
void predict_backward(const ModelParams& params, const Tensor2& latent, const Tensor2& d_logits,
                      ModelParams& grads, Tensor2& d_latent);

// Step embeddings as a B x N matrix of 0/1 reals.
Tensor2 step_embedding_matrix(std::span<const DropoutMask> masks);

struct DenoiserCache {
  Tensor2 input;   // [s, z_T]
  Tensor2 hidden;  // post-ReLU
};

Tensor2 denoise_batch(const ModelParams& params, const Tensor2& step_embedding,
                      const Tensor2& noisy_latent, DenoiserCache* cache = nullptr);
// d_noisy_latent may be null.
void denoise_backward(const ModelParams& params, const DenoiserCache& cache, const Tensor2& d_out,
                      ModelParams& grads, Tensor2* d_noisy_latent);
LatentRep denoise(const ModelParams& params, const DropoutMask& mask, std::span<const double> noisy_latent);

}  // namespace asymdiff
