#include "asymdiff/model/networks.hpp"

#include <algorithm>

#include "asymdiff/errors.hpp"
#include "asymdiff/numeric/kernels.hpp"
#include "asymdiff/numeric/layers.hpp"

namespace asymdiff {

TokenBatch TokenBatch::from(std::span<const Sample> samples) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return from(std::span<const Sample* const>(ptrs));
}

TokenBatch TokenBatch::from(std::span<const Sample* const> samples) {
  TokenBatch b;
  b.rows = samples.size();
  b.features = samples.empty() ? 0 : samples.front()->features.size();
  b.tokens.reserve(b.rows * b.features);
  for (const Sample* s : samples) {
    if (s->features.size() != b.features) throw DataError("batch mixes samples of different widths");
    b.tokens.insert(b.tokens.end(), s->features.begin(), s->features.end());
  }
  return b;
}

Tensor2 cross_layer(const Tensor2& x0, const Tensor2& x, const AffineParams& layer) {
  Tensor2 proj;
  affine_forward(x, layer.weight, layer.bias, proj);
  Tensor2 out(x.rows(), x.cols());
  kernels::active().mul_add(out.size(), x0.data(), proj.data(), x.data(), out.data());
  return out;
}

Tensor2 extract_batch(const ModelParams& params, const TokenBatch& batch, ExtractorCache* cache) {
  const std::size_t n = params.num_features();
  if (batch.features != n && batch.rows != 0) {
    throw DataError("sample has " + std::to_string(batch.features) + " features, model expects " +
                    std::to_string(n));
  }
  const std::size_t width = params.concat_dim();
  Tensor2 input(batch.rows, width);
  for (std::size_t b = 0; b < batch.rows; ++b) {
    double* dst = input.row(b).data();
    for (std::size_t f = 0; f < n; ++f) {
      const Tensor2& table = params.embeddings[f];
      const std::uint32_t id = batch.at(b, f);
      if (id >= table.rows()) {
        throw DataError("token id " + std::to_string(id) + " out of vocabulary for feature '" +
                        params.feature_names[f] + "'");
      }
      dst = std::copy_n(table.row(id).data(), table.cols(), dst);
    }
  }

  const auto& k = kernels::active();
  Tensor2 x = input;
  std::vector<Tensor2> cross_in, cross_proj;
  for (const AffineParams& layer : params.cross) {
    Tensor2 proj;
    affine_forward(x, layer.weight, layer.bias, proj);
    Tensor2 next(x.rows(), x.cols());
    k.mul_add(next.size(), input.data(), proj.data(), x.data(), next.data());
    if (cache) {
      cross_in.push_back(std::move(x));
      cross_proj.push_back(std::move(proj));
    }
    x = std::move(next);
  }

  std::vector<Tensor2> mlp_in;
  for (std::size_t l = 0; l < params.mlp.size(); ++l) {
    Tensor2 out;
    affine_forward(x, params.mlp[l].weight, params.mlp[l].bias, out);
    if (l + 1 < params.mlp.size()) relu_inplace(out);
    if (cache) mlp_in.push_back(std::move(x));
    x = std::move(out);
  }

  if (cache) {
    cache->batch = batch;
    cache->input = std::move(input);
    cache->cross_in = std::move(cross_in);
    cache->cross_proj = std::move(cross_proj);
    cache->mlp_in = std::move(mlp_in);
    cache->latent = x;
  }
  return x;
}

void extract_backward(const ModelParams& params, const ExtractorCache& cache,
                      const Tensor2& d_latent, ModelParams& grads) {
  require_shape(d_latent, cache.batch.rows, params.latent_dim(), "extract_backward d_latent");

  Tensor2 d = d_latent;
  for (std::size_t l = params.mlp.size(); l-- > 0;) {
    // mlp_in[l + 1] is the ReLU output of layer l
    if (l + 1 < params.mlp.size()) relu_backward_inplace(d, cache.mlp_in[l + 1]);
    Tensor2 d_prev;
    affine_backward_acc(d, cache.mlp_in[l], params.mlp[l].weight, &d_prev, grads.mlp[l].weight,
                        grads.mlp[l].bias);
    d = std::move(d_prev);
  }

  // d is now the gradient w.r.t. the cross-stack output.
  Tensor2 d_input(cache.input.rows(), cache.input.cols());
  for (std::size_t l = params.cross.size(); l-- > 0;) {
    const Tensor2& x0 = cache.input;
    const Tensor2& proj = cache.cross_proj[l];
    Tensor2 d_proj(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.size(); ++i) {
      d_proj[i] = d[i] * x0[i];
      d_input[i] += d[i] * proj[i];
    }
    Tensor2 d_x;
    affine_backward_acc(d_proj, cache.cross_in[l], params.cross[l].weight, &d_x,
                        grads.cross[l].weight, grads.cross[l].bias);
    for (std::size_t i = 0; i < d.size(); ++i) d_x[i] += d[i];
    d = std::move(d_x);
  }
  for (std::size_t i = 0; i < d.size(); ++i) d_input[i] += d[i];

  const std::size_t n = params.num_features();
  for (std::size_t b = 0; b < cache.batch.rows; ++b) {
    const double* src = d_input.row(b).data();
    for (std::size_t f = 0; f < n; ++f) {
      Tensor2& g = grads.embeddings[f];
      double* dst = g.row(cache.batch.at(b, f)).data();
      for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += src[j];
      src += g.cols();
    }
  }
}

LatentRep extract(const ModelParams& params, const Sample& sample) {
  const Sample* one[] = {&sample};
  Tensor2 z = extract_batch(params, TokenBatch::from(std::span<const Sample* const>(one)));
  return LatentRep(z.values().begin(), z.values().end());
}

Tensor2 predict_logits(const ModelParams& params, const Tensor2& latent) {
  return affine_forward(latent, params.head.weight, params.head.bias);
}

std::vector<double> predict_batch(const ModelParams& params, const Tensor2& latent) {
  Tensor2 logits = predict_logits(params, latent);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = clamp_probability(sigmoid(logits[i]));
  return out;
}

double predict(const ModelParams& params, std::span<const double> latent) {
  return predict_batch(params, Tensor2::row_vector(latent)).front();
}

void predict_backward(const ModelParams& params, const Tensor2& latent, const Tensor2& d_logits,
                      ModelParams& grads, Tensor2& d_latent) {
  affine_backward_acc(d_logits, latent, params.head.weight, &d_latent, grads.head.weight,
                      grads.head.bias);
}

Tensor2 step_embedding_matrix(std::span<const DropoutMask> masks) {
  const std::size_t n = masks.empty() ? 0 : masks.front().size();
  Tensor2 s(masks.size(), n);
  for (std::size_t b = 0; b < masks.size(); ++b) {
    if (masks[b].size() != n) throw ConfigError("step embeddings of different lengths in one batch");
    for (std::size_t f = 0; f < n; ++f) s(b, f) = masks[b].bits[f] ? 1.0 : 0.0;
  }
  return s;
}

Tensor2 denoise_batch(const ModelParams& params, const Tensor2& step_embedding,
                      const Tensor2& noisy_latent, DenoiserCache* cache) {
  const std::size_t n = params.num_features();
  const std::size_t dz = params.latent_dim();
  require_shape(step_embedding, noisy_latent.rows(), n, "denoise step embedding");
  require_shape(noisy_latent, step_embedding.rows(), dz, "denoise noisy latent");
  Tensor2 input(noisy_latent.rows(), n + dz);
  for (std::size_t b = 0; b < input.rows(); ++b) {
    double* dst = std::copy_n(step_embedding.row(b).data(), n, input.row(b).data());
    std::copy_n(noisy_latent.row(b).data(), dz, dst);
  }
  Tensor2 hidden;
  affine_forward(input, params.denoise_hidden.weight, params.denoise_hidden.bias, hidden);
  relu_inplace(hidden);
  Tensor2 out;
  affine_forward(hidden, params.denoise_out.weight, params.denoise_out.bias, out);
  if (cache) {
    cache->input = std::move(input);
    cache->hidden = std::move(hidden);
  }
  return out;
}

void denoise_backward(const ModelParams& params, const DenoiserCache& cache, const Tensor2& d_out,
                      ModelParams& grads, Tensor2* d_noisy_latent) {
  Tensor2 d_hidden;
  affine_backward_acc(d_out, cache.hidden, params.denoise_out.weight, &d_hidden,
                      grads.denoise_out.weight, grads.denoise_out.bias);
  relu_backward_inplace(d_hidden, cache.hidden);
  Tensor2 d_input;
  affine_backward_acc(d_hidden, cache.input, params.denoise_hidden.weight,
                      d_noisy_latent ? &d_input : nullptr, grads.denoise_hidden.weight,
                      grads.denoise_hidden.bias);
  if (d_noisy_latent) {
    const std::size_t n = params.num_features();
    const std::size_t dz = params.latent_dim();
    d_noisy_latent->resize(d_input.rows(), dz);
    for (std::size_t b = 0; b < d_input.rows(); ++b) {
      std::copy_n(d_input.row(b).data() + n, dz, d_noisy_latent->row(b).data());
    }
  }
}

LatentRep denoise(const ModelParams& params, const DropoutMask& mask, std::span<const double> noisy_latent) {
  const DropoutMask masks[] = {mask};
  Tensor2 out = denoise_batch(params, step_embedding_matrix(masks), Tensor2::row_vector(noisy_latent));
  return LatentRep(out.values().begin(), out.values().end());
}

}  // namespace asymdiff
