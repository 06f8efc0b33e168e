#include "asymdiff/model/params.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "asymdiff/errors.hpp"
#include "asymdiff/random.hpp"

namespace asymdiff {

void ModelConfig::validate() const {
  if (embedding_dim == 0) throw ConfigError("model.embedding_dim must be > 0");
  if (latent_dim == 0) throw ConfigError("model.latent_dim must be > 0");
  if (denoiser_hidden == 0) throw ConfigError("model.denoiser_hidden must be > 0");
  for (std::size_t h : mlp_hidden) {
    if (h == 0) throw ConfigError("model.mlp_hidden sizes must be > 0");
  }
  for (double l : {lambda_main, lambda_recon, lambda_aux}) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("model loss weights must be finite and >= 0");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"embedding_dim", embedding_dim},
          {"latent_dim", latent_dim},
          {"mlp_hidden", mlp_hidden},
          {"cross_layers", cross_layers},
          {"denoiser_hidden", denoiser_hidden},
          {"lambda_main", lambda_main},
          {"lambda_recon", lambda_recon},
          {"lambda_aux", lambda_aux},
          {"stop_gradient_target", stop_gradient_target}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.cross_layers = j.value("cross_layers", c.cross_layers);
  c.denoiser_hidden = j.value("denoiser_hidden", c.denoiser_hidden);
  c.lambda_main = j.value("lambda_main", c.lambda_main);
  c.lambda_recon = j.value("lambda_recon", c.lambda_recon);
  c.lambda_aux = j.value("lambda_aux", c.lambda_aux);
  c.stop_gradient_target = j.value("stop_gradient_target", c.stop_gradient_target);
  c.validate();
  return c;
}

std::size_t ModelParams::concat_dim() const noexcept {
  std::size_t d = 0;
  for (const auto& e : embeddings) d += e.cols();
  return d;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.set_zero();
  return z;
}

void ModelParams::set_zero() {
  for (auto& [name, t] : blocks()) t->fill(0.0);
}

std::vector<std::pair<std::string, Tensor2*>> ModelParams::blocks() {
  std::vector<std::pair<std::string, Tensor2*>> out;
  for (std::size_t f = 0; f < embeddings.size(); ++f) {
    out.emplace_back("emb/" + feature_names.at(f), &embeddings[f]);
  }
  auto add_affine = [&out](const std::string& prefix, AffineParams& a) {
    out.emplace_back(prefix + "/weight", &a.weight);
    out.emplace_back(prefix + "/bias", &a.bias);
  };
  for (std::size_t l = 0; l < cross.size(); ++l) add_affine("cross/" + std::to_string(l), cross[l]);
  for (std::size_t l = 0; l < mlp.size(); ++l) add_affine("mlp/" + std::to_string(l), mlp[l]);
  add_affine("head", head);
  add_affine("denoise/hidden", denoise_hidden);
  add_affine("denoise/out", denoise_out);
  return out;
}

std::vector<std::pair<std::string, const Tensor2*>> ModelParams::blocks() const {
  auto mutable_blocks = const_cast<ModelParams*>(this)->blocks();
  std::vector<std::pair<std::string, const Tensor2*>> out;
  out.reserve(mutable_blocks.size());
  for (auto& [name, t] : mutable_blocks) out.emplace_back(std::move(name), t);
  return out;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : blocks()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

ModelParams make_params(const FeatureSchema& schema, const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.feature_names = schema.names();
  for (std::size_t f = 0; f < schema.size(); ++f) {
    p.embeddings.emplace_back(schema.vocab_size(f), config.embedding_dim);
  }
  const std::size_t concat = schema.size() * config.embedding_dim;
  for (std::size_t l = 0; l < config.cross_layers; ++l) p.cross.emplace_back(concat, concat);
  std::size_t d_in = concat;
  for (std::size_t h : config.mlp_hidden) {
    p.mlp.emplace_back(d_in, h);
    d_in = h;
  }
  p.mlp.emplace_back(d_in, config.latent_dim);
  p.head = AffineParams(config.latent_dim, 1);
  p.denoise_hidden = AffineParams(schema.size() + config.latent_dim, config.denoiser_hidden);
  p.denoise_out = AffineParams(config.denoiser_hidden, config.latent_dim);
  return p;
}

ModelParams init_params(const FeatureSchema& schema, const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = make_params(schema, config);
  Rng rng = make_rng(seed, {0x1a17});
  auto fill_uniform = [&rng](Tensor2& t, double limit) {
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : t.values()) v = u(rng);
  };
  for (auto& e : p.embeddings) fill_uniform(e, 0.05);
  auto glorot = [&](AffineParams& a) {
    fill_uniform(a.weight, std::sqrt(6.0 / static_cast<double>(a.weight.rows() + a.weight.cols())));
  };
  for (auto& a : p.cross) glorot(a);
  for (auto& a : p.mlp) glorot(a);
  glorot(p.head);
  glorot(p.denoise_hidden);
  glorot(p.denoise_out);
  return p;
}

std::vector<ParamSlot> param_slots(ModelParams& params, const ModelParams& grads) {
  auto pb = params.blocks();
  auto gb = grads.blocks();
  if (pb.size() != gb.size()) throw ConfigError("gradient container does not match parameters");
  std::vector<ParamSlot> slots;
  slots.reserve(pb.size());
  for (std::size_t i = 0; i < pb.size(); ++i) slots.push_back({pb[i].first, pb[i].second, gb[i].second});
  return slots;
}

}  // namespace asymdiff
