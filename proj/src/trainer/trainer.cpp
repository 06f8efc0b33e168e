#include "asymdiff/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "asymdiff/errors.hpp"
#include "asymdiff/featurespace/forward_process.hpp"
#include "asymdiff/hashing.hpp"
#include "asymdiff/numeric/layers.hpp"
#include "asymdiff/trainer/losses.hpp"

namespace asymdiff {

std::string to_string(DiffusionMode mode) {
  switch (mode) {
    case DiffusionMode::kNone: return "none";
    case DiffusionMode::kAsymmetric: return "asymmetric";
    case DiffusionMode::kGaussian: return "gaussian";
  }
  return "?";
}

DiffusionMode parse_diffusion_mode(const std::string& name) {
  if (name == "none") return DiffusionMode::kNone;
  if (name == "asymmetric") return DiffusionMode::kAsymmetric;
  if (name == "gaussian") return DiffusionMode::kGaussian;
  throw ConfigError("unknown diffusion mode '" + name + "'");
}

GaussianSchedule GaussianSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("gaussian schedule needs at least one step");
  GaussianSchedule s;
  double alpha_bar = 1.0;
  for (double b : betas) {
    if (!(b >= 0.0 && b < 1.0)) throw ConfigError("gaussian betas must lie in [0, 1)");
    alpha_bar *= 1.0 - b;
    s.alpha_bars.push_back(alpha_bar);
  }
  s.betas = std::move(betas);
  return s;
}

GaussianSchedule GaussianSchedule::linear(std::size_t steps, double beta_min, double beta_max) {
  if (steps == 0) throw ConfigError("gaussian schedule needs at least one step");
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_min + t * (beta_max - beta_min);
  }
  return from_betas(std::move(betas));
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(adam.lr > 0.0)) throw ConfigError("train.adam.lr must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train.adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("train.adam.eps must be > 0");
  if (diffusion == DiffusionMode::kGaussian) {
    if (gaussian_steps == 0) throw ConfigError("train.gaussian_steps must be >= 1");
    if (!(gaussian_beta_min >= 0.0 && gaussian_beta_max < 1.0 && gaussian_beta_min <= gaussian_beta_max)) {
      throw ConfigError("train gaussian betas must satisfy 0 <= beta_min <= beta_max < 1");
    }
  }
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"adam", {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
          {"model", model.to_json()},
          {"diffusion", to_string(diffusion)},
          {"gaussian_steps", gaussian_steps},
          {"gaussian_beta_min", gaussian_beta_min},
          {"gaussian_beta_max", gaussian_beta_max},
          {"log_every", log_every},
          {"eval_every", eval_every},
          {"checkpoint_every", checkpoint_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    c.adam.lr = a.value("lr", c.adam.lr);
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.eps = a.value("eps", c.adam.eps);
  }
  if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
  if (j.contains("diffusion")) c.diffusion = parse_diffusion_mode(j.at("diffusion").get<std::string>());
  c.gaussian_steps = j.value("gaussian_steps", c.gaussian_steps);
  c.gaussian_beta_min = j.value("gaussian_beta_min", c.gaussian_beta_min);
  c.gaussian_beta_max = j.value("gaussian_beta_max", c.gaussian_beta_max);
  c.log_every = j.value("log_every", c.log_every);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

nlohmann::json to_json(const LossBreakdown& l) {
  return {{"main", l.main}, {"recon", l.recon}, {"aux", l.aux}, {"total", l.total}};
}

std::vector<double> gaussian_step_embedding(std::size_t k, std::size_t n) {
  if (k == 0 || k > n) {
    throw ConfigError("gaussian step " + std::to_string(k) + " does not fit a step embedding of width " +
                      std::to_string(n) + " (need gaussian_steps <= number of features)");
  }
  std::vector<double> row(n, 0.0);
  row[k - 1] = 1.0;
  return row;
}

NoisyBatch draw_noise(std::span<const Sample> batch, DiffusionMode mode,
                      const GaussianSchedule* schedule, std::size_t latent_dim, Rng& rng) {
  NoisyBatch nb;
  if (batch.empty() || mode == DiffusionMode::kNone) return nb;
  const std::size_t n = batch.front().features.size();
  if (mode == DiffusionMode::kAsymmetric) {
    std::vector<DropoutMask> masks;
    masks.reserve(batch.size());
    nb.noisy.reserve(batch.size());
    for (const Sample& x0 : batch) {
      const std::size_t steps = sample_step_count(rng, n);
      ForwardResult fr = forward_process(x0, steps, rng);
      nb.clamp_events += fr.clamped ? 1 : 0;
      nb.noisy.push_back(std::move(fr.noisy));
      masks.push_back(std::move(fr.mask));
    }
    nb.step_embedding = step_embedding_matrix(masks);
    return nb;
  }
  if (schedule == nullptr) throw ConfigError("gaussian diffusion needs a schedule");
  nb.step_embedding = Tensor2(batch.size(), n);
  nb.gaussian_noise = Tensor2(batch.size(), latent_dim);
  std::uniform_int_distribution<std::size_t> pick_step(1, schedule->steps());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::size_t k = pick_step(rng);
    const auto row = gaussian_step_embedding(k, n);
    std::copy(row.begin(), row.end(), nb.step_embedding.row(b).begin());
    const double alpha_bar = schedule->alpha_bars[k - 1];
    nb.signal_scale.push_back(std::sqrt(alpha_bar));
    nb.noise_scale.push_back(std::sqrt(1.0 - alpha_bar));
    for (double& e : nb.gaussian_noise.row(b)) e = normal(rng);
  }
  return nb;
}

LossBreakdown loss_and_gradients(const ModelParams& params, const ModelConfig& config,
                                 DiffusionMode mode, std::span<const Sample> batch,
                                 const NoisyBatch& noise, ModelParams* grads,
                                 const Tensor2* recon_target) {
  if (batch.empty()) throw ConfigError("empty batch");
  const std::size_t rows = batch.size();
  const std::size_t dz = params.latent_dim();
  const double inv_b = 1.0 / static_cast<double>(rows);
  const bool backward = grads != nullptr;

  ExtractorCache clean_cache;
  const Tensor2 z0 = extract_batch(params, TokenBatch::from(batch), backward ? &clean_cache : nullptr);
  const Tensor2 logits = predict_logits(params, z0);
  LossBreakdown loss;
  Tensor2 d_logits(rows, 1);
  for (std::size_t b = 0; b < rows; ++b) {
    const int y = batch[b].label;
    loss.main += loss_main(y, sigmoid(logits[b]));
    d_logits[b] = config.lambda_main * bce_logit_grad(y, logits[b]) * inv_b;
  }
  loss.main *= inv_b;

  Tensor2 d_z0(rows, dz);
  if (mode != DiffusionMode::kNone) {
    ExtractorCache noisy_cache;
    Tensor2 z_noisy;
    if (mode == DiffusionMode::kAsymmetric) {
      if (noise.noisy.size() != rows) throw ConfigError("noisy batch does not match the clean batch");
      z_noisy = extract_batch(params, TokenBatch::from(std::span<const Sample>(noise.noisy)),
                              backward ? &noisy_cache : nullptr);
    } else {
      require_shape(noise.gaussian_noise, rows, dz, "gaussian noise");
      z_noisy = Tensor2(rows, dz);
      for (std::size_t b = 0; b < rows; ++b) {
        for (std::size_t i = 0; i < dz; ++i) {
          z_noisy(b, i) = noise.signal_scale[b] * z0(b, i) + noise.noise_scale[b] * noise.gaussian_noise(b, i);
        }
      }
    }

    DenoiserCache denoise_cache;
    const Tensor2 z0_prime = denoise_batch(params, noise.step_embedding, z_noisy,
                                           backward ? &denoise_cache : nullptr);
    const Tensor2& target = recon_target ? *recon_target : z0;
    require_shape(target, rows, dz, "reconstruction target");
    Tensor2 d_z0_prime(rows, dz);
    for (std::size_t b = 0; b < rows; ++b) {
      loss.recon += loss_recon(z0_prime.row(b), target.row(b));
      for (std::size_t i = 0; i < dz; ++i) {
        d_z0_prime(b, i) = config.lambda_recon * 2.0 * (z0_prime(b, i) - target(b, i)) * inv_b;
      }
    }
    loss.recon *= inv_b;

    const Tensor2 aux_logits = predict_logits(params, z0_prime);
    Tensor2 d_aux_logits(rows, 1);
    for (std::size_t b = 0; b < rows; ++b) {
      const int y = batch[b].label;
      loss.aux += loss_main(y, sigmoid(aux_logits[b]));
      d_aux_logits[b] = config.lambda_aux * bce_logit_grad(y, aux_logits[b]) * inv_b;
    }
    loss.aux *= inv_b;

    if (backward) {
      Tensor2 d_from_head;
      predict_backward(params, z0_prime, d_aux_logits, *grads, d_from_head);
      for (std::size_t i = 0; i < d_z0_prime.size(); ++i) d_z0_prime[i] += d_from_head[i];
      if (!config.stop_gradient_target && recon_target == nullptr) {
        for (std::size_t b = 0; b < rows; ++b) {
          for (std::size_t i = 0; i < dz; ++i) {
            d_z0(b, i) -= config.lambda_recon * 2.0 * (z0_prime(b, i) - z0(b, i)) * inv_b;
          }
        }
      }
      Tensor2 d_noisy;
      denoise_backward(params, denoise_cache, d_z0_prime, *grads, &d_noisy);
      if (mode == DiffusionMode::kAsymmetric) {
        extract_backward(params, noisy_cache, d_noisy, *grads);
      } else {
        for (std::size_t b = 0; b < rows; ++b) {
          for (std::size_t i = 0; i < dz; ++i) d_z0(b, i) += noise.signal_scale[b] * d_noisy(b, i);
        }
      }
    }
  }

  if (backward) {
    Tensor2 d_from_head;
    predict_backward(params, z0, d_logits, *grads, d_from_head);
    for (std::size_t i = 0; i < d_z0.size(); ++i) d_z0[i] += d_from_head[i];
    extract_backward(params, clean_cache, d_z0, *grads);
  }

  loss.total = config.lambda_main * loss.main + config.lambda_recon * loss.recon +
               config.lambda_aux * loss.aux;
  return loss;
}

LossBreakdown train_step(ModelParams& params, Adam& optimizer, std::span<const Sample> batch,
                         Rng& rng, const TrainConfig& config, const GaussianSchedule* schedule,
                         std::size_t* clamp_events) {
  const NoisyBatch noise = draw_noise(batch, config.diffusion, schedule, params.latent_dim(), rng);
  if (clamp_events) *clamp_events += noise.clamp_events;
  ModelParams grads = params.zeros_like();
  const LossBreakdown loss =
      loss_and_gradients(params, config.model, config.diffusion, batch, noise, &grads);
  if (!std::isfinite(loss.total) || !std::isfinite(loss.main) || !std::isfinite(loss.recon) ||
      !std::isfinite(loss.aux)) {
    throw NumericError("non-finite loss at optimizer step " + std::to_string(optimizer.steps() + 1) +
                       ": " + to_json(loss).dump());
  }
  auto slots = param_slots(params, grads);
  optimizer.step(slots);
  return loss;
}

void RunLog::record(const nlohmann::json& entry) {
  if (out_ == nullptr) return;
  *out_ << entry.dump() << '\n';
  out_->flush();
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, {0x0de7, epoch});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Trainer::Trainer(std::shared_ptr<const FeatureSchema> schema, TrainConfig config)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      params_(init_params(*schema_, config_.model, config_.seed)),
      optimizer_(config_.adam) {
  config_.validate();
  if (config_.diffusion == DiffusionMode::kGaussian) {
    schedule_ = GaussianSchedule::linear(config_.gaussian_steps, config_.gaussian_beta_min,
                                         config_.gaussian_beta_max);
    gaussian_step_embedding(config_.gaussian_steps, schema_->size());
  }
}

Trainer::Trainer(const Checkpoint& resume, TrainConfig config) : Trainer(resume.schema, std::move(config)) {
  if (!(resume.config == config_.model)) throw ConfigError("resume: model config differs from checkpoint");
  params_ = resume.params;
  if (resume.optimizer) {
    optimizer_.restore(resume.optimizer->step, resume.optimizer->first_moments,
                       resume.optimizer->second_moments);
    step_ = resume.optimizer->step;
  }
  clamp_events_ = resume.meta.value("clamp_events", std::size_t{0});
}

LossBreakdown Trainer::step(std::span<const Sample> batch) {
  Rng rng = make_rng(config_.seed, {0xd1ff, static_cast<std::uint64_t>(step_)});
  LossBreakdown loss = train_step(params_, optimizer_, batch, rng, config_,
                                  schedule_ ? &*schedule_ : nullptr, &clamp_events_);
  ++step_;
  return loss;
}

void Trainer::fit(std::span<const Sample> train, RunLog* log) {
  if (train.empty()) throw DataError("empty training set");
  for (const Sample& s : train) validate_sample(s, *schema_);
  const std::size_t per_epoch = (train.size() + config_.batch_size - 1) / config_.batch_size;
  const std::int64_t total = static_cast<std::int64_t>(per_epoch * config_.epochs);
  if (log && step_ == 0) {
    log->record({{"event", "config"},
                 {"seed", config_.seed},
                 {"step_count_law", "uniform{0..N} inclusive"},
                 {"train", config_.to_json()},
                 {"steps_total", total}});
  }
  std::vector<Sample> batch;
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order;
  while (step_ < total) {
    const std::size_t epoch = static_cast<std::size_t>(step_) / per_epoch;
    const std::size_t offset = (static_cast<std::size_t>(step_) % per_epoch) * config_.batch_size;
    if (epoch != cached_epoch) {
      order = epoch_order(train.size(), config_.seed, epoch);
      cached_epoch = epoch;
    }
    const std::size_t end = std::min(offset + config_.batch_size, train.size());
    batch.clear();
    for (std::size_t i = offset; i < end; ++i) batch.push_back(train[order[i]]);

    const std::size_t clamps_before = clamp_events_;
    const LossBreakdown loss = step(batch);
    const auto s = static_cast<std::size_t>(step_);
    if (log && config_.log_every && (s % config_.log_every == 0 || step_ == total)) {
      log->record({{"event", "step"},
                   {"step", step_},
                   {"epoch", epoch},
                   {"loss", to_json(loss)},
                   {"lambda", {config_.model.lambda_main, config_.model.lambda_recon, config_.model.lambda_aux}},
                   {"seed", config_.seed},
                   {"clamp_events", clamp_events_},
                   {"clamps_this_step", clamp_events_ - clamps_before}});
    }
    if (evaluator && config_.eval_every && s % config_.eval_every == 0) {
      nlohmann::json entry = evaluator(params_);
      entry["event"] = "eval";
      entry["step"] = step_;
      if (log) log->record(entry);
    }
    if (on_checkpoint && config_.checkpoint_every && s % config_.checkpoint_every == 0 && step_ != total) {
      on_checkpoint(*this);
    }
  }
}

Checkpoint Trainer::checkpoint(nlohmann::json meta) const {
  Checkpoint c;
  c.schema = schema_;
  c.config = config_.model;
  c.params = params_;
  meta["clamp_events"] = clamp_events_;
  meta["step"] = step_;
  c.meta = std::move(meta);
  c.optimizer = OptimizerState{optimizer_.steps(), optimizer_.first_moments(), optimizer_.second_moments()};
  if (c.optimizer->first_moments.empty()) {
    for (const auto& [name, t] : params_.blocks()) {
      c.optimizer->first_moments.emplace_back(t->rows(), t->cols());
      c.optimizer->second_moments.emplace_back(t->rows(), t->cols());
    }
  }
  return c;
}

std::string to_string(ServingPath path) { return path == ServingPath::kBase ? "base" : "denoised"; }

ServingPath parse_serving_path(const std::string& name) {
  if (name == "base") return ServingPath::kBase;
  if (name == "denoised") return ServingPath::kDenoised;
  throw ConfigError("unknown serving path '" + name + "'");
}

double serve_predict(const ModelParams& params, const Sample& x, ServeTrace* trace) {
  DropoutMask mask = mask_from_observed(x);
  LatentRep latent = extract(params, x);
  LatentRep denoised = denoise(params, mask, latent);
  const double p = predict(params, denoised);
  if (trace) *trace = ServeTrace{std::move(mask), std::move(latent), std::move(denoised), p};
  return p;
}

double base_predict(const ModelParams& params, const Sample& x) {
  return predict(params, extract(params, x));
}

std::vector<double> predict_samples(const ModelParams& params, std::span<const Sample> samples,
                                    ServingPath path, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const auto chunk = samples.subspan(begin, std::min(batch_size, samples.size() - begin));
    Tensor2 z = extract_batch(params, TokenBatch::from(chunk));
    if (path == ServingPath::kDenoised) {
      std::vector<DropoutMask> masks;
      masks.reserve(chunk.size());
      for (const Sample& s : chunk) masks.push_back(mask_from_observed(s));
      z = denoise_batch(params, step_embedding_matrix(masks), z);
    }
    const auto p = predict_batch(params, z);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<double> predict_dataset(const Checkpoint& ckpt, const Dataset& data, ServingPath path) {
  if (!data.schema || data.schema->hash() != ckpt.schema->hash()) {
    throw DataError("schema hash mismatch: checkpoint " + hex64(ckpt.schema->hash()) + ", input " +
                    (data.schema ? hex64(data.schema->hash()) : std::string("<none>")));
  }
  return predict_samples(ckpt.params, data.samples, path);
}

}  // namespace asymdiff
