#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymdiff/featurespace/schema.hpp"
#include "asymdiff/model/checkpoint.hpp"
#include "asymdiff/model/networks.hpp"
#include "asymdiff/model/params.hpp"
#include "asymdiff/numeric/adam.hpp"
#include "asymdiff/random.hpp"

namespace asymdiff {

// Which corruption feeds the denoiser during training.
enum class DiffusionMode {
  kNone,        // plain cross-entropy training, no denoiser involvement
  kAsymmetric,  // feature dropout in token space, denoising in latent space
  kGaussian,    // symmetric Gaussian noise on the latent, closed-form marginal
};

std::string to_string(DiffusionMode mode);
DiffusionMode parse_diffusion_mode(const std::string& name);

// Linear-beta variance schedule for the Gaussian arm.
struct GaussianSchedule {
  std::vector<double> betas;
  std::vector<double> alpha_bars;  // alpha_bars[k-1] = prod_{i<=k} (1 - beta_i)

  static GaussianSchedule linear(std::size_t steps, double beta_min, double beta_max);
  static GaussianSchedule from_betas(std::vector<double> betas);
  std::size_t steps() const noexcept { return betas.size(); }
};

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  AdamConfig adam;
  ModelConfig model;
  DiffusionMode diffusion = DiffusionMode::kAsymmetric;
  std::size_t gaussian_steps = 10;
  double gaussian_beta_min = 1e-4;
  double gaussian_beta_max = 0.1;
  std::size_t log_every = 50;
  std::size_t eval_every = 0;        // steps; 0 disables in-training evaluation
  std::size_t checkpoint_every = 0;  // steps; 0 writes only the final checkpoint

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossBreakdown {
  double main = 0.0;
  double recon = 0.0;
  double aux = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

nlohmann::json to_json(const LossBreakdown& l);

// Forward-process draws for one batch, fixed up front so the loss is a
// deterministic function of the parameters.
struct NoisyBatch {
  std::vector<Sample> noisy;  // x_T (asymmetric mode)
  Tensor2 step_embedding;     // B x N: dropout mask, or one-hot step index (Gaussian)
  Tensor2 gaussian_noise;     // B x d_z (Gaussian mode)
  std::vector<double> signal_scale;  // sqrt(alpha_bar_k) per row
  std::vector<double> noise_scale;   // sqrt(1 - alpha_bar_k) per row
  std::size_t clamp_events = 0;
};

NoisyBatch draw_noise(std::span<const Sample> batch, DiffusionMode mode,
                      const GaussianSchedule* schedule, std::size_t latent_dim, Rng& rng);

// Step index k (1-based) as a one-hot row of width n. Requires k <= n.
std::vector<double> gaussian_step_embedding(std::size_t k, std::size_t n);

// lambda_main * L_main + lambda_recon * L_recon + lambda_aux * L_aux, each a
// batch mean. When `grads` is non-null the gradient of the total is added to it.
// `recon_target` replaces z0 as the (constant) reconstruction target; used to
// check stop-gradient gradients against finite differences.
LossBreakdown loss_and_gradients(const ModelParams& params, const ModelConfig& config,
                                 DiffusionMode mode, std::span<const Sample> batch,
                                 const NoisyBatch& noise, ModelParams* grads,
                                 const Tensor2* recon_target = nullptr);

// One optimizer update. Throws NumericError on a non-finite loss.
LossBreakdown train_step(ModelParams& params, Adam& optimizer, std::span<const Sample> batch,
                         Rng& rng, const TrainConfig& config,
                         const GaussianSchedule* schedule = nullptr,
                         std::size_t* clamp_events = nullptr);

// Append-only JSON-lines log.
class RunLog {
 public:
  explicit RunLog(std::ostream* out) : out_(out) {}
  void record(const nlohmann::json& entry);

 private:
  std::ostream* out_;
};

// Owns parameters and optimizer state for one run; single writer.
class Trainer {
 public:
  Trainer(std::shared_ptr<const FeatureSchema> schema, TrainConfig config);
  // Continues from a checkpoint that carries optimizer state.
  Trainer(const Checkpoint& resume, TrainConfig config);

  // Trains until config.epochs epochs have been consumed (counting steps
  // already taken). Batch order and noise depend only on (seed, step).
  void fit(std::span<const Sample> train, RunLog* log = nullptr);

  // One step on an explicit batch with noise drawn from the (seed, step) stream.
  LossBreakdown step(std::span<const Sample> batch);

  std::function<nlohmann::json(const ModelParams&)> evaluator;
  std::function<void(const Trainer&)> on_checkpoint;

  const ModelParams& params() const noexcept { return params_; }
  ModelParams& mutable_params() noexcept { return params_; }
  const TrainConfig& config() const noexcept { return config_; }
  const std::shared_ptr<const FeatureSchema>& schema() const noexcept { return schema_; }
  std::int64_t global_step() const noexcept { return step_; }
  std::size_t clamp_events() const noexcept { return clamp_events_; }
  Checkpoint checkpoint(nlohmann::json meta) const;

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  TrainConfig config_;
  ModelParams params_;
  Adam optimizer_;
  std::optional<GaussianSchedule> schedule_;
  std::int64_t step_ = 0;
  std::size_t clamp_events_ = 0;
};

// Sample order of one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

enum class ServingPath { kBase, kDenoised };
std::string to_string(ServingPath path);
ServingPath parse_serving_path(const std::string& name);

struct ServeTrace {
  DropoutMask mask;
  LatentRep latent;    // h(x)
  LatentRep denoised;  // g([s, h(x)])
  double probability = 0.0;
};

// f(g([s, h(x)])) with s the observed-missingness mask of x.
double serve_predict(const ModelParams& params, const Sample& x, ServeTrace* trace = nullptr);
// f(h(x)).
double base_predict(const ModelParams& params, const Sample& x);

// Batched prediction along either path.
std::vector<double> predict_samples(const ModelParams& params, std::span<const Sample> samples,
                                    ServingPath path, std::size_t batch_size = 1024);

// As predict_samples, after verifying the dataset was encoded with the
// checkpoint's schema (DataError otherwise).
std::vector<double> predict_dataset(const Checkpoint& ckpt, const Dataset& data, ServingPath path);

}  // namespace asymdiff
