#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymdiff/featurespace/schema.hpp"
#include "asymdiff/metrics/metrics.hpp"
#include "asymdiff/trainer/trainer.hpp"

namespace asymdiff {

// One comparison arm: a diffusion mechanism, loss weights and a serving path.
// Everything else (data order, init seed, h/f architecture) comes from the
// shared TrainConfig.
struct ArmSpec {
  std::string name;
  DiffusionMode diffusion = DiffusionMode::kAsymmetric;
  double lambda_main = 1.0;
  double lambda_recon = 1.0;
  double lambda_aux = 1.0;
  ServingPath serving = ServingPath::kDenoised;

  // base | asymdiff | asymdiff_wo_recon | asymdiff_wo_aux | gauss_diff
  static ArmSpec named(const std::string& name);
  static const std::vector<std::string>& names();

  TrainConfig apply(TrainConfig shared) const;
  nlohmann::json to_json() const;
};

// Fingerprint of a canonical JSON value.
std::string config_hash(const nlohmann::json& j);

// Hash of the parts every arm must share: data order, init seed, optimizer and
// h/f architecture (loss weights and diffusion mechanism excluded).
std::string shared_config_hash(const TrainConfig& config);

// Scores every eval sample along `path` and computes AUC/UAUC/log-loss.
MetricsReport evaluate_params(const ModelParams& params, std::span<const Sample> eval, ServingPath path);

struct ArmResult {
  MetricsReport report;
  std::string shared_hash;
};

// Trains and evaluates `arm` once per seed (seed replaces shared.seed).
std::vector<ArmResult> run_arm(const ArmSpec& arm, const Dataset& train, const Dataset& eval,
                               const TrainConfig& shared, std::span<const std::uint64_t> seeds,
                               double eval_missing_rate = 0.0);

}  // namespace asymdiff
