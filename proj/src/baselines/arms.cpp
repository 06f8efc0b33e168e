#include "asymdiff/baselines/arms.hpp"

#include "asymdiff/errors.hpp"
#include "asymdiff/hashing.hpp"

namespace asymdiff {

const std::vector<std::string>& ArmSpec::names() {
  static const std::vector<std::string> kNames{"base", "asymdiff", "asymdiff_wo_recon", "asymdiff_wo_aux",
                                               "gauss_diff"};
  return kNames;
}

ArmSpec ArmSpec::named(const std::string& name) {
  ArmSpec a;
  a.name = name;
  if (name == "base") {
    a.diffusion = DiffusionMode::kNone;
    a.lambda_recon = 0.0;
    a.lambda_aux = 0.0;
    a.serving = ServingPath::kBase;
  } else if (name == "asymdiff") {
  } else if (name == "asymdiff_wo_recon") {
    a.lambda_recon = 0.0;
  } else if (name == "asymdiff_wo_aux") {
    a.lambda_aux = 0.0;
  } else if (name == "gauss_diff") {
    // symmetric latent diffusion used for auxiliary training only
    a.diffusion = DiffusionMode::kGaussian;
    a.lambda_aux = 0.0;
    a.serving = ServingPath::kBase;
  } else {
    throw ConfigError("unknown arm '" + name + "'");
  }
  return a;
}

TrainConfig ArmSpec::apply(TrainConfig shared) const {
  shared.diffusion = diffusion;
  shared.model.lambda_main = lambda_main;
  shared.model.lambda_recon = lambda_recon;
  shared.model.lambda_aux = lambda_aux;
  return shared;
}

nlohmann::json ArmSpec::to_json() const {
  return {{"name", name},
          {"diffusion", to_string(diffusion)},
          {"lambda_main", lambda_main},
          {"lambda_recon", lambda_recon},
          {"lambda_aux", lambda_aux},
          {"serving", to_string(serving)}};
}

std::string config_hash(const nlohmann::json& j) { return hex64(fnv1a64(j.dump())); }

std::string shared_config_hash(const TrainConfig& config) {
  nlohmann::json j = config.to_json();
  j.erase("diffusion");
  for (const char* k : {"lambda_main", "lambda_recon", "lambda_aux", "stop_gradient_target"}) {
    j["model"].erase(k);
  }
  for (const char* k : {"gaussian_steps", "gaussian_beta_min", "gaussian_beta_max"}) j.erase(k);
  return config_hash(j);
}

MetricsReport evaluate_params(const ModelParams& params, std::span<const Sample> eval, ServingPath path) {
  const auto scores = predict_samples(params, eval, path);
  std::vector<ScoredExample> scored(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) scored[i] = {eval[i].user_id, eval[i].label, scores[i]};
  MetricsReport r = compute_report(scored);
  r.serving_path = to_string(path);
  return r;
}

std::vector<ArmResult> run_arm(const ArmSpec& arm, const Dataset& train, const Dataset& eval,
                               const TrainConfig& shared, std::span<const std::uint64_t> seeds,
                               double eval_missing_rate) {
  if (!train.schema || !eval.schema || train.schema->hash() != eval.schema->hash()) {
    throw DataError("train and eval datasets use different schemas");
  }
  std::vector<ArmResult> out;
  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = arm.apply(shared);
    cfg.seed = seed;
    Trainer trainer(train.schema, cfg);
    trainer.fit(train.samples);
    ArmResult r;
    r.report = evaluate_params(trainer.params(), eval.samples, arm.serving);
    r.report.arm = arm.name;
    r.report.seed = seed;
    r.report.eval_missing_rate = eval_missing_rate;
    r.report.config_hash = config_hash({{"arm", arm.to_json()}, {"train", cfg.to_json()}});
    r.shared_hash = shared_config_hash(cfg);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace asymdiff
