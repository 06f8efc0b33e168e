#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymdiff/featurespace/schema.hpp"
#include "asymdiff/random.hpp"

namespace asymdiff {

// Where a synthetic feature's token comes from.
enum class FeatureSource {
  kUser,     // fixed attribute of the user
  kItem,     // fixed attribute of the item
  kContext,  // drawn independently per sample
};

struct SynthFeature {
  std::string name;
  std::uint32_t cardinality = 2;  // distinct real values (vocab = cardinality + 1)
  FeatureSource source = FeatureSource::kContext;
};

enum class MissingMode { kTrain, kEval, kBoth };

std::string to_string(FeatureSource s);
std::string to_string(MissingMode m);

struct SynthSpec {
  std::size_t n_users = 1000;
  std::size_t n_items = 500;
  // Besides these, every dataset starts with the "user" and "item" id features.
  std::vector<SynthFeature> features = default_features();
  std::uint64_t weight_seed = 7;
  std::uint64_t seed = 1;
  double temperature = 0.5;
  std::size_t interaction_rank = 4;
  std::size_t n_train = 100000;
  std::size_t n_eval = 20000;
  double missing_rate = 0.2;
  MissingMode missing_mode = MissingMode::kEval;

  static std::vector<SynthFeature> default_features();
  std::size_t num_features() const noexcept { return features.size() + 2; }

  // Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

// Latent labeling process the synthetic data is drawn from.
struct GroundTruth {
  double temperature = 1.0;
  std::vector<std::vector<double>> token_weights;  // [feature][token], token 0 unused
  std::vector<std::vector<double>> user_factors;   // [user][rank]
  std::vector<std::vector<double>> item_factors;   // [item][rank]

  // Score of a fully observed sample (feature 0 = user id, 1 = item id).
  double score(const Sample& clean) const;
  double probability(const Sample& clean) const;
};

struct SynthData {
  Dataset train;
  Dataset eval;        // with the configured missingness applied
  Dataset eval_clean;  // the same rows before missingness
  GroundTruth truth;
};

SynthData generate(const SynthSpec& spec);

// Each feature slot independently becomes MISSING with probability rate. Labels untouched.
std::vector<Sample> inject_missingness(std::span<const Sample> samples, double rate, Rng& rng);

}  // namespace asymdiff
