#include "asymdiff/dataset/synth.hpp"

#include <cmath>
#include <random>
#include <unordered_set>

#include "asymdiff/errors.hpp"
#include "asymdiff/numeric/layers.hpp"

namespace asymdiff {

std::string to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::kUser: return "user";
    case FeatureSource::kItem: return "item";
    case FeatureSource::kContext: return "context";
  }
  return "?";
}

std::string to_string(MissingMode m) {
  switch (m) {
    case MissingMode::kTrain: return "train";
    case MissingMode::kEval: return "eval";
    case MissingMode::kBoth: return "both";
  }
  return "?";
}

namespace {

FeatureSource parse_source(const std::string& s) {
  if (s == "user") return FeatureSource::kUser;
  if (s == "item") return FeatureSource::kItem;
  if (s == "context") return FeatureSource::kContext;
  throw ConfigError("features[].source must be user, item or context, got '" + s + "'");
}

MissingMode parse_missing_mode(const std::string& s) {
  if (s == "train") return MissingMode::kTrain;
  if (s == "eval") return MissingMode::kEval;
  if (s == "both") return MissingMode::kBoth;
  throw ConfigError("missing_mode must be train, eval or both, got '" + s + "'");
}

}  // namespace

std::vector<SynthFeature> SynthSpec::default_features() {
  return {
      {"user_age", 8, FeatureSource::kUser},      {"user_gender", 3, FeatureSource::kUser},
      {"user_region", 20, FeatureSource::kUser},  {"item_genre", 12, FeatureSource::kItem},
      {"item_mood", 8, FeatureSource::kItem},     {"item_era", 6, FeatureSource::kItem},
      {"ctx_hour", 24, FeatureSource::kContext},  {"ctx_device", 5, FeatureSource::kContext},
      {"ctx_scene", 10, FeatureSource::kContext}, {"ctx_network", 4, FeatureSource::kContext},
  };
}

void SynthSpec::validate() const {
  if (n_users < 1) throw ConfigError("n_users must be >= 1");
  if (n_items < 1) throw ConfigError("n_items must be >= 1");
  if (n_train < 1) throw ConfigError("n_train must be >= 1");
  if (n_eval < 1) throw ConfigError("n_eval must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be > 0");
  if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) {
    throw ConfigError("missing_rate must lie in [0, 1], got " + std::to_string(missing_rate));
  }
  std::unordered_set<std::string> names{"user", "item"};
  for (const auto& f : features) {
    if (f.name.empty()) throw ConfigError("features[].name must be non-empty");
    if (!names.insert(f.name).second) throw ConfigError("duplicate feature name '" + f.name + "'");
    if (f.cardinality < 1) throw ConfigError("features[" + f.name + "].cardinality must be >= 1");
  }
}

nlohmann::json SynthSpec::to_json() const {
  auto feats = nlohmann::json::array();
  for (const auto& f : features) {
    feats.push_back({{"name", f.name}, {"cardinality", f.cardinality}, {"source", to_string(f.source)}});
  }
  return {{"n_users", n_users},
          {"n_items", n_items},
          {"features", feats},
          {"weight_seed", weight_seed},
          {"seed", seed},
          {"temperature", temperature},
          {"interaction_rank", interaction_rank},
          {"n_train", n_train},
          {"n_eval", n_eval},
          {"missing_rate", missing_rate},
          {"missing_mode", to_string(missing_mode)}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  s.n_users = j.value("n_users", s.n_users);
  s.n_items = j.value("n_items", s.n_items);
  if (j.contains("features")) {
    s.features.clear();
    for (const auto& fj : j.at("features")) {
      SynthFeature f;
      f.name = fj.at("name").get<std::string>();
      f.cardinality = fj.value("cardinality", f.cardinality);
      f.source = parse_source(fj.value("source", std::string("context")));
      s.features.push_back(std::move(f));
    }
  }
  s.weight_seed = j.value("weight_seed", s.weight_seed);
  s.seed = j.value("seed", s.seed);
  s.temperature = j.value("temperature", s.temperature);
  s.interaction_rank = j.value("interaction_rank", s.interaction_rank);
  s.n_train = j.value("n_train", s.n_train);
  s.n_eval = j.value("n_eval", s.n_eval);
  s.missing_rate = j.value("missing_rate", s.missing_rate);
  if (j.contains("missing_mode")) s.missing_mode = parse_missing_mode(j.at("missing_mode").get<std::string>());
  s.validate();
  return s;
}

double GroundTruth::score(const Sample& clean) const {
  double s = 0.0;
  for (std::size_t f = 0; f < clean.features.size(); ++f) {
    const std::uint32_t t = clean.features[f];
    if (t != kMissingToken) s += token_weights[f][t];
  }
  const std::uint32_t user = clean.features[0];
  const std::uint32_t item = clean.features[1];
  if (user != kMissingToken && item != kMissingToken) {
    const auto& u = user_factors[user - 1];
    const auto& v = item_factors[item - 1];
    for (std::size_t r = 0; r < u.size(); ++r) s += u[r] * v[r];
  }
  return s;
}

double GroundTruth::probability(const Sample& clean) const { return sigmoid(score(clean) / temperature); }

std::vector<Sample> inject_missingness(std::span<const Sample> samples, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("missing rate must lie in [0, 1]");
  std::vector<Sample> out(samples.begin(), samples.end());
  if (rate == 0.0) return out;
  std::bernoulli_distribution drop(rate);
  for (Sample& s : out) {
    for (auto& t : s.features) {
      if (drop(rng)) t = kMissingToken;
    }
  }
  return out;
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_features();

  std::vector<std::pair<std::string, std::uint32_t>> vocab{
      {"user", static_cast<std::uint32_t>(spec.n_users + 1)},
      {"item", static_cast<std::uint32_t>(spec.n_items + 1)}};
  for (const auto& f : spec.features) vocab.emplace_back(f.name, f.cardinality + 1);
  auto schema = std::make_shared<const FeatureSchema>(FeatureSchema::synthetic(vocab, 0));

  SynthData data;
  GroundTruth& truth = data.truth;
  truth.temperature = spec.temperature;
  Rng wrng = make_rng(spec.weight_seed, {0x9e7});
  std::normal_distribution<double> weight(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  truth.token_weights.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    truth.token_weights[f].assign(vocab[f].second, 0.0);
    for (std::uint32_t t = 1; t < vocab[f].second; ++t) truth.token_weights[f][t] = weight(wrng);
  }
  // Factor entries ~ N(0, 1/sqrt(rank)) give the interaction unit variance.
  const double factor_sd =
      spec.interaction_rank ? std::pow(static_cast<double>(spec.interaction_rank), -0.25) : 0.0;
  std::normal_distribution<double> factor(0.0, factor_sd > 0.0 ? factor_sd : 1.0);
  auto draw_factors = [&](std::size_t count) {
    std::vector<std::vector<double>> out(count, std::vector<double>(spec.interaction_rank));
    for (auto& row : out)
      for (double& v : row) v = factor(wrng);
    return out;
  };
  truth.user_factors = draw_factors(spec.n_users);
  truth.item_factors = draw_factors(spec.n_items);

  // Fixed per-user and per-item attribute tokens.
  auto draw_attributes = [&](std::size_t count, FeatureSource source) {
    std::vector<std::vector<std::uint32_t>> attrs(count, std::vector<std::uint32_t>(spec.features.size(), 0));
    for (std::size_t f = 0; f < spec.features.size(); ++f) {
      if (spec.features[f].source != source) continue;
      std::uniform_int_distribution<std::uint32_t> tok(1, spec.features[f].cardinality);
      for (auto& a : attrs) a[f] = tok(wrng);
    }
    return attrs;
  };
  const auto user_attrs = draw_attributes(spec.n_users, FeatureSource::kUser);
  const auto item_attrs = draw_attributes(spec.n_items, FeatureSource::kItem);

  Rng srng = make_rng(spec.seed, {0x5a3});
  std::uniform_int_distribution<std::size_t> pick_user(0, spec.n_users - 1);
  std::uniform_int_distribution<std::size_t> pick_item(0, spec.n_items - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_sample = [&]() {
    Sample s;
    const std::size_t user = pick_user(srng);
    const std::size_t item = pick_item(srng);
    s.user_id = static_cast<std::uint32_t>(user);
    s.features.resize(n);
    s.features[0] = static_cast<std::uint32_t>(user + 1);
    s.features[1] = static_cast<std::uint32_t>(item + 1);
    for (std::size_t f = 0; f < spec.features.size(); ++f) {
      const auto& feat = spec.features[f];
      switch (feat.source) {
        case FeatureSource::kUser: s.features[f + 2] = user_attrs[user][f]; break;
        case FeatureSource::kItem: s.features[f + 2] = item_attrs[item][f]; break;
        case FeatureSource::kContext:
          s.features[f + 2] = std::uniform_int_distribution<std::uint32_t>(1, feat.cardinality)(srng);
          break;
      }
    }
    s.label = unit(srng) < truth.probability(s) ? 1 : 0;
    return s;
  };

  std::vector<std::string> user_names(spec.n_users);
  for (std::size_t u = 0; u < spec.n_users; ++u) user_names[u] = schema->value_of(0, static_cast<std::uint32_t>(u + 1));

  std::vector<Sample> train(spec.n_train), eval(spec.n_eval);
  for (auto& s : train) s = draw_sample();
  for (auto& s : eval) s = draw_sample();

  data.eval_clean = Dataset{schema, eval, user_names};
  const bool train_missing = spec.missing_mode != MissingMode::kEval;
  const bool eval_missing = spec.missing_mode != MissingMode::kTrain;
  Rng train_mrng = make_rng(spec.seed, {0x3155, 0});
  Rng eval_mrng = make_rng(spec.seed, {0x3155, 1});
  data.train = Dataset{schema, train_missing ? inject_missingness(train, spec.missing_rate, train_mrng) : train,
                       user_names};
  data.eval = Dataset{schema, eval_missing ? inject_missingness(eval, spec.missing_rate, eval_mrng) : eval,
                      user_names};
  return data;
}

}  // namespace asymdiff
