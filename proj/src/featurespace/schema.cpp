#include "asymdiff/featurespace/schema.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "asymdiff/errors.hpp"
#include "asymdiff/hashing.hpp"

namespace asymdiff {

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features,
                             std::optional<std::size_t> user_feature)
    : features_(std::move(features)), user_feature_(user_feature) {
  if (features_.empty()) throw ConfigError("schema needs at least one feature");
  if (user_feature_ && *user_feature_ >= features_.size()) {
    throw ConfigError("schema user feature index out of range");
  }
  std::unordered_set<std::string> seen;
  std::uint64_t h = fnv1a64("asymdiff-schema-v1");
  lookup_.resize(features_.size());
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const auto& d = features_[f];
    if (d.name.empty()) throw ConfigError("feature " + std::to_string(f) + " has an empty name");
    if (!seen.insert(d.name).second) throw ConfigError("duplicate feature name '" + d.name + "'");
    if (d.values.size() < 2) {
      throw ConfigError("feature '" + d.name + "' needs a vocabulary of at least 2 (MISSING + 1)");
    }
    if (!d.values[0].empty()) throw ConfigError("feature '" + d.name + "': token 0 must be MISSING");
    h = fnv1a64(d.name, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    for (std::uint32_t t = 1; t < d.values.size(); ++t) {
      if (d.values[t].empty()) throw ConfigError("feature '" + d.name + "' has an empty value");
      if (!lookup_[f].emplace(d.values[t], t).second) {
        throw ConfigError("feature '" + d.name + "' has duplicate value '" + d.values[t] + "'");
      }
      h = fnv1a64(d.values[t], h);
      h = fnv1a64(std::string_view("\x1e", 1), h);
    }
    h = fnv1a64(std::string_view("\x1d", 1), h);
  }
  h = fnv1a64(user_feature_ ? std::to_string(*user_feature_) : std::string("-"), h);
  hash_ = h;
}

FeatureSchema FeatureSchema::synthetic(
    const std::vector<std::pair<std::string, std::uint32_t>>& vocab,
    std::optional<std::size_t> user_feature) {
  std::vector<FeatureDescriptor> features;
  for (const auto& [name, size] : vocab) {
    FeatureDescriptor d{name, {""}};
    for (std::uint32_t t = 1; t < size; ++t) d.values.push_back(name + "_" + std::to_string(t));
    features.push_back(std::move(d));
  }
  return FeatureSchema(std::move(features), user_feature);
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t f = 0; f < features_.size(); ++f) {
    if (features_[f].name == name) return f;
  }
  return std::nullopt;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  for (const auto& d : features_) out.push_back(d.name);
  return out;
}

std::optional<std::uint32_t> FeatureSchema::token_of(std::size_t f, std::string_view value) const {
  if (value.empty()) return std::nullopt;
  const auto& m = lookup_.at(f);
  auto it = m.find(std::string(value));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

const std::string& FeatureSchema::value_of(std::size_t f, std::uint32_t token) const {
  const auto& d = features_.at(f);
  if (token >= d.values.size()) {
    throw DataError("token " + std::to_string(token) + " out of vocabulary for feature '" +
                    d.name + "'");
  }
  return d.values[token];
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json j;
  j["user_feature"] = user_feature_ ? nlohmann::json(*user_feature_) : nlohmann::json();
  auto arr = nlohmann::json::array();
  for (const auto& d : features_) {
    nlohmann::json fj;
    fj["name"] = d.name;
    fj["values"] = std::vector<std::string>(d.values.begin() + 1, d.values.end());
    arr.push_back(std::move(fj));
  }
  j["features"] = std::move(arr);
  j["hash"] = hex64(hash_);
  return j;
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  std::vector<FeatureDescriptor> features;
  for (const auto& fj : j.at("features")) {
    FeatureDescriptor d{fj.at("name").get<std::string>(), {""}};
    for (const auto& v : fj.at("values")) d.values.push_back(v.get<std::string>());
    features.push_back(std::move(d));
  }
  std::optional<std::size_t> user;
  if (j.contains("user_feature") && !j.at("user_feature").is_null()) {
    user = j.at("user_feature").get<std::size_t>();
  }
  FeatureSchema schema(std::move(features), user);
  if (j.contains("hash") && j.at("hash").get<std::string>() != hex64(schema.hash())) {
    throw DataError("schema hash mismatch: stored " + j.at("hash").get<std::string>() +
                    ", recomputed " + hex64(schema.hash()));
  }
  return schema;
}

void validate_sample(const Sample& s, const FeatureSchema& schema) {
  if (s.features.size() != schema.size()) {
    throw DataError("sample has " + std::to_string(s.features.size()) + " feature slots, schema has " +
                    std::to_string(schema.size()));
  }
  if (s.label > 1) throw DataError("sample label must be 0 or 1");
  for (std::size_t f = 0; f < s.features.size(); ++f) {
    if (s.features[f] >= schema.vocab_size(f)) {
      throw DataError("token id " + std::to_string(s.features[f]) +
                      " out of vocabulary for feature '" + schema.feature(f).name + "'");
    }
  }
}

std::size_t DropoutMask::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

DropoutMask mask_from_observed(const Sample& x) {
  DropoutMask m;
  m.bits.resize(x.features.size());
  for (std::size_t f = 0; f < x.features.size(); ++f) m.bits[f] = x.features[f] == kMissingToken;
  return m;
}

FeatureSchema build_schema(std::span<const std::string> feature_names,
                           std::span<const RawRecord> records,
                           std::optional<std::string> user_feature_name) {
  std::vector<std::set<std::string>> distinct(feature_names.size());
  for (const auto& r : records) {
    if (r.values.size() != feature_names.size()) {
      throw DataError("line " + std::to_string(r.line) + ": expected " +
                      std::to_string(feature_names.size()) + " feature columns, got " +
                      std::to_string(r.values.size()));
    }
    for (std::size_t f = 0; f < r.values.size(); ++f) {
      if (!r.values[f].empty()) distinct[f].insert(r.values[f]);
    }
  }
  std::vector<FeatureDescriptor> features;
  std::optional<std::size_t> user;
  for (std::size_t f = 0; f < feature_names.size(); ++f) {
    FeatureDescriptor d{feature_names[f], {""}};
    d.values.insert(d.values.end(), distinct[f].begin(), distinct[f].end());
    if (d.values.size() < 2) {
      throw DataError("feature '" + d.name + "' has no observed values in the training data");
    }
    if (user_feature_name && *user_feature_name == d.name) user = f;
    features.push_back(std::move(d));
  }
  return FeatureSchema(std::move(features), user);
}

Encoder::Encoder(std::shared_ptr<const FeatureSchema> schema) : schema_(std::move(schema)) {}

std::uint32_t Encoder::intern_user(const std::string& name) {
  auto [it, inserted] = users_.emplace(name, static_cast<std::uint32_t>(user_names_.size()));
  if (inserted) user_names_.push_back(name);
  return it->second;
}

Sample Encoder::encode(const RawRecord& record) {
  Sample s;
  if (record.label == "1") {
    s.label = 1;
  } else if (record.label == "0") {
    s.label = 0;
  } else {
    throw DataError("line " + std::to_string(record.line) + ": label must be 0 or 1, got '" +
                    record.label + "'");
  }
  if (record.values.size() != schema_->size()) {
    throw DataError("line " + std::to_string(record.line) + ": expected " +
                    std::to_string(schema_->size()) + " feature columns, got " +
                    std::to_string(record.values.size()));
  }
  s.user_id = intern_user(record.user_id);
  s.features.resize(schema_->size(), kMissingToken);
  for (std::size_t f = 0; f < record.values.size(); ++f) {
    if (record.values[f].empty()) continue;
    if (auto t = schema_->token_of(f, record.values[f])) {
      s.features[f] = *t;
    } else {
      ++oov_;
    }
  }
  return s;
}

}  // namespace asymdiff
