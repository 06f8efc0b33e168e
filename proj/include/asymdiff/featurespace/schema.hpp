#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace asymdiff {

// Token 0 of every feature vocabulary is reserved for "missing".
inline constexpr std::uint32_t kMissingToken = 0;

struct FeatureDescriptor {
  std::string name;
  // values[t] is the raw string for token t; values[0] is "" (MISSING).
  // vocab_size() == values.size().
  std::vector<std::string> values;

  std::uint32_t vocab_size() const { return static_cast<std::uint32_t>(values.size()); }
};

// Ordered categorical features with their token dictionaries. Immutable once built.
class FeatureSchema {
 public:
  FeatureSchema(std::vector<FeatureDescriptor> features,
                std::optional<std::size_t> user_feature = std::nullopt);

  // Features whose tokens are just "<prefix><t>" for t = 1..vocab-1.
  static FeatureSchema synthetic(const std::vector<std::pair<std::string, std::uint32_t>>& vocab,
                                 std::optional<std::size_t> user_feature = std::nullopt);

  std::size_t size() const noexcept { return features_.size(); }
  const FeatureDescriptor& feature(std::size_t f) const { return features_.at(f); }
  std::uint32_t vocab_size(std::size_t f) const { return features_.at(f).vocab_size(); }
  std::optional<std::size_t> user_feature() const noexcept { return user_feature_; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;

  // Empty strings and unknown values map to std::nullopt.
  std::optional<std::uint32_t> token_of(std::size_t f, std::string_view value) const;
  const std::string& value_of(std::size_t f, std::uint32_t token) const;

  std::uint64_t hash() const noexcept { return hash_; }

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);

 private:
  std::vector<FeatureDescriptor> features_;
  std::optional<std::size_t> user_feature_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> lookup_;
  std::uint64_t hash_ = 0;
};

struct Sample {
  std::uint8_t label = 0;
  std::uint32_t user_id = 0;  // group key for per-user metrics
  std::vector<std::uint32_t> features;

  bool operator==(const Sample&) const = default;
};

// Encoded samples together with the schema they were encoded against.
struct Dataset {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<Sample> samples;
  std::vector<std::string> user_names;  // user_id -> raw id, when known
};

// Throws DataError if the sample does not fit the schema.
void validate_sample(const Sample& s, const FeatureSchema& schema);

// The step embedding: bit f set means feature f is missing (dropped or never observed).
struct DropoutMask {
  std::vector<std::uint8_t> bits;

  std::size_t size() const noexcept { return bits.size(); }
  std::size_t count() const noexcept;
  bool test(std::size_t f) const { return bits.at(f) != 0; }
  bool operator==(const DropoutMask&) const = default;
};

// Bit f is set iff feature f holds kMissingToken.
DropoutMask mask_from_observed(const Sample& x);

// One raw CSV row before encoding.
struct RawRecord {
  std::string label;
  std::string user_id;
  std::vector<std::string> values;
  std::size_t line = 0;
};

// Builds a schema whose dictionaries hold the sorted distinct non-empty values
// seen in `records`. Token ids are therefore independent of row order.
FeatureSchema build_schema(std::span<const std::string> feature_names,
                           std::span<const RawRecord> records,
                           std::optional<std::string> user_feature_name = std::nullopt);

// Maps raw records onto a fixed schema. User ids are interned as first seen.
class Encoder {
 public:
  explicit Encoder(std::shared_ptr<const FeatureSchema> schema);

  // Label must be "0" or "1" (DataError naming the line otherwise). Empty and
  // out-of-dictionary values become kMissingToken; the latter are counted.
  Sample encode(const RawRecord& record);

  std::size_t out_of_vocabulary() const noexcept { return oov_; }
  const std::vector<std::string>& user_names() const noexcept { return user_names_; }
  std::uint32_t intern_user(const std::string& name);

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::unordered_map<std::string, std::uint32_t> users_;
  std::vector<std::string> user_names_;
  std::size_t oov_ = 0;
};

}  // namespace asymdiff
