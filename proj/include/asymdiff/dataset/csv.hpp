#pragma once

// Dataset CSV: optional leading "# ..." provenance lines, then the header
// `label,user_id,<feature names...>`, then one row per sample. Empty cell =
// missing. Plain comma separation, no quoting.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "asymdiff/featurespace/schema.hpp"

namespace asymdiff {

struct CsvReadResult {
  Dataset dataset;
  std::vector<std::string> rejects;  // one message per rejected row, naming its line
  std::size_t rows_read = 0;         // data rows, accepted or not
  std::size_t out_of_vocabulary = 0;
};

struct CsvReadOptions {
  // Encode against this schema; when null, dictionaries are built from the file.
  std::shared_ptr<const FeatureSchema> schema;
  // Feature holding the user id, recorded in a schema built from the file.
  std::string user_feature = "user";
  // Ingestion aborts when rejects exceed this fraction of the rows.
  double max_reject_fraction = 0.01;
};

CsvReadResult read_csv(std::istream& in, const CsvReadOptions& options = {});
CsvReadResult read_csv_file(const std::filesystem::path& path, const CsvReadOptions& options = {});

// `provenance` lines are written as "# <line>" before the header.
void write_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& provenance = {});
void write_csv_file(const std::filesystem::path& path, const Dataset& data,
                    const std::vector<std::string>& provenance = {});

// Seeded, user-stratified split: each user with >= 2 samples contributes
// floor(eval_fraction * count) samples (at most count - 1) to eval, so every
// eval user also appears in train.
std::pair<Dataset, Dataset> split(const Dataset& data, double eval_fraction, std::uint64_t seed);

}  // namespace asymdiff
