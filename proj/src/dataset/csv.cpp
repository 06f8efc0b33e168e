#include "asymdiff/dataset/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "asymdiff/errors.hpp"
#include "asymdiff/random.hpp"

namespace asymdiff {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

CsvReadResult read_csv(std::istream& in, const CsvReadOptions& options) {
  CsvReadResult result;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    header = split_fields(line);
    break;
  }
  if (header.size() < 3 || header[0] != "label" || header[1] != "user_id") {
    throw DataError("line " + std::to_string(line_no) +
                    ": header must be label,user_id,<feature names...>");
  }
  const std::vector<std::string> feature_names(header.begin() + 2, header.end());
  if (options.schema && options.schema->names() != feature_names) {
    throw DataError("CSV feature columns do not match the model schema");
  }

  std::vector<RawRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    ++result.rows_read;
    auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      result.rejects.push_back("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " columns, got " +
                               std::to_string(fields.size()));
      continue;
    }
    if (fields[0] != "0" && fields[0] != "1") {
      result.rejects.push_back("line " + std::to_string(line_no) + ": label must be 0 or 1, got '" +
                               fields[0] + "'");
      continue;
    }
    RawRecord r;
    r.label = std::move(fields[0]);
    r.user_id = std::move(fields[1]);
    r.values.assign(std::make_move_iterator(fields.begin() + 2), std::make_move_iterator(fields.end()));
    r.line = line_no;
    records.push_back(std::move(r));
  }
  if (result.rows_read > 0 &&
      static_cast<double>(result.rejects.size()) >
          options.max_reject_fraction * static_cast<double>(result.rows_read)) {
    throw DataError(std::to_string(result.rejects.size()) + " of " + std::to_string(result.rows_read) +
                    " rows rejected; first: " + result.rejects.front());
  }

  std::shared_ptr<const FeatureSchema> schema = options.schema;
  if (!schema) {
    schema = std::make_shared<const FeatureSchema>(build_schema(
        feature_names, records,
        std::find(feature_names.begin(), feature_names.end(), options.user_feature) != feature_names.end()
            ? std::optional<std::string>(options.user_feature)
            : std::nullopt));
  }
  Encoder encoder(schema);
  result.dataset.schema = schema;
  result.dataset.samples.reserve(records.size());
  for (const auto& r : records) result.dataset.samples.push_back(encoder.encode(r));
  result.dataset.user_names = encoder.user_names();
  result.out_of_vocabulary = encoder.out_of_vocabulary();
  return result;
}

CsvReadResult read_csv_file(const std::filesystem::path& path, const CsvReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, options);
}

void write_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& provenance) {
  if (!data.schema) throw ConfigError("write_csv: dataset has no schema");
  const FeatureSchema& schema = *data.schema;
  for (const auto& p : provenance) out << "# " << p << '\n';
  out << "label,user_id";
  for (const auto& name : schema.names()) out << ',' << name;
  out << '\n';
  std::string row;
  for (const Sample& s : data.samples) {
    validate_sample(s, schema);
    row.clear();
    row += s.label ? '1' : '0';
    row += ',';
    row += s.user_id < data.user_names.size() ? data.user_names[s.user_id] : std::to_string(s.user_id);
    for (std::size_t f = 0; f < s.features.size(); ++f) {
      row += ',';
      row += schema.value_of(f, s.features[f]);
    }
    row += '\n';
    out << row;
  }
}

void write_csv_file(const std::filesystem::path& path, const Dataset& data,
                    const std::vector<std::string>& provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, data, provenance);
  if (!out) throw DataError("failed writing " + path.string());
}

std::pair<Dataset, Dataset> split(const Dataset& data, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) throw ConfigError("eval_fraction must lie in [0, 1)");
  std::map<std::uint32_t, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < data.samples.size(); ++i) by_user[data.samples[i].user_id].push_back(i);

  Rng rng = make_rng(seed, {0x5917});
  std::vector<char> to_eval(data.samples.size(), 0);
  for (auto& [user, idx] : by_user) {
    std::shuffle(idx.begin(), idx.end(), rng);
    if (idx.size() < 2) continue;
    std::size_t take = static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(idx.size())));
    take = std::min(take, idx.size() - 1);
    for (std::size_t k = 0; k < take; ++k) to_eval[idx[k]] = 1;
  }
  Dataset train{data.schema, {}, data.user_names};
  Dataset eval{data.schema, {}, data.user_names};
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    (to_eval[i] ? eval : train).samples.push_back(data.samples[i]);
  }
  return {std::move(train), std::move(eval)};
}

}  // namespace asymdiff
