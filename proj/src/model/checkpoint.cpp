#include "asymdiff/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "asymdiff/errors.hpp"
#include "asymdiff/hashing.hpp"

namespace asymdiff {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'A', 'D', 'R', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("checkpoint truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

struct Entry {
  std::string name;
  const Tensor2* tensor;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.schema) throw ConfigError("checkpoint without schema");
  std::vector<Entry> entries;
  for (const auto& [name, t] : ckpt.params.blocks()) entries.push_back({name, t});
  if (ckpt.optimizer) {
    const auto blocks = ckpt.params.blocks();
    if (ckpt.optimizer->first_moments.size() != blocks.size() ||
        ckpt.optimizer->second_moments.size() != blocks.size()) {
      throw ConfigError("optimizer state does not match the parameter blocks");
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      entries.push_back({"adam_m/" + blocks[i].first, &ckpt.optimizer->first_moments[i]});
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      entries.push_back({"adam_v/" + blocks[i].first, &ckpt.optimizer->second_moments[i]});
    }
  }

  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["schema"] = ckpt.schema->to_json();
  header["schema_hash"] = hex64(ckpt.schema->hash());
  header["model"] = ckpt.config.to_json();
  header["meta"] = ckpt.meta;
  header["optimizer_step"] = ckpt.optimizer ? nlohmann::json(ckpt.optimizer->step) : nlohmann::json();
  auto tensors = nlohmann::json::array();
  for (const auto& e : entries) {
    tensors.push_back({{"name", e.name}, {"rows", e.tensor->rows()}, {"cols", e.tensor->cols()}});
  }
  header["tensors"] = std::move(tensors);
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointFormat);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& e : entries) {
    out.append(reinterpret_cast<const char*>(e.tensor->data()), e.tensor->size() * sizeof(double));
  }
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  std::size_t tail = body.size();
  if (get<std::uint64_t>(bytes, tail) != fnv1a64(body)) throw DataError("checkpoint checksum mismatch");

  std::size_t pos = sizeof(kMagic);
  const auto format = get<std::uint32_t>(body, pos);
  if (format != kCheckpointFormat) {
    throw DataError("unsupported checkpoint format " + std::to_string(format));
  }
  const auto header_len = get<std::uint64_t>(body, pos);
  if (pos + header_len > body.size()) throw DataError("checkpoint truncated");
  const auto header = nlohmann::json::parse(body.substr(pos, header_len));
  pos += header_len;

  Checkpoint ckpt;
  auto schema = std::make_shared<FeatureSchema>(FeatureSchema::from_json(header.at("schema")));
  if (hex64(schema->hash()) != header.at("schema_hash").get<std::string>()) {
    throw DataError("checkpoint schema hash mismatch");
  }
  ckpt.schema = schema;
  ckpt.config = ModelConfig::from_json(header.at("model"));
  ckpt.meta = header.at("meta");
  ckpt.params = make_params(*schema, ckpt.config);

  auto blocks = ckpt.params.blocks();
  const bool has_optimizer = !header.at("optimizer_step").is_null();
  if (has_optimizer) {
    ckpt.optimizer = OptimizerState{header.at("optimizer_step").get<std::int64_t>(), {}, {}};
    for (auto& [name, t] : blocks) {
      ckpt.optimizer->first_moments.emplace_back(t->rows(), t->cols());
      ckpt.optimizer->second_moments.emplace_back(t->rows(), t->cols());
    }
  }
  std::vector<Entry> expected;
  std::vector<Tensor2*> targets;
  for (auto& [name, t] : blocks) {
    expected.push_back({name, t});
    targets.push_back(t);
  }
  if (has_optimizer) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      expected.push_back({"adam_m/" + blocks[i].first, &ckpt.optimizer->first_moments[i]});
      targets.push_back(&ckpt.optimizer->first_moments[i]);
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      expected.push_back({"adam_v/" + blocks[i].first, &ckpt.optimizer->second_moments[i]});
      targets.push_back(&ckpt.optimizer->second_moments[i]);
    }
  }

  const auto& tensors = header.at("tensors");
  if (tensors.size() != expected.size()) throw DataError("checkpoint tensor count does not match its config");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& tj = tensors[i];
    Tensor2* t = targets[i];
    if (tj.at("name").get<std::string>() != expected[i].name ||
        tj.at("rows").get<std::size_t>() != t->rows() || tj.at("cols").get<std::size_t>() != t->cols()) {
      throw DataError("checkpoint tensor '" + tj.at("name").get<std::string>() +
                      "' does not match the expected layout");
    }
    const std::size_t n = t->size() * sizeof(double);
    if (pos + n > body.size()) throw DataError("checkpoint truncated");
    std::memcpy(t->data(), body.data() + pos, n);
    pos += n;
  }
  if (pos != body.size()) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace asymdiff
