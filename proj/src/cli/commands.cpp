#include "asymdiff/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "asymdiff/baselines/arms.hpp"
#include "asymdiff/cli/plots.hpp"
#include "asymdiff/dataset/csv.hpp"
#include "asymdiff/dataset/synth.hpp"
#include "asymdiff/errors.hpp"
#include "asymdiff/hashing.hpp"
#include "asymdiff/metrics/metrics.hpp"
#include "asymdiff/model/checkpoint.hpp"
#include "asymdiff/trainer/trainer.hpp"

namespace asymdiff::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = ASYMDIFF_VERSION;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

// {"arm": name, "train": {...}}; both keys optional.
struct RunConfig {
  ArmSpec arm = ArmSpec::named("asymdiff");
  TrainConfig train;
};

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "arm" && key != "train") throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig rc;
  if (j.contains("arm")) rc.arm = ArmSpec::named(j.at("arm").get<std::string>());
  if (j.contains("train")) rc.train = TrainConfig::from_json(j.at("train"));
  return rc;
}

double observed_missing_rate(const Dataset& data) {
  std::size_t slots = 0, missing = 0;
  for (const Sample& s : data.samples) {
    slots += s.features.size();
    missing += static_cast<std::size_t>(std::count(s.features.begin(), s.features.end(), kMissingToken));
  }
  return slots ? static_cast<double>(missing) / static_cast<double>(slots) : 0.0;
}

CsvReadResult read_dataset(const fs::path& path, std::shared_ptr<const FeatureSchema> schema, std::ostream& err) {
  CsvReadOptions opts;
  opts.schema = std::move(schema);
  CsvReadResult r = read_csv_file(path, opts);
  if (!r.rejects.empty()) {
    err << "warning: " << path.string() << ": " << r.rejects.size() << " rows rejected (first: " << r.rejects.front()
        << ")\n";
  }
  if (r.out_of_vocabulary) {
    err << "warning: " << path.string() << ": " << r.out_of_vocabulary << " out-of-vocabulary values read as missing\n";
  }
  return r;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// gen-data ------------------------------------------------------------------

struct GenDataArgs {
  std::string spec_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  SynthSpec spec = a.spec_path.empty() ? SynthSpec{} : SynthSpec::from_json(load_config(a.spec_path));
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  const SynthData data = generate(spec);
  const std::string hash = config_hash(spec.to_json());
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  auto provenance = [&](const std::string& part, double rate) {
    return std::vector<std::string>{"seed=" + std::to_string(spec.seed), "config_hash=" + hash,
                                    "code_version=" + std::string(kVersion), "part=" + part,
                                    "missing_rate=" + format_metric(rate)};
  };
  const bool train_missing = spec.missing_mode != MissingMode::kEval;
  const bool eval_missing = spec.missing_mode != MissingMode::kTrain;
  write_csv_file(dir / "train.csv", data.train, provenance("train", train_missing ? spec.missing_rate : 0.0));
  write_csv_file(dir / "eval.csv", data.eval, provenance("eval", eval_missing ? spec.missing_rate : 0.0));
  write_csv_file(dir / "eval_clean.csv", data.eval_clean, provenance("eval_clean", 0.0));
  json sidecar = {{"spec", spec.to_json()},
                  {"config_hash", hash},
                  {"seed", spec.seed},
                  {"code_version", kVersion},
                  {"schema", data.train.schema->to_json()}};
  write_file(dir / "synth_spec.json", sidecar.dump(2) + "\n");
  out << "wrote " << data.train.samples.size() << " train / " << data.eval.samples.size() << " eval rows to "
      << dir.string() << " (config_hash " << hash << ")\n";
  return 0;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string train_path;
  std::string eval_path;
  std::string schema_path;
  std::string out_dir;
  std::string resume_path;
  std::string arm;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

int train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = a.config_path.empty() ? RunConfig{} : parse_run_config(load_config(a.config_path));
  if (!a.arm.empty()) rc.arm = ArmSpec::named(a.arm);
  if (a.seed) rc.train.seed = *a.seed;
  if (a.epochs) rc.train.epochs = *a.epochs;
  const TrainConfig cfg = rc.arm.apply(rc.train);
  cfg.validate();

  std::optional<Checkpoint> resume;
  std::shared_ptr<const FeatureSchema> schema;
  if (!a.resume_path.empty()) {
    resume = load_checkpoint(a.resume_path);
    if (!resume->optimizer) throw DataError("checkpoint " + a.resume_path + " carries no optimizer state");
    schema = resume->schema;
  } else if (!a.schema_path.empty()) {
    json sj = load_config(a.schema_path);
    if (sj.contains("schema")) sj = sj.at("schema");
    schema = std::make_shared<const FeatureSchema>(FeatureSchema::from_json(sj));
  }
  CsvReadResult train_data = read_dataset(a.train_path, schema, err);
  schema = train_data.dataset.schema;
  std::optional<Dataset> eval;
  if (!a.eval_path.empty()) eval = read_dataset(a.eval_path, schema, err).dataset;

  const std::string hash = config_hash({{"arm", rc.arm.to_json()}, {"train", cfg.to_json()}});
  json resolved = {{"arm", rc.arm.to_json()},
                   {"train", cfg.to_json()},
                   {"config_hash", hash},
                   {"shared_config_hash", shared_config_hash(cfg)},
                   {"seed", cfg.seed},
                   {"code_version", kVersion},
                   {"train_data_hash", file_hash(a.train_path)},
                   {"schema_hash", hex64(schema->hash())}};
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_file(dir / "resolved_config.json", resolved.dump(2) + "\n");

  Trainer trainer = resume ? Trainer(*resume, cfg) : Trainer(schema, cfg);
  json meta = {{"arm", rc.arm.name},
               {"serving", to_string(rc.arm.serving)},
               {"seed", cfg.seed},
               {"config_hash", hash},
               {"code_version", kVersion},
               {"train", cfg.to_json()}};
  const fs::path ckpt_path = dir / "model.ckpt";
  trainer.on_checkpoint = [&](const Trainer& t) { save_checkpoint(ckpt_path, t.checkpoint(meta)); };
  if (eval) {
    trainer.evaluator = [&](const ModelParams& p) {
      MetricsReport r = evaluate_params(p, eval->samples, rc.arm.serving);
      return json{{"auc", r.auc}, {"uauc", r.uauc}, {"logloss", r.logloss}, {"serving_path", r.serving_path}};
    };
  }

  std::ofstream log_file(dir / "run_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log_file) throw DataError("cannot write " + (dir / "run_log.jsonl").string());
  RunLog log(&log_file);
  trainer.fit(train_data.dataset.samples, &log);
  if (eval) {
    MetricsReport r = evaluate_params(trainer.params(), eval->samples, rc.arm.serving);
    log.record({{"event", "final_eval"},
                {"step", trainer.global_step()},
                {"auc", r.auc},
                {"uauc", r.uauc},
                {"logloss", r.logloss},
                {"serving_path", r.serving_path}});
    out << "eval auc " << format_metric(r.auc) << " uauc " << format_metric(r.uauc) << '\n';
  }
  save_checkpoint(ckpt_path, trainer.checkpoint(meta));
  out << "trained " << rc.arm.name << " for " << trainer.global_step() << " steps; checkpoint " << ckpt_path.string()
      << " (config_hash " << hash << ")\n";
  return 0;
}

// evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint_path;
  std::string data_path;
  std::string baseline_path;
  std::string out_path;
  std::string serving;
};

int evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint_path);
  const Dataset data = read_dataset(a.data_path, ckpt.schema, err).dataset;
  const std::string serving = !a.serving.empty() ? a.serving : ckpt.meta.value("serving", std::string("denoised"));
  const ServingPath path = parse_serving_path(serving);
  const std::vector<double> scores = predict_dataset(ckpt, data, path);
  std::vector<ScoredExample> scored(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scored[i] = {data.samples[i].user_id, data.samples[i].label, scores[i]};
  }
  MetricsReport r = compute_report(scored);
  r.arm = ckpt.meta.value("arm", std::string());
  r.seed = ckpt.meta.value("seed", std::uint64_t{0});
  r.config_hash = ckpt.meta.value("config_hash", std::string());
  r.serving_path = to_string(path);
  r.eval_missing_rate = observed_missing_rate(data);
  if (!a.baseline_path.empty()) {
    const MetricsReport base = report_from_json(load_config(a.baseline_path));
    add_relaimpr(r, base, base.arm.empty() ? "baseline" : base.arm);
  }
  nlohmann::ordered_json j = to_json(r);
  j["code_version"] = kVersion;
  j["data_hash"] = file_hash(a.data_path);
  const std::string text = j.dump(2) + "\n";
  if (a.out_path.empty()) {
    out << text;
  } else {
    write_file(a.out_path, text);
    out << "auc " << format_metric(r.auc) << " uauc " << format_metric(r.uauc) << " -> " << a.out_path << '\n';
  }
  return 0;
}

// ablate --------------------------------------------------------------------

struct AblateArgs {
  std::string config_path;
  std::string train_path;
  std::string eval_path;
  std::string arms = "base,asymdiff,asymdiff_wo_recon,asymdiff_wo_aux,gauss_diff";
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> eval_rhos;
  std::uint64_t missing_seed = 1;
  std::size_t jobs = 1;
  std::string out_path;
};

int ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig rc = a.config_path.empty() ? RunConfig{} : parse_run_config(load_config(a.config_path));
  std::vector<ArmSpec> arms;
  for (const std::string& name : split_list(a.arms)) arms.push_back(ArmSpec::named(name));
  if (arms.empty()) throw ConfigError("--arms names no arm");
  if (a.seeds.empty()) throw ConfigError("--seeds names no seed");
  for (double rho : a.eval_rhos) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("--eval-rho values must lie in [0, 1]");
  }
  if (a.jobs == 0) throw ConfigError("--jobs must be positive");

  const Dataset train_set = read_dataset(a.train_path, nullptr, err).dataset;
  const Dataset eval_set = read_dataset(a.eval_path, train_set.schema, err).dataset;

  // One eval variant per rho; without --eval-rho the eval file is used as is.
  std::vector<double> rhos;
  std::vector<std::vector<Sample>> evals;
  if (a.eval_rhos.empty()) {
    rhos.push_back(observed_missing_rate(eval_set));
    evals.push_back(eval_set.samples);
  } else {
    for (double rho : a.eval_rhos) {
      Rng rng = make_rng(a.missing_seed, {0xe7a1, static_cast<std::uint64_t>(std::llround(rho * 1e6))});
      rhos.push_back(rho);
      evals.push_back(inject_missingness(eval_set.samples, rho, rng));
    }
  }

  struct Task {
    std::size_t arm;
    std::uint64_t seed;
    std::vector<MetricsReport> reports;  // per rho
    std::exception_ptr error;
  };
  std::vector<Task> tasks;
  for (std::size_t ai = 0; ai < arms.size(); ++ai) {
    for (std::uint64_t seed : a.seeds) tasks.push_back({ai, seed, {}, nullptr});
  }
  auto run_task = [&](Task& t) {
    try {
      const ArmSpec& arm = arms[t.arm];
      TrainConfig cfg = arm.apply(rc.train);
      cfg.seed = t.seed;
      Trainer trainer(train_set.schema, cfg);
      trainer.fit(train_set.samples);
      const std::string hash = config_hash({{"arm", arm.to_json()}, {"train", cfg.to_json()}});
      for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
        MetricsReport r = evaluate_params(trainer.params(), evals[ri], arm.serving);
        r.arm = arm.name;
        r.seed = t.seed;
        r.config_hash = hash;
        r.eval_missing_rate = rhos[ri];
        t.reports.push_back(std::move(r));
      }
    } catch (...) {
      t.error = std::current_exception();
    }
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(tasks[i]);
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < std::min(a.jobs, tasks.size()); ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const Task& t : tasks) {
    if (t.error) std::rethrow_exception(t.error);
  }

  const auto base_it = std::find_if(arms.begin(), arms.end(), [](const ArmSpec& s) { return s.name == "base"; });
  if (base_it != arms.end()) {
    const std::size_t base_arm = static_cast<std::size_t>(base_it - arms.begin());
    for (Task& t : tasks) {
      if (t.arm == base_arm) continue;
      const Task& b = *std::find_if(tasks.begin(), tasks.end(),
                                    [&](const Task& o) { return o.arm == base_arm && o.seed == t.seed; });
      for (std::size_t ri = 0; ri < rhos.size(); ++ri) add_relaimpr(t.reports[ri], b.reports[ri], "base");
    }
  }

  std::ostringstream csv;
  std::string seed_list;
  for (std::uint64_t s : a.seeds) seed_list += (seed_list.empty() ? "" : ";") + std::to_string(s);
  csv << "# code_version=" << kVersion << '\n'
      << "# shared_config_hash=" << shared_config_hash(rc.train) << '\n'
      << "# seeds=" << seed_list << '\n'
      << "# missing_seed=" << a.missing_seed << '\n'
      << "# train_data_hash=" << file_hash(a.train_path) << '\n'
      << "# eval_data_hash=" << file_hash(a.eval_path) << '\n'
      << report_csv_header() << '\n';
  for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
    for (const Task& t : tasks) csv << report_csv_row(t.reports[ri]) << '\n';
  }
  write_file(a.out_path, csv.str());

  for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
    out << "eval_missing_rate " << format_metric(rhos[ri]) << '\n';
    for (const Task& t : tasks) {
      const MetricsReport& r = t.reports[ri];
      out << "  " << r.arm << " seed " << r.seed << " auc " << format_metric(r.auc) << " uauc "
          << format_metric(r.uauc) << '\n';
    }
  }
  out << "wrote " << a.out_path << '\n';
  return 0;
}

// report --------------------------------------------------------------------

struct ReportArgs {
  std::string sweep_path;
  std::string out_dir;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Summary {
  std::string arm;
  std::size_t n = 0;
  double auc_mean = 0, auc_min = 0, auc_max = 0;
  double uauc_mean = 0, uauc_min = 0, uauc_max = 0;
};

int report(const ReportArgs& a, std::ostream& out) {
  std::istringstream in(read_file(a.sweep_path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::string> provenance;
  std::map<std::string, std::size_t> col;
  // rho -> arms in first-seen order -> (auc, uauc) per seed
  std::map<double, std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>> groups;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      provenance.push_back(line);
      continue;
    }
    const auto cells = split_csv_line(line);
    if (header.empty()) {
      header = cells;
      for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
      for (const char* need : {"arm", "eval_missing_rate", "auc", "uauc"}) {
        if (!col.count(need)) throw DataError(a.sweep_path + ": header lacks column '" + need + "'");
      }
      continue;
    }
    if (cells.size() != header.size()) {
      throw DataError(a.sweep_path + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " cells, got " + std::to_string(cells.size()));
    }
    double rho, auc_v, uauc_v;
    try {
      rho = std::stod(cells[col["eval_missing_rate"]]);
      auc_v = std::stod(cells[col["auc"]]);
      uauc_v = std::stod(cells[col["uauc"]]);
    } catch (const std::exception&) {
      throw DataError(a.sweep_path + ":" + std::to_string(line_no) + ": non-numeric metric");
    }
    auto& arms = groups[rho];
    const std::string& arm = cells[col["arm"]];
    auto it = std::find_if(arms.begin(), arms.end(), [&](const auto& p) { return p.first == arm; });
    if (it == arms.end()) {
      arms.push_back({arm, {}});
      it = std::prev(arms.end());
    }
    it->second.push_back({auc_v, uauc_v});
  }
  if (groups.empty()) throw DataError(a.sweep_path + ": no sweep rows");

  std::map<double, std::vector<Summary>> summaries;
  for (const auto& [rho, arms] : groups) {
    for (const auto& [arm, values] : arms) {
      Summary s;
      s.arm = arm;
      s.n = values.size();
      s.auc_min = s.uauc_min = INFINITY;
      s.auc_max = s.uauc_max = -INFINITY;
      for (const auto& [x, u] : values) {
        s.auc_mean += x / static_cast<double>(s.n);
        s.uauc_mean += u / static_cast<double>(s.n);
        s.auc_min = std::min(s.auc_min, x);
        s.auc_max = std::max(s.auc_max, x);
        s.uauc_min = std::min(s.uauc_min, u);
        s.uauc_max = std::max(s.uauc_max, u);
      }
      summaries[rho].push_back(s);
    }
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::ostringstream md, csv;
  md << "# Sweep summary\n\n";
  for (const std::string& p : provenance) md << "    " << p << '\n';
  md << '\n';
  csv << "eval_missing_rate,arm,n_seeds,auc_mean,auc_min,auc_max,relaimpr_auc,uauc_mean,uauc_min,uauc_max,"
         "relaimpr_uauc\n";
  for (const auto& [rho, rows] : summaries) {
    const auto base = std::find_if(rows.begin(), rows.end(), [](const Summary& s) { return s.arm == "base"; });
    md << "## eval_missing_rate = " << short_number(rho) << "\n\n"
       << "| arm | seeds | AUC | RelaImpr | UAUC | RelaImpr |\n|---|---|---|---|---|---|\n";
    for (const Summary& s : rows) {
      std::string ra, ru;
      char pa[32] = "-", pu[32] = "-";
      if (base != rows.end() && &*base != &s) {
        const double da = relaimpr(s.auc_mean, base->auc_mean);
        const double du = relaimpr(s.uauc_mean, base->uauc_mean);
        ra = format_metric(da);
        ru = format_metric(du);
        std::snprintf(pa, sizeof(pa), "%+.3f%%", da);
        std::snprintf(pu, sizeof(pu), "%+.3f%%", du);
      }
      char buf[256];
      std::snprintf(buf, sizeof(buf), "| %s | %zu | %.5f | %s | %.5f | %s |\n", s.arm.c_str(), s.n, s.auc_mean, pa,
                    s.uauc_mean, pu);
      md << buf;
      csv << format_metric(rho) << ',' << s.arm << ',' << s.n << ',' << format_metric(s.auc_mean) << ','
          << format_metric(s.auc_min) << ',' << format_metric(s.auc_max) << ',' << ra << ','
          << format_metric(s.uauc_mean) << ',' << format_metric(s.uauc_min) << ',' << format_metric(s.uauc_max)
          << ',' << ru << '\n';
    }
    md << '\n';

    std::vector<plots::Bar> auc_bars, uauc_bars;
    for (const Summary& s : rows) {
      auc_bars.push_back({s.arm, s.auc_mean, s.auc_min, s.auc_max});
      uauc_bars.push_back({s.arm, s.uauc_mean, s.uauc_min, s.uauc_max});
    }
    const std::string suffix = "_rho" + short_number(rho) + ".svg";
    write_file(dir / ("auc_by_arm" + suffix),
               plots::bar_chart_svg("AUC by arm (eval missing rate " + short_number(rho) + ")", "AUC", auc_bars));
    write_file(dir / ("uauc_by_arm" + suffix),
               plots::bar_chart_svg("UAUC by arm (eval missing rate " + short_number(rho) + ")", "UAUC", uauc_bars));
  }

  // metric vs rho, one line per arm
  std::vector<plots::Series> auc_lines, uauc_lines;
  for (const auto& [rho, rows] : summaries) {
    for (const Summary& s : rows) {
      auto find = [&](std::vector<plots::Series>& v) -> plots::Series& {
        auto it = std::find_if(v.begin(), v.end(), [&](const plots::Series& x) { return x.name == s.arm; });
        if (it != v.end()) return *it;
        v.push_back({s.arm, {}, {}});
        return v.back();
      };
      plots::Series& a_line = find(auc_lines);
      a_line.x.push_back(rho);
      a_line.y.push_back(s.auc_mean);
      plots::Series& u_line = find(uauc_lines);
      u_line.x.push_back(rho);
      u_line.y.push_back(s.uauc_mean);
    }
  }
  write_file(dir / "auc_vs_rho.svg", plots::line_chart_svg("AUC vs eval missing rate", "eval missing rate", "AUC",
                                                           auc_lines));
  write_file(dir / "uauc_vs_rho.svg",
             plots::line_chart_svg("UAUC vs eval missing rate", "eval missing rate", "UAUC", uauc_lines));
  write_file(dir / "summary.md", md.str());
  write_file(dir / "summary.csv", csv.str());
  out << md.str();
  return 0;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Asymmetric diffusion recommender: data generation, training, evaluation and sweeps"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::function<int()> action;

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic train/eval split with known ground truth");
  g->add_option("--spec", gen.spec_path, "Generator spec JSON (defaults when omitted)")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out_dir, "Output directory")->required();
  g->add_option("--seed", gen.seed, "Override the sample seed");
  g->callback([&] { action = [&] { return gen_data(gen, out); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one arm and write a checkpoint");
  t->add_option("--config", tr.config_path, "Run config JSON: {\"arm\": ..., \"train\": {...}}")
      ->check(CLI::ExistingFile);
  t->add_option("--train", tr.train_path, "Training CSV")->required();
  t->add_option("--eval", tr.eval_path, "Eval CSV for in-training and final evaluation");
  t->add_option("--schema", tr.schema_path, "Schema JSON (or a gen-data synth_spec.json)");
  t->add_option("--out", tr.out_dir, "Output directory")->required();
  t->add_option("--resume", tr.resume_path, "Checkpoint to continue from");
  t->add_option("--arm", tr.arm, "Override the arm");
  t->add_option("--seed", tr.seed, "Override the training seed");
  t->add_option("--epochs", tr.epochs, "Override the epoch count");
  t->callback([&] { action = [&] { return train(tr, out, err); }; });

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a dataset with a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint_path, "Checkpoint file")->required();
  e->add_option("--data", ev.data_path, "Dataset CSV")->required();
  e->add_option("--baseline", ev.baseline_path, "Baseline report JSON for RelaImpr");
  e->add_option("--out", ev.out_path, "Report JSON path (stdout when omitted)");
  e->add_option("--serving", ev.serving, "Override the serving path (base|denoised)");
  e->callback([&] { action = [&] { return evaluate(ev, out, err); }; });

  AblateArgs ab;
  std::string seeds_text, rhos_text;
  auto* s = app.add_subcommand("ablate", "Train every arm for every seed and write a sweep CSV");
  s->add_option("--config", ab.config_path, "Run config JSON; its train block is shared by all arms")
      ->check(CLI::ExistingFile);
  s->add_option("--train", ab.train_path, "Training CSV")->required();
  s->add_option("--eval", ab.eval_path, "Eval CSV (clean when --eval-rho is used)")->required();
  s->add_option("--arms", ab.arms, "Comma-separated arm names");
  s->add_option("--seeds", seeds_text, "Comma-separated seeds (default 1,2,3,4,5)");
  s->add_option("--eval-rho", rhos_text, "Comma-separated missing rates injected into eval");
  s->add_option("--missing-seed", ab.missing_seed, "Seed of the injected eval missingness");
  s->add_option("--jobs", ab.jobs, "Parallel training runs");
  s->add_option("--out", ab.out_path, "Sweep CSV path")->required();
  s->callback([&] {
    action = [&] {
      try {
        if (!seeds_text.empty()) {
          ab.seeds.clear();
          for (const auto& x : split_list(seeds_text)) ab.seeds.push_back(std::stoull(x));
        }
        for (const auto& x : split_list(rhos_text)) ab.eval_rhos.push_back(std::stod(x));
      } catch (const std::logic_error&) {
        throw ConfigError("--seeds/--eval-rho must be comma-separated numbers");
      }
      return ablate(ab, out, err);
    };
  });

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Summarise a sweep CSV into a table and SVG plots");
  r->add_option("--sweep", rp.sweep_path, "Sweep CSV from ablate")->required();
  r->add_option("--out", rp.out_dir, "Output directory")->required();
  r->callback([&] { action = [&] { return report(rp, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }
  try {
    return action();
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return static_cast<int>(ex.code());
  } catch (const nlohmann::json::exception& ex) {
    err << "error: bad config: " << ex.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  }
}

}  // namespace asymdiff::cli
