#include "asymdiff/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "asymdiff/errors.hpp"
#include "asymdiff/numeric/layers.hpp"

namespace asymdiff {

double auc(std::span<const ScoredExample> examples) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return examples[a].score < examples[b].score; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t tied_positives = 0;
    while (j < order.size() && examples[order[j]].score == examples[order[i]].score) {
      tied_positives += examples[order[j]].label ? 1 : 0;
      ++j;
    }
    // ranks are 1-based; the tie group [i, j) shares the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    positive_rank_sum += midrank * static_cast<double>(tied_positives);
    positives += tied_positives;
    i = j;
  }
  const std::size_t negatives = examples.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("AUC needs at least one positive and one negative example");
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

UaucResult uauc_detail(std::span<const ScoredExample> examples) {
  std::map<std::uint32_t, std::vector<ScoredExample>> by_user;
  for (const auto& e : examples) by_user[e.user_id].push_back(e);
  UaucResult r;
  double weighted = 0.0;
  double weight = 0.0;
  for (const auto& [user, group] : by_user) {
    const auto positives = std::count_if(group.begin(), group.end(), [](const auto& e) { return e.label != 0; });
    if (positives == 0 || static_cast<std::size_t>(positives) == group.size()) {
      ++r.users_skipped;
      continue;
    }
    const double w = static_cast<double>(group.size());
    weighted += w * auc(group);
    weight += w;
    ++r.users_scored;
  }
  if (r.users_scored == 0) throw UndefinedMetricError("UAUC needs at least one user with both classes");
  r.value = weighted / weight;
  return r;
}

double uauc(std::span<const ScoredExample> examples) { return uauc_detail(examples).value; }

double logloss(std::span<const ScoredExample> examples) {
  if (examples.empty()) throw UndefinedMetricError("log-loss of an empty set");
  double acc = 0.0;
  for (const auto& e : examples) {
    const double p = clamp_probability(e.score);
    acc += e.label ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / static_cast<double>(examples.size());
}

double relaimpr(double metric_model, double metric_base) {
  if (!(metric_base > 0.0)) throw ConfigError("RelaImpr needs a positive base metric");
  return (metric_model / metric_base - 1.0) * 100.0;
}

MetricsReport compute_report(std::span<const ScoredExample> examples) {
  MetricsReport r;
  r.auc = auc(examples);
  const UaucResult u = uauc_detail(examples);
  r.uauc = u.value;
  r.n_users_scored = u.users_scored;
  r.n_users_skipped = u.users_skipped;
  r.logloss = logloss(examples);
  r.n_examples = examples.size();
  return r;
}

void add_relaimpr(MetricsReport& report, const MetricsReport& base, const std::string& baseline_name) {
  report.relaimpr.push_back({baseline_name, "auc", relaimpr(report.auc, base.auc)});
  report.relaimpr.push_back({baseline_name, "uauc", relaimpr(report.uauc, base.uauc)});
}

std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["arm"] = r.arm;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["serving_path"] = r.serving_path;
  j["eval_missing_rate"] = r.eval_missing_rate;
  j["auc"] = r.auc;
  j["uauc"] = r.uauc;
  j["logloss"] = r.logloss;
  j["n_examples"] = r.n_examples;
  j["n_users_scored"] = r.n_users_scored;
  j["n_users_skipped"] = r.n_users_skipped;
  auto rel = nlohmann::ordered_json::array();
  for (const auto& e : r.relaimpr) {
    nlohmann::ordered_json ej;
    ej["baseline"] = e.baseline;
    ej["metric"] = e.metric;
    ej["percent"] = e.percent;
    rel.push_back(std::move(ej));
  }
  j["relaimpr"] = std::move(rel);
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.arm = j.value("arm", std::string());
  r.seed = j.value("seed", std::uint64_t{0});
  r.config_hash = j.value("config_hash", std::string());
  r.serving_path = j.value("serving_path", std::string());
  r.eval_missing_rate = j.value("eval_missing_rate", 0.0);
  r.auc = j.at("auc").get<double>();
  r.uauc = j.at("uauc").get<double>();
  r.logloss = j.value("logloss", 0.0);
  r.n_examples = j.value("n_examples", std::size_t{0});
  r.n_users_scored = j.value("n_users_scored", std::size_t{0});
  r.n_users_skipped = j.value("n_users_skipped", std::size_t{0});
  if (j.contains("relaimpr")) {
    for (const auto& e : j.at("relaimpr")) {
      r.relaimpr.push_back({e.at("baseline").get<std::string>(), e.at("metric").get<std::string>(),
                            e.at("percent").get<double>()});
    }
  }
  return r;
}

std::string report_csv_header() {
  return "arm,seed,config_hash,serving_path,eval_missing_rate,auc,uauc,logloss,n_examples,"
         "n_users_scored,n_users_skipped,relaimpr_auc,relaimpr_uauc";
}

std::string report_csv_row(const MetricsReport& r) {
  std::string rel_auc, rel_uauc;
  for (const auto& e : r.relaimpr) {
    if (e.metric == "auc") rel_auc = format_metric(e.percent);
    if (e.metric == "uauc") rel_uauc = format_metric(e.percent);
  }
  std::ostringstream os;
  os << r.arm << ',' << r.seed << ',' << r.config_hash << ',' << r.serving_path << ','
     << format_metric(r.eval_missing_rate) << ',' << format_metric(r.auc) << ','
     << format_metric(r.uauc) << ',' << format_metric(r.logloss) << ',' << r.n_examples << ','
     << r.n_users_scored << ',' << r.n_users_skipped << ',' << rel_auc << ',' << rel_uauc;
  return os.str();
}

}  // namespace asymdiff
