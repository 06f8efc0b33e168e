#include <cmath>
#include <map>
#include <gtest/gtest.h>

#include "asymdiff/errors.hpp"
#include "asymdiff/metrics/metrics.hpp"
#include "asymdiff/random.hpp"

namespace asymdiff {
namespace {

double pairwise_auc(const std::vector<ScoredExample>& ex) {
  double wins = 0, pairs = 0;
  for (const auto& p : ex)
    for (const auto& n : ex) {
      if (p.label != 1 || n.label != 0) continue;
      pairs += 1;
      wins += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
    }
  return wins / pairs;
}

std::vector<ScoredExample> random_examples(std::uint64_t seed, std::size_t n) {
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> score(0, 20), user(0, 9), label(0, 1);
  std::vector<ScoredExample> out(n);
  for (auto& e : out) e = {static_cast<std::uint32_t>(user(rng)), label(rng), score(rng) / 20.0};
  return out;
}

TEST(Auc, SmallExamples) {
  EXPECT_EQ(auc(std::vector<ScoredExample>{{0, 1, 0.9}, {0, 0, 0.1}}), 1.0);
  EXPECT_EQ(auc(std::vector<ScoredExample>{{0, 1, 0.1}, {0, 0, 0.9}}), 0.0);
  EXPECT_EQ(auc(std::vector<ScoredExample>{{0, 1, 0.5}, {0, 0, 0.5}}), 0.5);
  EXPECT_DOUBLE_EQ(auc(std::vector<ScoredExample>{{0, 1, 0.8}, {0, 1, 0.4}, {0, 0, 0.6}, {0, 0, 0.2}}), 0.75);
}

TEST(Auc, MatchesPairwiseWithTies) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto ex = random_examples(seed, 150);
    EXPECT_NEAR(auc(ex), pairwise_auc(ex), 1e-12);
  }
}

TEST(Auc, SingleClassUndefined) {
  EXPECT_THROW(auc(std::vector<ScoredExample>{{0, 1, 0.3}, {0, 1, 0.4}}), UndefinedMetricError);
}

TEST(Uauc, SkipsSingleClassUsersAndWeightsByCount) {
  const std::vector<ScoredExample> ex{
      {0, 1, 0.9}, {0, 0, 0.1},                // user 0: AUC 1, 2 examples
      {1, 1, 0.1}, {1, 0, 0.9}, {1, 0, 0.95},  // user 1: AUC 0, 3 examples
      {2, 1, 0.5}};                            // user 2: skipped
  const UaucResult r = uauc_detail(ex);
  EXPECT_EQ(r.users_scored, 2u);
  EXPECT_EQ(r.users_skipped, 1u);
  EXPECT_DOUBLE_EQ(r.value, 2.0 / 5.0);
}

TEST(Uauc, NoScorableUserUndefined) {
  EXPECT_THROW(uauc(std::vector<ScoredExample>{{0, 1, 0.3}, {1, 0, 0.4}}), UndefinedMetricError);
}

TEST(LogLoss, Clamped) {
  EXPECT_NEAR(logloss(std::vector<ScoredExample>{{0, 1, 0.5}}), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(logloss(std::vector<ScoredExample>{{0, 1, 0.0}})));
}

TEST(RelaImpr, KnownDeltas) {
  EXPECT_NEAR(relaimpr(0.92359, 0.92267), 0.100, 0.001);
  EXPECT_NEAR(relaimpr(0.62614, 0.61578), 1.682, 0.001);
  EXPECT_NEAR(relaimpr(0.62152, 0.61578), 0.932, 0.001);
  EXPECT_EQ(relaimpr(0.5, 0.5), 0.0);
  EXPECT_THROW(relaimpr(0.5, 0.0), ConfigError);
}

TEST(Report, JsonRoundTripAndCsv) {
  MetricsReport r = compute_report(random_examples(3, 100));
  r.arm = "asymdiff";
  r.seed = 4;
  r.config_hash = "deadbeef";
  r.serving_path = "denoised";
  r.eval_missing_rate = 0.2;
  MetricsReport base = r;
  base.arm = "base";
  base.auc -= 0.01;
  add_relaimpr(r, base, "base");
  ASSERT_EQ(r.relaimpr.size(), 2u);
  const MetricsReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.auc, r.auc);
  EXPECT_EQ(back.uauc, r.uauc);
  EXPECT_EQ(back.relaimpr[0].percent, r.relaimpr[0].percent);
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
  const std::string row = report_csv_row(r), header = report_csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
}

TEST(Format, RoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, 0.9235912345678901, 1e-300}) EXPECT_EQ(std::stod(format_metric(v)), v);
}

TEST(Uauc, SingleUserEqualsAuc) {
  auto ex = random_examples(31, 80);
  for (auto& e : ex) e.user_id = 3;
  EXPECT_EQ(uauc(ex), auc(ex));
}

TEST(Uauc, WeightedMeanExample) {
  const std::vector<ScoredExample> ex{
      {0, 1, 0.9}, {0, 1, 0.8}, {0, 0, 0.2}, {0, 0, 0.1},  // AUC 1.0
      {1, 1, 0.5}, {1, 0, 0.5}};                           // AUC 0.5
  EXPECT_NEAR(uauc(ex), 5.0 / 6.0, 1e-15);
}

TEST(Uauc, MatchesPerUserBruteForce) {
  Rng rng = make_rng(41);
  std::uniform_int_distribution<int> score(0, 30), user(0, 49), label(0, 1);
  std::vector<ScoredExample> ex(600);
  for (auto& e : ex) e = {static_cast<std::uint32_t>(user(rng)), label(rng), score(rng) / 30.0};
  std::map<std::uint32_t, std::vector<ScoredExample>> by_user;
  for (const auto& e : ex) by_user[e.user_id].push_back(e);
  double num = 0, den = 0;
  for (const auto& [u, v] : by_user) {
    int pos = 0;
    for (const auto& e : v) pos += e.label;
    if (pos == 0 || pos == static_cast<int>(v.size())) continue;
    num += v.size() * pairwise_auc(v);
    den += v.size();
  }
  EXPECT_NEAR(uauc(ex), num / den, 1e-12);
}

TEST(Auc, InvariantUnderMonotoneMapsAndSymmetric) {
  const auto ex = random_examples(51, 200);
  auto mapped = ex, flipped = ex;
  for (auto& e : mapped) e.score = std::exp(3.0 * e.score) - 7.0;
  for (auto& e : flipped) {
    e.label = 1 - e.label;
    e.score = -e.score;
  }
  EXPECT_NEAR(auc(mapped), auc(ex), 1e-12);
  EXPECT_NEAR(auc(flipped), auc(ex), 1e-12);
}

TEST(LogLoss, MatchesNaiveLoop) {
  Rng rng = make_rng(61);
  std::uniform_real_distribution<double> p(0.01, 0.99);
  std::vector<ScoredExample> ex(300);
  double want = 0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    ex[i] = {0, static_cast<int>(i % 3 == 0), p(rng)};
    want -= ex[i].label ? std::log(ex[i].score) : std::log(1.0 - ex[i].score);
  }
  EXPECT_NEAR(logloss(ex), want / ex.size(), 1e-12);
  EXPECT_LT(logloss(std::vector<ScoredExample>{{0, 1, 1.0}, {0, 0, 0.0}}), 1e-6);
}

}  // namespace
}  // namespace asymdiff
