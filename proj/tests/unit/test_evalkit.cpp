#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/evalkit.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc {
namespace {

constexpr auto S = VerdictLabel::kSupported;
constexpr auto R = VerdictLabel::kRefuted;
constexpr auto N = VerdictLabel::kNei;

Prediction pred(std::string id, VerdictLabel v, ParseStatus st = ParseStatus::kOk) {
  Prediction p;
  p.claim_id = std::move(id);
  p.verdict = v;
  p.parse_status = st;
  return p;
}

// Two-sided exact p by enumerating every split of the pooled ranks.
double enumerate_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto n = pooled.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (double x : pooled) {
      less += x < pooled[i];
      equal += x == pooled[i];
    }
    ranks[i] = less + (equal + 1) / 2.0;
  }
  const double mean = a.size() * (n + 1) / 2.0;
  const double observed = std::abs(std::accumulate(ranks.begin(), ranks.begin() + a.size(), 0.0) - mean);
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + a.size(), true);
  std::size_t hit = 0, total = 0;
  do {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i]) s += ranks[i];
    }
    ++total;
    hit += std::abs(s - mean) >= observed - 1e-9;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return static_cast<double>(hit) / total;
}

TEST(Metrics, HandComputedMatrix) {
  ConfusionMatrix m;
  m.counts = {{{2, 1, 0}, {0, 3, 0}, {1, 0, 3}}};
  const auto r = metrics_from_confusion(m);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.8);
  // F1: S = 4/6, R = 6/7, N = 6/7.
  EXPECT_NEAR(r.macro_f1, (4.0 / 6 + 6.0 / 7 + 6.0 / 7) / 3, 1e-12);
  EXPECT_NEAR(r.per_class[0].precision, 2.0 / 3, 1e-12);
  EXPECT_NEAR(r.per_class[1].recall, 1.0, 1e-12);
  EXPECT_EQ(r.per_class[2].support, 4u);
}

TEST(Metrics, EmptyClassCountsAsZero) {
  ConfusionMatrix m;
  m.at(S, S) = 5;
  const auto r = metrics_from_confusion(m);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_NEAR(r.macro_f1, 1.0 / 3, 1e-12);
  EXPECT_THROW(metrics_from_confusion(ConfusionMatrix{}), EmptySample);
}

TEST(Metrics, ScoreCountsFallbackAsNei) {
  const GoldLabels gold{{"a", S}, {"b", N}, {"c", R}};
  std::vector<Prediction> preds{pred("a", S), pred("b", N, ParseStatus::kFallback), pred("c", S)};
  const auto r = score(preds, gold);
  EXPECT_EQ(r.confusion.at(N, N), 1u);
  EXPECT_EQ(r.confusion.at(R, S), 1u);
  EXPECT_NEAR(r.report.accuracy, 2.0 / 3, 1e-12);
  EXPECT_EQ(r.report.n_fallback, 1u);
  preds.push_back(pred("zzz", S));
  EXPECT_THROW(score(preds, gold), MissingGold);
  EXPECT_THROW(score(std::vector<Prediction>{}, gold), EmptySample);
}

TEST(Oracle, ComposesFirstCorrectRun) {
  const GoldLabels gold{{"a", S}, {"b", R}, {"c", N}};
  std::vector<std::vector<Prediction>> runs{
      {pred("b", S), pred("a", S), pred("c", S)},
      {pred("a", R), pred("b", R), pred("c", R)},
      {pred("a", N), pred("b", N), pred("c", R)}};
  const auto o = oracle_compose(runs, gold);
  ASSERT_EQ(o.predictions.size(), 3u);
  EXPECT_EQ(o.predictions[0].claim_id, "a");
  EXPECT_EQ(o.predictions[0].verdict, S);
  EXPECT_EQ(o.predictions[1].verdict, R);
  EXPECT_EQ(o.predictions[2].verdict, S);
  EXPECT_EQ(o.predictions[0].config, "oracle");
  EXPECT_NEAR(o.score.report.accuracy, 2.0 / 3, 1e-12);

  runs[2].pop_back();
  EXPECT_THROW(oracle_compose(runs, gold), ClaimSetMismatch);
  runs[2].push_back(pred("a", S));
  EXPECT_THROW(oracle_compose(runs, gold), ClaimSetMismatch);
}

TEST(MannWhitney, ExactFixture) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto r = mann_whitney_u(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.u, 0.0);
  EXPECT_NEAR(r.p, 0.1, 1e-12);
  EXPECT_NEAR(mann_whitney_u(b, a).u, 9.0, 1e-12);
  EXPECT_NEAR(mann_whitney_u(b, a).p, 0.1, 1e-12);
  const std::vector<double> empty;
  EXPECT_THROW(mann_whitney_u(empty, b), EmptySample);
}

TEST(MannWhitney, ExactMatchesEnumerationWithTies) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> a(2 + rng() % 5), b(2 + rng() % 5);
    for (auto& x : a) x = static_cast<double>(rng() % 6);
    for (auto& x : b) x = static_cast<double>(rng() % 6);
    const auto r = mann_whitney_u(a, b, MannWhitneyMethod::kExact);
    EXPECT_NEAR(r.p, enumerate_p(a, b), 1e-9) << "trial " << trial;
  }
}

TEST(MannWhitney, NormalApproximationCloseToExact) {
  std::mt19937 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t n = 15; n <= 20; ++n) {
    std::vector<double> a(n / 2), b(n - n / 2);
    for (auto& x : a) x = noise(rng);
    for (auto& x : b) x = noise(rng) + 0.8;
    const auto exact = mann_whitney_u(a, b, MannWhitneyMethod::kExact);
    const auto normal = mann_whitney_u(a, b, MannWhitneyMethod::kNormal);
    EXPECT_EQ(exact.u, normal.u);
    EXPECT_NEAR(exact.p, normal.p, 0.02) << "n = " << n;
  }
  std::vector<double> big(30, 1.0), other(30, 2.0);
  EXPECT_FALSE(mann_whitney_u(big, other).exact);
}

TEST(ChiSquare, Fixtures) {
  const auto uniform = chi_square_independence({{{10, 10}, {10, 10}}});
  EXPECT_DOUBLE_EQ(uniform.statistic, 0.0);
  EXPECT_DOUBLE_EQ(uniform.p, 1.0);
  const double a = 20, b = 5, c = 10, d = 15, n = 50;
  const double expected = n * std::pow(a * d - b * c, 2) / ((a + b) * (c + d) * (a + c) * (b + d));
  const auto r = chi_square_independence({{{20, 5}, {10, 15}}});
  EXPECT_NEAR(r.statistic, expected, 1e-12);
  EXPECT_NEAR(r.p, std::erfc(std::sqrt(expected / 2)), 1e-12);
  EXPECT_THROW(chi_square_independence({{{0, 0}, {3, 4}}}), DegenerateTable);
}

TEST(Krippendorff, Fixtures) {
  EXPECT_DOUBLE_EQ(krippendorff_alpha_nominal({{"A", "A"}, {"B", "B"}, {"A", "A"}}), 1.0);
  EXPECT_NEAR(krippendorff_alpha_nominal({{"A", "A"}, {"A", "A"}, {"B", "B"}, {"A", "B"}}), 8.0 / 15, 1e-12);
  EXPECT_NEAR(krippendorff_alpha_nominal({{"A", "B"}, {"B", "A"}}), -0.5, 1e-12);
  EXPECT_THROW(krippendorff_alpha_nominal({{"A"}, {"B"}}), InsufficientData);
}

TEST(Krippendorff, FromAnnotations) {
  std::vector<AnnotationRecord> recs{
      {"c1", "x", NecessityLabel::kNecessary, ClaimCategory::kVisualSuccessful},
      {"c1", "y", NecessityLabel::kNecessary, ClaimCategory::kVisualUnsuccessful},
      {"c2", "x", NecessityLabel::kNecessary, std::nullopt},
      {"c2", "y", NecessityLabel::kNecessary, ClaimCategory::kVisualUnsuccessful},
      {"c3", "x", NecessityLabel::kUnnecessary, ClaimCategory::kVisualUnsuccessful},
      {"c3", "y", NecessityLabel::kUnnecessary, std::nullopt},
      {"c4", "y", NecessityLabel::kNecessary, ClaimCategory::kVisualSuccessful},
      {"c4", "x", NecessityLabel::kUnnecessary, std::nullopt}};
  EXPECT_NEAR(krippendorff_alpha_nominal(recs), 8.0 / 15, 1e-12);
  const auto t = category_necessity_table(recs);
  EXPECT_EQ(t[0][0], 2u);  // c1 by x, c4 by y
  EXPECT_EQ(t[1][0], 1u);  // c2 by y
  EXPECT_EQ(t[1][1], 1u);  // c3 by x
  EXPECT_EQ(t[0][0] + t[0][1] + t[1][0] + t[1][1], 4u);
  std::vector<AnnotationRecord> single{recs[0], recs[2]};
  EXPECT_THROW(krippendorff_alpha_nominal(single), InsufficientData);
}

TEST(MeanSe, Values) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto r = mean_se(v);
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_NEAR(r.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
  const std::vector<double> one{7};
  EXPECT_DOUBLE_EQ(mean_se(one).se, 0.0);
}

TEST(Reports, FormatFixed) {
  EXPECT_EQ(format_fixed(0.79365, 3), "0.794");
  EXPECT_EQ(format_fixed(-0.0001, 3), "0.000");
  EXPECT_EQ(format_fixed(1.0, 4), "1.0000");
}

TEST(Reports, EmitsFiles) {
  testing::TempDir out;
  ConfusionMatrix m;
  m.counts = {{{2, 1, 0}, {0, 3, 0}, {1, 0, 3}}};
  ReportInputs in;
  in.runs.push_back({"gold_image__amufc", "amufc", "gold_image", {m, metrics_from_confusion(m)}});
  in.runs.push_back({"gold_image__amufc.run2", "amufc", "gold_image", {m, metrics_from_confusion(m)}});
  in.tests.push_back({"oracle vs text_only", "mann_whitney", 0.0, 0.1});
  in.agreement_alpha = 0.5333;
  emit_report(in, out.path());
  const auto csv = testing::read_text(out / "gold_image__amufc/confusion.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "gold,pred,count");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
  const auto cmp = testing::read_text(out / "comparison.csv");
  EXPECT_NE(cmp.find("0.800,0.794"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out / "aggregate.csv"));
  EXPECT_NE(testing::read_text(out / "tests.csv").find("0.1000"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out / "agreement.json"));
  const auto j = nlohmann::json::parse(read_file(out / "gold_image__amufc/metrics.json"));
  EXPECT_NEAR(j["accuracy"].get<double>(), 0.8, 1e-12);
  EXPECT_THROW(emit_report({}, out.path()), std::invalid_argument);
}

}  // namespace
}  // namespace mmfc
