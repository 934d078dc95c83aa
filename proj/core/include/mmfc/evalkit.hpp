#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmfc/corpus.hpp"
#include "mmfc/pipeline.hpp"

namespace mmfc {

// Row/column order of every per-class table.
std::size_t label_index(VerdictLabel label) noexcept;

// counts[gold][predicted].
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 3>, 3> counts{};

  std::size_t& at(VerdictLabel gold, VerdictLabel predicted) { return counts[label_index(gold)][label_index(predicted)]; }
  std::size_t at(VerdictLabel gold, VerdictLabel predicted) const {
    return counts[label_index(gold)][label_index(predicted)];
  }
  std::size_t total() const noexcept;
  std::size_t trace() const noexcept;

  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

struct MetricReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<ClassMetrics, 3> per_class{};
  std::size_t n_scored = 0;
  std::size_t n_fallback = 0;
};

// Zero denominators give 0; all three classes are averaged. Throws
// EmptySample for an empty matrix.
MetricReport metrics_from_confusion(const ConfusionMatrix& matrix, std::size_t n_fallback = 0);

using GoldLabels = std::map<std::string, VerdictLabel, std::less<>>;

GoldLabels gold_labels(const Dataset& dataset);

struct ScoreResult {
  ConfusionMatrix confusion;
  MetricReport report;
};

// Fallback predictions count as the NEI they carry. Errors: MissingGold,
// EmptySample.
ScoreResult score(std::span<const Prediction> predictions, const GoldLabels& gold);

struct OracleResult {
  std::vector<Prediction> predictions;
  ScoreResult score;
};

// runs[0] is configuration (1). Per claim: the gold verdict if any run got it
// right, otherwise run 0's verdict. Errors: ClaimSetMismatch, MissingGold.
OracleResult oracle_compose(std::span<const std::vector<Prediction>> runs, const GoldLabels& gold);

enum class MannWhitneyMethod { kAuto, kExact, kNormal };

inline constexpr std::size_t kExactMannWhitneyMaxN = 20;

struct MannWhitneyResult {
  double u = 0.0;  // for sample_a
  double p = 1.0;  // two-sided
  bool exact = false;
};

// Midranks for ties. kAuto is exact when the combined size is at most 20 and
// otherwise a tie-corrected normal approximation with continuity
// correction. Throws EmptySample.
MannWhitneyResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                                 MannWhitneyMethod method = MannWhitneyMethod::kAuto);

struct ChiSquareResult {
  double statistic = 0.0;
  double p = 1.0;
};

// Pearson statistic without continuity correction, df = 1. Throws
// DegenerateTable when a row or column sums to zero.
ChiSquareResult chi_square_independence(const std::array<std::array<std::size_t, 2>, 2>& table);

// units[i] holds the values given to item i, one per annotator. Items with
// fewer than two values are ignored. Throws InsufficientData when no item
// is pairable.
double krippendorff_alpha_nominal(const std::vector<std::vector<std::string>>& units);

// Necessity labels grouped by claim. Throws InsufficientData with fewer than
// two annotators.
double krippendorff_alpha_nominal(std::span<const AnnotationRecord> annotations);

// 2x2 counts of claim category (rows: visual successful, unsuccessful) by
// necessity (columns: necessary, unnecessary), taking the first annotator (by
// id) with a category for each claim.
std::array<std::array<std::size_t, 2>, 2> category_necessity_table(std::span<const AnnotationRecord> annotations);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(n); 0 for a single value
};

MeanSe mean_se(std::span<const double> values);

// ---- reports ------------------------------------------------------------

struct RunMetrics {
  std::string name;  // unique; used as a directory name
  std::string strategy;
  std::string config;
  ScoreResult result;
};

struct TestResult {
  std::string name;
  std::string test;  // "mann_whitney" or "chi_square"
  double statistic = 0.0;
  double p = 1.0;
};

struct ReportInputs {
  std::vector<RunMetrics> runs;
  std::vector<TestResult> tests;
  std::optional<double> agreement_alpha;
};

nlohmann::json metrics_json(const RunMetrics& run);

// Fixed-point with `decimals` places; "-0.000" is normalized to "0.000".
std::string format_fixed(double value, int decimals);

// Writes, under out_dir:
//   <run>/metrics.json, <run>/confusion.csv   per run
//   comparison.csv                             one row per run, 3 decimals
//   aggregate.csv                              mean and SE per (strategy, config)
//   tests.csv                                  when tests are given, p to 4 decimals
//   agreement.json                             when alpha is given
// Throws IoFailure or std::invalid_argument with no runs.
void emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

}  // namespace mmfc
