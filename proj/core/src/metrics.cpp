#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mmfc/errors.hpp"
#include "mmfc/evalkit.hpp"

namespace mmfc {

std::size_t label_index(VerdictLabel label) noexcept {
  switch (label) {
    case VerdictLabel::kSupported:
      return 0;
    case VerdictLabel::kRefuted:
      return 1;
    case VerdictLabel::kNei:
      return 2;
  }
  return 2;
}

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

std::size_t ConfusionMatrix::trace() const noexcept { return counts[0][0] + counts[1][1] + counts[2][2]; }

MetricReport metrics_from_confusion(const ConfusionMatrix& m, std::size_t n_fallback) {
  const auto n = m.total();
  if (n == 0) throw EmptySample();
  MetricReport r;
  r.n_scored = n;
  r.n_fallback = n_fallback;
  r.accuracy = static_cast<double>(m.trace()) / static_cast<double>(n);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      row += m.counts[c][k];
      col += m.counts[k][c];
    }
    const auto tp = static_cast<double>(m.counts[c][c]);
    auto& cm = r.per_class[c];
    cm.support = row;
    cm.precision = col == 0 ? 0.0 : tp / static_cast<double>(col);
    cm.recall = row == 0 ? 0.0 : tp / static_cast<double>(row);
    const double denom = static_cast<double>(row + col);
    cm.f1 = denom == 0.0 ? 0.0 : 2.0 * tp / denom;
    f1_sum += cm.f1;
  }
  r.macro_f1 = f1_sum / 3.0;
  return r;
}

GoldLabels gold_labels(const Dataset& dataset) {
  GoldLabels gold;
  for (const auto& c : dataset.claims) gold.emplace(c.claim_id, c.gold_verdict);
  return gold;
}

ScoreResult score(std::span<const Prediction> predictions, const GoldLabels& gold) {
  ScoreResult out;
  std::size_t fallback = 0;
  for (const auto& p : predictions) {
    auto it = gold.find(p.claim_id);
    if (it == gold.end()) throw MissingGold(p.claim_id);
    ++out.confusion.at(it->second, p.verdict);
    if (p.parse_status == ParseStatus::kFallback) ++fallback;
  }
  out.report = metrics_from_confusion(out.confusion, fallback);
  return out;
}

OracleResult oracle_compose(std::span<const std::vector<Prediction>> runs, const GoldLabels& gold) {
  if (runs.empty()) throw ClaimSetMismatch("oracle needs at least one run");
  std::vector<std::map<std::string, const Prediction*>> by_claim(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& p : runs[r]) {
      if (!by_claim[r].emplace(p.claim_id, &p).second) {
        throw ClaimSetMismatch("run " + std::to_string(r + 1) + " repeats claim '" + p.claim_id + "'");
      }
    }
  }
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (by_claim[r].size() != by_claim[0].size() ||
        !std::equal(by_claim[r].begin(), by_claim[r].end(), by_claim[0].begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw ClaimSetMismatch("run " + std::to_string(r + 1) + " covers a different claim set than run 1");
    }
  }

  OracleResult out;
  out.predictions.reserve(by_claim[0].size());
  for (const auto& [claim_id, first] : by_claim[0]) {
    auto g = gold.find(claim_id);
    if (g == gold.end()) throw MissingGold(claim_id);
    const Prediction* chosen = first;
    for (const auto& run : by_claim) {
      const auto* p = run.at(claim_id);
      if (p->verdict == g->second) {
        chosen = p;
        break;
      }
    }
    Prediction composed = *chosen;
    composed.config = "oracle";
    out.predictions.push_back(std::move(composed));
  }
  out.score = score(out.predictions, gold);
  return out;
}

MeanSe mean_se(std::span<const double> values) {
  if (values.empty()) throw EmptySample();
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

}  // namespace mmfc
