#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>

#include "mmfc/errors.hpp"
#include "mmfc/evalkit.hpp"

namespace mmfc {

namespace {

// Doubled midranks so that tied ranks stay integral.
std::vector<std::int64_t> doubled_midranks(const std::vector<double>& values, double& tie_term) {
  const auto n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::int64_t> ranks(n);
  tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const auto doubled = static_cast<std::int64_t>(i + 1 + j + 1);  // 2 * mean of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = doubled;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

double exact_p(const std::vector<std::int64_t>& ranks, std::size_t n1, std::int64_t observed_sum) {
  const auto n = ranks.size();
  const auto max_sum = std::accumulate(ranks.begin(), ranks.end(), std::int64_t{0});
  // ways[k][s]: subsets of size k with doubled rank sum s.
  std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(ranks[i]);
    for (std::size_t k = std::min(n1, i + 1); k >= 1; --k) {
      auto& dst = ways[k];
      const auto& src = ways[k - 1];
      for (std::size_t s = dst.size(); s-- > r;) dst[s] += src[s - r];
    }
  }
  // E[doubled sum] = n1 (N + 1).
  const auto centre = static_cast<std::int64_t>(n1 * (n + 1));
  const auto observed_dev = std::llabs(observed_sum - centre);
  double total = 0.0;
  double extreme = 0.0;
  for (std::size_t s = 0; s < ways[n1].size(); ++s) {
    const double w = ways[n1][s];
    if (w == 0.0) continue;
    total += w;
    if (std::llabs(static_cast<std::int64_t>(s) - centre) >= observed_dev) extreme += w;
  }
  return std::min(1.0, extreme / total);
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b, MannWhitneyMethod method) {
  if (a.empty() || b.empty()) throw EmptySample();
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  for (double v : all) {
    if (!std::isfinite(v)) throw std::invalid_argument("mann_whitney_u: non-finite value");
  }
  const auto n1 = a.size();
  const auto n2 = b.size();
  const auto n = n1 + n2;
  double tie_term = 0.0;
  const auto ranks = doubled_midranks(all, tie_term);
  const auto sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), std::int64_t{0});

  MannWhitneyResult out;
  out.u = static_cast<double>(sum_a) / 2.0 - static_cast<double>(n1 * (n1 + 1)) / 2.0;
  const bool exact = method == MannWhitneyMethod::kExact ||
                     (method == MannWhitneyMethod::kAuto && n <= kExactMannWhitneyMaxN);
  out.exact = exact;
  if (exact) {
    out.p = exact_p(ranks, n1, sum_a);
    return out;
  }
  const double nn = static_cast<double>(n);
  const double mu = static_cast<double>(n1 * n2) / 2.0;
  const double var = static_cast<double>(n1 * n2) / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    out.p = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.u - mu) - 0.5) / std::sqrt(var);
  out.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

ChiSquareResult chi_square_independence(const std::array<std::array<std::size_t, 2>, 2>& table) {
  const double a = static_cast<double>(table[0][0]);
  const double b = static_cast<double>(table[0][1]);
  const double c = static_cast<double>(table[1][0]);
  const double d = static_cast<double>(table[1][1]);
  const double rows[2] = {a + b, c + d};
  const double cols[2] = {a + c, b + d};
  if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0) throw DegenerateTable();
  const double n = rows[0] + rows[1];
  double stat = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / n;
      const double diff = static_cast<double>(table[i][j]) - expected;
      stat += diff * diff / expected;
    }
  }
  // Chi-square survival with one degree of freedom.
  return {stat, std::erfc(std::sqrt(stat / 2.0))};
}

double krippendorff_alpha_nominal(const std::vector<std::vector<std::string>>& units) {
  std::map<std::pair<std::string, std::string>, double> o;
  std::map<std::string, double> n_c;
  for (const auto& unit : units) {
    const auto m = unit.size();
    if (m < 2) continue;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        o[{unit[i], unit[j]}] += w;
        n_c[unit[i]] += w;
      }
    }
  }
  if (n_c.empty()) throw InsufficientData("no item carries two or more ratings");
  double n = 0.0;
  for (const auto& [_, v] : n_c) n += v;
  double disagree = 0.0;
  for (const auto& [key, v] : o) {
    if (key.first != key.second) disagree += v;
  }
  if (disagree == 0.0) return 1.0;
  double expected = 0.0;
  for (const auto& [c, vc] : n_c) {
    for (const auto& [k, vk] : n_c) {
      if (c != k) expected += vc * vk;
    }
  }
  return 1.0 - (n - 1.0) * disagree / expected;
}

double krippendorff_alpha_nominal(std::span<const AnnotationRecord> annotations) {
  std::set<std::string> annotators;
  std::map<std::string, std::vector<std::string>> by_claim;
  for (const auto& a : annotations) {
    annotators.insert(a.annotator_id);
    by_claim[a.claim_id].emplace_back(to_string(a.necessity_label));
  }
  if (annotators.size() < 2) throw InsufficientData("agreement needs at least two annotators");
  std::vector<std::vector<std::string>> units;
  units.reserve(by_claim.size());
  for (auto& [_, values] : by_claim) units.push_back(std::move(values));
  return krippendorff_alpha_nominal(units);
}

std::array<std::array<std::size_t, 2>, 2> category_necessity_table(std::span<const AnnotationRecord> annotations) {
  std::map<std::string, const AnnotationRecord*> chosen;
  for (const auto& a : annotations) {
    if (!a.claim_category) continue;
    auto [it, inserted] = chosen.emplace(a.claim_id, &a);
    if (!inserted && a.annotator_id < it->second->annotator_id) it->second = &a;
  }
  std::array<std::array<std::size_t, 2>, 2> table{};
  for (const auto& [_, a] : chosen) {
    const std::size_t row = *a->claim_category == ClaimCategory::kVisualSuccessful ? 0 : 1;
    const std::size_t col = a->necessity_label == NecessityLabel::kNecessary ? 0 : 1;
    ++table[row][col];
  }
  return table;
}

}  // namespace mmfc
