#include "mmfc/parsers.hpp"

#include <array>
#include <cctype>

#include "mmfc/errors.hpp"

namespace mmfc {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

struct Match {
  std::size_t pos;
  std::size_t len;
  VerdictLabel label;
};

constexpr std::array<std::pair<std::string_view, VerdictLabel>, 4> kVerdictTokens{{
    {"supported", VerdictLabel::kSupported},
    {"refuted", VerdictLabel::kRefuted},
    {"nei", VerdictLabel::kNei},
    {"not enough information", VerdictLabel::kNei},
}};

std::optional<Match> last_verdict(std::string_view raw) {
  const auto text = lower(raw);
  std::optional<Match> best;
  for (const auto& [token, label] : kVerdictTokens) {
    std::size_t from = 0;
    while (true) {
      const auto pos = text.find(token, from);
      if (pos == std::string::npos) break;
      const auto end = pos + token.size();
      const bool left_ok = pos == 0 || !word_char(text[pos - 1]);
      const bool right_ok = end == text.size() || !word_char(text[end]);
      if (left_ok && right_ok && (!best || pos > best->pos)) best = Match{pos, token.size(), label};
      from = pos + 1;
    }
  }
  return best;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<VerdictLabel> try_parse_verdict(std::string_view raw) {
  if (auto m = last_verdict(raw)) return m->label;
  return std::nullopt;
}

VerdictLabel parse_verdict(std::string_view raw) {
  if (auto label = try_parse_verdict(raw)) return *label;
  throw UnparseableVerdict(std::string(raw));
}

NecessityLabel parse_necessity(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size() && !word_char(raw[i])) ++i;
  std::size_t j = i;
  while (j < raw.size() && word_char(raw[j])) ++j;
  const auto token = lower(raw.substr(i, j - i));
  if (token == "yes") return NecessityLabel::kNecessary;
  if (token == "no") return NecessityLabel::kUnnecessary;
  throw UnparseableNecessity(std::string(raw));
}

std::optional<NecessityLabel> extract_necessity(std::string_view analysis) {
  static constexpr std::array<std::pair<std::string_view, NecessityLabel>, 6> kCues{{
      {"not necessary", NecessityLabel::kUnnecessary},
      {"unnecessary", NecessityLabel::kUnnecessary},
      {"not essential", NecessityLabel::kUnnecessary},
      {"not needed", NecessityLabel::kUnnecessary},
      {"necessary", NecessityLabel::kNecessary},
      {"essential", NecessityLabel::kNecessary},
  }};
  const auto text = lower(analysis);
  std::optional<std::pair<std::size_t, NecessityLabel>> best;
  for (const auto& [cue, label] : kCues) {
    const auto pos = text.find(cue);
    if (pos == std::string::npos) continue;
    if (pos > 0 && word_char(text[pos - 1])) {
      // "unnecessary" contains "necessary"; only whole-word hits count here.
      continue;
    }
    // Earlier wins; on equal positions the negated cue is listed first.
    if (!best || pos < best->first) best = {pos, label};
  }
  if (!best) return std::nullopt;
  return best->second;
}

std::string analysis_before_verdict(std::string_view raw) {
  const auto m = last_verdict(raw);
  if (!m) return std::string(trim(raw));
  auto head = raw.substr(0, m->pos);
  // Drop a trailing "Verdict:"-style lead-in on the same line.
  const auto nl = head.find_last_of('\n');
  if (nl != std::string_view::npos) {
    const auto line = lower(head.substr(nl + 1));
    if (line.find("verdict") != std::string::npos || trim(line).empty()) head = head.substr(0, nl);
  }
  return std::string(trim(head));
}

std::string parse_refinement(std::string_view raw, std::string_view original_claim) {
  auto t = trim(raw);
  auto stripped = t;
  while (!stripped.empty() && (stripped.front() == '"' || stripped.front() == '\'' || stripped.front() == '`')) {
    stripped.remove_prefix(1);
  }
  while (!stripped.empty() &&
         (stripped.back() == '"' || stripped.back() == '\'' || stripped.back() == '`' || stripped.back() == '.')) {
    stripped.remove_suffix(1);
  }
  if (lower(trim(stripped)) == "not needed" || t.empty()) return std::string(original_claim);
  return std::string(t);
}

}  // namespace mmfc
