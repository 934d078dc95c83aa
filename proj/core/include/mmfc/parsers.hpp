#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "mmfc/corpus.hpp"

namespace mmfc {

// Case-insensitive whole-word scan for "supported", "refuted", "nei" and
// "not enough information"; the last occurrence wins. Throws
// UnparseableVerdict when none occurs.
VerdictLabel parse_verdict(std::string_view raw);
std::optional<VerdictLabel> try_parse_verdict(std::string_view raw);

// Leading yes/no token, case-insensitive, surrounding punctuation ignored.
// Throws UnparseableNecessity.
NecessityLabel parse_necessity(std::string_view raw);

// Best-effort necessity reading of a free-text analysis ("... is not
// necessary ..."); the earliest cue wins.
std::optional<NecessityLabel> extract_necessity(std::string_view analysis);

// The text before the final verdict mention of a combined analysis+verdict
// response, trimmed. Empty when the verdict is the first thing said.
std::string analysis_before_verdict(std::string_view raw);

// "not needed" (any case, optional quotes/period) keeps the original claim;
// anything else is the refined claim, trimmed.
std::string parse_refinement(std::string_view raw, std::string_view original_claim);

}  // namespace mmfc
