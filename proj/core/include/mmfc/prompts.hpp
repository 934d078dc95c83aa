#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mmfc/chat.hpp"

namespace mmfc {

// A single sentence is used as-is; several become "• a\n• b".
std::string join_text_evidence(std::span<const std::string> sentences);

// Necessity assessment in free text. The image is attached in the
// "Image Evidence:" slot. Throws MissingImage when `image` is not a file.
ChatMessage render_analyzer_prompt(std::string_view claim, const std::filesystem::path& image,
                                   std::string_view text_evidence);

// Verdict prompt. The "Image Evidence:" line appears iff an image is given and
// the "Image Analysis:" line iff an analysis is given.
ChatMessage render_verifier_prompt(std::string_view claim, const std::optional<std::filesystem::path>& image,
                                   const std::optional<Assessment>& analysis, std::string_view text_evidence);

// Yes/No necessity prompt; the message ends with the answer instruction.
ChatMessage render_necessity_label_prompt(std::string_view claim, const std::filesystem::path& image,
                                          std::string_view text_evidence);

// Analyzer instructions followed by the verifier instructions, one call.
ChatMessage render_unified_prompt(std::string_view claim, const std::optional<std::filesystem::path>& image,
                                  std::string_view text_evidence);

// Throws EmptyDocument for an empty or whitespace-only document.
ChatMessage render_summarizer_prompt(std::string_view document);

ChatMessage render_refinement_prompt(std::string_view claim, std::string_view evidence,
                                     std::string_view justification, std::string_view label);

}  // namespace mmfc
