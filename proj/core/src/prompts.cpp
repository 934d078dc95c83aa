#include "mmfc/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "mmfc/errors.hpp"

namespace mmfc {

namespace {

constexpr std::string_view kAnalyzerInstruction =
    "Your task is to determine whether the provided image evidence is necessary for verifying the given claim "
    "or clarifying the accompanying text evidence. Follow these steps:\n"
    "1. Analyze the claim and the text evidence to understand the context.\n"
    "2. Assess whether the image provides important information that is not already conveyed by the text.\n"
    "3. Decide whether the image is necessary for verification and justify your reasoning.\n";

constexpr std::string_view kAnalyzerRespond = "Respond only with your analysis.\n";

constexpr std::string_view kVerifierInstruction =
    "Given a claim, your task is to determine the correct verdict based on the provided image evidence and text "
    "evidence. Provide a justification for your answer, then choose one of the following verdicts: 'Supported', "
    "'Refuted', or 'NEI' (Not Enough Information).\n";

constexpr std::string_view kNecessityInstruction =
    "Your task is to determine if the provided image evidence is essential to verify the given claim or clarify "
    "the provided text evidence. To do this, follow these steps:\n"
    "1. Analyze the claim and the text evidence to understand the context.\n"
    "2. Assess whether the image evidence provides critical information not conveyed by the text alone.\n"
    "3. Decide if the image evidence is necessary for verification or clarification.\n";

constexpr std::string_view kNecessityRespond =
    "Respond only with 'Yes' if the image evidence is necessary or 'No' if it is not.";

constexpr std::string_view kSummarizerInstruction =
    "Your task is to read the following document carefully and summarize it into a single, coherent paragraph. "
    "Focus on capturing the main ideas and essential details without adding new information or personal "
    "opinions.\n"
    "Document:\n";

constexpr std::string_view kRefinementInstruction =
    "You are a fact-checking assistant. Your task is to determine whether the given claim is complete in "
    "intention and clearly stated. If the claim is vague or incomplete (e.g., a keyword like \"Google "
    "PhoneBook\"), refine it into a clear and complete sentence using the provided evidence, justification, and "
    "label. If the claim is already clear and complete, return \"not needed\".\n\n";

constexpr std::string_view kRefinementReturn = "Return ONLY the refined claim or \"not needed\".";

// Accumulates text and splices image parts in place.
class MessageBuilder {
 public:
  MessageBuilder& text(std::string_view s) {
    pending_ += s;
    return *this;
  }

  MessageBuilder& image(const std::filesystem::path& path) {
    flush();
    msg_.parts.push_back(ImagePart{path});
    return *this;
  }

  ChatMessage build() {
    flush();
    return std::move(msg_);
  }

 private:
  void flush() {
    if (!pending_.empty()) msg_.parts.push_back(TextPart{std::move(pending_)});
    pending_.clear();
  }

  ChatMessage msg_;
  std::string pending_;
};

void require_image(const std::filesystem::path& image) {
  if (image.empty()) throw MissingImage("no image evidence supplied");
  if (!std::filesystem::is_regular_file(image)) throw MissingImage("image not readable: " + image.string());
}

void evidence_fields(MessageBuilder& b, std::string_view claim, const std::optional<std::filesystem::path>& image,
                     std::string_view text_evidence) {
  b.text("Claim: ").text(claim).text("\n");
  if (image) b.text("Image Evidence: ").image(*image).text("\n");
  b.text("Text Evidence: ").text(text_evidence);
}

}  // namespace

std::string join_text_evidence(std::span<const std::string> sentences) {
  if (sentences.size() == 1) return sentences.front();
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += "\n";
    out += "• ";
    out += s;
  }
  return out;
}

ChatMessage render_analyzer_prompt(std::string_view claim, const std::filesystem::path& image,
                                   std::string_view text_evidence) {
  require_image(image);
  MessageBuilder b;
  b.text(kAnalyzerInstruction).text(kAnalyzerRespond).text("\n");
  evidence_fields(b, claim, image, text_evidence);
  return b.build();
}

ChatMessage render_verifier_prompt(std::string_view claim, const std::optional<std::filesystem::path>& image,
                                   const std::optional<Assessment>& analysis, std::string_view text_evidence) {
  MessageBuilder b;
  b.text(kVerifierInstruction).text("Claim: ").text(claim).text("\n");
  if (image) b.text("Image Evidence: ").image(*image).text("\n");
  if (analysis) b.text("Image Analysis: ").text(analysis->text).text("\n");
  b.text("Text Evidence: ").text(text_evidence);
  return b.build();
}

ChatMessage render_necessity_label_prompt(std::string_view claim, const std::filesystem::path& image,
                                          std::string_view text_evidence) {
  require_image(image);
  MessageBuilder b;
  b.text(kNecessityInstruction).text("\n");
  evidence_fields(b, claim, image, text_evidence);
  b.text("\n\n").text(kNecessityRespond);
  return b.build();
}

ChatMessage render_unified_prompt(std::string_view claim, const std::optional<std::filesystem::path>& image,
                                  std::string_view text_evidence) {
  MessageBuilder b;
  b.text(kAnalyzerInstruction).text(kVerifierInstruction);
  evidence_fields(b, claim, image, text_evidence);
  return b.build();
}

ChatMessage render_summarizer_prompt(std::string_view document) {
  if (std::all_of(document.begin(), document.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    throw EmptyDocument();
  }
  MessageBuilder b;
  b.text(kSummarizerInstruction).text(document);
  return b.build();
}

ChatMessage render_refinement_prompt(std::string_view claim, std::string_view evidence,
                                     std::string_view justification, std::string_view label) {
  MessageBuilder b;
  b.text(kRefinementInstruction)
      .text("Claim: ").text(claim).text("\n")
      .text("Evidence: ").text(evidence).text("\n")
      .text("Justification: ").text(justification).text("\n")
      .text("Label: ").text(label).text("\n\n")
      .text(kRefinementReturn);
  return b.build();
}

}  // namespace mmfc
