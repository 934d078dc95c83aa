#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmfc/dates.hpp"

namespace mmfc {

enum class VerdictLabel { kSupported, kRefuted, kNei };

inline constexpr VerdictLabel kAllVerdicts[] = {VerdictLabel::kSupported, VerdictLabel::kRefuted,
                                                VerdictLabel::kNei};

// "Supported", "Refuted", "NEI".
std::string_view to_string(VerdictLabel label);
// Exact canonical spelling only; use map_external_label for raw dataset labels.
std::optional<VerdictLabel> verdict_from_string(std::string_view text);

enum class DatasetFormat { kMocheg, kFinfact, kWebfc };

std::string_view to_string(DatasetFormat format);
// Throws ConfigError for unknown tags.
DatasetFormat parse_format_tag(std::string_view tag);

enum class Modality { kText, kImage };

std::string_view to_string(Modality modality);
// Throws ConfigError for anything but "text"/"image".
Modality parse_modality(std::string_view text);

struct EvidenceItem {
  std::string evidence_id;
  Modality modality = Modality::kText;
  // Sentence for text items; image path relative to the dataset root for
  // image items. Image bytes never live in records.
  std::string payload;
  std::optional<std::string> provenance_url;
  std::optional<Date> publish_date;

  bool operator==(const EvidenceItem&) const = default;
};

struct ClaimRecord {
  std::string claim_id;
  std::string text;
  VerdictLabel gold_verdict = VerdictLabel::kNei;
  std::vector<std::string> gold_text_evidence;
  std::vector<std::string> gold_image_evidence;
  std::string source;
  std::optional<Date> factcheck_date;

  bool operator==(const ClaimRecord&) const = default;
};

// The pool K of candidate evidence. Ids are globally unique across
// modalities; insertion order is preserved for serialization.
class KnowledgeSource {
 public:
  // Throws std::invalid_argument on a duplicate id; loaders rethrow it as
  // SchemaViolation with line context.
  void add(EvidenceItem item);

  const EvidenceItem* find(std::string_view evidence_id) const;
  bool contains(std::string_view evidence_id) const { return find(evidence_id) != nullptr; }

  const std::vector<EvidenceItem>& items() const noexcept { return items_; }
  std::vector<EvidenceItem> items_of(Modality modality) const;
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t count(Modality modality) const;
  bool empty() const noexcept { return items_.empty(); }

  bool operator==(const KnowledgeSource& other) const { return items_ == other.items_; }

 private:
  std::vector<EvidenceItem> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct LoadReport {
  std::size_t claims = 0;
  std::size_t text_items = 0;
  std::size_t image_items = 0;
  std::vector<std::string> warnings;
};

struct Dataset {
  std::vector<ClaimRecord> claims;
  KnowledgeSource knowledge;
  // Directory image payload paths are relative to.
  std::filesystem::path root;
  DatasetFormat format = DatasetFormat::kMocheg;
  LoadReport report;

  const ClaimRecord* find_claim(std::string_view claim_id) const;
  std::filesystem::path resolve_image(const EvidenceItem& item) const { return root / item.payload; }
};

inline constexpr std::string_view kClaimsFile = "claims.jsonl";
inline constexpr std::string_view kEvidenceFile = "evidence.jsonl";
inline constexpr std::string_view kAnnotationsFile = "annotations.jsonl";

// Reads <dir>/claims.jsonl and <dir>/evidence.jsonl, validates every record
// and every cross-reference. Errors: MissingFile, SchemaViolation,
// DanglingEvidenceRef, UnknownLabel.
Dataset load_dataset(const std::filesystem::path& dir, DatasetFormat format);

// Canonical records, in stored order.
nlohmann::json claim_to_json(const ClaimRecord& claim);
nlohmann::json evidence_to_json(const EvidenceItem& item);

// Writes claims.jsonl and evidence.jsonl under `dir`. Image files are not
// copied; callers own image placement.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// finfact: True -> Supported, False -> Refuted (canonical names also pass).
// mocheg/webfc: canonical names after case normalization; "not enough info"
// spellings map to NEI. Throws UnknownLabel.
VerdictLabel map_external_label(std::string_view raw, DatasetFormat format);

// A FIN-FACT record before sanitization: the claim plus the image URLs it
// references. Claims with no image URLs are text-only.
struct FinfactClaim {
  ClaimRecord record;
  std::vector<std::string> image_urls;

  bool multimodal() const noexcept { return !image_urls.empty(); }
  bool operator==(const FinfactClaim&) const = default;
};

// URL -> fetched?; URLs absent from the report count as failed.
using DownloadReport = std::map<std::string, bool>;

// Keeps text-only claims, and multimodal claims with at least one fetched
// image; retained claims keep only their fetched URLs. Idempotent.
std::vector<FinfactClaim> sanitize_finfact(const std::vector<FinfactClaim>& raw, const DownloadReport& report);

enum class NecessityLabel { kNecessary, kUnnecessary };
enum class ClaimCategory { kVisualSuccessful, kVisualUnsuccessful };

std::string_view to_string(NecessityLabel label);
std::string_view to_string(ClaimCategory category);

struct AnnotationRecord {
  std::string claim_id;
  std::string annotator_id;
  NecessityLabel necessity_label = NecessityLabel::kNecessary;
  std::optional<ClaimCategory> claim_category;

  bool operator==(const AnnotationRecord&) const = default;
};

// Errors: MissingFile, SchemaViolation, DuplicateAnnotation.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

}  // namespace mmfc
