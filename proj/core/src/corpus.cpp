#include "mmfc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>
#include <utility>

#include <spdlog/spdlog.h>

#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc {

namespace {

std::string normalize_label(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      out.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!out.empty() && out.back() != ' ') {
      out.push_back(' ');
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::optional<VerdictLabel> canonical_from_normalized(const std::string& norm) {
  if (norm == "supported") return VerdictLabel::kSupported;
  if (norm == "refuted") return VerdictLabel::kRefuted;
  if (norm == "nei" || norm == "not enough info" || norm == "not enough information") return VerdictLabel::kNei;
  return std::nullopt;
}

// Field accessors that report violations with file/line context.
class RecordReader {
 public:
  RecordReader(const nlohmann::json& record, std::string file, std::size_t line)
      : record_(record), file_(std::move(file)), line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& detail) const {
    throw SchemaViolation(file_, line_, field, detail);
  }

  std::string required_string(const char* field) const {
    auto it = record_.find(field);
    if (it == record_.end() || it->is_null()) fail(field, "missing");
    if (!it->is_string()) fail(field, "expected string");
    return it->get<std::string>();
  }

  std::optional<std::string> optional_string(const char* field) const {
    auto it = record_.find(field);
    if (it == record_.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(field, "expected string");
    return it->get<std::string>();
  }

  std::vector<std::string> string_list(const char* field, bool required) const {
    auto it = record_.find(field);
    if (it == record_.end() || it->is_null()) {
      if (required) fail(field, "missing");
      return {};
    }
    if (!it->is_array()) fail(field, "expected array of strings");
    std::vector<std::string> out;
    for (const auto& v : *it) {
      if (!v.is_string()) fail(field, "expected array of strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  }

  std::size_t line() const noexcept { return line_; }
  const std::string& file() const noexcept { return file_; }

 private:
  const nlohmann::json& record_;
  std::string file_;
  std::size_t line_;
};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::optional<Date> lenient_date(const RecordReader& r, const char* field, LoadReport& report) {
  auto raw = r.optional_string(field);
  if (!raw) return std::nullopt;
  auto date = parse_iso_date(*raw);
  if (!date) {
    report.warnings.push_back(r.file() + ":" + std::to_string(r.line()) + ": unparseable " + field + " '" +
                              *raw + "', treated as absent");
  }
  return date;
}

}  // namespace

std::string_view to_string(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::kSupported:
      return "Supported";
    case VerdictLabel::kRefuted:
      return "Refuted";
    case VerdictLabel::kNei:
      return "NEI";
  }
  return "NEI";
}

std::optional<VerdictLabel> verdict_from_string(std::string_view text) {
  if (text == "Supported") return VerdictLabel::kSupported;
  if (text == "Refuted") return VerdictLabel::kRefuted;
  if (text == "NEI") return VerdictLabel::kNei;
  return std::nullopt;
}

std::string_view to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kMocheg:
      return "mocheg";
    case DatasetFormat::kFinfact:
      return "finfact";
    case DatasetFormat::kWebfc:
      return "webfc";
  }
  return "mocheg";
}

DatasetFormat parse_format_tag(std::string_view tag) {
  if (tag == "mocheg") return DatasetFormat::kMocheg;
  if (tag == "finfact") return DatasetFormat::kFinfact;
  if (tag == "webfc") return DatasetFormat::kWebfc;
  throw ConfigError("unknown dataset format '" + std::string(tag) + "' (expected mocheg, finfact or webfc)");
}

std::string_view to_string(Modality modality) { return modality == Modality::kText ? "text" : "image"; }

Modality parse_modality(std::string_view text) {
  if (text == "text") return Modality::kText;
  if (text == "image") return Modality::kImage;
  throw ConfigError("unknown modality '" + std::string(text) + "' (expected text or image)");
}

void KnowledgeSource::add(EvidenceItem item) {
  if (by_id_.contains(item.evidence_id)) {
    throw std::invalid_argument("duplicate evidence id '" + item.evidence_id + "'");
  }
  by_id_.emplace(item.evidence_id, items_.size());
  items_.push_back(std::move(item));
}

const EvidenceItem* KnowledgeSource::find(std::string_view evidence_id) const {
  auto it = by_id_.find(std::string(evidence_id));
  return it == by_id_.end() ? nullptr : &items_[it->second];
}

std::vector<EvidenceItem> KnowledgeSource::items_of(Modality modality) const {
  std::vector<EvidenceItem> out;
  for (const auto& item : items_) {
    if (item.modality == modality) out.push_back(item);
  }
  return out;
}

std::size_t KnowledgeSource::count(Modality modality) const {
  return static_cast<std::size_t>(
      std::count_if(items_.begin(), items_.end(), [&](const auto& i) { return i.modality == modality; }));
}

const ClaimRecord* Dataset::find_claim(std::string_view claim_id) const {
  auto it = std::find_if(claims.begin(), claims.end(), [&](const auto& c) { return c.claim_id == claim_id; });
  return it == claims.end() ? nullptr : &*it;
}

VerdictLabel map_external_label(std::string_view raw, DatasetFormat format) {
  const auto norm = normalize_label(raw);
  if (format == DatasetFormat::kFinfact) {
    if (norm == "true") return VerdictLabel::kSupported;
    if (norm == "false") return VerdictLabel::kRefuted;
  }
  if (auto label = canonical_from_normalized(norm)) return *label;
  throw UnknownLabel(std::string(raw));
}

Dataset load_dataset(const std::filesystem::path& dir, DatasetFormat format) {
  if (!std::filesystem::is_directory(dir)) throw MissingFile(dir.string());
  const auto claims_path = dir / kClaimsFile;
  const auto evidence_path = dir / kEvidenceFile;
  if (!std::filesystem::exists(claims_path)) throw MissingFile(claims_path.string());
  if (!std::filesystem::exists(evidence_path)) throw MissingFile(evidence_path.string());

  Dataset ds;
  ds.root = dir;
  ds.format = format;

  read_jsonl(evidence_path, [&](const nlohmann::json& rec, std::size_t line) {
    RecordReader r(rec, std::string(kEvidenceFile), line);
    EvidenceItem item;
    item.evidence_id = r.required_string("evidence_id");
    if (item.evidence_id.empty()) r.fail("evidence_id", "empty");
    const auto modality = r.required_string("modality");
    if (modality == "text") {
      item.modality = Modality::kText;
      item.payload = r.required_string("text");
      if (is_blank(item.payload)) r.fail("text", "empty sentence");
    } else if (modality == "image") {
      item.modality = Modality::kImage;
      item.payload = r.required_string("image_path");
      if (item.payload.empty()) r.fail("image_path", "empty");
      if (!std::filesystem::is_regular_file(dir / item.payload)) r.fail("image_path", "file not readable");
    } else {
      r.fail("modality", "expected 'text' or 'image'");
    }
    item.provenance_url = r.optional_string("provenance_url");
    item.publish_date = lenient_date(r, "publish_date", ds.report);
    try {
      ds.knowledge.add(std::move(item));
    } catch (const std::invalid_argument& e) {
      r.fail("evidence_id", e.what());
    }
  });

  std::set<std::string> seen_claims;
  read_jsonl(claims_path, [&](const nlohmann::json& rec, std::size_t line) {
    RecordReader r(rec, std::string(kClaimsFile), line);
    ClaimRecord c;
    c.claim_id = r.required_string("claim_id");
    if (c.claim_id.empty()) r.fail("claim_id", "empty");
    if (!seen_claims.insert(c.claim_id).second) r.fail("claim_id", "duplicate claim id '" + c.claim_id + "'");
    c.text = r.required_string("text");
    if (is_blank(c.text)) r.fail("text", "empty claim");
    c.gold_verdict = map_external_label(r.required_string("gold_verdict"), format);
    c.gold_text_evidence = r.string_list("gold_text_evidence", false);
    c.gold_image_evidence = r.string_list("gold_image_evidence", false);
    c.source = r.optional_string("source").value_or(std::string(to_string(format)));
    if (format == DatasetFormat::kWebfc) {
      auto raw = r.optional_string("factcheck_date");
      if (!raw) r.fail("factcheck_date", "required for webfc records");
      c.factcheck_date = parse_iso_date(*raw);
      if (!c.factcheck_date) r.fail("factcheck_date", "not an ISO-8601 date: '" + *raw + "'");
    } else {
      c.factcheck_date = lenient_date(r, "factcheck_date", ds.report);
    }
    for (const auto* refs : {&c.gold_text_evidence, &c.gold_image_evidence}) {
      for (const auto& id : *refs) {
        if (!ds.knowledge.contains(id)) throw DanglingEvidenceRef(c.claim_id, id);
      }
    }
    ds.claims.push_back(std::move(c));
  });

  ds.report.claims = ds.claims.size();
  ds.report.text_items = ds.knowledge.count(Modality::kText);
  ds.report.image_items = ds.knowledge.count(Modality::kImage);
  for (const auto& w : ds.report.warnings) spdlog::warn("{}", w);
  return ds;
}

nlohmann::json claim_to_json(const ClaimRecord& claim) {
  nlohmann::json j{{"claim_id", claim.claim_id},
                   {"text", claim.text},
                   {"gold_verdict", std::string(to_string(claim.gold_verdict))},
                   {"gold_text_evidence", claim.gold_text_evidence},
                   {"gold_image_evidence", claim.gold_image_evidence},
                   {"source", claim.source}};
  if (claim.factcheck_date) j["factcheck_date"] = format_date(*claim.factcheck_date);
  return j;
}

nlohmann::json evidence_to_json(const EvidenceItem& item) {
  nlohmann::json j{{"evidence_id", item.evidence_id}, {"modality", std::string(to_string(item.modality))}};
  j[item.modality == Modality::kText ? "text" : "image_path"] = item.payload;
  if (item.provenance_url) j["provenance_url"] = *item.provenance_url;
  if (item.publish_date) j["publish_date"] = format_date(*item.publish_date);
  return j;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::vector<nlohmann::json> claims;
  claims.reserve(dataset.claims.size());
  for (const auto& c : dataset.claims) claims.push_back(claim_to_json(c));
  std::vector<nlohmann::json> evidence;
  evidence.reserve(dataset.knowledge.size());
  for (const auto& e : dataset.knowledge.items()) evidence.push_back(evidence_to_json(e));
  write_file_atomic(dir / kEvidenceFile, to_jsonl(evidence));
  write_file_atomic(dir / kClaimsFile, to_jsonl(claims));
}

std::vector<FinfactClaim> sanitize_finfact(const std::vector<FinfactClaim>& raw, const DownloadReport& report) {
  std::vector<FinfactClaim> out;
  for (const auto& claim : raw) {
    if (!claim.multimodal()) {
      out.push_back(claim);
      continue;
    }
    FinfactClaim kept = claim;
    kept.image_urls.clear();
    for (const auto& url : claim.image_urls) {
      auto it = report.find(url);
      if (it != report.end() && it->second) kept.image_urls.push_back(url);
    }
    if (!kept.image_urls.empty()) out.push_back(std::move(kept));
  }
  return out;
}

std::string_view to_string(NecessityLabel label) {
  return label == NecessityLabel::kNecessary ? "Necessary" : "Unnecessary";
}

std::string_view to_string(ClaimCategory category) {
  return category == ClaimCategory::kVisualSuccessful ? "VisualSuccessful" : "VisualUnsuccessful";
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  const auto file = path.filename().string();
  read_jsonl(path, [&](const nlohmann::json& rec, std::size_t line) {
    RecordReader r(rec, file, line);
    AnnotationRecord a;
    a.claim_id = r.required_string("claim_id");
    a.annotator_id = r.required_string("annotator_id");
    const auto necessity = normalize_label(r.required_string("necessity_label"));
    if (necessity == "necessary") {
      a.necessity_label = NecessityLabel::kNecessary;
    } else if (necessity == "unnecessary") {
      a.necessity_label = NecessityLabel::kUnnecessary;
    } else {
      r.fail("necessity_label", "expected Necessary or Unnecessary");
    }
    if (auto cat = r.optional_string("claim_category")) {
      const auto norm = normalize_label(*cat);
      if (norm == "visualsuccessful" || norm == "visual successful") {
        a.claim_category = ClaimCategory::kVisualSuccessful;
      } else if (norm == "visualunsuccessful" || norm == "visual unsuccessful") {
        a.claim_category = ClaimCategory::kVisualUnsuccessful;
      } else {
        r.fail("claim_category", "expected VisualSuccessful or VisualUnsuccessful");
      }
    }
    if (!seen.emplace(a.claim_id, a.annotator_id).second) throw DuplicateAnnotation(a.claim_id, a.annotator_id);
    out.push_back(std::move(a));
  });
  return out;
}

}  // namespace mmfc
