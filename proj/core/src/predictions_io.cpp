#include <filesystem>
#include <string>
#include <vector>

#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"
#include "mmfc/pipeline.hpp"

namespace mmfc {

namespace {

std::optional<NecessityLabel> necessity_from_string(std::string_view s) {
  if (s == to_string(NecessityLabel::kNecessary)) return NecessityLabel::kNecessary;
  if (s == to_string(NecessityLabel::kUnnecessary)) return NecessityLabel::kUnnecessary;
  return std::nullopt;
}

}  // namespace

nlohmann::json prediction_to_json(const Prediction& p) {
  nlohmann::json j{{"claim_id", p.claim_id},
                   {"strategy", p.strategy},
                   {"config", p.config},
                   {"verdict", to_string(p.verdict)},
                   {"raw_text", p.raw_text},
                   {"parse_status", p.parse_status == ParseStatus::kOk ? "ok" : "fallback"},
                   {"image_passed", p.image_passed},
                   {"timing", {{"verifier_ms", p.timing.verifier_ms}}}};
  if (p.timing.analyzer_ms) j["timing"]["analyzer_ms"] = *p.timing.analyzer_ms;
  if (p.assessment) {
    j["assessment"] = {{"text", p.assessment->text}};
    if (p.assessment->necessity) j["assessment"]["necessity"] = to_string(*p.assessment->necessity);
  }
  if (p.image_similarity) j["image_similarity"] = *p.image_similarity;
  if (p.error) j["error"] = *p.error;
  return j;
}

Prediction prediction_from_json(const nlohmann::json& j) {
  Prediction p;
  p.claim_id = j.at("claim_id").get<std::string>();
  p.strategy = j.at("strategy").get<std::string>();
  p.config = j.at("config").get<std::string>();
  const auto verdict = j.at("verdict").get<std::string>();
  const auto label = verdict_from_string(verdict);
  if (!label) throw std::invalid_argument("unknown verdict '" + verdict + "'");
  p.verdict = *label;
  p.raw_text = j.value("raw_text", "");
  const auto status = j.value("parse_status", "ok");
  if (status == "ok") {
    p.parse_status = ParseStatus::kOk;
  } else if (status == "fallback") {
    p.parse_status = ParseStatus::kFallback;
  } else {
    throw std::invalid_argument("unknown parse_status '" + status + "'");
  }
  p.image_passed = j.value("image_passed", false);
  if (auto t = j.find("timing"); t != j.end()) {
    p.timing.verifier_ms = t->value("verifier_ms", 0.0);
    if (auto a = t->find("analyzer_ms"); a != t->end()) p.timing.analyzer_ms = a->get<double>();
  }
  if (auto a = j.find("assessment"); a != j.end() && !a->is_null()) {
    Assessment as;
    as.text = a->value("text", "");
    if (auto n = a->find("necessity"); n != a->end()) as.necessity = necessity_from_string(n->get<std::string>());
    p.assessment = std::move(as);
  }
  if (auto s = j.find("image_similarity"); s != j.end() && !s->is_null()) p.image_similarity = s->get<double>();
  if (auto e = j.find("error"); e != j.end() && !e->is_null()) p.error = e->get<std::string>();
  return p;
}

void save_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
  std::vector<nlohmann::json> lines;
  lines.reserve(predictions.size());
  for (const auto& p : predictions) lines.push_back(prediction_to_json(p));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, to_jsonl(lines));
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  read_jsonl(path, [&](const nlohmann::json& rec, std::size_t line) {
    try {
      out.push_back(prediction_from_json(rec));
    } catch (const std::exception& e) {
      throw SchemaViolation(path.filename().string(), line, "<prediction>", e.what());
    }
  });
  return out;
}

}  // namespace mmfc
