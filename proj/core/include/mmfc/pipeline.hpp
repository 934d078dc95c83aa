#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmfc/chat.hpp"
#include "mmfc/corpus.hpp"
#include "mmfc/embed_index.hpp"

namespace mmfc {

enum class EvidenceConfigKind { kTextOnly, kTextPlusGoldImage, kTextPlusRetrievedImage, kOracleEval };
enum class TextSource { kGold, kRetrieved };

struct EvidenceConfig {
  EvidenceConfigKind kind = EvidenceConfigKind::kTextOnly;
  TextSource text_source = TextSource::kGold;
  std::size_t k_text = 1;

  // "text_only", "gold_image", "retrieved_image" or "oracle", with a
  // ".retrieved_text" suffix when text evidence is retrieved.
  std::string id() const;

  // Accepts the ids above; also "1"/"2"/"3" for the materialized
  // configurations and "4" for oracle. Throws ConfigError.
  static EvidenceConfig parse(std::string_view text, TextSource text_source = TextSource::kGold,
                              std::size_t k_text = 1);

  bool operator==(const EvidenceConfig&) const = default;
};

enum class StrategyKind {
  kAmufc,
  kLabelOnly,
  kPrefilterAnalyzer,
  kPrefilterThreshold,
  kNoAnalyzer,
  kUnifiedVerifier,
  kVerifierCot,
  kVerifierOnly,
};

inline constexpr double kDefaultPrefilterTau = 0.42;

struct Strategy {
  StrategyKind kind = StrategyKind::kAmufc;
  double tau = kDefaultPrefilterTau;  // PrefilterThreshold only

  // "amufc", "label_only", "prefilter_analyzer", "prefilter_threshold",
  // "no_analyzer", "unified_verifier", "verifier_cot", "verifier_only".
  std::string id() const;

  // "prefilter_threshold:0.5" overrides tau. Throws ConfigError.
  static Strategy parse(std::string_view text, double default_tau = kDefaultPrefilterTau);

  // Issues Analyzer or necessity-label requests when an image is present.
  bool uses_analyzer() const noexcept;
  bool uses_image_embedder() const noexcept { return kind == StrategyKind::kPrefilterThreshold; }

  bool operator==(const Strategy&) const = default;
};

struct SelectionMeta {
  std::string config;
  TextSource text_source = TextSource::kGold;
  std::vector<RetrievalHit> text_hits;
  std::optional<RetrievalHit> image_hit;
  std::size_t gold_image_count = 0;
  // Gold-image configuration requested but the claim has no gold image.
  bool gold_image_missing = false;
};

struct EvidenceBundle {
  std::string claim_id;
  std::vector<std::string> text_evidence;
  std::optional<std::string> image_evidence_id;
  std::optional<std::filesystem::path> image;
  SelectionMeta selection_meta;
};

struct RetrievalResources {
  const VectorIndex* text_index = nullptr;
  const VectorIndex* image_index = nullptr;
  EmbeddingBackend* text_embedder = nullptr;
  // Embeds claim text and images into one space (CLIP-style).
  EmbeddingBackend* image_embedder = nullptr;
};

// Errors: MissingIndex, EmbeddingFailure, DanglingEvidenceRef.
EvidenceBundle assemble_evidence(const ClaimRecord& claim, const EvidenceConfig& config, const Dataset& dataset,
                                 const RetrievalResources& resources);

struct AgentRole {
  ChatBackend* backend = nullptr;
  DecodingParams params;
};

struct PipelineBackends {
  AgentRole analyzer;
  AgentRole verifier;
  RetrievalResources retrieval;
  Transcript* transcript = nullptr;
  RequestLog* log = nullptr;
  RetryPolicy retry;
};

inline constexpr std::string_view kAnalyzerRole = "analyzer";
inline constexpr std::string_view kVerifierRole = "verifier";

enum class ParseStatus { kOk, kFallback };

struct StageTiming {
  std::optional<double> analyzer_ms;
  double verifier_ms = 0.0;

  double total_ms() const noexcept { return analyzer_ms.value_or(0.0) + verifier_ms; }
  bool operator==(const StageTiming&) const = default;
};

struct Prediction {
  std::string claim_id;
  std::string strategy;
  std::string config;
  VerdictLabel verdict = VerdictLabel::kNei;
  std::string raw_text;
  std::optional<Assessment> assessment;
  ParseStatus parse_status = ParseStatus::kOk;
  StageTiming timing;
  bool image_passed = false;
  std::optional<double> image_similarity;
  std::optional<std::string> error;

  bool operator==(const Prediction&) const = default;
};

// Routes one claim through one strategy. Backend errors propagate; an
// unparseable verdict yields parse_status = kFallback with verdict NEI.
Prediction run_strategy(const ClaimRecord& claim, const EvidenceBundle& bundle, const Strategy& strategy,
                        const PipelineBackends& backends);

// Throws ConfigError naming the missing role when `backends` cannot serve a
// (config, strategy) pair, and MissingIndex for absent retrieval resources.
void validate_backends(std::span<const EvidenceConfig> configs, std::span<const Strategy> strategies,
                       const PipelineBackends& backends);

nlohmann::json prediction_to_json(const Prediction& prediction);
Prediction prediction_from_json(const nlohmann::json& j);

void save_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);
// Errors: MissingFile, SchemaViolation.
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

std::string predictions_filename(const EvidenceConfig& config, const Strategy& strategy);

struct RunOptions {
  std::size_t parallelism = 4;
  bool strict = false;
  std::filesystem::path out_dir;
};

struct RunSummary {
  std::string config;
  std::string strategy;
  std::string file;
  std::size_t n = 0;
  std::size_t n_fallback = 0;
  std::size_t n_errors = 0;
  double per_sample_ms = 0.0;
  std::optional<double> analyzer_ms;
  double verifier_ms = 0.0;
};

struct RunManifest {
  std::string dataset_digest;
  nlohmann::json config;
  std::map<std::string, std::string> backend_tags;
  std::vector<std::string> transcript_refs;
  std::string started;
  std::string finished;
  std::vector<RunSummary> runs;

  nlohmann::json to_json() const;
};

// Content hash of the canonical serialization of claims and evidence.
std::string dataset_digest(const Dataset& dataset);

// Runs every (config, strategy) pair over every claim and writes
// <out_dir>/predictions/<config>__<strategy>.jsonl in claim-id order plus
// <out_dir>/run_manifest.json. Per-claim failures are recorded in-line unless
// options.strict, in which case the first failure is rethrown.
RunManifest run_dataset(const Dataset& dataset, std::span<const EvidenceConfig> configs,
                        std::span<const Strategy> strategies, const PipelineBackends& backends,
                        const RunOptions& options, const nlohmann::json& config_echo = {});

}  // namespace mmfc
