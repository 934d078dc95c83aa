#include "mmfc/errors.hpp"

#include <utility>

namespace mmfc {

int exit_code_for(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kData:
      return 2;
    case ErrorCategory::kBackend:
      return 3;
    case ErrorCategory::kEvaluation:
      return 4;
    case ErrorCategory::kUsage:
      return 64;
  }
  return 1;
}

Error::Error(ErrorCategory category, std::string kind, const std::string& message)
    : std::runtime_error(kind + ": " + message), category_(category), kind_(std::move(kind)) {}

MissingFile::MissingFile(const std::string& path)
    : Error(ErrorCategory::kData, "MissingFile", path) {}

SchemaViolation::SchemaViolation(std::string file, std::size_t line, std::string field,
                                 const std::string& detail)
    : Error(ErrorCategory::kData, "SchemaViolation",
            file + ":" + std::to_string(line) + ": field '" + field + "': " + detail),
      line_(line),
      field_(std::move(field)) {}

DanglingEvidenceRef::DanglingEvidenceRef(std::string claim_id, std::string evidence_id)
    : Error(ErrorCategory::kData, "DanglingEvidenceRef",
            "claim '" + claim_id + "' references unknown evidence '" + evidence_id + "'"),
      claim_id_(std::move(claim_id)),
      evidence_id_(std::move(evidence_id)) {}

UnknownLabel::UnknownLabel(const std::string& raw)
    : Error(ErrorCategory::kData, "UnknownLabel", "'" + raw + "'") {}

DuplicateAnnotation::DuplicateAnnotation(const std::string& claim_id, const std::string& annotator_id)
    : Error(ErrorCategory::kData, "DuplicateAnnotation",
            "claim '" + claim_id + "' annotated twice by '" + annotator_id + "'") {}

IoFailure::IoFailure(const std::string& what) : Error(ErrorCategory::kData, "IOFailure", what) {}

DimensionMismatch::DimensionMismatch(std::size_t expected, std::size_t actual)
    : Error(ErrorCategory::kData, "DimensionMismatch",
            "expected dim " + std::to_string(expected) + ", got " + std::to_string(actual)) {}

ZeroVector::ZeroVector() : Error(ErrorCategory::kData, "ZeroVector", "vector has zero norm") {}

EmptyIndex::EmptyIndex() : Error(ErrorCategory::kData, "EmptyIndex", "index has no entries") {}

DimensionDrift::DimensionDrift(const std::string& item_id, std::size_t expected, std::size_t actual)
    : Error(ErrorCategory::kBackend, "DimensionDrift",
            "item '" + item_id + "' embedded with dim " + std::to_string(actual) + ", index dim is " +
                std::to_string(expected)) {}

BackendError::BackendError(const std::string& what) : BackendError("BackendError", what) {}

BackendError::BackendError(std::string kind, const std::string& what)
    : Error(ErrorCategory::kBackend, std::move(kind), what) {}

ItemBackendError::ItemBackendError(std::string item_id, const std::string& cause)
    : BackendError("BackendError", "item '" + item_id + "': " + cause), item_id_(std::move(item_id)) {}

BackendTimeout::BackendTimeout(const std::string& what) : BackendError("BackendTimeout", what) {}

TransportError::TransportError(const std::string& what) : BackendError("TransportError", what) {}

BackendHttpError::BackendHttpError(int status, const std::string& body)
    : BackendError("BackendHTTPError", "status " + std::to_string(status) + ": " + body.substr(0, 512)),
      status_(status) {}

TranscriptMiss::TranscriptMiss(const std::string& digest)
    : BackendError("TranscriptMiss", "no recorded response for request digest " + digest) {}

SearchBackendError::SearchBackendError(const std::string& what)
    : BackendError("SearchBackendError", what) {}

QuotaExceeded::QuotaExceeded(const std::string& what) : BackendError("QuotaExceeded", what) {}

MissingImage::MissingImage(const std::string& what) : Error(ErrorCategory::kData, "MissingImage", what) {}

EmptyDocument::EmptyDocument()
    : Error(ErrorCategory::kData, "EmptyDocument", "document is empty or whitespace") {}

UnparseableVerdict::UnparseableVerdict(const std::string& raw)
    : Error(ErrorCategory::kData, "UnparseableVerdict", "no verdict label in '" + raw.substr(0, 200) + "'") {}

UnparseableNecessity::UnparseableNecessity(const std::string& raw)
    : Error(ErrorCategory::kData, "UnparseableNecessity", "no yes/no in '" + raw.substr(0, 200) + "'") {}

MissingIndex::MissingIndex(const std::string& what) : Error(ErrorCategory::kBackend, "MissingIndex", what) {}

EmbeddingFailure::EmbeddingFailure(const std::string& what)
    : Error(ErrorCategory::kBackend, "EmbeddingFailure", what) {}

MissingGold::MissingGold(const std::string& claim_id)
    : Error(ErrorCategory::kEvaluation, "MissingGold", "no gold verdict for claim '" + claim_id + "'") {}

ClaimSetMismatch::ClaimSetMismatch(const std::string& what)
    : Error(ErrorCategory::kEvaluation, "ClaimSetMismatch", what) {}

EmptySample::EmptySample() : Error(ErrorCategory::kEvaluation, "EmptySample", "sample is empty") {}

DegenerateTable::DegenerateTable()
    : Error(ErrorCategory::kEvaluation, "DegenerateTable", "contingency table has a zero marginal") {}

InsufficientData::InsufficientData(const std::string& what)
    : Error(ErrorCategory::kEvaluation, "InsufficientData", what) {}

ConfigError::ConfigError(const std::string& what) : Error(ErrorCategory::kUsage, "ConfigError", what) {}

}  // namespace mmfc
