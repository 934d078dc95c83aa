#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmfc {

// Every error maps onto one process exit code; the CLI relies on this.
enum class ErrorCategory {
  kData,        // exit 2
  kBackend,     // exit 3
  kEvaluation,  // exit 4
  kUsage,       // exit 64
};

int exit_code_for(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message);

  ErrorCategory category() const noexcept { return category_; }
  // Stable short name such as "SchemaViolation"; written into reports.
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

// ---- corpus -------------------------------------------------------------

class MissingFile : public Error {
 public:
  explicit MissingFile(const std::string& path);
};

class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string file, std::size_t line, std::string field, const std::string& detail);
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class DanglingEvidenceRef : public Error {
 public:
  DanglingEvidenceRef(std::string claim_id, std::string evidence_id);
  const std::string& claim_id() const noexcept { return claim_id_; }
  const std::string& evidence_id() const noexcept { return evidence_id_; }

 private:
  std::string claim_id_;
  std::string evidence_id_;
};

class UnknownLabel : public Error {
 public:
  explicit UnknownLabel(const std::string& raw);
};

class DuplicateAnnotation : public Error {
 public:
  DuplicateAnnotation(const std::string& claim_id, const std::string& annotator_id);
};

class IoFailure : public Error {
 public:
  explicit IoFailure(const std::string& what);
};

// ---- embed_index --------------------------------------------------------

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual);
};

class ZeroVector : public Error {
 public:
  ZeroVector();
};

class EmptyIndex : public Error {
 public:
  EmptyIndex();
};

class DimensionDrift : public Error {
 public:
  DimensionDrift(const std::string& item_id, std::size_t expected, std::size_t actual);
};

// ---- backends -----------------------------------------------------------

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what);

 protected:
  BackendError(std::string kind, const std::string& what);
};

// Raised by build_index when the embedding backend fails on a specific item.
class ItemBackendError : public BackendError {
 public:
  ItemBackendError(std::string item_id, const std::string& cause);
  const std::string& item_id() const noexcept { return item_id_; }

 private:
  std::string item_id_;
};

class BackendTimeout : public BackendError {
 public:
  explicit BackendTimeout(const std::string& what);
};

// Connection-level failure (refused, reset, DNS); retried like a timeout.
class TransportError : public BackendError {
 public:
  explicit TransportError(const std::string& what);
};

class BackendHttpError : public BackendError {
 public:
  BackendHttpError(int status, const std::string& body);
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class TranscriptMiss : public BackendError {
 public:
  explicit TranscriptMiss(const std::string& digest);
};

class SearchBackendError : public BackendError {
 public:
  explicit SearchBackendError(const std::string& what);
};

class QuotaExceeded : public BackendError {
 public:
  explicit QuotaExceeded(const std::string& what);
};

// ---- agents -------------------------------------------------------------

class MissingImage : public Error {
 public:
  explicit MissingImage(const std::string& what);
};

class EmptyDocument : public Error {
 public:
  EmptyDocument();
};

class UnparseableVerdict : public Error {
 public:
  explicit UnparseableVerdict(const std::string& raw);
};

class UnparseableNecessity : public Error {
 public:
  explicit UnparseableNecessity(const std::string& raw);
};

// ---- pipeline -----------------------------------------------------------

class MissingIndex : public Error {
 public:
  explicit MissingIndex(const std::string& what);
};

class EmbeddingFailure : public Error {
 public:
  explicit EmbeddingFailure(const std::string& what);
};

// ---- evalkit ------------------------------------------------------------

class MissingGold : public Error {
 public:
  explicit MissingGold(const std::string& claim_id);
};

class ClaimSetMismatch : public Error {
 public:
  explicit ClaimSetMismatch(const std::string& what);
};

class EmptySample : public Error {
 public:
  EmptySample();
};

class DegenerateTable : public Error {
 public:
  DegenerateTable();
};

class InsufficientData : public Error {
 public:
  explicit InsufficientData(const std::string& what);
};

// ---- configuration / usage ----------------------------------------------

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what);
};

}  // namespace mmfc
