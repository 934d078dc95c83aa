#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "mmfc/corpus.hpp"

namespace mmfc {

// Fixed-length vector of finite floats.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Throws std::invalid_argument for an empty or non-finite vector.
  explicit EmbeddingVector(std::vector<float> values);

  std::span<const float> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  double norm() const noexcept;

  // Same direction, every component multiplied by `factor`.
  EmbeddingVector scaled(float factor) const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<float> values_;
};

// dot(a,b) / (|a| |b|), accumulated in double; exactly 1.0 for a == b. Errors: DimensionMismatch,
// ZeroVector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct RetrievalHit {
  std::string evidence_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

struct IndexEntry {
  std::string evidence_id;
  EmbeddingVector vector;
};

// Immutable after construction in practice: build it, save it, then share it
// read-only across threads.
class VectorIndex {
 public:
  VectorIndex(Modality modality, std::string embedder_tag, std::size_t dim);

  // Errors: DimensionMismatch, ZeroVector, std::invalid_argument on a
  // duplicate id.
  void add(std::string evidence_id, EmbeddingVector vector);

  Modality modality() const noexcept { return modality_; }
  const std::string& embedder_tag() const noexcept { return embedder_tag_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  const EmbeddingVector* find(std::string_view evidence_id) const;

  // Binary layout, little-endian throughout:
  //   magic "MMFCIDX\0" | u32 version=1 | u32 dim | u8 modality (0 text, 1 image)
  //   | u32 tag_len | tag bytes | u64 count
  //   | count x (u32 id_len | id bytes | dim x f32)
  std::string serialize() const;
  static VectorIndex deserialize(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

 private:
  Modality modality_;
  std::string embedder_tag_;
  std::size_t dim_;
  std::vector<IndexEntry> entries_;
  std::vector<double> sq_norms_;
  std::unordered_map<std::string, std::size_t> by_id_;

  friend std::vector<RetrievalHit> top_k(const EmbeddingVector&, const VectorIndex&, std::size_t);
};

// The k highest-cosine entries (all entries if k exceeds the size), ties broken
// by ascending evidence_id. Errors: DimensionMismatch, EmptyIndex, ZeroVector,
// std::invalid_argument for k == 0.
std::vector<RetrievalHit> top_k(const EmbeddingVector& query, const VectorIndex& index, std::size_t k);

enum class FilterDecision { kKeep, kDrop };

// Keep iff cosine_similarity(claim, image) >= tau.
FilterDecision threshold_filter(const EmbeddingVector& claim_vec, const EmbeddingVector& image_vec, double tau);

// Pluggable embedding model. Inputs are sentences for Modality::kText and
// image file paths for Modality::kImage.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string tag() const = 0;
  // One vector per input, in order. Throws BackendError on failure.
  virtual std::vector<EmbeddingVector> embed(Modality modality, std::span<const std::string> inputs) = 0;
};

// File-backed stub. Each JSON line is {"modality","input","vector"}; an input
// without a line raises BackendError naming it.
class ScriptedEmbeddingBackend final : public EmbeddingBackend {
 public:
  ScriptedEmbeddingBackend(std::string tag, const std::filesystem::path& path);
  ScriptedEmbeddingBackend(std::string tag, std::vector<std::tuple<Modality, std::string, std::vector<float>>> rows);

  std::string tag() const override { return tag_; }
  std::vector<EmbeddingVector> embed(Modality modality, std::span<const std::string> inputs) override;

 private:
  std::string tag_;
  std::unordered_map<std::string, EmbeddingVector> table_;
};

struct HttpEmbeddingOptions {
  std::string base_url;  // POSTs to base_url verbatim
  std::string model_id;
  std::string auth_env_var;
  double timeout_s = 60.0;
};

// POST {"model","modality","inputs":[...]} -> {"vectors":[[f32,...],...]}.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(std::string tag, HttpEmbeddingOptions options);

  std::string tag() const override { return tag_; }
  std::vector<EmbeddingVector> embed(Modality modality, std::span<const std::string> inputs) override;

 private:
  std::string tag_;
  HttpEmbeddingOptions options_;
  std::string api_key_;
};

struct BuildIndexOptions {
  std::size_t batch_size = 32;
  // Image payloads are resolved against this directory before embedding.
  std::filesystem::path image_root;
};

// One entry per item, in input order. All items must share one modality.
// Errors: ItemBackendError naming the failing item, DimensionDrift,
// std::invalid_argument for an empty or mixed-modality item list.
VectorIndex build_index(std::span<const EvidenceItem> items, EmbeddingBackend& backend,
                        const BuildIndexOptions& options = {});

}  // namespace mmfc
