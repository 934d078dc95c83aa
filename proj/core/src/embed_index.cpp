#include "mmfc/embed_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <utility>

#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

double l2(std::span<const float> a) { return std::sqrt(dot(a, a)); }

constexpr char kMagic[8] = {'M', 'M', 'F', 'C', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }

  template <typename T>
  void le(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }

  void f32(float value) { le(std::bit_cast<std::uint32_t>(value)); }

  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw std::runtime_error("index file truncated");
  }

  template <typename T>
  T le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }

  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }

  std::string str() {
    const auto n = le<std::uint32_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("embedding vector must have dim >= 1");
  for (float v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("embedding vector has a non-finite entry");
  }
}

double EmbeddingVector::norm() const noexcept { return l2(values_); }

EmbeddingVector EmbeddingVector::scaled(float factor) const {
  std::vector<float> out(values_);
  for (float& v : out) v *= factor;
  return EmbeddingVector(std::move(out));
}

// dot / sqrt(|a|^2 |b|^2) rather than dot / (|a| |b|): for a == b the
// division is then exactly 1.0, which the threshold filter relies on.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  const double na2 = dot(a.values(), a.values());
  const double nb2 = dot(b.values(), b.values());
  if (na2 == 0.0 || nb2 == 0.0) throw ZeroVector();
  return dot(a.values(), b.values()) / std::sqrt(na2 * nb2);
}

VectorIndex::VectorIndex(Modality modality, std::string embedder_tag, std::size_t dim)
    : modality_(modality), embedder_tag_(std::move(embedder_tag)), dim_(dim) {
  if (dim_ == 0) throw std::invalid_argument("index dim must be positive");
}

void VectorIndex::add(std::string evidence_id, EmbeddingVector vector) {
  if (vector.dim() != dim_) throw DimensionMismatch(dim_, vector.dim());
  const double n2 = dot(vector.values(), vector.values());
  if (n2 == 0.0) throw ZeroVector();
  if (by_id_.contains(evidence_id)) throw std::invalid_argument("duplicate index id '" + evidence_id + "'");
  by_id_.emplace(evidence_id, entries_.size());
  entries_.push_back({std::move(evidence_id), std::move(vector)});
  sq_norms_.push_back(n2);
}

const EmbeddingVector* VectorIndex::find(std::string_view evidence_id) const {
  auto it = by_id_.find(std::string(evidence_id));
  return it == by_id_.end() ? nullptr : &entries_[it->second].vector;
}

std::string VectorIndex::serialize() const {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.le(kFormatVersion);
  w.le(static_cast<std::uint32_t>(dim_));
  w.le(static_cast<std::uint8_t>(modality_ == Modality::kText ? 0 : 1));
  w.str(embedder_tag_);
  w.le(static_cast<std::uint64_t>(entries_.size()));
  for (const auto& e : entries_) {
    w.str(e.evidence_id);
    for (float v : e.vector.values()) w.f32(v);
  }
  return w.take();
}

VectorIndex VectorIndex::deserialize(std::string_view bytes) {
  try {
    Reader r(bytes);
    if (std::memcmp(r.raw(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
      throw std::runtime_error("bad magic");
    }
    const auto version = r.le<std::uint32_t>();
    if (version != kFormatVersion) throw std::runtime_error("unsupported version " + std::to_string(version));
    const auto dim = r.le<std::uint32_t>();
    const auto modality_byte = r.le<std::uint8_t>();
    if (modality_byte > 1) throw std::runtime_error("bad modality byte");
    VectorIndex index(modality_byte == 0 ? Modality::kText : Modality::kImage, r.str(), dim);
    const auto count = r.le<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
      auto id = r.str();
      std::vector<float> values(dim);
      for (auto& v : values) v = r.f32();
      index.add(std::move(id), EmbeddingVector(std::move(values)));
    }
    if (!r.done()) throw std::runtime_error("trailing bytes");
    return index;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaViolation("<index>", 0, "<binary>", e.what());
  }
}

void VectorIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

VectorIndex VectorIndex::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::vector<RetrievalHit> top_k(const EmbeddingVector& query, const VectorIndex& index, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (index.empty()) throw EmptyIndex();
  if (query.dim() != index.dim()) throw DimensionMismatch(index.dim(), query.dim());
  const double q2 = dot(query.values(), query.values());
  if (q2 == 0.0) throw ZeroVector();

  struct Scored {
    double score;
    std::size_t pos;
  };
  std::vector<Scored> scored(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    scored[i] = {dot(query.values(), index.entries_[i].vector.values()) / std::sqrt(q2 * index.sq_norms_[i]), i};
  }
  const auto before = [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return index.entries_[a.pos].evidence_id < index.entries_[b.pos].evidence_id;
  };
  const auto take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), before);

  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    hits.push_back({index.entries_[scored[r].pos].evidence_id, scored[r].score, r + 1});
  }
  return hits;
}

FilterDecision threshold_filter(const EmbeddingVector& claim_vec, const EmbeddingVector& image_vec, double tau) {
  return cosine_similarity(claim_vec, image_vec) >= tau ? FilterDecision::kKeep : FilterDecision::kDrop;
}

VectorIndex build_index(std::span<const EvidenceItem> items, EmbeddingBackend& backend,
                        const BuildIndexOptions& options) {
  if (items.empty()) throw std::invalid_argument("build_index needs at least one item");
  const Modality modality = items.front().modality;
  for (const auto& item : items) {
    if (item.modality != modality) throw std::invalid_argument("build_index items must share one modality");
  }
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  const auto input_of = [&](const EvidenceItem& item) {
    if (modality == Modality::kText || options.image_root.empty()) return item.payload;
    return (options.image_root / item.payload).string();
  };
  const auto embed_one = [&](const EvidenceItem& item) {
    std::vector<std::string> one{input_of(item)};
    try {
      auto v = backend.embed(modality, one);
      if (v.size() != 1) throw BackendError("backend returned " + std::to_string(v.size()) + " vectors for 1 input");
      return std::move(v.front());
    } catch (const ItemBackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw ItemBackendError(item.evidence_id, e.what());
    }
  };

  std::optional<VectorIndex> index;
  for (std::size_t start = 0; start < items.size(); start += batch) {
    const auto chunk = items.subspan(start, std::min(batch, items.size() - start));
    std::vector<std::string> inputs;
    inputs.reserve(chunk.size());
    for (const auto& item : chunk) inputs.push_back(input_of(item));

    std::vector<EmbeddingVector> vectors;
    try {
      vectors = backend.embed(modality, inputs);
      if (vectors.size() != chunk.size()) throw BackendError("vector count mismatch");
    } catch (const std::exception&) {
      // Re-embed one at a time so the error names the offending item.
      vectors.clear();
      for (const auto& item : chunk) vectors.push_back(embed_one(item));
    }

    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (!index) index.emplace(modality, backend.tag(), vectors[i].dim());
      if (vectors[i].dim() != index->dim()) {
        throw DimensionDrift(chunk[i].evidence_id, index->dim(), vectors[i].dim());
      }
      try {
        index->add(chunk[i].evidence_id, std::move(vectors[i]));
      } catch (const ZeroVector&) {
        throw ItemBackendError(chunk[i].evidence_id, "backend returned a zero vector");
      }
    }
  }
  return std::move(*index);
}

}  // namespace mmfc
