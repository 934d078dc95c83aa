#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmfc/chat.hpp"
#include "mmfc/corpus.hpp"

namespace mmfc {

// ---- HTML ---------------------------------------------------------------

// Article body text: script/style/navigation blocks removed, paragraphs of
// <article>/<main> (or the whole body when absent) joined by blank lines,
// entities decoded. Empty when nothing readable remains.
std::string extract_main_text(std::string_view html);

// First hit of: <meta> article:published_time / datePublished / date /
// pubdate, JSON-LD "datePublished", <time datetime>, then a visible dateline
// ("2024-03-05" or "March 5, 2024").
std::optional<Date> extract_publish_date(std::string_view html);

// ---- search and fetch ---------------------------------------------------

inline constexpr std::size_t kDocSlots = 10;

struct SearchQuery {
  std::string q;
  std::size_t num = kDocSlots;
  // Results published on or after this date are excluded by the engine.
  std::optional<Date> date_restrict;
};

struct RawHit {
  std::string url;
  std::optional<Date> date;  // engine metadata, when provided
  bool operator==(const RawHit&) const = default;
};

struct RawSearchResult {
  std::vector<RawHit> docs;
  std::optional<RawHit> image;
  bool operator==(const RawSearchResult&) const = default;
};

class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual std::string tag() const = 0;
  // Errors: SearchBackendError, QuotaExceeded.
  virtual RawSearchResult search(const SearchQuery& query) = 0;
};

// JSON lines of {q, docs: [{url, date?}], image?: {url, date?}} keyed by the
// query text. Unknown queries return no hits.
class ScriptedSearchBackend final : public SearchBackend {
 public:
  explicit ScriptedSearchBackend(const std::filesystem::path& path);
  explicit ScriptedSearchBackend(std::map<std::string, RawSearchResult> results);

  std::string tag() const override { return "scripted-search"; }
  RawSearchResult search(const SearchQuery& query) override;

 private:
  std::map<std::string, RawSearchResult> results_;
};

struct HttpSearchOptions {
  std::string endpoint;  // receives POST {q, num, date_restrict}
  std::string auth_env_var;
  double timeout_s = 30.0;
};

// Expects {results: [{url, date?}], image?: {url, date?}}. HTTP 429 raises
// QuotaExceeded.
class HttpSearchBackend final : public SearchBackend {
 public:
  explicit HttpSearchBackend(HttpSearchOptions options);

  std::string tag() const override { return "http-search:" + options_.endpoint; }
  RawSearchResult search(const SearchQuery& query) override;

 private:
  HttpSearchOptions options_;
  std::string api_key_;
};

struct FetchResult {
  bool ok = false;
  std::string body;
  std::string error;
};

class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual FetchResult fetch(const std::string& url) = 0;
};

// JSON lines of {url, body} or {url, file} (relative to the fixture file) or
// {url, error}. Unknown URLs fail.
class ScriptedFetcher final : public Fetcher {
 public:
  explicit ScriptedFetcher(const std::filesystem::path& path);
  explicit ScriptedFetcher(std::map<std::string, FetchResult> pages);

  FetchResult fetch(const std::string& url) override;

 private:
  std::map<std::string, FetchResult> pages_;
};

std::string url_host(std::string_view url);

// At most `max_per_host` concurrent fetches per host, and at least `delay`
// between successive fetch starts on the same host.
class HostLimiter {
 public:
  explicit HostLimiter(std::size_t max_per_host = 2, std::chrono::milliseconds delay = std::chrono::milliseconds{0});

  class Slot {
   public:
    Slot(HostLimiter& limiter, std::string host);
    ~Slot();
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    HostLimiter& limiter_;
    std::string host_;
  };

  std::size_t max_per_host() const noexcept { return max_per_host_; }
  // Highest concurrency observed on any host; for tests.
  std::size_t peak() const;

 private:
  struct HostState {
    std::size_t active = 0;
    std::chrono::steady_clock::time_point last_start{};
  };

  std::size_t max_per_host_;
  std::chrono::milliseconds delay_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, HostState> hosts_;
  std::size_t peak_ = 0;
};

// Wraps another fetcher with a HostLimiter.
class PoliteFetcher final : public Fetcher {
 public:
  PoliteFetcher(Fetcher& inner, HostLimiter& limiter) : inner_(inner), limiter_(limiter) {}
  FetchResult fetch(const std::string& url) override;

 private:
  Fetcher& inner_;
  HostLimiter& limiter_;
};

class HttpFetcher final : public Fetcher {
 public:
  explicit HttpFetcher(double timeout_s = 20.0) : timeout_s_(timeout_s) {}
  FetchResult fetch(const std::string& url) override;

 private:
  double timeout_s_;
};

// ---- bundles ------------------------------------------------------------

enum class WebHitStatus { kOk, kFetchFailed, kParseFailed, kUndated };

std::string_view to_string(WebHitStatus status);

struct WebHit {
  std::string url;
  std::optional<std::string> fetched_html;
  std::optional<std::string> extracted_text;  // set only when status is kOk
  std::optional<Date> publish_date;
  WebHitStatus parse_status = WebHitStatus::kFetchFailed;

  bool operator==(const WebHit&) const = default;
};

struct ImageHit {
  std::string url;
  std::optional<Date> publish_date;
  std::string bytes;
  bool operator==(const ImageHit&) const = default;
};

struct SearchBundle {
  std::string claim_id;
  std::vector<WebHit> doc_hits;
  std::optional<ImageHit> image_hit;
  Date cutoff_date;
};

// Up to 10 docs and one image, engine restricted to dates before the claim's
// factcheck_date. Throws std::invalid_argument when the claim has no date.
RawSearchResult search_claim(const ClaimRecord& claim, SearchBackend& search);

// Fetches and parses every raw hit. Dates come from engine metadata first,
// then the page itself.
SearchBundle fetch_bundle(const ClaimRecord& claim, const RawSearchResult& raw, Fetcher& fetcher);

struct TemporalFilterResult {
  std::vector<WebHit> retained;
  std::size_t undated_dropped = 0;
  std::size_t post_cutoff_dropped = 0;
};

// Retained iff publish_date is present and strictly before `cutoff`.
TemporalFilterResult apply_temporal_filter(const std::vector<WebHit>& hits, const Date& cutoff);

enum class Admission { kAdmit, kReject };

inline constexpr std::size_t kMaxFailedUrls = 8;

// Reject iff more than eight of the top-10 hits failed to fetch or parse.
Admission admit_claim(const SearchBundle& bundle);

struct DocSummary {
  std::string url;
  Date publish_date;
  std::string text;
  bool operator==(const DocSummary&) const = default;
};

struct SummaryResult {
  std::vector<DocSummary> summaries;
  std::size_t skipped_empty = 0;
  std::size_t failed = 0;
  std::vector<std::string> errors;
};

// One summarizer call per retained doc. Docs without extracted text are
// skipped; backend failures are counted and skipped.
SummaryResult summarize_documents(const std::vector<WebHit>& retained, ChatBackend& backend,
                                  const DecodingParams& params, const ChatCall& call = {});

struct WebfcClaim {
  ClaimRecord claim;
  std::vector<DocSummary> summaries;
  std::optional<ImageHit> image;
};

// Writes claims.jsonl, evidence.jsonl and images/ under `out_dir`. Evidence ids
// are <claim_id>-d<n> and <claim_id>-img. Throws IoFailure, or
// std::invalid_argument for an empty claim list.
void emit_webfc(const std::vector<WebfcClaim>& claims, const std::filesystem::path& out_dir);

struct SeedClaim {
  ClaimRecord claim;
  std::optional<std::string> problem;  // set when the seed record is unusable
};

// JSON lines of {claim_id, text, gold_verdict, factcheck_date}. Records with a
// missing or malformed date are returned with `problem` set rather than
// thrown. Errors: MissingFile, SchemaViolation, UnknownLabel.
std::vector<SeedClaim> load_seed(const std::filesystem::path& path);

struct WebfcBuildOptions {
  std::size_t parallelism = 4;
  std::size_t max_fetches_per_host = 2;
  std::chrono::milliseconds host_delay{0};
};

struct WebfcBackends {
  SearchBackend* search = nullptr;
  Fetcher* fetcher = nullptr;
  ChatBackend* summarizer = nullptr;
  DecodingParams summarizer_params;
  Transcript* transcript = nullptr;
  RequestLog* log = nullptr;
  RetryPolicy retry;
};

struct Rejection {
  std::string claim_id;
  std::string reason;
};

struct BuildReport {
  std::size_t admitted = 0;
  std::size_t rejected = 0;
  std::size_t undated_dropped = 0;
  std::size_t post_cutoff_dropped = 0;
  std::size_t failed_fetches = 0;
  std::size_t parse_failures = 0;
  std::size_t engine_restricted_queries = 0;
  std::size_t summaries = 0;
  std::size_t summaries_skipped_empty = 0;
  std::size_t summary_failures = 0;
  std::size_t images = 0;
  std::size_t images_dropped = 0;
  std::vector<Rejection> rejections;

  nlohmann::json to_json() const;
};

// End-to-end construction; writes the dataset plus build_report.json. Claims
// are processed in parallel and emitted in seed order.
BuildReport build_webfc(const std::vector<SeedClaim>& seeds, const WebfcBackends& backends,
                        const std::filesystem::path& out_dir, const WebfcBuildOptions& options = {});

}  // namespace mmfc
