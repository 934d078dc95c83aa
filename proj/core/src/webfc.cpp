#include "mmfc/webfc.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <thread>

#include <spdlog/spdlog.h>

#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"
#include "mmfc/prompts.hpp"

namespace mmfc {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string safe_name(std::string_view id) {
  std::string out(id);
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return out;
}

std::string image_extension(std::string_view url) {
  auto path = url.substr(0, url.find_first_of("?#"));
  const auto dot = path.rfind('.');
  if (dot == std::string_view::npos || path.find('/', dot) != std::string_view::npos) return ".jpg";
  std::string ext(path.substr(dot));
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto known : {".jpg", ".jpeg", ".png", ".gif", ".webp"}) {
    if (ext == known) return ext;
  }
  return ".jpg";
}

struct ClaimOutcome {
  std::optional<WebfcClaim> admitted;
  std::optional<std::string> rejection;
  BuildReport counts;
};

}  // namespace

std::string_view to_string(WebHitStatus status) {
  switch (status) {
    case WebHitStatus::kOk:
      return "ok";
    case WebHitStatus::kFetchFailed:
      return "fetch_failed";
    case WebHitStatus::kParseFailed:
      return "parse_failed";
    case WebHitStatus::kUndated:
      return "undated";
  }
  return "ok";
}

RawSearchResult search_claim(const ClaimRecord& claim, SearchBackend& search) {
  if (!claim.factcheck_date) throw std::invalid_argument("claim '" + claim.claim_id + "' has no factcheck_date");
  SearchQuery q;
  q.q = claim.text;
  q.num = kDocSlots;
  q.date_restrict = claim.factcheck_date;
  auto raw = search.search(q);
  if (raw.docs.size() > kDocSlots) raw.docs.resize(kDocSlots);
  return raw;
}

SearchBundle fetch_bundle(const ClaimRecord& claim, const RawSearchResult& raw, Fetcher& fetcher) {
  if (!claim.factcheck_date) throw std::invalid_argument("claim '" + claim.claim_id + "' has no factcheck_date");
  SearchBundle bundle;
  bundle.claim_id = claim.claim_id;
  bundle.cutoff_date = *claim.factcheck_date;
  for (const auto& doc : raw.docs) {
    WebHit hit;
    hit.url = doc.url;
    hit.publish_date = doc.date;
    auto page = fetcher.fetch(doc.url);
    if (!page.ok) {
      hit.parse_status = WebHitStatus::kFetchFailed;
      bundle.doc_hits.push_back(std::move(hit));
      continue;
    }
    auto text = extract_main_text(page.body);
    if (!hit.publish_date) hit.publish_date = extract_publish_date(page.body);
    hit.fetched_html = std::move(page.body);
    if (trim(text).empty()) {
      hit.parse_status = WebHitStatus::kParseFailed;
    } else if (!hit.publish_date) {
      hit.parse_status = WebHitStatus::kUndated;
    } else {
      hit.parse_status = WebHitStatus::kOk;
      hit.extracted_text = std::move(text);
    }
    bundle.doc_hits.push_back(std::move(hit));
  }
  if (raw.image) {
    auto img = fetcher.fetch(raw.image->url);
    if (img.ok && !img.body.empty()) bundle.image_hit = ImageHit{raw.image->url, raw.image->date, std::move(img.body)};
  }
  return bundle;
}

TemporalFilterResult apply_temporal_filter(const std::vector<WebHit>& hits, const Date& cutoff) {
  TemporalFilterResult out;
  for (const auto& hit : hits) {
    if (!hit.publish_date) {
      ++out.undated_dropped;
    } else if (*hit.publish_date < cutoff) {
      out.retained.push_back(hit);
    } else {
      ++out.post_cutoff_dropped;
    }
  }
  return out;
}

Admission admit_claim(const SearchBundle& bundle) {
  const auto n = std::min(bundle.doc_hits.size(), kDocSlots);
  const auto failed = std::count_if(bundle.doc_hits.begin(), bundle.doc_hits.begin() + static_cast<std::ptrdiff_t>(n),
                                    [](const WebHit& h) {
                                      return h.parse_status == WebHitStatus::kFetchFailed ||
                                             h.parse_status == WebHitStatus::kParseFailed;
                                    });
  return static_cast<std::size_t>(failed) > kMaxFailedUrls ? Admission::kReject : Admission::kAdmit;
}

SummaryResult summarize_documents(const std::vector<WebHit>& retained, ChatBackend& backend,
                                  const DecodingParams& params, const ChatCall& call) {
  SummaryResult out;
  for (const auto& hit : retained) {
    if (!hit.extracted_text || trim(*hit.extracted_text).empty() || !hit.publish_date) {
      ++out.skipped_empty;
      continue;
    }
    try {
      const auto resp = chat_complete(backend, render_summarizer_prompt(*hit.extracted_text), params, call);
      auto text = trim(resp.text);
      if (text.empty()) throw BackendError("empty summary");
      out.summaries.push_back({hit.url, *hit.publish_date, std::move(text)});
    } catch (const Error& e) {
      ++out.failed;
      out.errors.push_back(hit.url + ": " + e.what());
    }
  }
  return out;
}

void emit_webfc(const std::vector<WebfcClaim>& claims, const std::filesystem::path& out_dir) {
  if (claims.empty()) throw std::invalid_argument("emit_webfc needs at least one admitted claim");
  Dataset ds;
  ds.format = DatasetFormat::kWebfc;
  ds.root = out_dir;
  try {
    std::filesystem::create_directories(out_dir);
    for (const auto& c : claims) {
      ClaimRecord rec = c.claim;
      rec.gold_text_evidence.clear();
      rec.gold_image_evidence.clear();
      for (std::size_t i = 0; i < c.summaries.size(); ++i) {
        EvidenceItem item;
        item.evidence_id = c.claim.claim_id + "-d" + std::to_string(i + 1);
        item.modality = Modality::kText;
        item.payload = c.summaries[i].text;
        item.provenance_url = c.summaries[i].url;
        item.publish_date = c.summaries[i].publish_date;
        rec.gold_text_evidence.push_back(item.evidence_id);
        ds.knowledge.add(std::move(item));
      }
      if (c.image) {
        const auto rel = std::filesystem::path("images") / (safe_name(c.claim.claim_id) + "-img" + image_extension(c.image->url));
        std::filesystem::create_directories(out_dir / "images");
        write_file_atomic(out_dir / rel, c.image->bytes);
        EvidenceItem item;
        item.evidence_id = c.claim.claim_id + "-img";
        item.modality = Modality::kImage;
        item.payload = rel.generic_string();
        item.provenance_url = c.image->url;
        item.publish_date = c.image->publish_date;
        rec.gold_image_evidence.push_back(item.evidence_id);
        ds.knowledge.add(std::move(item));
      }
      ds.claims.push_back(std::move(rec));
    }
    save_dataset(ds, out_dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoFailure(e.what());
  }
}

std::vector<SeedClaim> load_seed(const std::filesystem::path& path) {
  std::vector<SeedClaim> out;
  read_jsonl(path, [&](const nlohmann::json& rec, std::size_t line) {
    SeedClaim seed;
    auto& c = seed.claim;
    const auto field = [&](const char* name) {
      auto it = rec.find(name);
      if (it == rec.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw SchemaViolation(path.filename().string(), line, name, "required non-empty string");
      }
      return it->get<std::string>();
    };
    c.claim_id = field("claim_id");
    c.text = field("text");
    c.gold_verdict = map_external_label(field("gold_verdict"), DatasetFormat::kWebfc);
    c.source = rec.value("source", "webfc");
    auto d = rec.find("factcheck_date");
    if (d == rec.end() || d->is_null()) {
      seed.problem = "missing factcheck_date";
    } else if (!d->is_string() || !parse_iso_date(d->get<std::string>())) {
      seed.problem = "malformed factcheck_date " + d->dump();
    } else {
      c.factcheck_date = parse_iso_date(d->get<std::string>());
    }
    out.push_back(std::move(seed));
  });
  return out;
}

nlohmann::json BuildReport::to_json() const {
  nlohmann::json rej = nlohmann::json::array();
  for (const auto& r : rejections) rej.push_back({{"claim_id", r.claim_id}, {"reason", r.reason}});
  return {{"admitted", admitted},
          {"rejected", rejected},
          {"undated_dropped", undated_dropped},
          {"post_cutoff_dropped", post_cutoff_dropped},
          {"failed_fetches", failed_fetches},
          {"parse_failures", parse_failures},
          {"engine_restricted_queries", engine_restricted_queries},
          {"summaries", summaries},
          {"summaries_skipped_empty", summaries_skipped_empty},
          {"summary_failures", summary_failures},
          {"images", images},
          {"images_dropped", images_dropped},
          {"rejections", rej}};
}

BuildReport build_webfc(const std::vector<SeedClaim>& seeds, const WebfcBackends& backends,
                        const std::filesystem::path& out_dir, const WebfcBuildOptions& options) {
  if (backends.search == nullptr) throw ConfigError("webfc needs a search backend");
  if (backends.fetcher == nullptr) throw ConfigError("webfc needs a fetcher");
  if (backends.summarizer == nullptr) throw ConfigError("webfc needs backend role 'summarizer'");

  HostLimiter limiter(options.max_fetches_per_host, options.host_delay);
  PoliteFetcher fetcher(*backends.fetcher, limiter);
  ChatCall call;
  call.role = "summarizer";
  call.transcript = backends.transcript;
  call.log = backends.log;
  call.retry = backends.retry;

  const auto process = [&](const SeedClaim& seed) {
    ClaimOutcome out;
    if (seed.problem) {
      out.rejection = *seed.problem;
      return out;
    }
    try {
      const auto raw = search_claim(seed.claim, *backends.search);
      ++out.counts.engine_restricted_queries;
      auto bundle = fetch_bundle(seed.claim, raw, fetcher);
      for (const auto& h : bundle.doc_hits) {
        if (h.parse_status == WebHitStatus::kFetchFailed) ++out.counts.failed_fetches;
        if (h.parse_status == WebHitStatus::kParseFailed) ++out.counts.parse_failures;
      }
      if (admit_claim(bundle) == Admission::kReject) {
        out.rejection = "more than " + std::to_string(kMaxFailedUrls) + " of the top-" + std::to_string(kDocSlots) +
                        " URLs failed";
        return out;
      }
      auto filtered = apply_temporal_filter(bundle.doc_hits, bundle.cutoff_date);
      out.counts.undated_dropped = filtered.undated_dropped;
      out.counts.post_cutoff_dropped = filtered.post_cutoff_dropped;
      auto summaries = summarize_documents(filtered.retained, *backends.summarizer, backends.summarizer_params, call);
      out.counts.summaries = summaries.summaries.size();
      out.counts.summaries_skipped_empty = summaries.skipped_empty;
      out.counts.summary_failures = summaries.failed;
      for (const auto& e : summaries.errors) spdlog::warn("claim '{}': summary failed for {}", seed.claim.claim_id, e);

      WebfcClaim admitted{seed.claim, std::move(summaries.summaries), std::nullopt};
      if (bundle.image_hit) {
        if (bundle.image_hit->publish_date && *bundle.image_hit->publish_date < bundle.cutoff_date) {
          admitted.image = std::move(bundle.image_hit);
          ++out.counts.images;
        } else {
          ++out.counts.images_dropped;
        }
      }
      out.admitted = std::move(admitted);
    } catch (const Error& e) {
      out.rejection = std::string(e.kind()) + ": " + e.what();
    } catch (const std::invalid_argument& e) {
      out.rejection = e.what();
    }
    return out;
  };

  std::vector<ClaimOutcome> outcomes(seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) outcomes[i] = process(seeds[i]);
  };
  const auto n_threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(1, seeds.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  BuildReport report;
  std::vector<WebfcClaim> admitted;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto& o = outcomes[i];
    const auto& c = o.counts;
    report.undated_dropped += c.undated_dropped;
    report.post_cutoff_dropped += c.post_cutoff_dropped;
    report.failed_fetches += c.failed_fetches;
    report.parse_failures += c.parse_failures;
    report.engine_restricted_queries += c.engine_restricted_queries;
    report.summaries += c.summaries;
    report.summaries_skipped_empty += c.summaries_skipped_empty;
    report.summary_failures += c.summary_failures;
    report.images += c.images;
    report.images_dropped += c.images_dropped;
    if (o.admitted) {
      ++report.admitted;
      admitted.push_back(std::move(*o.admitted));
    } else {
      ++report.rejected;
      report.rejections.push_back({seeds[i].claim.claim_id, o.rejection.value_or("unknown")});
    }
  }

  std::filesystem::create_directories(out_dir);
  if (admitted.empty()) {
    spdlog::warn("webfc: no claim admitted; dataset not written");
  } else {
    emit_webfc(admitted, out_dir);
  }
  write_file_atomic(out_dir / "build_report.json", report.to_json().dump(2) + "\n");
  return report;
}

}  // namespace mmfc
