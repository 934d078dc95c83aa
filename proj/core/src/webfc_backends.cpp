#include <algorithm>
#include <cctype>
#include <thread>
#include <utility>

#include "http_client.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"
#include "mmfc/webfc.hpp"

namespace mmfc {

namespace {

RawHit raw_hit_from_json(const nlohmann::json& j) {
  RawHit h;
  h.url = j.at("url").get<std::string>();
  if (auto it = j.find("date"); it != j.end() && it->is_string()) h.date = parse_iso_date(it->get<std::string>());
  return h;
}

RawSearchResult result_from_json(const nlohmann::json& j, std::string_view docs_key) {
  RawSearchResult r;
  if (auto it = j.find(docs_key); it != j.end()) {
    for (const auto& d : *it) r.docs.push_back(raw_hit_from_json(d));
  }
  if (auto it = j.find("image"); it != j.end() && it->is_object()) r.image = raw_hit_from_json(*it);
  return r;
}

}  // namespace

ScriptedSearchBackend::ScriptedSearchBackend(const std::filesystem::path& path) {
  read_jsonl(path, [&](const nlohmann::json& rec, std::size_t line) {
    try {
      results_.emplace(rec.at("q").get<std::string>(), result_from_json(rec, "docs"));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw SchemaViolation(path.filename().string(), line, "<search fixture>", e.what());
    }
  });
}

ScriptedSearchBackend::ScriptedSearchBackend(std::map<std::string, RawSearchResult> results)
    : results_(std::move(results)) {}

RawSearchResult ScriptedSearchBackend::search(const SearchQuery& query) {
  auto it = results_.find(query.q);
  if (it == results_.end()) return {};
  auto out = it->second;
  if (out.docs.size() > query.num) out.docs.resize(query.num);
  return out;
}

HttpSearchBackend::HttpSearchBackend(HttpSearchOptions options)
    : options_(std::move(options)), api_key_(detail::read_secret(options_.auth_env_var)) {}

RawSearchResult HttpSearchBackend::search(const SearchQuery& query) {
  nlohmann::json body{{"q", query.q}, {"num", query.num}};
  if (query.date_restrict) body["date_restrict"] = format_date(*query.date_restrict);
  detail::HttpOptions http;
  http.read_timeout = std::chrono::milliseconds(static_cast<long>(options_.timeout_s * 1000));
  if (!api_key_.empty()) http.headers.emplace("Authorization", "Bearer " + api_key_);
  detail::HttpResponse resp;
  try {
    resp = detail::http_post_json(options_.endpoint, body.dump(), http);
  } catch (const BackendError& e) {
    throw SearchBackendError(e.what());
  }
  if (resp.status == 429) throw QuotaExceeded("search endpoint returned 429");
  if (resp.status < 200 || resp.status >= 300) {
    throw SearchBackendError("search endpoint returned HTTP " + std::to_string(resp.status));
  }
  try {
    auto r = result_from_json(nlohmann::json::parse(resp.body), "results");
    if (r.docs.size() > query.num) r.docs.resize(query.num);
    return r;
  } catch (const std::exception& e) {
    throw SearchBackendError(std::string("malformed search response: ") + e.what());
  }
}

ScriptedFetcher::ScriptedFetcher(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  read_jsonl(path, [&](const nlohmann::json& rec, std::size_t line) {
    try {
      FetchResult r;
      const auto url = rec.at("url").get<std::string>();
      if (auto it = rec.find("error"); it != rec.end()) {
        r.error = it->get<std::string>();
      } else if (auto f = rec.find("file"); f != rec.end()) {
        r.ok = true;
        r.body = read_file(base / f->get<std::string>());
      } else {
        r.ok = true;
        r.body = rec.at("body").get<std::string>();
      }
      pages_.emplace(url, std::move(r));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw SchemaViolation(path.filename().string(), line, "<fetch fixture>", e.what());
    }
  });
}

ScriptedFetcher::ScriptedFetcher(std::map<std::string, FetchResult> pages) : pages_(std::move(pages)) {}

FetchResult ScriptedFetcher::fetch(const std::string& url) {
  auto it = pages_.find(url);
  if (it == pages_.end()) return {false, "", "no fixture for " + url};
  return it->second;
}

FetchResult HttpFetcher::fetch(const std::string& url) {
  detail::HttpOptions http;
  http.read_timeout = std::chrono::milliseconds(static_cast<long>(timeout_s_ * 1000));
  try {
    auto resp = detail::http_get(url, http);
    if (resp.status < 200 || resp.status >= 300) return {false, "", "HTTP " + std::to_string(resp.status)};
    return {true, std::move(resp.body), ""};
  } catch (const std::exception& e) {
    return {false, "", e.what()};
  }
}

std::string url_host(std::string_view url) {
  auto rest = url;
  if (const auto scheme = rest.find("://"); scheme != std::string_view::npos) rest.remove_prefix(scheme + 3);
  const auto end = rest.find_first_of("/?#");
  auto host = rest.substr(0, end);
  if (const auto at = host.rfind('@'); at != std::string_view::npos) host.remove_prefix(at + 1);
  if (!host.empty() && host.front() == '[') {
    if (const auto close = host.find(']'); close != std::string_view::npos) host = host.substr(0, close + 1);
  } else if (const auto colon = host.find(':'); colon != std::string_view::npos) {
    host = host.substr(0, colon);
  }
  std::string out(host);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

HostLimiter::HostLimiter(std::size_t max_per_host, std::chrono::milliseconds delay)
    : max_per_host_(std::max<std::size_t>(1, max_per_host)), delay_(delay) {}

HostLimiter::Slot::Slot(HostLimiter& limiter, std::string host) : limiter_(limiter), host_(std::move(host)) {
  std::unique_lock lock(limiter_.mu_);
  auto& state = limiter_.hosts_[host_];
  limiter_.cv_.wait(lock, [&] { return state.active < limiter_.max_per_host_; });
  ++state.active;
  limiter_.peak_ = std::max(limiter_.peak_, state.active);
  if (limiter_.delay_.count() > 0) {
    const auto earliest = state.last_start + limiter_.delay_;
    const auto now = std::chrono::steady_clock::now();
    const auto start = std::max(now, earliest);
    state.last_start = start;
    lock.unlock();
    std::this_thread::sleep_until(start);
  } else {
    state.last_start = std::chrono::steady_clock::now();
  }
}

HostLimiter::Slot::~Slot() {
  {
    std::lock_guard lock(limiter_.mu_);
    --limiter_.hosts_[host_].active;
  }
  limiter_.cv_.notify_all();
}

std::size_t HostLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

FetchResult PoliteFetcher::fetch(const std::string& url) {
  HostLimiter::Slot slot(limiter_, url_host(url));
  return inner_.fetch(url);
}

}  // namespace mmfc
