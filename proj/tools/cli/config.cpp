#include <set>

#include "cli.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc::cli {

namespace {

const std::set<std::string>& known_roles() {
  static const std::set<std::string> roles = {"analyzer",  "verifier", "embedder_text", "embedder_image",
                                              "summarizer", "search",   "fetcher"};
  return roles;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

// Backend entries may name files; resolve them now so the factory never sees
// relative paths.
nlohmann::json resolve_backend_paths(nlohmann::json spec, const std::filesystem::path& base) {
  for (const char* key : {"path", "transcript"}) {
    auto it = spec.find(key);
    if (it == spec.end()) continue;
    if (it->is_string()) {
      *it = resolve(base, it->get<std::string>()).string();
    } else if (it->is_array()) {
      for (auto& p : *it) p = resolve(base, p.get<std::string>()).string();
    }
  }
  return spec;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  if (auto ds = j.find("dataset"); ds != j.end()) {
    if (ds->is_string()) {
      c.dataset = resolve(base, ds->get<std::string>());
    } else {
      c.dataset = resolve(base, get_or<std::string>(*ds, "path", ""));
      c.format = parse_format_tag(get_or<std::string>(*ds, "format", "mocheg"));
    }
  }
  if (auto f = j.find("format"); f != j.end()) c.format = parse_format_tag(f->get<std::string>());
  if (auto idx = j.find("indexes"); idx != j.end()) {
    if (auto t = idx->find("text"); t != idx->end()) c.text_index = resolve(base, t->get<std::string>());
    if (auto i = idx->find("image"); i != idx->end()) c.image_index = resolve(base, i->get<std::string>());
  }
  if (auto b = j.find("backends"); b != j.end()) {
    if (!b->is_object()) throw ConfigError("'backends' must be an object");
    for (const auto& [role, spec] : b->items()) {
      if (!known_roles().contains(role)) throw ConfigError("unknown backend role '" + role + "'");
      if (!spec.is_object() || !spec.contains("kind")) {
        throw ConfigError("backend '" + role + "' needs an object with a 'kind'");
      }
      c.backends[role] = resolve_backend_paths(spec, base);
    }
  }
  c.strategies = get_or<std::vector<std::string>>(j, "strategies", {});
  c.configs = get_or<std::vector<std::string>>(j, "configs", {});
  const auto text_source = get_or<std::string>(j, "text_source", "gold");
  if (text_source == "gold") {
    c.text_source = TextSource::kGold;
  } else if (text_source == "retrieved") {
    c.text_source = TextSource::kRetrieved;
  } else {
    throw ConfigError("text_source must be 'gold' or 'retrieved'");
  }
  const auto k_text = get_or<long>(j, "k_text", 1);
  if (k_text < 1) throw ConfigError("k_text must be >= 1");
  c.k_text = static_cast<std::size_t>(k_text);
  c.tau = get_or<double>(j, "tau", kDefaultPrefilterTau);
  if (!(c.tau >= -1.0 && c.tau <= 1.0)) throw ConfigError("tau must lie in [-1, 1]");
  const auto parallelism = get_or<long>(j, "parallelism", 4);
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  c.parallelism = static_cast<std::size_t>(parallelism);
  if (auto o = j.find("out"); o != j.end()) c.out = resolve(base, o->get<std::string>());
  c.strict = get_or<bool>(j, "strict", false);
  for (const auto& t : get_or<std::vector<std::string>>(j, "transcripts", {})) c.transcripts.push_back(resolve(base, t));
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json b = nlohmann::json::object();
  for (const auto& [role, spec] : backends) b[role] = spec;
  nlohmann::json j{{"dataset", {{"path", dataset.string()}, {"format", to_string(format)}}},
                   {"backends", b},
                   {"strategies", strategies},
                   {"configs", configs},
                   {"text_source", text_source == TextSource::kGold ? "gold" : "retrieved"},
                   {"k_text", k_text},
                   {"tau", tau},
                   {"parallelism", parallelism},
                   {"out", out.string()},
                   {"strict", strict}};
  nlohmann::json idx = nlohmann::json::object();
  if (text_index) idx["text"] = text_index->string();
  if (image_index) idx["image"] = image_index->string();
  j["indexes"] = idx;
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : transcripts) ts.push_back(t.string());
  j["transcripts"] = ts;
  return j;
}

TranscriptSetting TranscriptSetting::parse(const std::string& text) {
  TranscriptSetting s;
  if (text.empty() || text == "live") return s;
  if (text == "record") {
    s.mode = TranscriptMode::kRecord;
    return s;
  }
  if (text.rfind("replay:", 0) == 0 && text.size() > 7) {
    s.mode = TranscriptMode::kReplay;
    s.path = text.substr(7);
    return s;
  }
  throw ConfigError("--transcript expects 'record' or 'replay:<path>', got '" + text + "'");
}

// ---- BackendFactory -----------------------------------------------------

BackendFactory::BackendFactory(const RunConfig& config, const TranscriptSetting& transcript)
    : config_(config), transcript_(transcript) {
  if (transcript_.mode == TranscriptMode::kReplay) {
    replay_ = std::make_shared<const Transcript>(Transcript::load(transcript_.path));
  }
}

ChatBackend* BackendFactory::chat(const std::string& role) {
  if (auto it = chat_.find(role); it != chat_.end()) return it->second.get();
  auto spec_it = config_.backends.find(role);
  if (spec_it == config_.backends.end()) return nullptr;
  if (replay_) {
    return (chat_[role] = std::make_unique<ScriptedChatBackend>(spec_it->second.value("tag", role), replay_)).get();
  }
  const auto& spec = spec_it->second;
  const auto kind = spec.at("kind").get<std::string>();
  const auto tag = spec.value("tag", role);
  if (kind == "scripted") {
    auto merged = std::make_shared<Transcript>();
    std::vector<std::string> paths;
    if (auto t = spec.find("transcript"); t != spec.end()) {
      if (t->is_string()) {
        paths.push_back(t->get<std::string>());
      } else {
        paths = t->get<std::vector<std::string>>();
      }
    }
    for (const auto& p : config_.transcripts) paths.push_back(p.string());
    if (paths.empty()) throw ConfigError("scripted backend '" + role + "' needs a 'transcript'");
    for (const auto& p : paths) {
      for (auto& e : Transcript::load(p).entries()) merged->record(std::move(e));
    }
    return (chat_[role] = std::make_unique<ScriptedChatBackend>(tag, merged)).get();
  }
  if (kind == "http") {
    HttpChatOptions o;
    o.base_url = spec.value("base_url", "");
    o.model_id = spec.value("model", "");
    o.auth_env_var = spec.value("auth_env", "");
    o.timeout_s = spec.value("timeout_s", 120.0);
    if (o.base_url.empty() || o.model_id.empty()) {
      throw ConfigError("http backend '" + role + "' needs 'base_url' and 'model'");
    }
    return (chat_[role] = std::make_unique<HttpChatBackend>(spec.value("tag", o.model_id), o)).get();
  }
  throw ConfigError("backend '" + role + "': unknown kind '" + kind + "' (expected scripted or http)");
}

DecodingParams BackendFactory::decoding(const std::string& role) const {
  auto it = config_.backends.find(role);
  if (it == config_.backends.end()) return {};
  auto d = it->second.find("decoding");
  if (d == it->second.end()) return {};
  return decoding_from_json(*d);
}

EmbeddingBackend* BackendFactory::embedder(const std::string& role) {
  if (auto it = embed_.find(role); it != embed_.end()) return it->second.get();
  auto spec_it = config_.backends.find(role);
  if (spec_it == config_.backends.end()) return nullptr;
  const auto& spec = spec_it->second;
  const auto kind = spec.at("kind").get<std::string>();
  const auto tag = spec.value("tag", role);
  if (kind == "scripted") {
    if (!spec.contains("path")) throw ConfigError("scripted embedder '" + role + "' needs a 'path'");
    return (embed_[role] = std::make_unique<ScriptedEmbeddingBackend>(tag, spec.at("path").get<std::string>())).get();
  }
  if (kind == "http") {
    HttpEmbeddingOptions o;
    o.base_url = spec.value("base_url", "");
    o.model_id = spec.value("model", "");
    o.auth_env_var = spec.value("auth_env", "");
    o.timeout_s = spec.value("timeout_s", 60.0);
    if (o.base_url.empty()) throw ConfigError("http embedder '" + role + "' needs 'base_url'");
    return (embed_[role] = std::make_unique<HttpEmbeddingBackend>(spec.value("tag", o.model_id), o)).get();
  }
  throw ConfigError("embedder '" + role + "': unknown kind '" + kind + "'");
}

SearchBackend* BackendFactory::search() {
  if (search_) return search_.get();
  auto it = config_.backends.find("search");
  if (it == config_.backends.end()) return nullptr;
  const auto kind = it->second.at("kind").get<std::string>();
  if (kind == "scripted") {
    search_ = std::make_unique<ScriptedSearchBackend>(std::filesystem::path(it->second.at("path").get<std::string>()));
  } else if (kind == "http") {
    HttpSearchOptions o;
    o.endpoint = it->second.value("endpoint", "");
    o.auth_env_var = it->second.value("auth_env", "");
    o.timeout_s = it->second.value("timeout_s", 30.0);
    if (o.endpoint.empty()) throw ConfigError("http search backend needs an 'endpoint'");
    search_ = std::make_unique<HttpSearchBackend>(o);
  } else {
    throw ConfigError("search backend: unknown kind '" + kind + "'");
  }
  return search_.get();
}

Fetcher* BackendFactory::fetcher() {
  if (fetcher_) return fetcher_.get();
  auto it = config_.backends.find("fetcher");
  if (it == config_.backends.end()) return nullptr;
  const auto kind = it->second.at("kind").get<std::string>();
  if (kind == "scripted") {
    fetcher_ = std::make_unique<ScriptedFetcher>(std::filesystem::path(it->second.at("path").get<std::string>()));
  } else if (kind == "http") {
    fetcher_ = std::make_unique<HttpFetcher>(it->second.value("timeout_s", 20.0));
  } else {
    throw ConfigError("fetcher: unknown kind '" + kind + "'");
  }
  return fetcher_.get();
}

}  // namespace mmfc::cli
