#include "mmfc/chat.hpp"

#include <algorithm>
#include <thread>
#include <utility>

#include <spdlog/spdlog.h>

#include "http_client.hpp"
#include "mmfc/digest.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc {

namespace {

std::string mime_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

std::string read_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw MissingImage("image not readable: " + path.string());
  return read_file(path);
}

bool retryable(const BackendError& e) {
  if (dynamic_cast<const BackendTimeout*>(&e) || dynamic_cast<const TransportError*>(&e)) return true;
  if (const auto* http = dynamic_cast<const BackendHttpError*>(&e)) {
    return http->status() == 429 || http->status() >= 500;
  }
  return false;
}

}  // namespace

bool ChatMessage::has_image() const {
  return std::any_of(parts.begin(), parts.end(), [](const auto& p) { return std::holds_alternative<ImagePart>(p); });
}

std::vector<std::filesystem::path> ChatMessage::images() const {
  std::vector<std::filesystem::path> out;
  for (const auto& p : parts) {
    if (const auto* img = std::get_if<ImagePart>(&p)) out.push_back(img->path);
  }
  return out;
}

std::string ChatMessage::text() const {
  std::string out;
  for (const auto& p : parts) {
    if (const auto* t = std::get_if<TextPart>(&p)) out += t->text;
  }
  return out;
}

nlohmann::json to_json(const DecodingParams& params) {
  nlohmann::json j{{"mode", params.mode == DecodingMode::kGreedy ? "greedy" : "sampled"},
                   {"max_tokens", params.max_tokens}};
  if (params.mode == DecodingMode::kSampled) j["temperature"] = params.temperature;
  if (params.thinking_budget) j["thinking_budget"] = *params.thinking_budget;
  return j;
}

DecodingParams decoding_from_json(const nlohmann::json& j) {
  DecodingParams p;
  if (!j.is_object()) throw ConfigError("decoding must be an object");
  if (auto it = j.find("mode"); it != j.end()) {
    const auto mode = it->get<std::string>();
    if (mode == "greedy") {
      p.mode = DecodingMode::kGreedy;
    } else if (mode == "sampled") {
      p.mode = DecodingMode::kSampled;
    } else {
      throw ConfigError("decoding.mode must be greedy or sampled, got '" + mode + "'");
    }
  }
  if (auto it = j.find("temperature"); it != j.end()) p.temperature = it->get<double>();
  if (auto it = j.find("max_tokens"); it != j.end()) p.max_tokens = it->get<int>();
  if (auto it = j.find("thinking_budget"); it != j.end() && !it->is_null()) p.thinking_budget = it->get<int>();
  if (p.temperature < 0.0) throw ConfigError("decoding.temperature must be >= 0");
  if (p.max_tokens <= 0) throw ConfigError("decoding.max_tokens must be positive");
  if (p.thinking_budget && *p.thinking_budget < 0) throw ConfigError("decoding.thinking_budget must be >= 0");
  return p;
}

nlohmann::json canonical_request(const ChatMessage& message, const DecodingParams& params) {
  nlohmann::json content = nlohmann::json::array();
  for (const auto& part : message.parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      content.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImagePart>(part);
      content.push_back({{"type", "image"}, {"sha256", sha256_hex(read_image(img.path))}});
    }
  }
  return {{"messages", nlohmann::json::array({{{"role", message.role == ChatRole::kSystem ? "system" : "user"},
                                               {"content", std::move(content)}}})},
          {"decoding", to_json(params)}};
}

std::string request_digest(const ChatMessage& message, const DecodingParams& params) {
  return sha256_hex(canonical_request(message, params).dump());
}

// ---- Transcript ---------------------------------------------------------

Transcript::Transcript() : mu_(std::make_unique<std::mutex>()) {}

Transcript Transcript::load(const std::filesystem::path& path) {
  Transcript t;
  read_jsonl(path, [&](const nlohmann::json& rec, std::size_t line) {
    TranscriptEntry e;
    try {
      e.digest = rec.at("digest").get<std::string>();
      e.response = rec.at("response").get<std::string>();
      e.latency_ms = rec.value("latency_ms", 0.0);
    } catch (const std::exception& ex) {
      throw SchemaViolation(path.filename().string(), line, "<record>", ex.what());
    }
    t.record(std::move(e));
  });
  return t;
}

void Transcript::save(const std::filesystem::path& path) const {
  std::vector<nlohmann::json> lines;
  for (const auto& e : entries()) {
    lines.push_back({{"digest", e.digest}, {"response", e.response}, {"latency_ms", e.latency_ms}});
  }
  write_file_atomic(path, to_jsonl(lines));
}

std::optional<TranscriptEntry> Transcript::find(std::string_view digest) const {
  std::lock_guard lock(*mu_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool Transcript::record(TranscriptEntry entry) {
  std::lock_guard lock(*mu_);
  auto it = entries_.find(entry.digest);
  if (it == entries_.end()) {
    auto key = entry.digest;
    entries_.emplace(std::move(key), std::move(entry));
    return true;
  }
  if (it->second.response == entry.response) return true;
  ++conflicts_;
  return false;
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(*mu_);
  std::vector<TranscriptEntry> out;
  out.reserve(entries_.size());
  for (const auto& [_, e] : entries_) out.push_back(e);
  return out;
}

std::size_t Transcript::size() const {
  std::lock_guard lock(*mu_);
  return entries_.size();
}

std::size_t Transcript::conflicts() const {
  std::lock_guard lock(*mu_);
  return conflicts_;
}

// ---- RequestLog ---------------------------------------------------------

void RequestLog::add(RequestRecord record) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(record));
}

std::vector<RequestRecord> RequestLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::vector<RequestRecord> RequestLog::records_for(std::string_view role) const {
  std::lock_guard lock(mu_);
  std::vector<RequestRecord> out;
  std::copy_if(records_.begin(), records_.end(), std::back_inserter(out), [&](const auto& r) { return r.role == role; });
  return out;
}

std::size_t RequestLog::count(std::string_view role) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const auto& r) { return r.role == role; }));
}

// ---- Backends -----------------------------------------------------------

ScriptedChatBackend::ScriptedChatBackend(std::string tag, std::shared_ptr<const Transcript> transcript)
    : tag_(std::move(tag)), transcript_(std::move(transcript)) {}

BackendReply ScriptedChatBackend::complete(const ChatMessage&, const DecodingParams&, std::string_view digest) {
  auto entry = transcript_->find(digest);
  if (!entry) throw TranscriptMiss(std::string(digest));
  return {entry->response, entry->latency_ms};
}

CallbackChatBackend::CallbackChatBackend(std::string tag, Handler handler)
    : tag_(std::move(tag)), handler_(std::move(handler)) {}

BackendReply CallbackChatBackend::complete(const ChatMessage& message, const DecodingParams& params,
                                           std::string_view) {
  return handler_(message, params);
}

HttpChatBackend::HttpChatBackend(std::string tag, HttpChatOptions options)
    : tag_(std::move(tag)), options_(std::move(options)), api_key_(detail::read_secret(options_.auth_env_var)) {}

nlohmann::json HttpChatBackend::request_body(const ChatMessage& message, const DecodingParams& params) const {
  nlohmann::json content = nlohmann::json::array();
  for (const auto& part : message.parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      content.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImagePart>(part);
      const auto url = "data:" + mime_for(img.path) + ";base64," + base64_encode(read_image(img.path));
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    }
  }
  nlohmann::json body{
      {"model", options_.model_id},
      {"messages", nlohmann::json::array({{{"role", message.role == ChatRole::kSystem ? "system" : "user"},
                                           {"content", std::move(content)}}})},
      {"max_tokens", params.max_tokens},
      {"temperature", params.mode == DecodingMode::kGreedy ? 0.0 : params.temperature}};
  if (params.mode == DecodingMode::kGreedy) body["top_p"] = 1.0;
  if (params.thinking_budget) {
    body["extra_body"] = {{"google", {{"thinking_config", {{"thinking_budget", *params.thinking_budget}}}}}};
  }
  return body;
}

BackendReply HttpChatBackend::complete(const ChatMessage& message, const DecodingParams& params, std::string_view) {
  detail::HttpOptions http;
  http.read_timeout = std::chrono::milliseconds(static_cast<long>(options_.timeout_s * 1000));
  if (!api_key_.empty()) http.headers.emplace("Authorization", "Bearer " + api_key_);
  auto url = options_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  const auto resp = detail::http_post_json(url, request_body(message, params).dump(), http);
  if (resp.status < 200 || resp.status >= 300) throw BackendHttpError(resp.status, resp.body);
  try {
    const auto parsed = nlohmann::json::parse(resp.body);
    const auto& content = parsed.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return {content.get<std::string>(), std::nullopt};
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
    return {text, std::nullopt};
  } catch (const std::exception& e) {
    throw BackendError(std::string("malformed chat response: ") + e.what());
  }
}

// ---- chat_complete ------------------------------------------------------

ChatResponse chat_complete(ChatBackend& backend, const ChatMessage& message, const DecodingParams& params,
                           const ChatCall& call) {
  if (message.parts.empty()) throw std::invalid_argument("chat message has no parts");
  const auto digest = request_digest(message, params);
  if (call.log) call.log->add({call.role, digest, message.has_image(), message.text()});

  const int attempts = std::max(1, call.retry.max_attempts);
  auto backoff = call.retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      const auto start = std::chrono::steady_clock::now();
      auto reply = backend.complete(message, params, digest);
      const auto measured =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      ChatResponse out{std::move(reply.text), reply.latency_ms.value_or(measured), digest};
      if (call.transcript && !call.transcript->record({digest, out.text, out.latency_ms})) {
        spdlog::warn("nondeterministic response from backend '{}' for digest {}", backend.tag(), digest);
      }
      return out;
    } catch (const BackendError& e) {
      if (attempt >= attempts || !retryable(e)) throw;
      spdlog::warn("backend '{}' attempt {}/{} failed: {}; retrying", backend.tag(), attempt, attempts, e.what());
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long>(static_cast<double>(backoff.count()) * call.retry.multiplier));
    }
  }
}

}  // namespace mmfc
