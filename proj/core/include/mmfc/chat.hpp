#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmfc/corpus.hpp"

namespace mmfc {

struct TextPart {
  std::string text;
  bool operator==(const TextPart&) const = default;
};

struct ImagePart {
  std::filesystem::path path;
  bool operator==(const ImagePart&) const = default;
};

using MessagePart = std::variant<TextPart, ImagePart>;

enum class ChatRole { kSystem, kUser };

struct ChatMessage {
  ChatRole role = ChatRole::kUser;
  std::vector<MessagePart> parts;

  bool has_image() const;
  std::vector<std::filesystem::path> images() const;
  // Concatenation of all text parts, images elided.
  std::string text() const;

  bool operator==(const ChatMessage&) const = default;
};

enum class DecodingMode { kGreedy, kSampled };

struct DecodingParams {
  DecodingMode mode = DecodingMode::kGreedy;
  double temperature = 0.0;  // ignored under greedy
  int max_tokens = 1024;
  std::optional<int> thinking_budget;

  bool operator==(const DecodingParams&) const = default;
};

nlohmann::json to_json(const DecodingParams& params);
// Missing fields keep their defaults. Throws ConfigError on invalid values.
DecodingParams decoding_from_json(const nlohmann::json& j);

struct Assessment {
  std::string text;
  std::optional<NecessityLabel> necessity;

  bool operator==(const Assessment&) const = default;
};

// Canonical form of a request: text parts verbatim, images by content hash,
// decoding params. Throws MissingImage for unreadable image parts.
nlohmann::json canonical_request(const ChatMessage& message, const DecodingParams& params);
std::string request_digest(const ChatMessage& message, const DecodingParams& params);

struct TranscriptEntry {
  std::string digest;
  std::string response;
  double latency_ms = 0.0;

  bool operator==(const TranscriptEntry&) const = default;
};

// Digest -> response store. Appends are serialized; on-disk order is sorted by
// digest so concurrent runs write identical files.
class Transcript {
 public:
  Transcript();

  // JSON lines of {digest, response, latency_ms}. Errors: MissingFile,
  // SchemaViolation.
  static Transcript load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::optional<TranscriptEntry> find(std::string_view digest) const;

  // Returns false, keeping the first response, when the digest was already
  // recorded with different text (a nondeterministic backend).
  bool record(TranscriptEntry entry);

  std::vector<TranscriptEntry> entries() const;
  std::size_t size() const;
  std::size_t conflicts() const;

 private:
  std::map<std::string, TranscriptEntry, std::less<>> entries_;
  std::size_t conflicts_ = 0;
  std::unique_ptr<std::mutex> mu_;
};

// What a backend saw; kept for inspection in tests and manifests.
struct RequestRecord {
  std::string role;
  std::string digest;
  bool has_image = false;
  std::string text;
};

class RequestLog {
 public:
  void add(RequestRecord record);
  std::vector<RequestRecord> records() const;
  std::vector<RequestRecord> records_for(std::string_view role) const;
  std::size_t count(std::string_view role) const;

 private:
  mutable std::mutex mu_;
  std::vector<RequestRecord> records_;
};

struct BackendReply {
  std::string text;
  // Set by backends that know the latency better than a wall clock around the
  // call, e.g. replayed transcripts.
  std::optional<double> latency_ms;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string tag() const = 0;
  virtual BackendReply complete(const ChatMessage& message, const DecodingParams& params,
                                std::string_view digest) = 0;
};

// Replays a transcript; unknown digests raise TranscriptMiss.
class ScriptedChatBackend final : public ChatBackend {
 public:
  ScriptedChatBackend(std::string tag, std::shared_ptr<const Transcript> transcript);

  std::string tag() const override { return tag_; }
  BackendReply complete(const ChatMessage& message, const DecodingParams& params, std::string_view digest) override;

 private:
  std::string tag_;
  std::shared_ptr<const Transcript> transcript_;
};

// Wraps a function; used for in-process stubs.
class CallbackChatBackend final : public ChatBackend {
 public:
  using Handler = std::function<BackendReply(const ChatMessage&, const DecodingParams&)>;

  CallbackChatBackend(std::string tag, Handler handler);

  std::string tag() const override { return tag_; }
  BackendReply complete(const ChatMessage& message, const DecodingParams& params, std::string_view digest) override;

 private:
  std::string tag_;
  Handler handler_;
};

struct HttpChatOptions {
  std::string base_url;  // e.g. http://localhost:8000/v1; "/chat/completions" is appended
  std::string model_id;
  std::string auth_env_var;
  double timeout_s = 120.0;
};

// OpenAI-compatible chat-completions client. Image parts are sent inline as
// base64 data URLs.
class HttpChatBackend final : public ChatBackend {
 public:
  HttpChatBackend(std::string tag, HttpChatOptions options);

  std::string tag() const override { return tag_; }
  BackendReply complete(const ChatMessage& message, const DecodingParams& params, std::string_view digest) override;

  // Request body for `message`; exposed for tests.
  nlohmann::json request_body(const ChatMessage& message, const DecodingParams& params) const;

 private:
  std::string tag_;
  HttpChatOptions options_;
  std::string api_key_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct ChatCall {
  std::string role;
  Transcript* transcript = nullptr;  // appended to when set
  RequestLog* log = nullptr;
  RetryPolicy retry;
};

struct ChatResponse {
  std::string text;
  double latency_ms = 0.0;
  std::string digest;
};

// Sends one request. Transport failures (timeouts, connection errors, HTTP 429
// and 5xx) are retried with exponential backoff; everything else propagates.
ChatResponse chat_complete(ChatBackend& backend, const ChatMessage& message, const DecodingParams& params,
                           const ChatCall& call = {});

}  // namespace mmfc
