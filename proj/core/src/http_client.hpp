#pragma once

#include <chrono>
#include <map>
#include <string>

namespace mmfc::detail {

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
};

struct HttpOptions {
  std::chrono::milliseconds connect_timeout{10'000};
  std::chrono::milliseconds read_timeout{120'000};
  std::map<std::string, std::string> headers;
};

// Thin wrappers over cpp-httplib. Connection failures raise TransportError,
// timeouts raise BackendTimeout. Non-2xx statuses are returned, not thrown.
HttpResponse http_post_json(const std::string& url, const std::string& body, const HttpOptions& options);
HttpResponse http_get(const std::string& url, const HttpOptions& options);

// Reads an API key from the named environment variable; empty name means no
// auth. A named but unset variable is a ConfigError.
std::string read_secret(const std::string& env_var);

}  // namespace mmfc::detail
