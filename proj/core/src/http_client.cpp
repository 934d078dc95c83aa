#include "http_client.hpp"

#include <httplib.h>

#include <cstdlib>
#include <utility>

#include "mmfc/errors.hpp"

namespace mmfc::detail {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // /path?query
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

httplib::Client make_client(const std::string& origin, const HttpOptions& options) {
  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(options.connect_timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(options.read_timeout));
  client.set_follow_location(true);
  return client;
}

[[noreturn]] void raise_transport(httplib::Error err, const std::string& url) {
  const std::string what = url + ": " + httplib::to_string(err);
  if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) throw BackendTimeout(what);
  throw TransportError(what);
}

HttpResponse convert(const httplib::Result& result, const std::string& url) {
  if (!result) raise_transport(result.error(), url);
  HttpResponse out;
  out.status = result->status;
  out.body = result->body;
  out.content_type = result->get_header_value("Content-Type");
  return out;
}

httplib::Headers to_headers(const std::map<std::string, std::string>& headers) {
  httplib::Headers out;
  for (const auto& [k, v] : headers) out.emplace(k, v);
  return out;
}

}  // namespace

HttpResponse http_post_json(const std::string& url, const std::string& body, const HttpOptions& options) {
  const auto parts = split_url(url);
  auto client = make_client(parts.origin, options);
  return convert(client.Post(parts.path, to_headers(options.headers), body, "application/json"), url);
}

HttpResponse http_get(const std::string& url, const HttpOptions& options) {
  const auto parts = split_url(url);
  auto client = make_client(parts.origin, options);
  return convert(client.Get(parts.path, to_headers(options.headers)), url);
}

std::string read_secret(const std::string& env_var) {
  if (env_var.empty()) return {};
  const char* value = std::getenv(env_var.c_str());
  if (value == nullptr) throw ConfigError("environment variable " + env_var + " is not set");
  return value;
}

}  // namespace mmfc::detail
