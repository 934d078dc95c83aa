#include <chrono>
#include <utility>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "mmfc/embed_index.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc {

namespace {

std::string table_key(Modality modality, std::string_view input) {
  return std::string(to_string(modality)) + '\x1f' + std::string(input);
}

}  // namespace

ScriptedEmbeddingBackend::ScriptedEmbeddingBackend(std::string tag, const std::filesystem::path& path)
    : tag_(std::move(tag)) {
  read_jsonl(path, [&](const nlohmann::json& rec, std::size_t line) {
    try {
      const auto modality = parse_modality(rec.at("modality").get<std::string>());
      table_.insert_or_assign(table_key(modality, rec.at("input").get<std::string>()),
                              EmbeddingVector(rec.at("vector").get<std::vector<float>>()));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw SchemaViolation(path.filename().string(), line, "<record>", e.what());
    }
  });
}

ScriptedEmbeddingBackend::ScriptedEmbeddingBackend(
    std::string tag, std::vector<std::tuple<Modality, std::string, std::vector<float>>> rows)
    : tag_(std::move(tag)) {
  for (auto& [modality, input, vec] : rows) {
    table_.insert_or_assign(table_key(modality, input), EmbeddingVector(std::move(vec)));
  }
}

std::vector<EmbeddingVector> ScriptedEmbeddingBackend::embed(Modality modality, std::span<const std::string> inputs) {
  std::vector<EmbeddingVector> out;
  out.reserve(inputs.size());
  for (const auto& input : inputs) {
    auto it = table_.find(table_key(modality, input));
    // Image inputs may arrive resolved against a dataset root; fall back to the
    // bare file name so fixtures stay location-independent.
    if (it == table_.end() && modality == Modality::kImage) {
      it = table_.find(table_key(modality, std::filesystem::path(input).filename().string()));
    }
    if (it == table_.end()) throw BackendError("scripted embedder has no vector for " + std::string(to_string(modality)) + " input '" + input + "'");
    out.push_back(it->second);
  }
  return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string tag, HttpEmbeddingOptions options)
    : tag_(std::move(tag)), options_(std::move(options)), api_key_(detail::read_secret(options_.auth_env_var)) {}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed(Modality modality, std::span<const std::string> inputs) {
  nlohmann::json body{{"model", options_.model_id},
                      {"modality", std::string(to_string(modality))},
                      {"inputs", std::vector<std::string>(inputs.begin(), inputs.end())}};
  detail::HttpOptions http;
  http.read_timeout = std::chrono::milliseconds(static_cast<long>(options_.timeout_s * 1000));
  if (!api_key_.empty()) http.headers.emplace("Authorization", "Bearer " + api_key_);
  const auto resp = detail::http_post_json(options_.base_url, body.dump(), http);
  if (resp.status < 200 || resp.status >= 300) throw BackendHttpError(resp.status, resp.body);
  std::vector<EmbeddingVector> out;
  try {
    const auto parsed = nlohmann::json::parse(resp.body);
    for (const auto& v : parsed.at("vectors")) out.emplace_back(v.get<std::vector<float>>());
  } catch (const std::exception& e) {
    throw BackendError(std::string("malformed embedding response: ") + e.what());
  }
  if (out.size() != inputs.size()) {
    throw BackendError("embedding response has " + std::to_string(out.size()) + " vectors for " +
                       std::to_string(inputs.size()) + " inputs");
  }
  return out;
}

}  // namespace mmfc
