#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmfc/chat.hpp"
#include "mmfc/corpus.hpp"
#include "mmfc/embed_index.hpp"
#include "mmfc/pipeline.hpp"
#include "mmfc/webfc.hpp"

namespace mmfc::cli {

// Declarative run description, read from a JSON file. Relative paths are
// resolved against the file's directory.
struct RunConfig {
  std::filesystem::path dataset;
  DatasetFormat format = DatasetFormat::kMocheg;
  std::optional<std::filesystem::path> text_index;
  std::optional<std::filesystem::path> image_index;
  // role -> {kind, ...}; roles: analyzer, verifier, embedder_text,
  // embedder_image, summarizer, search, fetcher.
  std::map<std::string, nlohmann::json> backends;
  std::vector<std::string> strategies;
  std::vector<std::string> configs;
  TextSource text_source = TextSource::kGold;
  std::size_t k_text = 1;
  double tau = kDefaultPrefilterTau;
  std::size_t parallelism = 4;
  std::filesystem::path out;
  bool strict = false;
  std::vector<std::filesystem::path> transcripts;

  // Errors: ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
};

enum class TranscriptMode { kLive, kRecord, kReplay };

struct TranscriptSetting {
  TranscriptMode mode = TranscriptMode::kLive;
  std::filesystem::path path;  // replay only

  // "record" or "replay:<path>". Throws ConfigError.
  static TranscriptSetting parse(const std::string& text);
};

// Owns every backend a command needs.
class BackendFactory {
 public:
  BackendFactory(const RunConfig& config, const TranscriptSetting& transcript);

  // nullptr when the role is not configured.
  ChatBackend* chat(const std::string& role);
  DecodingParams decoding(const std::string& role) const;
  EmbeddingBackend* embedder(const std::string& role);
  SearchBackend* search();
  Fetcher* fetcher();

 private:
  const RunConfig& config_;
  TranscriptSetting transcript_;
  std::shared_ptr<const Transcript> replay_;
  std::map<std::string, std::unique_ptr<ChatBackend>> chat_;
  std::map<std::string, std::unique_ptr<EmbeddingBackend>> embed_;
  std::unique_ptr<SearchBackend> search_;
  std::unique_ptr<Fetcher> fetcher_;
};

// Parses arguments and dispatches; returns the process exit code:
// 0 success, 2 data, 3 backend, 4 evaluation, 64 usage.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace mmfc::cli
