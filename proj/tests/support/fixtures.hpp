#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mmfc/chat.hpp"
#include "mmfc/corpus.hpp"
#include "mmfc/webfc.hpp"

namespace mmfc::testing {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

// Claims c001..cNNN with two text sentences each and, for two claims in three,
// one image under images/. Labels cycle through the three verdicts.
struct SyntheticSpec {
  std::size_t n_claims = 20;
  std::size_t image_period = 3;  // claims i with i % period != 0 get an image
  DatasetFormat format = DatasetFormat::kMocheg;
};

void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticSpec& spec = {});

// Deterministic replies keyed on the prompt: Yes/No for necessity labels, a
// necessity sentence for analyses, the first sentence for summaries, and a
// justification plus verdict (or an unparseable answer for a few claims)
// for verifier prompts.
BackendReply stub_reply(const ChatMessage& message, const DecodingParams& params);

// Records every request the stub answers, for replay through
// ScriptedChatBackend.
Transcript record_stub_transcript(const std::vector<ChatMessage>& messages, const DecodingParams& params);

// Seeds plus scripted search results and pages. Each claim gets ten doc hits
// mixing pre-cutoff, same-day, post-cutoff, undated and failing URLs. Claims
// with i % 6 == 0 have nine or ten failures, claims with i % 6 == 1 exactly
// eight.
struct WebfcFixture {
  std::vector<SeedClaim> seeds;
  std::map<std::string, RawSearchResult> search;
  std::map<std::string, FetchResult> pages;
  std::set<std::string> expect_rejected;
  std::map<std::string, std::size_t> failures;
};

WebfcFixture make_webfc_fixture(std::size_t n_claims);

}  // namespace mmfc::testing
