#include "fixtures.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mmfc/digest.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc::testing {

TempDir::TempDir() {
  auto tmpl = (std::filesystem::temp_directory_path() / "mmfc-test-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << contents;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticSpec& spec) {
  static const char* kLabels[] = {"Supported", "Refuted", "NEI"};
  std::vector<nlohmann::json> claims;
  std::vector<nlohmann::json> evidence;
  for (std::size_t i = 1; i <= spec.n_claims; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "c%03zu", i);
    const std::string cid = id;
    nlohmann::json claim{{"claim_id", cid},
                         {"text", "Claim number " + std::to_string(i) + " says the bridge opened in " +
                                      std::to_string(1990 + i % 30) + "."},
                         {"gold_verdict", kLabels[i % 3]},
                         {"gold_text_evidence", {cid + "-t1", cid + "-t2"}},
                         {"gold_image_evidence", nlohmann::json::array()},
                         {"factcheck_date", "2024-06-01"}};
    evidence.push_back({{"evidence_id", cid + "-t1"},
                        {"modality", "text"},
                        {"text", "Records show construction finished in " + std::to_string(1989 + i % 30) + "."}});
    evidence.push_back({{"evidence_id", cid + "-t2"},
                        {"modality", "text"},
                        {"text", "Officials for claim " + std::to_string(i) + " commented on the opening."},
                        {"publish_date", "2024-01-15"}});
    if (spec.image_period > 0 && i % spec.image_period != 0) {
      const auto rel = "images/" + cid + ".png";
      write_text(dir / rel, "\x89PNG synthetic image " + cid);
      evidence.push_back({{"evidence_id", cid + "-img"}, {"modality", "image"}, {"image_path", rel}});
      claim["gold_image_evidence"].push_back(cid + "-img");
    }
    claims.push_back(std::move(claim));
  }
  write_text(dir / "claims.jsonl", to_jsonl(claims));
  write_text(dir / "evidence.jsonl", to_jsonl(evidence));
}

BackendReply stub_reply(const ChatMessage& message, const DecodingParams&) {
  const auto text = message.text();
  const auto h = sha256_hex(text + (message.has_image() ? "+img" : ""));
  const unsigned bits = static_cast<unsigned>(std::stoul(h.substr(0, 6), nullptr, 16));
  if (text.find("Respond only with 'Yes'") != std::string::npos) return {bits % 2 ? "Yes" : "No.", 250.0};
  if (text.find("Respond only with your analysis.") != std::string::npos) {
    return {bits % 2 ? "The image shows the bridge itself, so it is necessary for verification."
                     : "The image only repeats the text; it is not necessary.",
            300.0};
  }
  if (text.find("summarize it into a single") != std::string::npos) {
    const auto doc = text.substr(text.find("Document:\n") + 10);
    return {doc.substr(0, doc.find('.') + 1), 100.0};
  }
  if (bits % 11 == 0) return {"I am unable to decide based on this.", 120.0};
  static const char* kVerdicts[] = {"Supported", "Refuted", "NEI"};
  return {"The evidence points one way.\nVerdict: " + std::string(kVerdicts[bits % 3]), 120.0};
}

Transcript record_stub_transcript(const std::vector<ChatMessage>& messages, const DecodingParams& params) {
  Transcript t;
  for (const auto& m : messages) {
    const auto reply = stub_reply(m, params);
    t.record({request_digest(m, params), reply.text, reply.latency_ms.value_or(0.0)});
  }
  return t;
}

}  // namespace mmfc::testing

namespace mmfc::testing {

namespace {

std::string page(const std::string& head, const std::string& body) {
  return "<html><head>" + head + "</head><body><nav>Home | News</nav><article>" + body +
         "</article><footer>Contact</footer></body></html>";
}

Date shift(const Date& d, int days) {
  return Date{std::chrono::sys_days(d) + std::chrono::days(days)};
}

}  // namespace

WebfcFixture make_webfc_fixture(std::size_t n_claims) {
  using namespace std::chrono;
  WebfcFixture fx;
  for (std::size_t i = 1; i <= n_claims; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "w%03zu", i);
    const std::string cid = id;
    const Date cutoff{year{2024}, month{static_cast<unsigned>(1 + i % 12)}, day{15}};
    SeedClaim seed;
    seed.claim.claim_id = cid;
    seed.claim.text = "Web claim " + cid + " about the harbour reopening.";
    seed.claim.gold_verdict = kAllVerdicts[i % 3];
    seed.claim.source = "webfc";
    seed.claim.factcheck_date = cutoff;
    fx.seeds.push_back(seed);

    std::size_t failures = i % 3;
    if (i % 6 == 0) failures = i % 12 == 0 ? 10 : 9;
    if (i % 6 == 1) failures = 8;
    fx.failures[cid] = failures;
    if (failures > kMaxFailedUrls) fx.expect_rejected.insert(cid);

    RawSearchResult raw;
    for (std::size_t j = 0; j < kDocSlots; ++j) {
      const auto url = "https://site" + std::to_string(j % 3) + ".example/" + cid + "/d" + std::to_string(j);
      const auto sentence = "<p>Report " + std::to_string(j) + " on " + cid + ". The harbour was discussed.</p>";
      RawHit hit{url, std::nullopt};
      if (j < failures) {
        if (j % 2 == 0) {
          fx.pages[url] = {false, "", "connection reset"};
        } else {
          fx.pages[url] = {true, "<html><body><script>var x = 1;</script></body></html>", ""};
        }
      } else {
        switch ((i + j) % 7) {
          case 0:  // engine date before cutoff
            hit.date = shift(cutoff, -10);
            fx.pages[url] = {true, page("", sentence), ""};
            break;
          case 1:  // same day as the fact-check
            hit.date = cutoff;
            fx.pages[url] = {true, page("", sentence), ""};
            break;
          case 2:  // after the cutoff
            hit.date = shift(cutoff, 30);
            fx.pages[url] = {true, page("", sentence), ""};
            break;
          case 3:  // no date anywhere
            fx.pages[url] = {true, page("<title>undated</title>", sentence), ""};
            break;
          case 4:  // meta date before cutoff
            fx.pages[url] = {true,
                             page("<meta property=\"article:published_time\" content=\"" +
                                      format_date(shift(cutoff, -3)) + "T08:00:00Z\">",
                                  sentence),
                             ""};
            break;
          case 5:  // meta date on the cutoff day
            fx.pages[url] = {true,
                             page("<meta name=\"date\" content=\"" + format_date(cutoff) + "\">", sentence),
                             ""};
            break;
          default:  // dateline after the cutoff
            fx.pages[url] = {true, page("", "<p>Published " + format_date(shift(cutoff, 2)) + ".</p>" + sentence),
                             ""};
            break;
        }
      }
      raw.docs.push_back(hit);
    }
    if (i % 4 != 0) {
      const auto url = "https://img.example/" + cid + ".png";
      std::optional<Date> date;
      if (i % 4 == 1) date = shift(cutoff, -40);
      if (i % 4 == 2) date = cutoff;
      raw.image = RawHit{url, date};
      fx.pages[url] = {true, "\x89PNG web image " + cid, ""};
    }
    fx.search[seed.claim.text] = raw;
  }
  return fx;
}

}  // namespace mmfc::testing
