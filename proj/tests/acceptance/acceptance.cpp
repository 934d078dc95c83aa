// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "mmfc/embed_index.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/evalkit.hpp"
#include "mmfc/jsonl.hpp"
#include "mmfc/parsers.hpp"
#include "mmfc/pipeline.hpp"
#include "mmfc/prompts.hpp"
#include "mmfc/webfc.hpp"

using namespace mmfc;
using mmfc::testing::TempDir;

namespace {

// Tolerances and sizes, pinned.
constexpr int kRetrievalTrials = 200;
constexpr std::size_t kMaxIndexSize = 1000;
constexpr std::size_t kMaxDim = 64;
constexpr double kRetrievalBudgetS = 5.0;
constexpr int kScaleTrials = 100;
constexpr std::size_t kScaleTopK = 10;
constexpr int kOracleTrials = 100;
constexpr std::size_t kOracleClaims = 200;
constexpr double kMacroF1Fixture = 0.794;
constexpr double kMacroF1Tol = 0.001;
constexpr double kMannWhitneyP = 0.100;
constexpr double kMannWhitneyTol = 1e-9;
constexpr double kAlphaTol = 1e-6;
constexpr double kTau = 0.42;
constexpr std::size_t kDeterminismClaims = 20;
constexpr std::size_t kWebfcClaims = 30;
constexpr double kAnalyzerLatencyS = 1.420;
constexpr double kVerifierLatencyS = 0.111;
constexpr double kPerSampleS = 1.531;
constexpr double kTimingTol = 0.01;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) {
      out_.pass = false;
      out_.detail = what;
    }
  }
  Outcome done(std::string detail_if_pass) {
    if (out_.pass) out_.detail = std::move(detail_if_pass);
    return out_;
  }

 private:
  Outcome out_;
};

std::string fmt(double v, int decimals = 3) { return format_fixed(v, decimals); }

// ---- 1 ----------------------------------------------------------------

// Exhaustive reference in long double: score everything, sort by
// (score desc, id asc), cut at k.
std::vector<std::string> sort_oracle(const EmbeddingVector& q, const VectorIndex& index, std::size_t k) {
  std::vector<std::pair<long double, std::string>> all;
  const auto qa = q.values();
  for (const auto& e : index.entries()) {
    const auto b = e.vector.values();
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < qa.size(); ++i) {
      dot += static_cast<long double>(qa[i]) * b[i];
      na += static_cast<long double>(qa[i]) * qa[i];
      nb += static_cast<long double>(b[i]) * b[i];
    }
    all.emplace_back(dot / std::sqrt(na * nb), e.evidence_id);
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) ids.push_back(all[i].second);
  return ids;
}

std::vector<float> random_vector(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(dim);
  do {
    for (auto& x : v) x = g(rng);
  } while (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; }));
  return v;
}

// Random index with exact ties: some entries duplicate an earlier vector,
// possibly scaled by a power of two, under a different id.
VectorIndex random_index(std::mt19937& rng, std::size_t n, std::size_t dim) {
  VectorIndex index(Modality::kText, "random", dim);
  std::vector<std::vector<float>> made;
  std::vector<std::size_t> id_pool(n * 3);
  std::iota(id_pool.begin(), id_pool.end(), 0);
  std::shuffle(id_pool.begin(), id_pool.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v;
    if (!made.empty() && rng() % 5 == 0) {
      v = made[rng() % made.size()];
      const float scale = std::ldexp(1.0f, static_cast<int>(rng() % 5) - 2);
      for (auto& x : v) x *= scale;
    } else {
      v = random_vector(rng, dim);
    }
    made.push_back(v);
    index.add("e" + std::to_string(id_pool[i]), EmbeddingVector(v));
  }
  return index;
}

Outcome criterion_retrieval() {
  Check c;
  std::mt19937 rng(20240601);
  double elapsed = 0.0;
  for (int t = 0; t < kRetrievalTrials; ++t) {
    const std::size_t n = 1 + rng() % kMaxIndexSize;
    const std::size_t dim = 1 + rng() % kMaxDim;
    const auto index = random_index(rng, n, dim);
    const auto q = rng() % 3 == 0 ? index.entries()[rng() % n].vector : EmbeddingVector(random_vector(rng, dim));
    const std::size_t k = 1 + rng() % (rng() % 4 == 0 ? n + 5 : 20);
    const auto start = std::chrono::steady_clock::now();
    const auto hits = top_k(q, index, k);
    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<std::string> got;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      got.push_back(hits[i].evidence_id);
      c.expect(hits[i].rank == i + 1, "ranks not consecutive in trial " + std::to_string(t));
      if (i > 0) c.expect(hits[i].score <= hits[i - 1].score, "scores increase in trial " + std::to_string(t));
    }
    c.expect(got == sort_oracle(q, index, k), "mismatch with sort oracle in trial " + std::to_string(t));
  }
  c.expect(elapsed < kRetrievalBudgetS, "top_k took " + fmt(elapsed) + " s");
  return c.done(std::to_string(kRetrievalTrials) + " trials match, top_k time " + fmt(elapsed) + " s");
}

// ---- 2 ----------------------------------------------------------------

Outcome criterion_scale_invariance() {
  Check c;
  std::mt19937 rng(77);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int t = 0; t < kScaleTrials; ++t) {
    const std::size_t n = 1 + rng() % kMaxIndexSize;
    const std::size_t dim = 2 + rng() % (kMaxDim - 1);
    VectorIndex base(Modality::kImage, "r", dim);
    VectorIndex scaled(Modality::kImage, "r", dim);
    for (std::size_t i = 0; i < n; ++i) {
      EmbeddingVector v(random_vector(rng, dim));
      scaled.add("e" + std::to_string(i), v.scaled(scale(rng)));
      base.add("e" + std::to_string(i), std::move(v));
    }
    const EmbeddingVector q(random_vector(rng, dim));
    std::vector<std::string> a, b;
    for (const auto& h : top_k(q, base, kScaleTopK)) a.push_back(h.evidence_id);
    for (const auto& h : top_k(q, scaled, kScaleTopK)) b.push_back(h.evidence_id);
    c.expect(a == b, "top-" + std::to_string(kScaleTopK) + " changed under scaling in trial " + std::to_string(t));
  }
  return c.done(std::to_string(kScaleTrials) + " trials, top-" + std::to_string(kScaleTopK) + " id sequences unchanged");
}

// ---- 3 ----------------------------------------------------------------

Outcome criterion_oracle_dominance() {
  Check c;
  std::mt19937 rng(3);
  int covered_trials = 0;
  for (int t = 0; t < kOracleTrials; ++t) {
    GoldLabels gold;
    std::vector<std::vector<Prediction>> runs(3);
    const bool cover_all = t % 2 == 0;
    std::size_t some_correct = 0;
    for (std::size_t i = 0; i < kOracleClaims; ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "k%04zu", i);
      const auto g = kAllVerdicts[rng() % 3];
      gold[id] = g;
      bool any = false;
      const std::size_t forced = cover_all ? rng() % 3 : 3;
      for (std::size_t r = 0; r < 3; ++r) {
        Prediction p;
        p.claim_id = id;
        p.config = "cfg" + std::to_string(r);
        p.verdict = r == forced ? g : kAllVerdicts[rng() % 3];
        any = any || p.verdict == g;
        runs[r].push_back(std::move(p));
      }
      some_correct += any;
    }
    for (auto& r : runs) std::shuffle(r.begin(), r.end(), rng);
    const auto oracle = oracle_compose(runs, gold);
    double best = 0.0;
    for (const auto& r : runs) best = std::max(best, score(r, gold).report.accuracy);
    const double acc = oracle.score.report.accuracy;
    c.expect(acc >= best, "oracle below a component in trial " + std::to_string(t));
    c.expect(acc == static_cast<double>(some_correct) / kOracleClaims,
             "oracle accuracy differs from the per-claim count in trial " + std::to_string(t));
    if (cover_all) {
      ++covered_trials;
      c.expect(acc == 1.0, "oracle below 1.0 with full coverage in trial " + std::to_string(t));
    }
  }
  return c.done(std::to_string(kOracleTrials) + " trials dominate; " + std::to_string(covered_trials) +
                " full-coverage trials at 1.0");
}

// ---- 4 ----------------------------------------------------------------

std::vector<Prediction> predictions_for(const std::array<std::array<std::size_t, 3>, 3>& counts, GoldLabels& gold) {
  std::vector<Prediction> out;
  int n = 0;
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < counts[g][p]; ++k) {
        Prediction pr;
        pr.claim_id = "m" + std::to_string(n++);
        pr.verdict = kAllVerdicts[p];
        gold[pr.claim_id] = kAllVerdicts[g];
        out.push_back(std::move(pr));
      }
    }
  }
  return out;
}

Outcome criterion_metrics() {
  Check c;
  GoldLabels gold;
  // Rows gold S/R/N, columns predicted S/R/N. F1: 4/6, 6/7, 6/7.
  const auto preds = predictions_for({{{2, 1, 0}, {0, 3, 0}, {1, 0, 3}}}, gold);
  const auto r = score(preds, gold).report;
  c.expect(format_fixed(r.accuracy, 3) == "0.800", "accuracy " + fmt(r.accuracy, 6));
  c.expect(std::abs(r.macro_f1 - kMacroF1Fixture) <= kMacroF1Tol, "macro F1 " + fmt(r.macro_f1, 6));
  GoldLabels gold2;
  const auto perfect = score(predictions_for({{{4, 0, 0}, {0, 3, 0}, {0, 0, 5}}}, gold2), gold2).report;
  c.expect(perfect.accuracy == 1.0 && perfect.macro_f1 == 1.0, "all-correct fixture not exactly 1.0/1.0");
  return c.done("accuracy " + fmt(r.accuracy) + ", macro F1 " + fmt(r.macro_f1, 4) + "; all-correct 1.0/1.0");
}

// ---- 5 ----------------------------------------------------------------

Outcome criterion_statistics() {
  Check c;
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto mw = mann_whitney_u(a, b);
  c.expect(mw.exact, "Mann-Whitney did not use the exact distribution");
  c.expect(std::abs(mw.p - kMannWhitneyP) <= kMannWhitneyTol, "Mann-Whitney p " + fmt(mw.p, 12));
  const auto chi = chi_square_independence({{{25, 25}, {25, 25}}});
  c.expect(chi.statistic == 0.0 && chi.p == 1.0, "chi-square on uniform table: " + fmt(chi.statistic, 6) + ", p " +
                                                      fmt(chi.p, 6));
  const double perfect = krippendorff_alpha_nominal({{"Necessary", "Necessary"},
                                                     {"Unnecessary", "Unnecessary"},
                                                     {"Necessary", "Necessary"},
                                                     {"Unnecessary", "Unnecessary"}});
  c.expect(perfect == 1.0, "perfect agreement alpha " + fmt(perfect, 9));
  // Coincidences: o_AA = 4, o_BB = 2, o_AB = o_BA = 1; n_A = 5, n_B = 3, n = 8.
  // alpha = 1 - (n - 1) * 2 / (2 * n_A * n_B) = 1 - 14/30 = 8/15.
  const double four = krippendorff_alpha_nominal({{"A", "A"}, {"A", "A"}, {"B", "B"}, {"A", "B"}});
  c.expect(std::abs(four - 8.0 / 15.0) <= kAlphaTol, "4-item alpha " + fmt(four, 9));
  return c.done("MW p " + fmt(mw.p, 9) + ", chi2 " + fmt(chi.statistic) + " p " + fmt(chi.p) + ", alpha 1.0 and " +
                fmt(four, 6));
}

// ---- 6 ----------------------------------------------------------------

struct RoutingRig {
  TempDir dir;
  Dataset ds;
  std::shared_ptr<Transcript> script = std::make_shared<Transcript>();
  ScriptedChatBackend analyzer{"scripted-analyzer", script};
  ScriptedChatBackend verifier{"scripted-verifier", script};
  RequestLog log;
  PipelineBackends backends;

  RoutingRig() {
    mmfc::testing::write_synthetic_dataset(dir.path(), {.n_claims = 6});
    ds = load_dataset(dir.path(), DatasetFormat::kMocheg);
    backends.analyzer = {&analyzer, {}};
    backends.verifier = {&verifier, {}};
    backends.log = &log;
  }

  std::string text_of(const ClaimRecord& c) const {
    std::vector<std::string> sentences;
    for (const auto& id : c.gold_text_evidence) sentences.push_back(ds.knowledge.find(id)->payload);
    return join_text_evidence(sentences);
  }
  std::optional<std::filesystem::path> image_of(const ClaimRecord& c) const {
    if (c.gold_image_evidence.empty()) return std::nullopt;
    return ds.resolve_image(*ds.knowledge.find(c.gold_image_evidence[0]));
  }
  std::string script_reply(const ChatMessage& m, const std::string& reply) {
    const auto d = request_digest(m, {});
    script->record({d, reply, 1.0});
    return d;
  }
  Prediction run(const ClaimRecord& c, const Strategy& s) {
    const auto bundle = assemble_evidence(c, {EvidenceConfigKind::kTextPlusGoldImage}, ds, backends.retrieval);
    return run_strategy(c, bundle, s, backends);
  }
  std::vector<std::string> digests(std::string_view role) const {
    std::vector<std::string> out;
    for (const auto& r : log.records_for(role)) out.push_back(r.digest);
    return out;
  }
};

Outcome criterion_routing() {
  Check c;
  const auto amufc = Strategy::parse("amufc");
  const std::string analysis = "The photo shows the opened bridge, so it is necessary.";

  {  // (a) AMuFC
    RoutingRig rig;
    std::vector<std::string> want_analyzer, want_verifier;
    for (const auto& claim : rig.ds.claims) {
      const auto image = rig.image_of(claim);
      const auto text = rig.text_of(claim);
      if (image) {
        want_analyzer.push_back(rig.script_reply(render_analyzer_prompt(claim.text, *image, text), analysis));
        want_verifier.push_back(rig.script_reply(
            render_verifier_prompt(claim.text, image, Assessment{analysis, NecessityLabel::kNecessary}, text),
            "Verdict: Supported"));
      } else {
        want_verifier.push_back(
            rig.script_reply(render_verifier_prompt(claim.text, std::nullopt, std::nullopt, text), "Verdict: NEI"));
      }
    }
    for (const auto& claim : rig.ds.claims) rig.run(claim, amufc);
    c.expect(rig.digests("analyzer") == want_analyzer, "(a) analyzer digests differ");
    c.expect(rig.digests("verifier") == want_verifier, "(a) verifier digests differ");
    const auto recs = rig.log.records_for("verifier");
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const bool has_candidate = rig.image_of(rig.ds.claims[i]).has_value();
      const bool has_analysis = recs[i].text.find("Image Analysis:") != std::string::npos;
      c.expect(recs[i].has_image == has_candidate && has_analysis == has_candidate,
               "(a) image/analysis presence wrong for " + rig.ds.claims[i].claim_id);
    }
  }
  {  // (b) PrefilterAnalyzer, scripted "No"
    RoutingRig rig;
    const auto& claim = rig.ds.claims[0];
    const auto text = rig.text_of(claim);
    rig.script_reply(render_necessity_label_prompt(claim.text, *rig.image_of(claim), text), "No");
    const auto want =
        rig.script_reply(render_verifier_prompt(claim.text, std::nullopt, std::nullopt, text), "Verdict: Refuted");
    const auto p = rig.run(claim, Strategy::parse("prefilter_analyzer"));
    c.expect(rig.digests("verifier") == std::vector<std::string>{want}, "(b) verifier digest differs");
    c.expect(!rig.log.records_for("verifier")[0].has_image && !p.image_passed, "(b) image reached the verifier");
  }
  {  // (c) PrefilterThreshold at 0.42
    RoutingRig rig;
    const auto& low = *rig.ds.find_claim("c001");
    const auto& high = *rig.ds.find_claim("c002");
    VectorIndex images(Modality::kImage, "clip", 2);
    images.add("c001-img", EmbeddingVector({0.30f, std::sqrt(1.0f - 0.30f * 0.30f)}));
    images.add("c002-img", EmbeddingVector({0.50f, std::sqrt(1.0f - 0.50f * 0.50f)}));
    ScriptedEmbeddingBackend clip("clip", {{Modality::kText, low.text, {1, 0}}, {Modality::kText, high.text, {1, 0}}});
    rig.backends.retrieval.image_index = &images;
    rig.backends.retrieval.image_embedder = &clip;
    const auto want_low = rig.script_reply(
        render_verifier_prompt(low.text, std::nullopt, std::nullopt, rig.text_of(low)), "Verdict: NEI");
    const auto want_high = rig.script_reply(
        render_verifier_prompt(high.text, rig.image_of(high), std::nullopt, rig.text_of(high)), "Verdict: NEI");
    const auto strategy = Strategy::parse("prefilter_threshold", kTau);
    const auto p_low = rig.run(low, strategy);
    const auto p_high = rig.run(high, strategy);
    c.expect(rig.digests("verifier") == std::vector<std::string>{want_low, want_high}, "(c) verifier digests differ");
    c.expect(!p_low.image_passed && std::abs(*p_low.image_similarity - 0.30) < 1e-6, "(c) 0.30 was not dropped");
    c.expect(p_high.image_passed && std::abs(*p_high.image_similarity - 0.50) < 1e-6, "(c) 0.50 was not kept");
  }
  {  // (d) NoAnalyzer
    RoutingRig rig;
    std::vector<std::string> want;
    for (const auto& claim : rig.ds.claims) {
      want.push_back(rig.script_reply(
          render_verifier_prompt(claim.text, rig.image_of(claim), std::nullopt, rig.text_of(claim)),
          "Verdict: Supported"));
    }
    for (const auto& claim : rig.ds.claims) rig.run(claim, Strategy::parse("no_analyzer"));
    c.expect(rig.log.count("analyzer") == 0, "(d) analyzer was called");
    c.expect(rig.digests("verifier") == want, "(d) verifier digests differ");
  }
  return c.done("(a) analysis iff image, (b) 'No' strips image, (c) tau 0.42 drops 0.30 keeps 0.50, (d) 0 analyzer calls");
}

// ---- 7 ----------------------------------------------------------------

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return files;
}

Outcome criterion_determinism() {
  Check c;
  TempDir dir;
  mmfc::testing::write_synthetic_dataset(dir / "data", {.n_claims = kDeterminismClaims});
  const auto ds = load_dataset(dir / "data", DatasetFormat::kMocheg);
  const std::vector<EvidenceConfig> configs{{EvidenceConfigKind::kTextOnly}, {EvidenceConfigKind::kTextPlusGoldImage}};
  const std::vector<Strategy> strategies{Strategy::parse("amufc"), Strategy::parse("label_only"),
                                         Strategy::parse("prefilter_analyzer"), Strategy::parse("unified_verifier"),
                                         Strategy::parse("no_analyzer")};
  // Record once, then replay for every run.
  auto script = std::make_shared<Transcript>();
  {
    CallbackChatBackend stub("stub", mmfc::testing::stub_reply);
    PipelineBackends rec;
    rec.analyzer = {&stub, {}};
    rec.verifier = {&stub, {}};
    rec.transcript = script.get();
    run_dataset(ds, configs, strategies, rec, {.parallelism = 4, .out_dir = dir / "record"});
  }
  ScriptedChatBackend analyzer("scripted", script);
  ScriptedChatBackend verifier("scripted", script);
  PipelineBackends backends;
  backends.analyzer = {&analyzer, {}};
  backends.verifier = {&verifier, {}};
  const auto gold = gold_labels(ds);

  std::vector<std::map<std::string, std::string>> outputs;
  std::size_t fallbacks = 0;
  for (std::size_t parallelism : {1, 8, 1, 8}) {
    const auto out = dir / ("run" + std::to_string(outputs.size()));
    const auto manifest = run_dataset(ds, configs, strategies, backends, {.parallelism = parallelism, .out_dir = out});
    ReportInputs inputs;
    for (const auto& r : manifest.runs) {
      const auto preds = load_predictions(out / r.file);
      c.expect(r.n_errors == 0, "errors in " + r.file);
      fallbacks += r.n_fallback;
      inputs.runs.push_back({r.config + "__" + r.strategy, r.strategy, r.config, score(preds, gold)});
    }
    emit_report(inputs, out / "report");
    auto files = snapshot(out);
    files.erase("run_manifest.json");  // carries wall-clock start/finish stamps
    outputs.push_back(std::move(files));
  }
  std::size_t n_files = 0;
  for (const auto& [name, bytes] : outputs[0]) {
    if (name.rfind("predictions/", 0) == 0) ++n_files;
  }
  c.expect(n_files == configs.size() * strategies.size(), "unexpected number of prediction files");
  for (std::size_t i = 1; i < outputs.size(); ++i) {
    c.expect(outputs[i] == outputs[0], "run " + std::to_string(i) + " differs from run 0");
  }
  return c.done(std::to_string(n_files) + " prediction files and reports byte-identical across 4 runs (p=1,8,1,8; " +
                std::to_string(fallbacks / 4) + " fallbacks each)");
}

// ---- 8 ----------------------------------------------------------------

Outcome criterion_webfc() {
  Check c;
  auto fx = mmfc::testing::make_webfc_fixture(kWebfcClaims);
  ScriptedSearchBackend search(fx.search);
  ScriptedFetcher fetcher(fx.pages);
  CallbackChatBackend summarizer("stub", mmfc::testing::stub_reply);

  std::size_t boundary = 0;
  for (const auto& seed : fx.seeds) {
    const auto bundle = fetch_bundle(seed.claim, search_claim(seed.claim, search), fetcher);
    const bool expect_reject = fx.expect_rejected.contains(seed.claim.claim_id);
    c.expect((admit_claim(bundle) == Admission::kReject) == expect_reject,
             "admission wrong for " + seed.claim.claim_id);
    if (fx.failures[seed.claim.claim_id] == kMaxFailedUrls) ++boundary;
  }
  c.expect(boundary > 0, "fixture has no 8-failure claim");

  TempDir out;
  const auto report = build_webfc(fx.seeds, {&search, &fetcher, &summarizer}, out.path(), {.parallelism = 6});
  c.expect(report.post_cutoff_dropped > 0 && report.undated_dropped > 0 && report.images_dropped > 0,
           "fixture did not exercise the temporal filter");
  std::set<std::string> rejected;
  for (const auto& r : report.rejections) rejected.insert(r.claim_id);
  c.expect(rejected == fx.expect_rejected, "rejected set differs from the fixtures with > 8 failures");

  const auto ds = load_dataset(out.path(), DatasetFormat::kWebfc);
  std::size_t late = 0, undated = 0, items = 0;
  for (const auto& claim : ds.claims) {
    std::vector<std::string> ids = claim.gold_text_evidence;
    ids.insert(ids.end(), claim.gold_image_evidence.begin(), claim.gold_image_evidence.end());
    for (const auto& id : ids) {
      const auto* item = ds.knowledge.find(id);
      ++items;
      if (!item->publish_date) {
        ++undated;
      } else if (!(*item->publish_date < *claim.factcheck_date)) {
        ++late;
      }
    }
  }
  c.expect(items == ds.knowledge.size(), "evidence items not attached to claims");
  c.expect(late == 0, std::to_string(late) + " items dated on or after the cutoff");
  c.expect(undated == 0, std::to_string(undated) + " undated items");
  return c.done(std::to_string(ds.claims.size()) + " admitted, " + std::to_string(rejected.size()) + " rejected (" +
                std::to_string(boundary) + " at the 8-failure boundary admitted); " + std::to_string(items) +
                " items, 0 late, 0 undated");
}

// ---- 9 ----------------------------------------------------------------

Outcome criterion_parsers() {
  Check c;
  const std::vector<std::pair<std::string, VerdictLabel>> tokens{
      {"Supported", VerdictLabel::kSupported},
      {"REFUTED", VerdictLabel::kRefuted},
      {"nei", VerdictLabel::kNei},
      {"Not Enough Information", VerdictLabel::kNei}};
  const std::vector<std::string> prefixes{"", "Verdict: ", "After weighing both sources, my answer is ",
                                          "**Final label** -> ", "\n\nThe image adds little.\nLabel:\t"};
  const std::vector<std::string> suffixes{"", ".\n", " (the evidence is consistent with the photo)"};
  std::size_t single = 0;
  for (const auto& [tok, label] : tokens) {
    for (const auto& p : prefixes) {
      for (const auto& s : suffixes) {
        ++single;
        const auto got = try_parse_verdict(p + tok + s);
        c.expect(got == label, "single-token case failed: '" + p + tok + s + "'");
      }
    }
  }
  c.expect(single == 60, "single-token suite has " + std::to_string(single) + " cases");

  const std::vector<std::pair<std::string, VerdictLabel>> multi{
      {"Supported? No. Refuted.", VerdictLabel::kRefuted},
      {"It is not Refuted; it is Supported", VerdictLabel::kSupported},
      {"Supported or Refuted? NEI", VerdictLabel::kNei},
      {"NEI at first, but finally: Supported", VerdictLabel::kSupported},
      {"Refuted\nRefuted\nNot enough information", VerdictLabel::kNei},
      {"Verdict: Supported\nCorrection - Verdict: Refuted", VerdictLabel::kRefuted},
      {"not enough information... actually SUPPORTED", VerdictLabel::kSupported},
      {"Label: NEI. Some might say Refuted.", VerdictLabel::kRefuted},
      {"(Supported) (Refuted) (Supported)", VerdictLabel::kSupported},
      {"refuted, refuted, nei, supported, refuted", VerdictLabel::kRefuted}};
  for (const auto& [text, label] : multi) c.expect(try_parse_verdict(text) == label, "multi-label case failed: " + text);

  // Unparseable replies route through the pipeline as NEI fallbacks.
  TempDir dir;
  mmfc::testing::write_synthetic_dataset(dir.path(), {.n_claims = 3});
  const auto ds = load_dataset(dir.path(), DatasetFormat::kMocheg);
  const std::vector<std::string> junk{"",
                                      "I cannot decide.",
                                      "unsupported irrefutable neither",
                                      std::string(5000, '?'),
                                      std::string("\0\xff\xfe binary", 10),
                                      "Verdicts: S/R/N"};
  std::size_t fallbacks = 0;
  for (const auto& reply : junk) {
    CallbackChatBackend verifier("junk", [&](const ChatMessage&, const DecodingParams&) {
      return BackendReply{reply, 1.0};
    });
    PipelineBackends b;
    b.verifier = {&verifier, {}};
    try {
      const auto& claim = ds.claims[0];
      const auto p = run_strategy(claim, assemble_evidence(claim, {EvidenceConfigKind::kTextOnly}, ds, {}),
                                  Strategy::parse("verifier_only"), b);
      c.expect(p.verdict == VerdictLabel::kNei && p.parse_status == ParseStatus::kFallback,
               "junk reply not mapped to NEI fallback");
      fallbacks += p.parse_status == ParseStatus::kFallback;
    } catch (const std::exception& e) {
      c.expect(false, std::string("junk reply raised: ") + e.what());
    }
  }
  return c.done("60/60 single-token, 10/10 last-occurrence, " + std::to_string(fallbacks) + "/" +
                std::to_string(junk.size()) + " junk replies fell back to NEI");
}

// ---- 10 ---------------------------------------------------------------

Outcome criterion_timing() {
  Check c;
  TempDir dir;
  // Every claim has an image, so AMuFC calls both agents.
  mmfc::testing::write_synthetic_dataset(dir / "data", {.n_claims = 4, .image_period = 1000});
  const auto ds = load_dataset(dir / "data", DatasetFormat::kMocheg);
  const auto sleep_for = [](double seconds, std::string reply) {
    return [seconds, reply](const ChatMessage&, const DecodingParams&) {
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
      return BackendReply{reply, std::nullopt};
    };
  };
  CallbackChatBackend analyzer("sleep-analyzer", sleep_for(kAnalyzerLatencyS, "The image is necessary."));
  CallbackChatBackend verifier("sleep-verifier", sleep_for(kVerifierLatencyS, "Verdict: Supported"));
  PipelineBackends b;
  b.analyzer = {&analyzer, {}};
  b.verifier = {&verifier, {}};
  const std::vector<EvidenceConfig> configs{{EvidenceConfigKind::kTextPlusGoldImage}};
  const std::vector<Strategy> strategies{Strategy::parse("amufc")};
  run_dataset(ds, configs, strategies, b, {.parallelism = 4, .out_dir = dir / "out"});
  const auto manifest = nlohmann::json::parse(read_file(dir / "out/run_manifest.json"));
  const auto& run = manifest.at("runs").at(0);
  const double per_sample_s = run.at("per_sample_ms").get<double>() / 1000.0;
  const double analyzer_s = run.at("analyzer_ms").get<double>() / 1000.0;
  const double verifier_s = run.at("verifier_ms").get<double>() / 1000.0;
  c.expect(std::abs(per_sample_s - kPerSampleS) <= kTimingTol, "per-sample " + fmt(per_sample_s, 4) + " s");
  return c.done("per-sample " + fmt(per_sample_s, 4) + " s = analyzer " + fmt(analyzer_s, 4) + " + verifier " +
                fmt(verifier_s, 4));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "retrieval correctness", criterion_retrieval},
      {2, "scale invariance", criterion_scale_invariance},
      {3, "oracle dominance", criterion_oracle_dominance},
      {4, "metric oracle", criterion_metrics},
      {5, "statistics oracles", criterion_statistics},
      {6, "routing contract", criterion_routing},
      {7, "end-to-end determinism", criterion_determinism},
      {8, "WebFC temporal soundness", criterion_webfc},
      {9, "parser robustness", criterion_parsers},
      {10, "timing instrumentation", criterion_timing},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << cr.id << " [PRIMARY] " << cr.name << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed;
}
