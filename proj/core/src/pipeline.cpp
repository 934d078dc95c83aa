#include "mmfc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <ctime>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "mmfc/digest.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/jsonl.hpp"
#include "mmfc/parsers.hpp"
#include "mmfc/prompts.hpp"

namespace mmfc {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

EmbeddingVector embed_single(EmbeddingBackend& backend, Modality modality, const std::string& input) {
  try {
    std::vector<std::string> one{input};
    auto v = backend.embed(modality, one);
    if (v.size() != 1) throw BackendError("expected one vector");
    return std::move(v.front());
  } catch (const std::exception& e) {
    throw EmbeddingFailure("embedder '" + backend.tag() + "' failed: " + e.what());
  }
}

ChatResponse call_agent(const AgentRole& role, std::string_view role_name, const ChatMessage& msg,
                        const PipelineBackends& backends) {
  if (role.backend == nullptr) throw ConfigError("no backend configured for role '" + std::string(role_name) + "'");
  ChatCall call;
  call.role = std::string(role_name);
  call.transcript = backends.transcript;
  call.log = backends.log;
  call.retry = backends.retry;
  return chat_complete(*role.backend, msg, role.params, call);
}

Assessment necessity_assessment(const std::string& raw) {
  try {
    const auto label = parse_necessity(raw);
    return {label == NecessityLabel::kNecessary ? "Yes" : "No", label};
  } catch (const UnparseableNecessity&) {
    std::string_view t = raw;
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    return {std::string(t), std::nullopt};
  }
}

double image_claim_similarity(const ClaimRecord& claim, const EvidenceBundle& bundle,
                              const RetrievalResources& retrieval) {
  if (retrieval.image_embedder == nullptr) throw ConfigError("prefilter_threshold needs backend role 'embedder_image'");
  const auto claim_vec = embed_single(*retrieval.image_embedder, Modality::kText, claim.text);
  const EmbeddingVector* indexed = nullptr;
  if (retrieval.image_index && bundle.image_evidence_id) indexed = retrieval.image_index->find(*bundle.image_evidence_id);
  if (indexed) return cosine_similarity(claim_vec, *indexed);
  const auto image_vec = embed_single(*retrieval.image_embedder, Modality::kImage, bundle.image->string());
  return cosine_similarity(claim_vec, image_vec);
}

}  // namespace

// ---- EvidenceConfig / Strategy ------------------------------------------

std::string EvidenceConfig::id() const {
  std::string base;
  switch (kind) {
    case EvidenceConfigKind::kTextOnly:
      base = "text_only";
      break;
    case EvidenceConfigKind::kTextPlusGoldImage:
      base = "gold_image";
      break;
    case EvidenceConfigKind::kTextPlusRetrievedImage:
      base = "retrieved_image";
      break;
    case EvidenceConfigKind::kOracleEval:
      return "oracle";
  }
  if (text_source == TextSource::kRetrieved) base += ".retrieved_text";
  return base;
}

EvidenceConfig EvidenceConfig::parse(std::string_view text, TextSource text_source, std::size_t k_text) {
  EvidenceConfig c;
  c.text_source = text_source;
  c.k_text = k_text;
  auto base = text;
  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    if (text.substr(dot + 1) != "retrieved_text") throw ConfigError("unknown evidence config '" + std::string(text) + "'");
    c.text_source = TextSource::kRetrieved;
    base = text.substr(0, dot);
  }
  if (base == "text_only" || base == "1") {
    c.kind = EvidenceConfigKind::kTextOnly;
  } else if (base == "gold_image" || base == "2") {
    c.kind = EvidenceConfigKind::kTextPlusGoldImage;
  } else if (base == "retrieved_image" || base == "3") {
    c.kind = EvidenceConfigKind::kTextPlusRetrievedImage;
  } else if (base == "oracle" || base == "4") {
    c.kind = EvidenceConfigKind::kOracleEval;
  } else {
    throw ConfigError("unknown evidence config '" + std::string(text) +
                      "' (expected text_only, gold_image, retrieved_image)");
  }
  if (c.k_text == 0) throw ConfigError("k_text must be >= 1");
  return c;
}

std::string Strategy::id() const {
  switch (kind) {
    case StrategyKind::kAmufc:
      return "amufc";
    case StrategyKind::kLabelOnly:
      return "label_only";
    case StrategyKind::kPrefilterAnalyzer:
      return "prefilter_analyzer";
    case StrategyKind::kPrefilterThreshold:
      return "prefilter_threshold";
    case StrategyKind::kNoAnalyzer:
      return "no_analyzer";
    case StrategyKind::kUnifiedVerifier:
      return "unified_verifier";
    case StrategyKind::kVerifierCot:
      return "verifier_cot";
    case StrategyKind::kVerifierOnly:
      return "verifier_only";
  }
  return "amufc";
}

Strategy Strategy::parse(std::string_view text, double default_tau) {
  Strategy s;
  s.tau = default_tau;
  auto name = text;
  std::optional<std::string_view> arg;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    name = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  static const std::pair<std::string_view, StrategyKind> kNames[] = {
      {"amufc", StrategyKind::kAmufc},
      {"label_only", StrategyKind::kLabelOnly},
      {"prefilter_analyzer", StrategyKind::kPrefilterAnalyzer},
      {"prefilter_threshold", StrategyKind::kPrefilterThreshold},
      {"no_analyzer", StrategyKind::kNoAnalyzer},
      {"unified_verifier", StrategyKind::kUnifiedVerifier},
      {"verifier_cot", StrategyKind::kVerifierCot},
      {"verifier_only", StrategyKind::kVerifierOnly},
  };
  const auto it = std::find_if(std::begin(kNames), std::end(kNames), [&](const auto& p) { return p.first == name; });
  if (it == std::end(kNames)) throw ConfigError("unknown strategy '" + std::string(text) + "'");
  s.kind = it->second;
  if (arg) {
    if (s.kind != StrategyKind::kPrefilterThreshold) {
      throw ConfigError("strategy '" + std::string(name) + "' takes no argument");
    }
    try {
      std::size_t used = 0;
      s.tau = std::stod(std::string(*arg), &used);
      if (used != arg->size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("bad tau in '" + std::string(text) + "'");
    }
  }
  if (!(s.tau >= -1.0 && s.tau <= 1.0)) throw ConfigError("tau must lie in [-1, 1]");
  return s;
}

bool Strategy::uses_analyzer() const noexcept {
  return kind == StrategyKind::kAmufc || kind == StrategyKind::kLabelOnly || kind == StrategyKind::kPrefilterAnalyzer;
}

// ---- assemble_evidence --------------------------------------------------

EvidenceBundle assemble_evidence(const ClaimRecord& claim, const EvidenceConfig& config, const Dataset& dataset,
                                 const RetrievalResources& resources) {
  EvidenceBundle bundle;
  bundle.claim_id = claim.claim_id;
  bundle.selection_meta.config = config.id();
  bundle.selection_meta.text_source = config.text_source;
  bundle.selection_meta.gold_image_count = claim.gold_image_evidence.size();

  if (config.kind == EvidenceConfigKind::kOracleEval) {
    throw ConfigError("the oracle configuration is composed at evaluation time, not run");
  }

  if (config.text_source == TextSource::kGold) {
    for (const auto& id : claim.gold_text_evidence) {
      const auto* item = dataset.knowledge.find(id);
      if (item == nullptr) throw DanglingEvidenceRef(claim.claim_id, id);
      bundle.text_evidence.push_back(item->payload);
    }
  } else {
    if (resources.text_index == nullptr) throw MissingIndex("retrieved text evidence needs a text index");
    if (resources.text_embedder == nullptr) throw MissingIndex("retrieved text evidence needs an embedder_text backend");
    const auto query = embed_single(*resources.text_embedder, Modality::kText, claim.text);
    bundle.selection_meta.text_hits = top_k(query, *resources.text_index, config.k_text);
    for (const auto& hit : bundle.selection_meta.text_hits) {
      const auto* item = dataset.knowledge.find(hit.evidence_id);
      if (item == nullptr) throw DanglingEvidenceRef(claim.claim_id, hit.evidence_id);
      bundle.text_evidence.push_back(item->payload);
    }
  }

  switch (config.kind) {
    case EvidenceConfigKind::kTextOnly:
      break;
    case EvidenceConfigKind::kTextPlusGoldImage: {
      if (claim.gold_image_evidence.empty()) {
        bundle.selection_meta.gold_image_missing = true;
        break;
      }
      const auto& first = claim.gold_image_evidence.front();
      const auto* item = dataset.knowledge.find(first);
      if (item == nullptr) throw DanglingEvidenceRef(claim.claim_id, first);
      bundle.image_evidence_id = first;
      bundle.image = dataset.resolve_image(*item);
      break;
    }
    case EvidenceConfigKind::kTextPlusRetrievedImage: {
      if (resources.image_index == nullptr) throw MissingIndex("retrieved image evidence needs an image index");
      if (resources.image_embedder == nullptr) {
        throw MissingIndex("retrieved image evidence needs an embedder_image backend");
      }
      const auto query = embed_single(*resources.image_embedder, Modality::kText, claim.text);
      auto hits = top_k(query, *resources.image_index, 1);
      const auto* item = dataset.knowledge.find(hits.front().evidence_id);
      if (item == nullptr) throw DanglingEvidenceRef(claim.claim_id, hits.front().evidence_id);
      bundle.image_evidence_id = item->evidence_id;
      bundle.image = dataset.resolve_image(*item);
      bundle.selection_meta.image_hit = std::move(hits.front());
      break;
    }
    case EvidenceConfigKind::kOracleEval:
      break;
  }
  return bundle;
}

// ---- run_strategy -------------------------------------------------------

Prediction run_strategy(const ClaimRecord& claim, const EvidenceBundle& bundle, const Strategy& strategy,
                        const PipelineBackends& backends) {
  Prediction p;
  p.claim_id = claim.claim_id;
  p.strategy = strategy.id();
  p.config = bundle.selection_meta.config;

  const auto text = join_text_evidence(bundle.text_evidence);
  std::optional<std::filesystem::path> image = bundle.image;
  ChatMessage verifier_msg;

  switch (strategy.kind) {
    case StrategyKind::kAmufc: {
      std::optional<Assessment> analysis;
      if (image) {
        const auto a = call_agent(backends.analyzer, kAnalyzerRole, render_analyzer_prompt(claim.text, *image, text),
                                  backends);
        p.timing.analyzer_ms = a.latency_ms;
        analysis = Assessment{a.text, extract_necessity(a.text)};
        p.assessment = analysis;
      }
      verifier_msg = render_verifier_prompt(claim.text, image, analysis, text);
      break;
    }
    case StrategyKind::kLabelOnly: {
      std::optional<Assessment> analysis;
      if (image) {
        const auto a = call_agent(backends.analyzer, kAnalyzerRole,
                                  render_necessity_label_prompt(claim.text, *image, text), backends);
        p.timing.analyzer_ms = a.latency_ms;
        analysis = necessity_assessment(a.text);
        p.assessment = analysis;
      }
      verifier_msg = render_verifier_prompt(claim.text, image, analysis, text);
      break;
    }
    case StrategyKind::kPrefilterAnalyzer: {
      if (image) {
        const auto a = call_agent(backends.analyzer, kAnalyzerRole,
                                  render_necessity_label_prompt(claim.text, *image, text), backends);
        p.timing.analyzer_ms = a.latency_ms;
        p.assessment = necessity_assessment(a.text);
        // Unparseable labels keep the image.
        if (p.assessment->necessity == NecessityLabel::kUnnecessary) image.reset();
      }
      verifier_msg = render_verifier_prompt(claim.text, image, std::nullopt, text);
      break;
    }
    case StrategyKind::kPrefilterThreshold: {
      if (image) {
        const double sim = image_claim_similarity(claim, bundle, backends.retrieval);
        p.image_similarity = sim;
        if (sim < strategy.tau) image.reset();
      }
      verifier_msg = render_verifier_prompt(claim.text, image, std::nullopt, text);
      break;
    }
    case StrategyKind::kUnifiedVerifier:
      verifier_msg = image ? render_unified_prompt(claim.text, image, text)
                           : render_verifier_prompt(claim.text, std::nullopt, std::nullopt, text);
      break;
    case StrategyKind::kNoAnalyzer:
    case StrategyKind::kVerifierCot:
    case StrategyKind::kVerifierOnly:
      verifier_msg = render_verifier_prompt(claim.text, image, std::nullopt, text);
      break;
  }

  const auto v = call_agent(backends.verifier, kVerifierRole, verifier_msg, backends);
  p.raw_text = v.text;
  p.timing.verifier_ms = v.latency_ms;
  p.image_passed = verifier_msg.has_image();
  if (auto label = try_parse_verdict(v.text)) {
    p.verdict = *label;
    p.parse_status = ParseStatus::kOk;
  } else {
    p.verdict = VerdictLabel::kNei;
    p.parse_status = ParseStatus::kFallback;
  }
  if (strategy.kind == StrategyKind::kUnifiedVerifier && image) {
    auto analysis = analysis_before_verdict(v.text);
    auto necessity = extract_necessity(analysis);
    p.assessment = Assessment{std::move(analysis), necessity};
  }
  return p;
}

void validate_backends(std::span<const EvidenceConfig> configs, std::span<const Strategy> strategies,
                       const PipelineBackends& backends) {
  if (configs.empty() || strategies.empty()) throw ConfigError("need at least one (config, strategy) pair");
  for (const auto& s : strategies) {
    if (backends.verifier.backend == nullptr) {
      throw ConfigError("strategy '" + s.id() + "' needs backend role 'verifier'");
    }
    if (s.uses_analyzer() && backends.analyzer.backend == nullptr) {
      throw ConfigError("strategy '" + s.id() + "' needs backend role 'analyzer'");
    }
    if (s.uses_image_embedder() && backends.retrieval.image_embedder == nullptr) {
      throw ConfigError("strategy '" + s.id() + "' needs backend role 'embedder_image'");
    }
  }
  for (const auto& c : configs) {
    if (c.kind == EvidenceConfigKind::kOracleEval) {
      throw ConfigError("config 'oracle' is evaluation-only; run text_only, gold_image and retrieved_image instead");
    }
    if (c.kind == EvidenceConfigKind::kTextPlusRetrievedImage) {
      if (backends.retrieval.image_embedder == nullptr) {
        throw ConfigError("config '" + c.id() + "' needs backend role 'embedder_image'");
      }
      if (backends.retrieval.image_index == nullptr) throw MissingIndex("config '" + c.id() + "' needs an image index");
    }
    if (c.text_source == TextSource::kRetrieved) {
      if (backends.retrieval.text_embedder == nullptr) {
        throw ConfigError("config '" + c.id() + "' needs backend role 'embedder_text'");
      }
      if (backends.retrieval.text_index == nullptr) throw MissingIndex("config '" + c.id() + "' needs a text index");
    }
  }
}

std::string predictions_filename(const EvidenceConfig& config, const Strategy& strategy) {
  return config.id() + "__" + strategy.id() + ".jsonl";
}

// ---- manifest -----------------------------------------------------------

nlohmann::json RunManifest::to_json() const {
  nlohmann::json runs_json = nlohmann::json::array();
  nlohmann::json per_sample = nlohmann::json::object();
  for (const auto& r : runs) {
    nlohmann::json j{{"config", r.config},         {"strategy", r.strategy},   {"file", r.file},
                     {"n", r.n},                   {"n_fallback", r.n_fallback}, {"n_errors", r.n_errors},
                     {"per_sample_ms", r.per_sample_ms}, {"verifier_ms", r.verifier_ms}};
    if (r.analyzer_ms) j["analyzer_ms"] = *r.analyzer_ms;
    runs_json.push_back(std::move(j));
    per_sample[r.config + "__" + r.strategy] = r.per_sample_ms;
  }
  return {{"dataset_digest", dataset_digest},
          {"config", config},
          {"backend_tags", backend_tags},
          {"transcript_refs", transcript_refs},
          {"started", started},
          {"finished", finished},
          {"per_sample_ms", per_sample},
          {"runs", runs_json}};
}

std::string dataset_digest(const Dataset& dataset) {
  std::vector<nlohmann::json> claims;
  for (const auto& c : dataset.claims) claims.push_back(claim_to_json(c));
  std::vector<nlohmann::json> evidence;
  for (const auto& e : dataset.knowledge.items()) evidence.push_back(evidence_to_json(e));
  return sha256_hex(to_jsonl(claims) + '\x1e' + to_jsonl(evidence));
}

// ---- run_dataset --------------------------------------------------------

RunManifest run_dataset(const Dataset& dataset, std::span<const EvidenceConfig> configs,
                        std::span<const Strategy> strategies, const PipelineBackends& backends,
                        const RunOptions& options, const nlohmann::json& config_echo) {
  validate_backends(configs, strategies, backends);

  RunManifest manifest;
  manifest.started = utc_now();
  manifest.dataset_digest = dataset_digest(dataset);
  manifest.config = config_echo;
  if (backends.analyzer.backend) manifest.backend_tags["analyzer"] = backends.analyzer.backend->tag();
  if (backends.verifier.backend) manifest.backend_tags["verifier"] = backends.verifier.backend->tag();
  if (backends.retrieval.text_embedder) manifest.backend_tags["embedder_text"] = backends.retrieval.text_embedder->tag();
  if (backends.retrieval.image_embedder) {
    manifest.backend_tags["embedder_image"] = backends.retrieval.image_embedder->tag();
  }

  // Claims are written in claim-id order regardless of scheduling.
  std::vector<std::size_t> order(dataset.claims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return dataset.claims[a].claim_id < dataset.claims[b].claim_id; });

  const std::size_t n_pairs = configs.size() * strategies.size();
  std::vector<std::vector<Prediction>> results(n_pairs, std::vector<Prediction>(order.size()));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  const auto fail_pred = [](const ClaimRecord& claim, const EvidenceConfig& c, const Strategy& s, const Error& e) {
    Prediction p;
    p.claim_id = claim.claim_id;
    p.config = c.id();
    p.strategy = s.id();
    p.verdict = VerdictLabel::kNei;
    p.parse_status = ParseStatus::kFallback;
    p.error = e.kind() + ": " + e.what();
    return p;
  };

  const auto worker = [&] {
    while (!abort.load()) {
      const auto slot = next.fetch_add(1);
      if (slot >= order.size()) return;
      const auto& claim = dataset.claims[order[slot]];
      try {
        for (std::size_t ci = 0; ci < configs.size(); ++ci) {
          std::optional<EvidenceBundle> bundle;
          try {
            bundle = assemble_evidence(claim, configs[ci], dataset, backends.retrieval);
          } catch (const Error& e) {
            if (options.strict) throw;
            spdlog::warn("claim '{}' config '{}': {}", claim.claim_id, configs[ci].id(), e.what());
            for (std::size_t si = 0; si < strategies.size(); ++si) {
              results[ci * strategies.size() + si][slot] = fail_pred(claim, configs[ci], strategies[si], e);
            }
            continue;
          }
          for (std::size_t si = 0; si < strategies.size(); ++si) {
            auto& out = results[ci * strategies.size() + si][slot];
            try {
              out = run_strategy(claim, *bundle, strategies[si], backends);
            } catch (const Error& e) {
              if (options.strict) throw;
              spdlog::warn("claim '{}' {}/{}: {}", claim.claim_id, configs[ci].id(), strategies[si].id(), e.what());
              out = fail_pred(claim, configs[ci], strategies[si], e);
            }
          }
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(1, order.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  const auto pred_dir = options.out_dir / "predictions";
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    for (std::size_t si = 0; si < strategies.size(); ++si) {
      const auto& preds = results[ci * strategies.size() + si];
      const auto file = predictions_filename(configs[ci], strategies[si]);
      if (!options.out_dir.empty()) save_predictions(pred_dir / file, preds);

      RunSummary summary;
      summary.config = configs[ci].id();
      summary.strategy = strategies[si].id();
      summary.file = "predictions/" + file;
      summary.n = preds.size();
      double total = 0.0;
      double analyzer = 0.0;
      double verifier = 0.0;
      std::size_t timed = 0;
      std::size_t analyzed = 0;
      for (const auto& p : preds) {
        if (p.parse_status == ParseStatus::kFallback) ++summary.n_fallback;
        if (p.error) {
          ++summary.n_errors;
          continue;
        }
        ++timed;
        total += p.timing.total_ms();
        verifier += p.timing.verifier_ms;
        if (p.timing.analyzer_ms) {
          analyzer += *p.timing.analyzer_ms;
          ++analyzed;
        }
      }
      if (timed > 0) {
        summary.per_sample_ms = total / static_cast<double>(timed);
        summary.verifier_ms = verifier / static_cast<double>(timed);
        if (analyzed > 0) summary.analyzer_ms = analyzer / static_cast<double>(timed);
      }
      manifest.runs.push_back(std::move(summary));
    }
  }
  manifest.finished = utc_now();
  if (!options.out_dir.empty()) {
    write_file_atomic(options.out_dir / "run_manifest.json", manifest.to_json().dump(2) + "\n");
  }
  return manifest;
}

}  // namespace mmfc
