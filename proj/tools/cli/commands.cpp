#include <algorithm>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "mmfc/errors.hpp"
#include "mmfc/evalkit.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc::cli {

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  std::size_t parallelism = 0;  // 0: take from config
  bool strict = false;
  std::string transcript;
  std::string log_level = "warn";
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    auto item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

RunConfig load_config(const GlobalOptions& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : RunConfig::load(g.config);
  if (!g.out.empty()) c.out = g.out;
  if (g.parallelism > 0) c.parallelism = g.parallelism;
  if (g.strict) c.strict = true;
  return c;
}

std::filesystem::path require_out(const RunConfig& c) {
  if (c.out.empty()) throw ConfigError("no output directory; pass --out or set 'out' in the config");
  return c.out;
}

void save_recorded(const TranscriptSetting& t, const Transcript& recorded, const std::filesystem::path& out) {
  if (t.mode != TranscriptMode::kRecord) return;
  recorded.save(out / "transcript.jsonl");
  if (recorded.conflicts() > 0) {
    spdlog::warn("{} nondeterministic responses were seen; the first of each was kept", recorded.conflicts());
  }
}

// ---- convert ------------------------------------------------------------

int cmd_convert(const std::string& src, const std::string& format_tag, const GlobalOptions& g) {
  const auto format = parse_format_tag(format_tag);
  if (g.out.empty()) throw ConfigError("convert needs --out");
  const std::filesystem::path out(g.out);
  auto ds = load_dataset(src, format);
  std::filesystem::create_directories(out);
  const bool same_dir = std::filesystem::exists(out) && std::filesystem::equivalent(ds.root, out);
  if (!same_dir) {
    for (const auto& item : ds.knowledge.items()) {
      if (item.modality != Modality::kImage) continue;
      const auto dst = out / item.payload;
      std::filesystem::create_directories(dst.parent_path());
      std::filesystem::copy_file(ds.root / item.payload, dst, std::filesystem::copy_options::overwrite_existing);
    }
  }
  save_dataset(ds, out);
  nlohmann::json report{{"format", to_string(format)},
                        {"claims", ds.report.claims},
                        {"text_items", ds.report.text_items},
                        {"image_items", ds.report.image_items},
                        {"warnings", ds.report.warnings}};
  write_file_atomic(out / "convert_report.json", report.dump(2) + "\n");
  std::cout << "converted " << ds.report.claims << " claims, " << ds.report.text_items << " text and "
            << ds.report.image_items << " image evidence items\n";
  return 0;
}

// ---- index --------------------------------------------------------------

int cmd_index(const std::string& dataset_dir, const std::string& format_tag, const std::string& modality_tag,
              const std::string& vectors, const std::string& index_file, std::size_t batch, const GlobalOptions& g) {
  const auto modality = parse_modality(modality_tag);
  RunConfig config = load_config(g);
  const std::filesystem::path data = dataset_dir.empty() ? config.dataset : std::filesystem::path(dataset_dir);
  if (data.empty()) throw ConfigError("index needs --dataset or a config with 'dataset'");
  const auto format = format_tag.empty() ? config.format : parse_format_tag(format_tag);
  auto ds = load_dataset(data, format);
  const auto items = ds.knowledge.items_of(modality);
  if (items.empty()) throw ConfigError("dataset has no " + std::string(to_string(modality)) + " evidence to index");

  const std::string role = modality == Modality::kText ? "embedder_text" : "embedder_image";
  std::unique_ptr<EmbeddingBackend> owned;
  EmbeddingBackend* backend = nullptr;
  BackendFactory factory(config, {});
  if (!vectors.empty()) {
    owned = std::make_unique<ScriptedEmbeddingBackend>("scripted:" + std::filesystem::path(vectors).filename().string(),
                                                       vectors);
    backend = owned.get();
  } else {
    backend = factory.embedder(role);
  }
  if (backend == nullptr) throw ConfigError("index needs --vectors or backend role '" + role + "' in the config");

  std::filesystem::path target = index_file;
  if (target.empty()) target = require_out(config) / (std::string(to_string(modality)) + ".idx");
  BuildIndexOptions options;
  options.batch_size = batch;
  options.image_root = ds.root;
  const auto index = build_index(items, *backend, options);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  index.save(target);
  std::cout << "indexed " << index.size() << " " << to_string(modality) << " items (dim " << index.dim() << ") -> "
            << target.string() << "\n";
  return 0;
}

// ---- run ----------------------------------------------------------------

int cmd_run(const std::string& strategies_flag, const std::string& configs_flag, std::optional<double> tau_flag,
            const GlobalOptions& g) {
  if (g.config.empty()) throw ConfigError("run needs --config");
  RunConfig config = load_config(g);
  if (!strategies_flag.empty()) config.strategies = split_csv(strategies_flag);
  if (!configs_flag.empty()) config.configs = split_csv(configs_flag);
  if (tau_flag) config.tau = *tau_flag;
  if (config.strategies.empty()) config.strategies = {"amufc"};
  if (config.configs.empty()) config.configs = {"gold_image"};
  if (config.dataset.empty()) throw ConfigError("config has no 'dataset'");
  const auto out = require_out(config);

  std::vector<Strategy> strategies;
  for (const auto& s : config.strategies) strategies.push_back(Strategy::parse(s, config.tau));
  std::vector<EvidenceConfig> configs;
  for (const auto& c : config.configs) configs.push_back(EvidenceConfig::parse(c, config.text_source, config.k_text));

  const auto transcript = TranscriptSetting::parse(g.transcript);
  BackendFactory factory(config, transcript);
  PipelineBackends backends;
  backends.analyzer = {factory.chat("analyzer"), factory.decoding("analyzer")};
  backends.verifier = {factory.chat("verifier"), factory.decoding("verifier")};
  backends.retrieval.text_embedder = factory.embedder("embedder_text");
  backends.retrieval.image_embedder = factory.embedder("embedder_image");

  // Indexes are loaded only after the cheap configuration checks pass.
  std::optional<VectorIndex> text_index;
  std::optional<VectorIndex> image_index;
  const bool needs_text = std::any_of(configs.begin(), configs.end(),
                                      [](const auto& c) { return c.text_source == TextSource::kRetrieved; });
  const bool needs_image = std::any_of(configs.begin(), configs.end(), [](const auto& c) {
    return c.kind == EvidenceConfigKind::kTextPlusRetrievedImage;
  });
  {
    PipelineBackends probe = backends;
    static const VectorIndex kPlaceholder(Modality::kText, "placeholder", 1);
    if (needs_text && config.text_index) probe.retrieval.text_index = &kPlaceholder;
    if (needs_image && config.image_index) probe.retrieval.image_index = &kPlaceholder;
    validate_backends(configs, strategies, probe);
  }
  if (needs_text) {
    text_index = VectorIndex::load(*config.text_index);
    backends.retrieval.text_index = &*text_index;
  }
  if (needs_image || config.image_index) {
    if (config.image_index) {
      image_index = VectorIndex::load(*config.image_index);
      backends.retrieval.image_index = &*image_index;
    }
  }

  Transcript recorded;
  if (transcript.mode == TranscriptMode::kRecord) backends.transcript = &recorded;

  const auto dataset = load_dataset(config.dataset, config.format);
  RunOptions options;
  options.parallelism = config.parallelism;
  options.strict = config.strict;
  options.out_dir = out;
  std::filesystem::create_directories(out);

  auto echo = config.to_json();
  echo["transcript_mode"] = g.transcript.empty() ? "live" : g.transcript;
  auto manifest = run_dataset(dataset, configs, strategies, backends, options, echo);
  if (transcript.mode == TranscriptMode::kReplay) manifest.transcript_refs.push_back(transcript.path.string());
  for (const auto& t : config.transcripts) manifest.transcript_refs.push_back(t.string());
  if (transcript.mode == TranscriptMode::kRecord) {
    save_recorded(transcript, recorded, out);
    manifest.transcript_refs.push_back((out / "transcript.jsonl").string());
  }
  write_file_atomic(out / "run_manifest.json", manifest.to_json().dump(2) + "\n");

  std::size_t errors = 0;
  for (const auto& r : manifest.runs) {
    errors += r.n_errors;
    std::cout << r.file << ": " << r.n << " predictions, " << r.n_fallback << " fallback, " << r.n_errors
              << " errors, " << format_fixed(r.per_sample_ms / 1000.0, 3) << " s/sample\n";
  }
  if (errors > 0) spdlog::warn("{} per-claim failures recorded in the prediction files", errors);
  return 0;
}

// ---- webfc --------------------------------------------------------------

int cmd_webfc(const std::string& seed, const GlobalOptions& g) {
  if (g.config.empty()) throw ConfigError("webfc needs --config naming search, fetcher and summarizer backends");
  RunConfig config = load_config(g);
  const auto out = require_out(config);
  const auto transcript = TranscriptSetting::parse(g.transcript);
  BackendFactory factory(config, transcript);
  WebfcBackends backends;
  backends.search = factory.search();
  backends.fetcher = factory.fetcher();
  backends.summarizer = factory.chat("summarizer");
  backends.summarizer_params = factory.decoding("summarizer");
  if (backends.search == nullptr) throw ConfigError("webfc needs backend role 'search'");
  if (backends.fetcher == nullptr) throw ConfigError("webfc needs backend role 'fetcher'");
  if (backends.summarizer == nullptr) throw ConfigError("webfc needs backend role 'summarizer'");
  Transcript recorded;
  if (transcript.mode == TranscriptMode::kRecord) backends.transcript = &recorded;

  const auto seeds = load_seed(seed);
  WebfcBuildOptions options;
  options.parallelism = config.parallelism;
  const auto report = build_webfc(seeds, backends, out, options);
  save_recorded(transcript, recorded, out);
  std::cout << "admitted " << report.admitted << ", rejected " << report.rejected << " (undated dropped "
            << report.undated_dropped << ", post-cutoff dropped " << report.post_cutoff_dropped << ")\n";
  if (report.admitted == 0) throw ConfigError("no claim was admitted; see build_report.json");
  return 0;
}

// ---- eval ---------------------------------------------------------------

struct LoadedRun {
  std::string name;
  std::vector<Prediction> predictions;
};

LoadedRun load_run(const std::string& file, std::set<std::string>& names) {
  LoadedRun r;
  r.predictions = load_predictions(file);
  const auto stem = std::filesystem::path(file).stem().string();
  r.name = stem;
  for (int k = 2; !names.insert(r.name).second; ++k) r.name = stem + ".run" + std::to_string(k);
  return r;
}

std::string run_field(const std::vector<Prediction>& preds, std::string Prediction::*field, const std::string& dflt) {
  return preds.empty() ? dflt : preds.front().*field;
}

int cmd_eval(const std::vector<std::string>& pred_files, const std::vector<std::string>& oracle_sets,
             const std::string& gold_dir, const std::string& format_tag, const std::string& agreement,
             const GlobalOptions& g) {
  RunConfig config = load_config(g);
  const auto out = require_out(config);
  if (pred_files.empty() && oracle_sets.empty() && agreement.empty()) {
    throw ConfigError("eval needs --pred, --oracle or --agreement");
  }
  ReportInputs inputs;
  std::set<std::string> names;

  if (!pred_files.empty() || !oracle_sets.empty()) {
    const std::filesystem::path gold_path = gold_dir.empty() ? config.dataset : std::filesystem::path(gold_dir);
    if (gold_path.empty()) throw ConfigError("eval needs --gold");
    const auto format = format_tag.empty() ? config.format : parse_format_tag(format_tag);
    const auto gold = gold_labels(load_dataset(gold_path, format));

    for (const auto& f : pred_files) {
      auto run = load_run(f, names);
      inputs.runs.push_back({run.name, run_field(run.predictions, &Prediction::strategy, ""),
                             run_field(run.predictions, &Prediction::config, ""), score(run.predictions, gold)});
    }

    // Per-config accuracies across repeated oracle sets, for significance tests.
    std::vector<double> oracle_acc;
    std::vector<std::vector<double>> component_acc(3);
    std::vector<std::string> component_names(3);
    for (const auto& set : oracle_sets) {
      const auto files = split_csv(set);
      if (files.size() != 3) throw ConfigError("--oracle expects three comma-separated prediction files");
      std::vector<std::vector<Prediction>> runs;
      for (const auto& f : files) runs.push_back(load_predictions(f));
      auto composed = oracle_compose(runs, gold);
      for (std::size_t i = 0; i < 3; ++i) {
        component_acc[i].push_back(score(runs[i], gold).report.accuracy);
        component_names[i] = run_field(runs[i], &Prediction::config, "config" + std::to_string(i + 1));
      }
      oracle_acc.push_back(composed.score.report.accuracy);
      const auto strategy = run_field(runs[0], &Prediction::strategy, "");
      std::string name = "oracle__" + strategy;
      for (int k = 2; !names.insert(name).second; ++k) name = "oracle__" + strategy + ".run" + std::to_string(k);
      inputs.runs.push_back({name, strategy, "oracle", std::move(composed.score)});
    }
    if (oracle_sets.size() >= 2) {
      for (std::size_t i = 0; i < 3; ++i) {
        const auto mw = mann_whitney_u(oracle_acc, component_acc[i]);
        inputs.tests.push_back({"oracle_vs_" + component_names[i] + " (accuracy)", "mann_whitney", mw.u, mw.p});
      }
    }
  }

  if (!agreement.empty()) {
    const auto annotations = load_annotations(agreement);
    inputs.agreement_alpha = krippendorff_alpha_nominal(annotations);
    std::cout << "krippendorff alpha (nominal): " << format_fixed(*inputs.agreement_alpha, 3) << "\n";
    try {
      const auto chi = chi_square_independence(category_necessity_table(annotations));
      inputs.tests.push_back({"claim_category_x_necessity", "chi_square", chi.statistic, chi.p});
    } catch (const DegenerateTable&) {
      spdlog::warn("category/necessity table has an empty row or column; chi-square skipped");
    }
  }

  if (inputs.runs.empty()) {
    std::filesystem::create_directories(out);
    if (inputs.agreement_alpha) {
      write_file_atomic(out / "agreement.json",
                        nlohmann::json{{"krippendorff_alpha_nominal", *inputs.agreement_alpha}}.dump(2) + "\n");
    }
    if (!inputs.tests.empty()) {
      std::string csv = "name,test,statistic,p\n";
      for (const auto& t : inputs.tests) {
        csv += t.name + "," + t.test + "," + format_fixed(t.statistic, 4) + "," + format_fixed(t.p, 4) + "\n";
      }
      write_file_atomic(out / "tests.csv", csv);
    }
    return 0;
  }
  emit_report(inputs, out);
  for (const auto& r : inputs.runs) {
    std::cout << r.name << ": acc " << format_fixed(r.result.report.accuracy, 3) << ", macro F1 "
              << format_fixed(r.result.report.macro_f1, 3) << " (n=" << r.result.report.n_scored << ")\n";
  }
  return 0;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("mmfc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Adaptive multimodal fact verification: datasets, indexes, runs, WebFC construction, evaluation",
               "mmfc"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--parallelism", g.parallelism, "Concurrent claims (overrides config)")->check(CLI::PositiveNumber);
  app.add_flag("--strict", g.strict, "Abort on the first per-claim failure");
  app.add_option("--transcript", g.transcript, "record | replay:<path>");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  auto* convert = app.add_subcommand("convert", "Validate a dataset and write it in canonical form");
  std::string src;
  std::string format_tag;
  convert->add_option("--src", src, "Source dataset directory")->required();
  convert->add_option("--format", format_tag, "mocheg, finfact or webfc")->required();

  auto* index = app.add_subcommand("index", "Embed one modality of the knowledge source into an index file");
  std::string dataset_dir;
  std::string index_format;
  std::string modality = "text";
  std::string vectors;
  std::string index_file;
  std::size_t batch = 32;
  index->add_option("--dataset", dataset_dir, "Canonical dataset directory");
  index->add_option("--format", index_format, "Dataset format tag");
  index->add_option("--modality", modality, "text or image")->check(CLI::IsMember({"text", "image"}));
  index->add_option("--vectors", vectors, "Precomputed vectors (JSON lines) instead of a configured embedder");
  index->add_option("--index-file", index_file, "Output file (default <out>/<modality>.idx)");
  index->add_option("--batch", batch, "Embedding batch size")->check(CLI::PositiveNumber);

  auto* run_cmd = app.add_subcommand("run", "Run strategies over a dataset");
  std::string strategies;
  std::string configs;
  std::optional<double> tau;
  run_cmd->add_option("--strategies", strategies, "Comma-separated strategy ids (overrides config)");
  run_cmd->add_option("--configs", configs, "Comma-separated evidence configurations (overrides config)");
  run_cmd->add_option("--tau", tau, "Prefilter similarity threshold");

  auto* webfc = app.add_subcommand("webfc", "Build a temporally filtered web-evidence dataset");
  std::string seed;
  webfc->add_option("--seed", seed, "Seed claims (JSON lines)")->required();

  auto* eval = app.add_subcommand("eval", "Score prediction files and write reports");
  std::vector<std::string> preds;
  std::vector<std::string> oracle;
  std::string gold;
  std::string eval_format;
  std::string agreement;
  eval->add_option("--pred", preds, "Prediction files");
  eval->add_option("--oracle", oracle, "Three comma-separated prediction files for configs 1,2,3 (repeatable)");
  eval->add_option("--gold", gold, "Canonical dataset directory holding gold verdicts");
  eval->add_option("--format", eval_format, "Dataset format tag");
  eval->add_option("--agreement", agreement, "Annotation file; reports Krippendorff's alpha");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code_for(ErrorCategory::kUsage);
  }

  if (!spdlog::get("mmfc")) setup_logging(g.log_level);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (convert->parsed()) return cmd_convert(src, format_tag, g);
    if (index->parsed()) return cmd_index(dataset_dir, index_format, modality, vectors, index_file, batch, g);
    if (run_cmd->parsed()) return cmd_run(strategies, configs, tau, g);
    if (webfc->parsed()) return cmd_webfc(seed, g);
    if (eval->parsed()) return cmd_eval(preds, oracle, gold, eval_format, agreement, g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: IoFailure: " << e.what() << "\n";
    return exit_code_for(ErrorCategory::kData);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: ConfigError: " << e.what() << "\n";
    return exit_code_for(ErrorCategory::kUsage);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code_for(ErrorCategory::kUsage);
}

}  // namespace mmfc::cli
