#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "mmfc/errors.hpp"
#include "mmfc/evalkit.hpp"
#include "mmfc/jsonl.hpp"

namespace mmfc {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

nlohmann::json metrics_json(const RunMetrics& run) {
  const auto& r = run.result.report;
  nlohmann::json per_class = nlohmann::json::object();
  for (auto label : kAllVerdicts) {
    const auto& c = r.per_class[label_index(label)];
    per_class[std::string(to_string(label))] = {
        {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
  }
  return {{"run", run.name},       {"strategy", run.strategy},   {"config", run.config},
          {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1},    {"per_class", per_class},
          {"n", r.n_scored},        {"n_fallback", r.n_fallback}};
}

void emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir) {
  if (inputs.runs.empty()) throw std::invalid_argument("emit_report needs at least one run");
  std::set<std::string> names;
  for (const auto& run : inputs.runs) {
    if (!names.insert(run.name).second) throw std::invalid_argument("duplicate run name '" + run.name + "'");
  }
  try {
    std::filesystem::create_directories(out_dir);

    std::ostringstream comparison;
    comparison << "run,strategy,config,n,n_fallback,accuracy,macro_f1,f1_supported,f1_refuted,f1_nei\n";
    std::map<std::pair<std::string, std::string>, std::vector<const RunMetrics*>> groups;
    for (const auto& run : inputs.runs) {
      const auto dir = out_dir / run.name;
      std::filesystem::create_directories(dir);
      write_file_atomic(dir / "metrics.json", metrics_json(run).dump(2) + "\n");

      std::ostringstream confusion;
      confusion << "gold,pred,count\n";
      for (auto gold : kAllVerdicts) {
        for (auto pred : kAllVerdicts) {
          confusion << to_string(gold) << ',' << to_string(pred) << ',' << run.result.confusion.at(gold, pred) << '\n';
        }
      }
      write_file_atomic(dir / "confusion.csv", confusion.str());

      const auto& r = run.result.report;
      comparison << csv_field(run.name) << ',' << csv_field(run.strategy) << ',' << csv_field(run.config) << ','
                 << r.n_scored << ',' << r.n_fallback << ',' << format_fixed(r.accuracy, 3) << ','
                 << format_fixed(r.macro_f1, 3) << ',' << format_fixed(r.per_class[0].f1, 3) << ','
                 << format_fixed(r.per_class[1].f1, 3) << ',' << format_fixed(r.per_class[2].f1, 3) << '\n';
      groups[{run.strategy, run.config}].push_back(&run);
    }
    write_file_atomic(out_dir / "comparison.csv", comparison.str());

    std::ostringstream aggregate;
    aggregate << "strategy,config,runs,accuracy_mean,accuracy_se,macro_f1_mean,macro_f1_se\n";
    for (const auto& [key, runs] : groups) {
      std::vector<double> acc;
      std::vector<double> f1;
      for (const auto* r : runs) {
        acc.push_back(r->result.report.accuracy);
        f1.push_back(r->result.report.macro_f1);
      }
      const auto a = mean_se(acc);
      const auto f = mean_se(f1);
      aggregate << csv_field(key.first) << ',' << csv_field(key.second) << ',' << runs.size() << ','
                << format_fixed(a.mean, 3) << ',' << format_fixed(a.se, 3) << ',' << format_fixed(f.mean, 3) << ','
                << format_fixed(f.se, 3) << '\n';
    }
    write_file_atomic(out_dir / "aggregate.csv", aggregate.str());

    if (!inputs.tests.empty()) {
      std::ostringstream tests;
      tests << "name,test,statistic,p\n";
      for (const auto& t : inputs.tests) {
        tests << csv_field(t.name) << ',' << t.test << ',' << format_fixed(t.statistic, 4) << ','
              << format_fixed(t.p, 4) << '\n';
      }
      write_file_atomic(out_dir / "tests.csv", tests.str());
    }
    if (inputs.agreement_alpha) {
      write_file_atomic(out_dir / "agreement.json",
                        nlohmann::json{{"krippendorff_alpha_nominal", *inputs.agreement_alpha}}.dump(2) + "\n");
    }
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoFailure(e.what());
  }
}

}  // namespace mmfc
