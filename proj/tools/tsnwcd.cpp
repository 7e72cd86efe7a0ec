// tsnwcd: command-line front end for generation, analysis, simulation,
// prompting and scoring. Exit codes: 0 ok, 1 domain error, 2 usage error.

#include <algorithm>
#include <cctype>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <variant>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsnwcd/bundle.hpp"
#include "tsnwcd/completion.hpp"
#include "tsnwcd/evalharness.hpp"
#include "tsnwcd/parallel.hpp"
#include "tsnwcd/pipeline.hpp"
#include "tsnwcd/shaper_sim.hpp"
#include "tsnwcd/testgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsnwcd;

namespace {

int verbosity = 0;

void log(int level, const std::string& message) {
  if (verbosity >= level) std::cerr << (level >= 2 ? "[debug] " : "[info] ") << message << '\n';
}

std::optional<net::Mechanism> mechanism_of(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::string up = text;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  return net::parse_mechanism(up);
}

net::TestCase load(const std::string& dir, const std::string& mechanism) {
  net::TestCase tc = net::load_testcase(dir);
  log(1, "loaded " + tc.name + ": " + std::to_string(tc.flows.size()) + " flows");
  if (auto m = mechanism_of(mechanism)) tc = pipeline::with_mechanism(std::move(tc), *m);
  return tc;
}

std::vector<net::FlowId> flow_ids(const eval::TruthSet& truth) {
  std::vector<net::FlowId> ids;
  for (const auto& [id, v] : truth.wcd_us) ids.push_back(id);
  return ids;
}

json cmd_gen(const std::string& manifest, const std::string& out, unsigned jobs) {
  auto specs = gen::load_manifest(manifest);
  log(1, "generating " + std::to_string(specs.size()) + " test cases with " + std::to_string(jobs) + " jobs");
  gen::generate_corpus(specs, out, jobs);
  return {{"testcases", specs.size()}, {"out", out}};
}

json cmd_analyze(const std::string& tc_dir, const std::string& mechanism, const std::string& out, unsigned jobs,
                 const std::string& curves_dir, bool* failed) {
  if (!pipeline::is_bundle_dir(tc_dir)) {
    if (!curves_dir.empty()) throw Error("--dump-curves needs a single test case");
    auto results = pipeline::analyze_corpus(tc_dir, out, mechanism_of(mechanism), jobs);
    json errors = json::object();
    for (const auto& r : results) {
      if (r.error) {
        errors[r.testcase] = *r.error;
        std::cerr << "tsnwcd: " << r.testcase << ": " << *r.error << '\n';
      } else {
        log(2, "wrote " + r.output.string());
      }
    }
    *failed = !errors.empty();
    return {{"testcases", results.size()}, {"failed", errors}, {"out", out}};
  }
  net::TestCase tc = load(tc_dir, mechanism);
  json report = pipeline::analyze(tc);
  pipeline::write_json(out, report);
  if (!curves_dir.empty()) pipeline::dump_curves(tc, curves_dir);
  double worst = 0;
  for (const auto& f : report["flows"]) worst = std::max(worst, f["wcd_us"].get<double>());
  return {{"testcase", tc.name},
          {"mechanism", report["mechanism"]},
          {"flows", report["flows"].size()},
          {"max_wcd_us", worst},
          {"out", out}};
}

json cmd_sim(const std::string& tc_dir, const std::string& mechanism, std::uint64_t seed, double horizon,
             const std::string& release, bool best_effort, const std::string& trace_port, const std::string& trace_csv,
             const std::string& out) {
  net::TestCase tc = load(tc_dir, mechanism);
  sim::SimConfig cfg;
  cfg.seed = seed;
  cfg.horizon_us = rational_from_double(horizon);
  cfg.release_policy = sim::parse_release_policy(release);
  cfg.best_effort = best_effort;
  if (!trace_port.empty()) {
    auto arrow = trace_port.find("->");
    if (arrow == std::string::npos) throw Error("--trace-port expects <node>-><next>");
    cfg.trace_port = net::Port{trace_port.substr(0, arrow), trace_port.substr(arrow + 2)};
  }
  auto report = sim::simulate(tc, cfg);
  pipeline::write_json(out, sim::report_json(report, cfg));
  if (!trace_csv.empty()) net::write_file(trace_csv, sim::trace_csv(report.credit_trace));
  double worst = 0;
  for (const auto& [id, d] : report.max_delay_us) worst = std::max(worst, to_double(d));
  return {{"testcase", tc.name}, {"flows", report.max_delay_us.size()}, {"max_delay_us", worst}, {"out", out}};
}

json cmd_prompt(const std::string& tc_dir, const std::string& mechanism, const std::string& out) {
  net::TestCase tc = load(tc_dir, mechanism);
  std::string prompt = eval::build_open_prompt(tc, tc.mechanism);
  net::write_file(out, prompt);
  return {{"testcase", tc.name}, {"bytes", prompt.size()}, {"out", out}};
}

json cmd_query(const std::string& tc_dir, const std::string& mechanism, const std::string& endpoint,
               const std::string& out, const std::string& prediction_out, bool* failed) {
  net::TestCase tc = load(tc_dir, mechanism);
  auto config = eval::endpoint_from_json(pipeline::read_json(endpoint));
  auto result = eval::fetch_completion(config, eval::build_open_prompt(tc, tc.mechanism));
  eval::PredictionSet p;
  std::vector<net::FlowId> ids;
  for (const auto& f : tc.flows) ids.push_back(f.id);
  p = eval::prediction_from_fetch(result, tc.name, ids);
  json summary{{"testcase", tc.name}, {"failure_mode", std::string(eval::to_string(p.failure_mode))}};
  if (const auto* ok = std::get_if<eval::Completion>(&result)) {
    net::write_file(out, ok->text);
    summary["latency_ms"] = ok->latency_ms;
    summary["attempts"] = ok->attempts;
    summary["out"] = out;
  } else {
    const auto& f = std::get<eval::FetchFailure>(result);
    std::cerr << "tsnwcd: request failed (" << eval::to_string(f.kind) << "): " << f.message << '\n';
    summary["error"] = std::string(eval::to_string(f.kind));
    *failed = true;
  }
  if (!prediction_out.empty()) pipeline::write_json(prediction_out, eval::prediction_to_json(p));
  return summary;
}

json cmd_score(const std::string& truth_dir, const std::string& pred_dir, const std::string& out,
               std::size_t min_tcs, const std::string& per_tc) {
  std::map<std::string, eval::TruthSet> truths;
  for (const auto& e : fs::directory_iterator(truth_dir)) {
    if (e.path().extension() != ".json") continue;
    auto t = eval::truth_from_json(pipeline::read_json(e.path()));
    std::string name = t.testcase;
    if (!truths.emplace(name, std::move(t)).second) throw Error("duplicate ground truth for '" + name + "'");
  }
  std::vector<fs::path> pred_files;
  for (const auto& e : fs::directory_iterator(pred_dir)) {
    if (e.is_regular_file()) pred_files.push_back(e.path());
  }
  std::sort(pred_files.begin(), pred_files.end());
  std::vector<eval::PredictionSet> preds;
  std::set<std::string> seen;
  for (const auto& path : pred_files) {
    // <testcase>.txt, <testcase>.json or <testcase>.<run>.txt
    std::string file = path.filename().string();
    std::string name = file.substr(0, file.find('.'));
    auto it = truths.find(name);
    if (it == truths.end()) throw Error(path.string() + ": no ground truth for test case '" + name + "'");
    preds.push_back(eval::parse_prediction(net::read_file(path), name, flow_ids(it->second)));
    log(2, file + ": " + std::string(eval::to_string(preds.back().failure_mode)));
    seen.insert(name);
  }
  for (const auto& [name, t] : truths) {
    if (seen.count(name)) continue;
    eval::PredictionSet missing;
    missing.testcase = name;
    missing.diagnostics.push_back("no prediction file");
    preds.push_back(std::move(missing));
  }
  std::vector<eval::TruthSet> truth_list;
  for (auto& [name, t] : truths) truth_list.push_back(t);
  auto score = eval::score_open(preds, truth_list, {min_tcs, eval::kCoverageThreshold});
  json predictions = json::array();
  for (const auto& p : preds) predictions.push_back(eval::prediction_to_json(p));
  pipeline::write_json(out, {{"open", eval::open_score_json(score)}, {"predictions", predictions}});
  if (!per_tc.empty()) net::write_file(per_tc, eval::per_tc_csv(score));
  json summary{{"testcases", score.total_tcs}, {"answered", score.answered_tcs}, {"suppressed", score.suppressed()},
               {"out", out}};
  summary["mae_us"] = score.mae ? json(score.mae->mean) : json(nullptr);
  summary["mape_pct"] = score.mape ? json(score.mape->mean) : json(nullptr);
  return summary;
}

json cmd_score_mcqa(const std::string& items_path, const std::string& runs_path, const std::string& out,
                    std::size_t bins, const std::string& reliability) {
  auto items = eval::load_items(net::read_file(items_path));
  auto records = eval::load_records(net::read_file(runs_path));
  auto score = eval::score_mcqa(items, records);
  std::vector<std::string> diagnostics;
  auto samples = eval::calibration_samples(items, records, &diagnostics);
  for (const auto& d : diagnostics) log(1, d);
  json metrics{{"mcqa", eval::mcqa_score_json(score)}, {"calibration", nullptr},
               {"calibration_diagnostics", diagnostics}};
  json summary{{"items", score.items_scored}, {"accuracy_pct", score.accuracy_pct},
               {"consistency", score.consistency}, {"out", out}};
  if (!samples.empty()) {
    auto cal = eval::calibration(samples, bins);
    metrics["calibration"] = eval::calibration_json(cal);
    summary["ece"] = cal.ece;
    summary["brier"] = cal.brier;
    summary["cw_rate_pct"] = cal.cw_rate_pct ? json(*cal.cw_rate_pct) : json(nullptr);
    if (!reliability.empty()) net::write_file(reliability, eval::reliability_csv(cal.bins));
  }
  pipeline::write_json(out, metrics);
  return summary;
}

json cmd_report(const std::string& metrics_path, const std::string& reliability, const std::string& per_tc) {
  json metrics = pipeline::read_json(metrics_path);
  json summary{{"metrics", metrics_path}};
  if (!reliability.empty()) {
    if (!metrics.contains("calibration") || metrics["calibration"].is_null()) {
      throw Error(metrics_path + " has no calibration block");
    }
    net::write_file(reliability, eval::reliability_csv(metrics["calibration"]));
    summary["reliability_csv"] = reliability;
  }
  if (!per_tc.empty()) {
    if (!metrics.contains("open")) throw Error(metrics_path + " has no open-ended block");
    net::write_file(per_tc, eval::per_tc_csv(metrics["open"]));
    summary["per_tc_csv"] = per_tc;
  }
  if (metrics.contains("open")) {
    summary["mae_us"] = metrics["open"]["mae_us"];
    summary["mape_pct"] = metrics["open"]["mape_pct"];
  }
  if (metrics.contains("mcqa")) summary["accuracy_pct"] = metrics["mcqa"]["accuracy_pct"];
  if (metrics.contains("calibration") && !metrics["calibration"].is_null()) {
    summary["ece"] = metrics["calibration"]["ece"];
  }
  return summary;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TSN worst-case delay toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; flags take precedence");
  app.add_flag("-v,--verbose", verbosity, "Log progress to stderr (repeat for more)");

  const auto mechanisms = CLI::IsMember({"cbs", "cqf"}, CLI::ignore_case);
  std::function<json()> action;
  bool failed = false;

  std::string manifest, out, tc_dir, mechanism, curves_dir, release = "synchronized", trace_port, trace_csv;
  std::string endpoint, prediction_out, truth_dir, pred_dir, per_tc, items, runs, reliability, metrics;
  unsigned jobs = default_jobs();
  std::uint64_t seed = 1;
  double horizon = 50000;
  bool best_effort = false;
  std::size_t min_tcs = 50, bins = 10;

  auto* gen = app.add_subcommand("gen", "Generate test-case bundles from a manifest");
  gen->add_option("--manifest", manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--jobs", jobs, "Parallel jobs")->check(CLI::PositiveNumber);
  gen->callback([&] { action = [&] { return cmd_gen(manifest, out, jobs); }; });

  auto* analyze = app.add_subcommand("analyze", "Compute ground-truth worst-case delays");
  analyze->add_option("--tc", tc_dir, "Bundle directory, or a directory of bundles")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--mechanism", mechanism, "cbs or cqf (default: the bundle's)")->check(mechanisms);
  analyze->add_option("--out", out, "Report JSON, or output directory for a corpus")->required();
  analyze->add_option("--jobs", jobs, "Parallel jobs for a corpus")->check(CLI::PositiveNumber);
  analyze->add_option("--dump-curves", curves_dir, "Write per-port arrival and service curves (CBS)");
  analyze->callback([&] { action = [&] { return cmd_analyze(tc_dir, mechanism, out, jobs, curves_dir, &failed); }; });

  auto* simulate = app.add_subcommand("sim", "Run the discrete-event simulator");
  simulate->add_option("--tc", tc_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  simulate->add_option("--mechanism", mechanism, "cbs or cqf (default: the bundle's)")->check(mechanisms);
  simulate->add_option("--seed", seed, "Seed for jittered releases");
  simulate->add_option("--horizon", horizon, "Release horizon in us")->check(CLI::PositiveNumber);
  simulate->add_option("--release", release, "synchronized or jittered")
      ->check(CLI::IsMember({"synchronized", "jittered"}));
  simulate->add_flag("--best-effort", best_effort, "Add a saturating best-effort source behind CBS ports");
  simulate->add_option("--trace-port", trace_port, "Record the credit of <node>-><next>");
  simulate->add_option("--trace-csv", trace_csv, "Credit trace output (t_us,credit_bits)");
  simulate->add_option("--out", out, "Simulation report JSON")->required();
  simulate->callback([&] {
    action = [&] { return cmd_sim(tc_dir, mechanism, seed, horizon, release, best_effort, trace_port, trace_csv, out); };
  });

  auto* prompt = app.add_subcommand("prompt", "Build the open-ended question prompt");
  prompt->add_option("--tc", tc_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  prompt->add_option("--mechanism", mechanism, "cbs or cqf (default: the bundle's)")->check(mechanisms);
  prompt->add_option("--out", out, "Prompt text file")->required();
  prompt->callback([&] { action = [&] { return cmd_prompt(tc_dir, mechanism, out); }; });

  auto* query = app.add_subcommand("query", "Send the prompt to a chat-completion endpoint");
  query->add_option("--tc", tc_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  query->add_option("--mechanism", mechanism, "cbs or cqf (default: the bundle's)")->check(mechanisms);
  query->add_option("--endpoint", endpoint, "Endpoint config JSON")->required()->check(CLI::ExistingFile);
  query->add_option("--out", out, "Raw response text")->required();
  query->add_option("--prediction", prediction_out, "Parsed prediction JSON");
  query->callback([&] { action = [&] { return cmd_query(tc_dir, mechanism, endpoint, out, prediction_out, &failed); }; });

  auto* score = app.add_subcommand("score", "Score open-ended predictions against ground truth");
  score->add_option("--truth-dir", truth_dir, "Directory of analysis reports")->required()->check(CLI::ExistingDirectory);
  score->add_option("--pred-dir", pred_dir, "Directory of raw model outputs")->required()->check(CLI::ExistingDirectory);
  score->add_option("--out", out, "Metrics JSON")->required();
  score->add_option("--min-tcs", min_tcs, "Answered test cases needed to report an aggregate");
  score->add_option("--per-tc-csv", per_tc, "Per-test-case metrics CSV");
  score->callback([&] { action = [&] { return cmd_score(truth_dir, pred_dir, out, min_tcs, per_tc); }; });

  auto* mcqa = app.add_subcommand("score-mcqa", "Score multiple-choice runs and calibration");
  mcqa->add_option("--items", items, "Items JSON")->required()->check(CLI::ExistingFile);
  mcqa->add_option("--runs", runs, "Run records JSONL")->required()->check(CLI::ExistingFile);
  mcqa->add_option("--out", out, "Metrics JSON")->required();
  mcqa->add_option("--bins", bins, "Calibration bins")->check(CLI::PositiveNumber);
  mcqa->add_option("--reliability-csv", reliability, "Reliability-bin CSV");
  mcqa->callback([&] { action = [&] { return cmd_score_mcqa(items, runs, out, bins, reliability); }; });

  auto* report = app.add_subcommand("report", "Emit CSV data from a metrics file");
  report->add_option("--metrics", metrics, "Metrics JSON")->required()->check(CLI::ExistingFile);
  report->add_option("--reliability-csv", reliability, "Reliability-bin CSV");
  report->add_option("--per-tc-csv", per_tc, "Per-test-case metrics CSV");
  report->callback([&] { action = [&] { return cmd_report(metrics, reliability, per_tc); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string command = app.get_subcommands().front()->get_name();
  json summary;
  try {
    summary = action();
    summary["ok"] = !failed;
  } catch (const std::exception& e) {
    std::cerr << "tsnwcd: error: " << e.what() << '\n';
    summary = {{"ok", false}, {"error", e.what()}};
    failed = true;
  }
  summary["command"] = command;
  std::cout << summary.dump() << std::endl;
  return failed ? 1 : 0;
}
