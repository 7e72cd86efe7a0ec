// Python bindings. Structured values cross the boundary as JSON text; the
// package wrapper in tsnwcd/__init__.py turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cctype>

#include "tsnwcd/bundle.hpp"
#include "tsnwcd/error.hpp"
#include "tsnwcd/evalharness.hpp"
#include "tsnwcd/parallel.hpp"
#include "tsnwcd/pipeline.hpp"
#include "tsnwcd/shaper_sim.hpp"
#include "tsnwcd/testgen.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace tsnwcd;

namespace {

std::optional<net::Mechanism> mechanism_of(std::optional<std::string> text) {
  if (!text || text->empty()) return std::nullopt;
  std::transform(text->begin(), text->end(), text->begin(), [](unsigned char c) { return std::toupper(c); });
  return net::parse_mechanism(*text);
}

net::TestCase load(const std::string& dir, std::optional<std::string> mechanism) {
  net::TestCase tc = net::load_testcase(dir);
  if (auto m = mechanism_of(std::move(mechanism))) tc = pipeline::with_mechanism(std::move(tc), *m);
  return tc;
}

unsigned jobs_or_default(unsigned jobs) { return jobs ? jobs : default_jobs(); }

std::string analyze(const std::string& tc_dir, std::optional<std::string> mechanism) {
  py::gil_scoped_release release;
  return pipeline::analyze(load(tc_dir, std::move(mechanism))).dump();
}

std::string analyze_corpus(const std::string& root, const std::string& out_dir, std::optional<std::string> mechanism,
                           unsigned jobs) {
  auto mech = mechanism_of(std::move(mechanism));
  py::gil_scoped_release release;
  json out = json::array();
  for (const auto& r : pipeline::analyze_corpus(root, out_dir, mech, jobs_or_default(jobs))) {
    out.push_back({{"testcase", r.testcase}, {"output", r.output.string()},
                   {"error", r.error ? json(*r.error) : json(nullptr)}});
  }
  return out.dump();
}

std::vector<std::string> generate(const std::string& manifest, const std::string& out_dir, unsigned jobs) {
  py::gil_scoped_release release;
  auto specs = gen::load_manifest(manifest);
  gen::generate_corpus(specs, out_dir, jobs_or_default(jobs));
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  return names;
}

std::string simulate(const std::string& tc_dir, std::optional<std::string> mechanism, std::uint64_t seed,
                     double horizon_us, const std::string& release_policy, bool best_effort) {
  sim::SimConfig cfg;
  cfg.seed = seed;
  cfg.horizon_us = rational_from_double(horizon_us);
  cfg.release_policy = sim::parse_release_policy(release_policy);
  cfg.best_effort = best_effort;
  py::gil_scoped_release release;
  return sim::report_json(sim::simulate(load(tc_dir, std::move(mechanism)), cfg), cfg).dump();
}

std::string build_prompt(const std::string& tc_dir, std::optional<std::string> mechanism) {
  net::TestCase tc = load(tc_dir, std::move(mechanism));
  return eval::build_open_prompt(tc, tc.mechanism);
}

std::string parse_prediction(const std::string& text, const std::string& testcase, const std::vector<int>& flow_ids) {
  std::vector<net::FlowId> ids(flow_ids.begin(), flow_ids.end());
  return eval::prediction_to_json(eval::parse_prediction(text, testcase, ids)).dump();
}

std::string score_open(const std::string& truths_json, const std::vector<std::pair<std::string, std::string>>& outputs,
                       std::size_t min_answered_tcs) {
  std::vector<eval::TruthSet> truths;
  for (const auto& t : json::parse(truths_json)) truths.push_back(eval::truth_from_json(t));
  std::vector<eval::PredictionSet> preds;
  for (const auto& [name, text] : outputs) {
    auto it = std::find_if(truths.begin(), truths.end(), [&](const auto& t) { return t.testcase == name; });
    if (it == truths.end()) throw Error("no ground truth for test case '" + name + "'");
    std::vector<net::FlowId> ids;
    for (const auto& [id, v] : it->wcd_us) ids.push_back(id);
    preds.push_back(eval::parse_prediction(text, name, ids));
  }
  return eval::open_score_json(eval::score_open(preds, truths, {min_answered_tcs, eval::kCoverageThreshold})).dump();
}

std::string score_mcqa(const std::string& items_json, const std::string& runs_jsonl, std::size_t bins) {
  auto items = eval::load_items(items_json);
  auto records = eval::load_records(runs_jsonl);
  std::vector<std::string> diagnostics;
  auto samples = eval::calibration_samples(items, records, &diagnostics);
  json out{{"mcqa", eval::mcqa_score_json(eval::score_mcqa(items, records))},
           {"calibration", samples.empty() ? json(nullptr) : eval::calibration_json(eval::calibration(samples, bins))},
           {"calibration_diagnostics", diagnostics}};
  return out.dump();
}

std::string calibration(const std::vector<std::pair<double, bool>>& samples, std::size_t bins) {
  std::vector<eval::CalibrationSample> s;
  for (const auto& [c, ok] : samples) s.push_back({c, ok});
  return eval::calibration_json(eval::calibration(s, bins)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "TSN worst-case delay analysis and benchmark scoring";
  py::register_exception<Error>(m, "TsnwcdError", PyExc_ValueError);

  using namespace py::literals;
  m.def("analyze", &analyze, "tc_dir"_a, "mechanism"_a = py::none());
  m.def("analyze_corpus", &analyze_corpus, "root"_a, "out_dir"_a, "mechanism"_a = py::none(), "jobs"_a = 0);
  m.def("generate", &generate, "manifest"_a, "out_dir"_a, "jobs"_a = 0);
  m.def("simulate", &simulate, "tc_dir"_a, "mechanism"_a = py::none(), "seed"_a = 1, "horizon_us"_a = 50000.0,
        "release"_a = "synchronized", "best_effort"_a = false);
  m.def("build_prompt", &build_prompt, "tc_dir"_a, "mechanism"_a = py::none());
  m.def("parse_prediction", &parse_prediction, "text"_a, "testcase"_a, "flow_ids"_a);
  m.def("score_open", &score_open, "truths_json"_a, "outputs"_a, "min_answered_tcs"_a = 50);
  m.def("score_mcqa", &score_mcqa, "items_json"_a, "runs_jsonl"_a, "bins"_a = 10);
  m.def("calibration", &calibration, "samples"_a, "bins"_a = 10);
}
