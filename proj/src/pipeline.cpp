#include "tsnwcd/pipeline.hpp"

#include <algorithm>

#include "tsnwcd/bundle.hpp"
#include "tsnwcd/cbs_tfa.hpp"
#include "tsnwcd/cqf_bound.hpp"
#include "tsnwcd/parallel.hpp"

namespace tsnwcd::pipeline {

using json = nlohmann::json;

net::TestCase with_mechanism(net::TestCase tc, net::Mechanism mechanism) {
  if (mechanism == net::Mechanism::kCqf && !tc.constants.cycle_us) {
    throw Error("test case '" + tc.name + "' has no cycle_us for CQF");
  }
  tc.mechanism = mechanism;
  return tc;
}

json analyze(const net::TestCase& tc, std::optional<net::Mechanism> mechanism) {
  net::TestCase t = mechanism ? with_mechanism(tc, *mechanism) : tc;
  if (t.mechanism == net::Mechanism::kCbs) return cbs::report_json(cbs::tfa_solve(t));
  return cqf::report_json(cqf::cqf_solve(t));
}

void dump_curves(const net::TestCase& tc, const fs::path& dir) {
  auto report = cbs::tfa_solve(with_mechanism(tc, net::Mechanism::kCbs));
  fs::create_directories(dir);
  for (const auto& [port, analysis] : report.per_port) {
    std::string stem = port.node + "_" + port.next;
    net::write_file(dir / (stem + "_arrival.csv"), minplus::to_csv(analysis.arrival));
    net::write_file(dir / (stem + "_service.csv"), minplus::to_csv(analysis.service));
  }
}

bool is_bundle_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string f = e.path().filename().string();
    if (f.size() > 12 && f.compare(f.size() - 12, 12, "_config.json") == 0) return true;
  }
  return false;
}

std::vector<fs::path> find_bundles(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error("not a directory: " + root.string());
  if (is_bundle_dir(root)) return {root};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (is_bundle_dir(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no test-case bundles under " + root.string());
  return out;
}

std::vector<CorpusResult> analyze_corpus(const fs::path& root, const fs::path& out_dir,
                                         std::optional<net::Mechanism> mechanism, unsigned jobs) {
  auto bundles = find_bundles(root);
  std::vector<CorpusResult> results(bundles.size());
  fs::create_directories(out_dir);
  parallel_for(bundles.size(), jobs, [&](std::size_t i) {
    CorpusResult& r = results[i];
    r.testcase = bundles[i].filename().string();
    try {
      net::TestCase tc = net::load_testcase(bundles[i]);
      r.testcase = tc.name;
      r.output = out_dir / (tc.name + ".json");
      write_json(r.output, analyze(tc, mechanism));
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  return results;
}

void write_json(const fs::path& path, const json& value) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  net::write_file(path, value.dump(2) + "\n");
}

json read_json(const fs::path& path) {
  try {
    return json::parse(net::read_file(path));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace tsnwcd::pipeline
