#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsnwcd/netmodel.hpp"

// Glue between bundles on disk and the analyses.
namespace tsnwcd::pipeline {

namespace fs = std::filesystem;

// Copy of tc switched to `mechanism`. Throws when CQF lacks a cycle.
net::TestCase with_mechanism(net::TestCase tc, net::Mechanism mechanism);

// Ground-truth report for tc (CBS TFA or CQF closed form).
nlohmann::json analyze(const net::TestCase& tc, std::optional<net::Mechanism> mechanism = std::nullopt);

// CBS only: <dir>/<node>_<next>_{arrival,service}.csv for every port.
void dump_curves(const net::TestCase& tc, const fs::path& dir);

// `root` itself when it holds a bundle, otherwise its immediate
// subdirectories that do, sorted by name.
std::vector<fs::path> find_bundles(const fs::path& root);
bool is_bundle_dir(const fs::path& dir);

struct CorpusResult {
  std::string testcase;
  fs::path output;
  std::optional<std::string> error;
};

// Writes <out_dir>/<name>.json per bundle. Failures are per test case.
std::vector<CorpusResult> analyze_corpus(const fs::path& root, const fs::path& out_dir,
                                         std::optional<net::Mechanism> mechanism, unsigned jobs);

// Pretty JSON with a trailing newline, written atomically.
void write_json(const fs::path& path, const nlohmann::json& value);
nlohmann::json read_json(const fs::path& path);

}  // namespace tsnwcd::pipeline
