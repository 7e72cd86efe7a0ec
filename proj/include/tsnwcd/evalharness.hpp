#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsnwcd/netmodel.hpp"

// Prompt assembly, model-output ingestion and benchmark metrics.
namespace tsnwcd::eval {

using net::FlowId;

// ---- multiple choice ------------------------------------------------------

struct McqItem {
  std::string id;
  std::string question;
  std::vector<std::string> options;
  std::size_t correct = 0;

  void check() const;
  bool operator==(const McqItem&) const = default;
};

// "A".."Z" for option indices.
std::string option_label(std::size_t index);
// Accepts "B", "b", "(B)", "B) text", or the exact option text.
std::optional<std::size_t> answer_index(const McqItem& item, std::string_view answer);

McqItem shuffle_options(const McqItem& item, std::uint64_t seed);

McqItem item_from_json(const nlohmann::json& j);
nlohmann::json item_to_json(const McqItem& item);
std::vector<McqItem> load_items(const std::string& text);

struct RunAnswer {
  std::string answer;
  std::optional<double> confidence;
  double latency_ms = 0;
  std::string raw;
};

struct RunRecord {
  std::string id;
  std::vector<RunAnswer> runs;
};

RunRecord record_from_json(const nlohmann::json& j);
// One JSON object per non-blank line.
std::vector<RunRecord> load_records(const std::string& jsonl);

// ---- open-ended prompts and predictions -----------------------------------

std::string build_open_prompt(const net::TestCase& tc, net::Mechanism mechanism);

enum class FailureMode { kOk, kTrivialZero, kPartial, kEmpty, kTimeout };
std::string_view to_string(FailureMode mode);
FailureMode parse_failure_mode(std::string_view text);

struct FlowPrediction {
  double wcd_us = 0;
  std::optional<double> confidence;
};

struct PredictionSet {
  std::string testcase;
  std::map<FlowId, FlowPrediction> per_flow;
  FailureMode failure_mode = FailureMode::kEmpty;
  double coverage = 0;
  std::vector<std::string> diagnostics;
};

inline constexpr double kCoverageThreshold = 0.8;

// Never throws. Labels "F0", "0", "flow_0" and "Flow 0" all name flow 0.
// Precedence of failure modes: empty, trivial_zero, partial, ok.
PredictionSet parse_prediction(std::string_view text, const std::string& testcase,
                               const std::vector<FlowId>& flow_ids);
PredictionSet parse_prediction(std::string_view text, const net::TestCase& tc);
PredictionSet timeout_prediction(const std::string& testcase);

// ---- open-ended scoring ---------------------------------------------------

struct TruthSet {
  std::string testcase;
  std::map<FlowId, double> wcd_us;
};

// Reads an analysis report ({testcase, flows: [{id, wcd_us}]}).
TruthSet truth_from_json(const nlohmann::json& j);

struct OpenScoreOptions {
  std::size_t min_answered_tcs = 50;
  double coverage_threshold = kCoverageThreshold;
};

struct TcScore {
  std::string testcase;
  std::size_t runs = 0;         // runs that entered the metrics
  std::size_t flows_scored = 0; // summed over those runs
  double coverage = 0;          // mean over all runs
  std::optional<double> mae_us;
  std::optional<double> mape_pct;
  std::map<FailureMode, std::size_t> failure_modes;
};

struct Summary {
  std::size_t n = 0;
  double mean = 0;
  double stddev = 0;  // sample standard deviation, 0 when n < 2
  double median = 0;
};

Summary summarize(std::vector<double> values);

struct OpenScore {
  std::vector<TcScore> per_tc;
  std::optional<Summary> mae;
  std::optional<Summary> mape;
  std::size_t answered_tcs = 0;
  std::size_t total_tcs = 0;
  std::vector<std::string> flags;
  std::vector<std::string> diagnostics;

  bool suppressed() const { return !flags.empty(); }
};

// Several prediction sets for one test case are runs; a test case's MAE is
// the mean of its per-run MAEs. Only ok and partial runs enter the metrics.
// Throws tsnwcd::Error when a prediction names a test case without truth.
OpenScore score_open(const std::vector<PredictionSet>& predictions, const std::vector<TruthSet>& truths,
                     const OpenScoreOptions& options = {});

// ---- multiple-choice scoring ----------------------------------------------

struct McqaScore {
  double accuracy_pct = 0;
  std::vector<double> per_run_accuracy_pct;
  double consistency = 0;
  std::size_t items_scored = 0;
  std::size_t runs = 0;
  std::vector<std::string> diagnostics;
};

// Records with fewer runs than the largest run count are excluded.
// Throws tsnwcd::Error for records naming unknown items.
McqaScore score_mcqa(const std::vector<McqItem>& items, const std::vector<RunRecord>& records);

struct CalibrationSample {
  double confidence = 0;
  bool correct = false;
};

struct ReliabilityBin {
  double lo = 0;
  double hi = 0;
  std::size_t n = 0;
  std::optional<double> conf_mean;
  std::optional<double> accuracy;
};

struct Calibration {
  double ece = 0;
  double brier = 0;
  std::optional<double> cw_rate_pct;  // null when nothing was answered wrong
  std::size_t samples = 0;
  std::vector<ReliabilityBin> bins;
};

inline constexpr double kConfidentlyWrong = 0.8;

// Equal-width bins over [0, 1]; the last bin is closed. Throws on an empty
// sample set or a confidence outside [0, 1].
Calibration calibration(const std::vector<CalibrationSample>& samples, std::size_t bins = 10);
// Every answered run becomes a sample; runs without confidence are skipped
// with a diagnostic.
std::vector<CalibrationSample> calibration_samples(const std::vector<McqItem>& items,
                                                   const std::vector<RunRecord>& records,
                                                   std::vector<std::string>* diagnostics = nullptr);

// ---- report formats -------------------------------------------------------

nlohmann::json prediction_to_json(const PredictionSet& p);
nlohmann::json open_score_json(const OpenScore& s);
nlohmann::json mcqa_score_json(const McqaScore& s);
nlohmann::json calibration_json(const Calibration& c);
// bin_lo,bin_hi,n,conf_mean,acc
std::string reliability_csv(const std::vector<ReliabilityBin>& bins);
std::string reliability_csv(const nlohmann::json& calibration);
// testcase,runs,flows_scored,coverage,mae_us,mape_pct
std::string per_tc_csv(const OpenScore& s);
std::string per_tc_csv(const nlohmann::json& open_score);

}  // namespace tsnwcd::eval
