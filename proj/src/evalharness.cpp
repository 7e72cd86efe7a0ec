#include "tsnwcd/evalharness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "tsnwcd/random.hpp"

namespace tsnwcd::eval {

using json = nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

// ---- multiple choice ------------------------------------------------------

void McqItem::check() const {
  if (options.size() < 2) throw Error("item '" + id + "': needs at least two options");
  if (correct >= options.size()) throw Error("item '" + id + "': correct option out of range");
  std::set<std::string> seen;
  for (const auto& o : options) {
    if (trim(o).empty()) throw Error("item '" + id + "': empty option");
    if (!seen.insert(o).second) throw Error("item '" + id + "': duplicate option '" + o + "'");
  }
}

std::string option_label(std::size_t index) {
  if (index >= 26) throw Error("option index out of range");
  return std::string(1, static_cast<char>('A' + index));
}

std::optional<std::size_t> answer_index(const McqItem& item, std::string_view answer) {
  std::string a = trim(answer);
  if (a.empty()) return std::nullopt;
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    if (a == item.options[i]) return i;
  }
  static const std::regex label(R"(^\(?\s*([A-Za-z])\s*(?:[\).:]|$)[\s\S]*)");
  std::smatch m;
  if (std::regex_match(a, m, label)) {
    std::size_t i = static_cast<std::size_t>(std::toupper(static_cast<unsigned char>(m[1].str()[0])) - 'A');
    if (i < item.options.size()) return i;
  }
  return std::nullopt;
}

McqItem shuffle_options(const McqItem& item, std::uint64_t seed) {
  item.check();
  std::vector<std::size_t> order(item.options.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  McqItem out = item;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.options[i] = item.options[order[i]];
    if (order[i] == item.correct) out.correct = i;
  }
  return out;
}

McqItem item_from_json(const json& j) {
  McqItem item;
  try {
    item.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
    item.question = j.value("question", "");
    item.options = j.at("options").get<std::vector<std::string>>();
    const json& c = j.at("correct");
    if (c.is_number_integer()) {
      item.correct = c.get<std::size_t>();
    } else {
      auto idx = answer_index(item, c.get<std::string>());
      if (!idx) throw Error("item '" + item.id + "': cannot resolve correct answer " + c.dump());
      item.correct = *idx;
    }
  } catch (const json::exception& e) {
    throw Error("bad item: " + std::string(e.what()));
  }
  item.check();
  return item;
}

json item_to_json(const McqItem& item) {
  return json{{"id", item.id}, {"question", item.question}, {"options", item.options}, {"correct", item.correct}};
}

std::vector<McqItem> load_items(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("items: " + std::string(e.what()));
  }
  if (j.is_object() && j.contains("items")) j = j["items"];
  if (!j.is_array()) throw Error("items: expected a JSON array");
  std::vector<McqItem> items;
  std::set<std::string> ids;
  for (const auto& e : j) {
    items.push_back(item_from_json(e));
    if (!ids.insert(items.back().id).second) throw Error("items: duplicate id '" + items.back().id + "'");
  }
  return items;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  try {
    r.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
    for (const auto& run : j.at("runs")) {
      RunAnswer a;
      if (run.contains("answer") && !run["answer"].is_null()) {
        a.answer = run["answer"].is_string() ? run["answer"].get<std::string>() : run["answer"].dump();
      }
      if (run.contains("confidence") && !run["confidence"].is_null()) {
        a.confidence = run["confidence"].get<double>();
        if (!(*a.confidence >= 0 && *a.confidence <= 1)) throw Error("record '" + r.id + "': confidence outside [0, 1]");
      }
      a.latency_ms = run.value("latency_ms", 0.0);
      a.raw = run.value("raw", "");
      r.runs.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw Error("bad run record: " + std::string(e.what()));
  }
  if (r.runs.empty() || r.runs.size() > 3) throw Error("record '" + r.id + "': expected 1 to 3 runs");
  return r;
}

std::vector<RunRecord> load_records(const std::string& jsonl) {
  std::vector<RunRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error("runs line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---- prompts --------------------------------------------------------------

std::string build_open_prompt(const net::TestCase& tc, net::Mechanism mechanism) {
  if (tc.mechanism != mechanism) {
    throw Error("test case '" + tc.name + "' is configured for " + std::string(net::to_string(tc.mechanism)));
  }
  const auto& k = tc.constants;
  const bool cqf = mechanism == net::Mechanism::kCqf;
  if (cqf && !k.cycle_us) throw Error("test case '" + tc.name + "' has no CQF cycle duration");
  std::ostringstream p;
  p << "You are an expert Time-Sensitive Networking (TSN) orchestrator. "
       "Your task is to calculate the worst case delay (WCD) for each TSN flow.\n\n";
  p << "Input:\n";
  p << "Network Topology (" << tc.name << "_topo.txt)\n";
  p << "Flow Information (" << tc.name << "_flows.txt)\n";
  p << "Routing of the Flow (" << tc.name << "_route.txt)\n\n";
  p << "Constant:\n";
  p << "Bandwidth link = " << to_exact_string(k.link_rate_bits_per_us) << " Mbps; ";
  p << "Propagation delay = " << to_exact_string(k.propagation_us) << " µs; ";
  p << "Switching delay = " << to_exact_string(k.switching_us) << " µs;\n";
  p << "Time synchronization error = " << to_exact_string(k.sync_error_us) << " µs; ";
  p << (k.cut_through ? "The switches of the network are cut-through switches."
                      : "The switches of the network are store-and-forward switches.");
  p << "\n";
  if (cqf) {
    p << "Cycle duration = " << to_exact_string(*k.cycle_us) << " µs.\n\n";
    p << "TSN Mechanism:\n";
    p << "Only Cyclic Queuing and Forwarding (CQF, IEEE 802.1Qch) is allowed;\n";
    p << "All flows are TT, PCP = 7, using queue 7 (odd) and 6 (even) only.\n\n";
  } else {
    p << "IdleSlope = " << to_exact_string(k.idle_slope_fraction * 100) << "%.\n\n";
    p << "TSN Mechanism:\n";
    p << "Only Credit-Based Shaper (CBS, IEEE 802.1Qav) is allowed;\n";
    p << "All flows are AVB Class A, PCP = 6, using queue 6 only.\n\n";
  }
  p << "Task:\n";
  p << "1. Map each egress port's queues and collect the set of flows traversing that port, "
       "using the given topology, flows, and route of the flow.\n";
  if (cqf) {
    p << "2. For the entire network, use the given cycle duration and compute the Hypercycle.\n";
    p << "3. For each flow, set the offset or the start time of the flow from the sending node as 0.\n";
  } else {
    p << "2. For each egress port, derive the CBS service curve and the aggregate arrival curve "
         "of the flows using Network Calculus.\n";
    p << "3. Bound the delay at each egress port and add the bounds and constant delays along each route.\n";
  }
  p << "4. Calculate the worst case delay (WCD) in microseconds (µs) for each flow.\n";
  p << "5. Provide the confidence score between 0.0 and 1.0 from your answers. 1.0 means mathematically "
       "or procedurally provable from given info with zero ambiguity. 0.0 means zero confidence.\n\n";
  p << "Output format:\n";
  p << "Return only a JSON object with one entry per flow, for example "
       "{\"F0\": {\"wcd_us\": 123.4, \"confidence\": 0.9}, \"F1\": {\"wcd_us\": 56.7, \"confidence\": 0.8}}.\n\n";
  p << "=== " << tc.name << "_topo.txt ===\n" << net::serialize_topology(tc.topology);
  p << "=== " << tc.name << "_flows.txt ===\n" << net::serialize_flows(tc.flows);
  p << "=== " << tc.name << "_route.txt ===\n" << net::serialize_routes(tc.routes);
  return p.str();
}

// ---- prediction parsing ---------------------------------------------------

std::string_view to_string(FailureMode mode) {
  switch (mode) {
    case FailureMode::kOk: return "ok";
    case FailureMode::kTrivialZero: return "trivial_zero";
    case FailureMode::kPartial: return "partial";
    case FailureMode::kEmpty: return "empty";
    case FailureMode::kTimeout: return "timeout";
  }
  return "?";
}

FailureMode parse_failure_mode(std::string_view text) {
  for (auto m : {FailureMode::kOk, FailureMode::kTrivialZero, FailureMode::kPartial, FailureMode::kEmpty,
                 FailureMode::kTimeout}) {
    if (text == to_string(m)) return m;
  }
  throw Error("unknown failure mode '" + std::string(text) + "'");
}

namespace {

std::optional<FlowId> flow_label(const std::string& key) {
  static const std::regex re(R"(^\s*(?:f|flow)?[\s_\-]?(\d{1,9})\s*$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(key, m, re)) return std::nullopt;
  return std::stoll(m[1].str());
}

std::optional<double> number_of(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      std::string s = trim(v.get<std::string>());
      double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

struct Extracted {
  std::map<FlowId, FlowPrediction> values;
  std::vector<std::string> notes;
};

void take_entry(Extracted& out, FlowId id, const json& v, std::optional<double> default_conf) {
  FlowPrediction p;
  p.confidence = default_conf;
  if (v.is_object()) {
    std::optional<double> wcd;
    for (const char* key : {"wcd_us", "wcd", "WCD", "value", "delay", "delay_us"}) {
      if (v.contains(key)) {
        wcd = number_of(v[key]);
        if (wcd) break;
      }
    }
    if (!wcd) {
      out.notes.push_back("flow " + std::to_string(id) + ": no numeric WCD");
      return;
    }
    p.wcd_us = *wcd;
    if (v.contains("confidence")) {
      if (auto c = number_of(v["confidence"])) p.confidence = *c;
    }
  } else if (auto n = number_of(v)) {
    p.wcd_us = *n;
  } else {
    out.notes.push_back("flow " + std::to_string(id) + ": value is not a number");
    return;
  }
  if (!std::isfinite(p.wcd_us) || p.wcd_us < 0) {
    out.notes.push_back("flow " + std::to_string(id) + ": WCD " + fmt(p.wcd_us) + " rejected");
    return;
  }
  if (p.confidence && !(*p.confidence >= 0 && *p.confidence <= 1)) {
    out.notes.push_back("flow " + std::to_string(id) + ": confidence outside [0, 1] dropped");
    p.confidence.reset();
  }
  if (out.values.count(id)) {
    out.notes.push_back("flow " + std::to_string(id) + ": repeated, first value kept");
    return;
  }
  out.values[id] = p;
}

Extracted extract_object(const json& j) {
  Extracted out;
  std::optional<double> conf;
  if (j.is_object() && j.contains("confidence")) conf = number_of(j["confidence"]);
  if (j.is_object()) {
    for (const char* key : {"flows", "wcd_us", "wcd", "WCD", "predictions", "results"}) {
      if (j.contains(key) && (j[key].is_object() || j[key].is_array())) {
        Extracted inner = extract_object(j[key]);
        if (!inner.values.empty()) {
          if (conf) {
            for (auto& [id, p] : inner.values) {
              if (!p.confidence) p.confidence = conf;
            }
          }
          return inner;
        }
      }
    }
    for (const auto& [key, v] : j.items()) {
      if (auto id = flow_label(key)) take_entry(out, *id, v, conf);
    }
  } else if (j.is_array()) {
    for (const auto& e : j) {
      if (!e.is_object()) continue;
      for (const char* key : {"flow", "id", "flow_id"}) {
        if (!e.contains(key)) continue;
        std::optional<FlowId> id;
        if (e[key].is_number_integer()) id = e[key].get<FlowId>();
        if (e[key].is_string()) id = flow_label(e[key].get<std::string>());
        if (id) take_entry(out, *id, e, std::nullopt);
        break;
      }
    }
  }
  return out;
}

// End of the balanced {...} starting at `begin`, skipping string contents.
std::size_t object_end(std::string_view text, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return i + 1;
    }
  }
  return std::string_view::npos;
}

Extracted extract(std::string_view text) {
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    std::size_t end = object_end(text, pos);
    if (end == std::string_view::npos) continue;
    json j = json::parse(text.substr(pos, end - pos), nullptr, false);
    if (j.is_discarded()) continue;
    Extracted e = extract_object(j);
    if (!e.values.empty()) return e;
  }
  // Plain "F0: 12.5, F1: 30" listings.
  Extracted out;
  static const std::regex pair(R"((?:\b[Ff]|\b[Ff]low[\s_]?)(\d{1,9})\s*[:=]\s*~?\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?))");
  std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), pair); it != std::sregex_iterator(); ++it) {
    take_entry(out, std::stoll((*it)[1].str()), json(std::stod((*it)[2].str())), std::nullopt);
  }
  if (!out.values.empty()) out.notes.insert(out.notes.begin(), "no JSON object found; read a plain listing");
  return out;
}

}  // namespace

PredictionSet parse_prediction(std::string_view text, const std::string& testcase, const std::vector<FlowId>& flow_ids) {
  PredictionSet p;
  p.testcase = testcase;
  Extracted e;
  try {
    e = extract(text);
  } catch (const std::exception& ex) {
    e = {};
    e.notes.push_back(std::string("extraction failed: ") + ex.what());
  }
  p.diagnostics = std::move(e.notes);
  std::set<FlowId> known(flow_ids.begin(), flow_ids.end());
  for (auto& [id, v] : e.values) {
    if (known.count(id)) {
      p.per_flow[id] = v;
    } else {
      p.diagnostics.push_back("flow " + std::to_string(id) + " is not in the test case");
    }
  }
  p.coverage = known.empty() ? 1.0 : static_cast<double>(p.per_flow.size()) / static_cast<double>(known.size());
  if (p.per_flow.empty()) {
    p.failure_mode = FailureMode::kEmpty;
  } else if (std::all_of(p.per_flow.begin(), p.per_flow.end(), [](const auto& kv) { return kv.second.wcd_us == 0; })) {
    p.failure_mode = FailureMode::kTrivialZero;
  } else if (p.coverage < kCoverageThreshold) {
    p.failure_mode = FailureMode::kPartial;
  } else {
    p.failure_mode = FailureMode::kOk;
  }
  return p;
}

PredictionSet parse_prediction(std::string_view text, const net::TestCase& tc) {
  std::vector<FlowId> ids;
  for (const auto& f : tc.flows) ids.push_back(f.id);
  return parse_prediction(text, tc.name, ids);
}

PredictionSet timeout_prediction(const std::string& testcase) {
  PredictionSet p;
  p.testcase = testcase;
  p.failure_mode = FailureMode::kTimeout;
  return p;
}

// ---- open-ended scoring ---------------------------------------------------

TruthSet truth_from_json(const json& j) {
  TruthSet t;
  try {
    t.testcase = j.at("testcase").get<std::string>();
    for (const auto& f : j.at("flows")) t.wcd_us[f.at("id").get<FlowId>()] = f.at("wcd_us").get<double>();
  } catch (const json::exception& e) {
    throw Error("bad ground truth: " + std::string(e.what()));
  }
  return t;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  std::sort(values.begin(), values.end());
  s.median = s.n % 2 ? values[s.n / 2] : (values[s.n / 2 - 1] + values[s.n / 2]) / 2;
  return s;
}

OpenScore score_open(const std::vector<PredictionSet>& predictions, const std::vector<TruthSet>& truths,
                     const OpenScoreOptions& options) {
  std::map<std::string, const TruthSet*> truth_by_name;
  for (const auto& t : truths) {
    if (!truth_by_name.emplace(t.testcase, &t).second) throw Error("duplicate ground truth for '" + t.testcase + "'");
  }
  std::map<std::string, std::vector<const PredictionSet*>> runs;
  for (const auto& p : predictions) {
    if (!truth_by_name.count(p.testcase)) throw Error("no ground truth for test case '" + p.testcase + "'");
    runs[p.testcase].push_back(&p);
  }

  OpenScore out;
  out.total_tcs = runs.size();
  std::vector<double> maes, mapes;
  bool any_partial = false;
  bool all_zero = true;
  bool any_values = false;
  for (const auto& [name, sets] : runs) {
    const TruthSet& truth = *truth_by_name.at(name);
    TcScore tc;
    tc.testcase = name;
    std::vector<double> run_mae, run_mape;
    for (const PredictionSet* p : sets) {
      ++tc.failure_modes[p->failure_mode];
      tc.coverage += p->coverage / static_cast<double>(sets.size());
      if (!p->per_flow.empty()) {
        any_values = true;
        if (p->failure_mode != FailureMode::kTrivialZero) all_zero = false;
      }
      if (p->failure_mode == FailureMode::kPartial) any_partial = true;
      if (p->failure_mode != FailureMode::kOk && p->failure_mode != FailureMode::kPartial) continue;
      double abs_sum = 0, pct_sum = 0;
      std::size_t n = 0, n_pct = 0;
      for (const auto& [id, pred] : p->per_flow) {
        auto it = truth.wcd_us.find(id);
        if (it == truth.wcd_us.end()) {
          out.diagnostics.push_back(name + ": flow " + std::to_string(id) + " has no ground truth");
          continue;
        }
        double err = std::abs(pred.wcd_us - it->second);
        abs_sum += err;
        ++n;
        if (it->second == 0) {
          out.diagnostics.push_back(name + ": flow " + std::to_string(id) + " has zero ground truth; excluded from MAPE");
          continue;
        }
        pct_sum += err / it->second * 100;
        ++n_pct;
      }
      if (n == 0) continue;
      ++tc.runs;
      tc.flows_scored += n;
      run_mae.push_back(abs_sum / static_cast<double>(n));
      if (n_pct) run_mape.push_back(pct_sum / static_cast<double>(n_pct));
    }
    if (!run_mae.empty()) {
      tc.mae_us = summarize(run_mae).mean;
      maes.push_back(*tc.mae_us);
      ++out.answered_tcs;
    }
    if (!run_mape.empty()) {
      tc.mape_pct = summarize(run_mape).mean;
      mapes.push_back(*tc.mape_pct);
    }
    out.per_tc.push_back(std::move(tc));
  }
  if (!maes.empty()) out.mae = summarize(maes);
  if (!mapes.empty()) out.mape = summarize(mapes);
  if (out.answered_tcs < options.min_answered_tcs) {
    out.flags.push_back("answered " + std::to_string(out.answered_tcs) + " test cases, fewer than " +
                        std::to_string(options.min_answered_tcs));
  }
  if (any_partial) {
    out.flags.push_back("coverage below " + fmt(options.coverage_threshold * 100) + "% of flows in some test case");
  }
  if (any_values && all_zero) out.flags.push_back("all predictions are zero");
  return out;
}

// ---- multiple-choice scoring ----------------------------------------------

McqaScore score_mcqa(const std::vector<McqItem>& items, const std::vector<RunRecord>& records) {
  std::map<std::string, const McqItem*> by_id;
  for (const auto& item : items) by_id[item.id] = &item;
  McqaScore s;
  for (const auto& r : records) {
    if (!by_id.count(r.id)) throw Error("run record names unknown item '" + r.id + "'");
    s.runs = std::max(s.runs, r.runs.size());
  }
  std::vector<std::size_t> correct(s.runs, 0);
  std::size_t consistent = 0;
  for (const auto& r : records) {
    if (r.runs.size() < s.runs) {
      s.diagnostics.push_back("item '" + r.id + "': " + std::to_string(r.runs.size()) + " of " +
                              std::to_string(s.runs) + " runs; excluded");
      continue;
    }
    const McqItem& item = *by_id.at(r.id);
    std::vector<std::optional<std::size_t>> answers;
    for (std::size_t i = 0; i < s.runs; ++i) {
      answers.push_back(answer_index(item, r.runs[i].answer));
      if (answers.back() == item.correct) ++correct[i];
    }
    if (std::all_of(answers.begin(), answers.end(), [&](const auto& a) { return a && a == answers.front(); })) {
      ++consistent;
    }
    ++s.items_scored;
  }
  if (s.items_scored == 0) return s;
  double n = static_cast<double>(s.items_scored);
  for (std::size_t c : correct) s.per_run_accuracy_pct.push_back(static_cast<double>(c) / n * 100);
  s.accuracy_pct = summarize(s.per_run_accuracy_pct).mean;
  s.consistency = static_cast<double>(consistent) / n;
  return s;
}

Calibration calibration(const std::vector<CalibrationSample>& samples, std::size_t bins) {
  if (samples.empty()) throw Error("calibration needs at least one answer with confidence");
  if (bins == 0) throw Error("calibration needs at least one bin");
  Calibration c;
  c.samples = samples.size();
  std::vector<double> conf_sum(bins, 0), hit_sum(bins, 0);
  std::vector<std::size_t> count(bins, 0);
  std::size_t wrong = 0, confident_wrong = 0;
  const double nb = static_cast<double>(bins);
  for (const auto& s : samples) {
    if (!(s.confidence >= 0 && s.confidence <= 1)) throw Error("confidence " + fmt(s.confidence) + " outside [0, 1]");
    // Bin edges are the doubles i / bins, so membership agrees with the CSV.
    std::size_t b = std::min(bins - 1, static_cast<std::size_t>(s.confidence * nb));
    while (b + 1 < bins && s.confidence >= static_cast<double>(b + 1) / nb) ++b;
    while (b > 0 && s.confidence < static_cast<double>(b) / nb) --b;
    conf_sum[b] += s.confidence;
    hit_sum[b] += s.correct ? 1 : 0;
    ++count[b];
    double err = s.confidence - (s.correct ? 1.0 : 0.0);
    c.brier += err * err;
    if (!s.correct) {
      ++wrong;
      if (s.confidence >= kConfidentlyWrong) ++confident_wrong;
    }
  }
  const double n = static_cast<double>(samples.size());
  c.brier /= n;
  for (std::size_t b = 0; b < bins; ++b) {
    ReliabilityBin bin;
    bin.lo = static_cast<double>(b) / nb;
    bin.hi = static_cast<double>(b + 1) / nb;
    bin.n = count[b];
    if (count[b]) {
      double k = static_cast<double>(count[b]);
      bin.conf_mean = conf_sum[b] / k;
      bin.accuracy = hit_sum[b] / k;
      c.ece += k / n * std::abs(*bin.accuracy - *bin.conf_mean);
    }
    c.bins.push_back(bin);
  }
  if (wrong) c.cw_rate_pct = static_cast<double>(confident_wrong) / static_cast<double>(wrong) * 100;
  return c;
}

std::vector<CalibrationSample> calibration_samples(const std::vector<McqItem>& items,
                                                   const std::vector<RunRecord>& records,
                                                   std::vector<std::string>* diagnostics) {
  std::map<std::string, const McqItem*> by_id;
  for (const auto& item : items) by_id[item.id] = &item;
  std::vector<CalibrationSample> out;
  for (const auto& r : records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw Error("run record names unknown item '" + r.id + "'");
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      const auto& run = r.runs[i];
      if (!run.confidence) {
        if (diagnostics) diagnostics->push_back("item '" + r.id + "' run " + std::to_string(i + 1) + ": no confidence");
        continue;
      }
      out.push_back({*run.confidence, answer_index(*it->second, run.answer) == it->second->correct});
    }
  }
  return out;
}

// ---- report formats -------------------------------------------------------

json prediction_to_json(const PredictionSet& p) {
  json flows = json::object();
  for (const auto& [id, v] : p.per_flow) {
    flows["F" + std::to_string(id)] = json{{"wcd_us", v.wcd_us}, {"confidence", optional_json(v.confidence)}};
  }
  return json{{"testcase", p.testcase},
              {"failure_mode", std::string(to_string(p.failure_mode))},
              {"coverage", p.coverage},
              {"flows", flows},
              {"diagnostics", p.diagnostics}};
}

namespace {

json summary_json(const std::optional<Summary>& s) {
  if (!s) return nullptr;
  return json{{"n", s->n}, {"mean", s->mean}, {"stddev", s->stddev}, {"median", s->median}};
}

}  // namespace

json open_score_json(const OpenScore& s) {
  json per_tc = json::array();
  for (const auto& tc : s.per_tc) {
    json modes = json::object();
    for (const auto& [m, n] : tc.failure_modes) modes[std::string(to_string(m))] = n;
    per_tc.push_back(json{{"testcase", tc.testcase},
                          {"runs", tc.runs},
                          {"flows_scored", tc.flows_scored},
                          {"coverage", tc.coverage},
                          {"mae_us", optional_json(tc.mae_us)},
                          {"mape_pct", optional_json(tc.mape_pct)},
                          {"failure_modes", modes}});
  }
  return json{{"per_tc", per_tc},
              {"mae_us", summary_json(s.mae)},
              {"mape_pct", summary_json(s.mape)},
              {"answered_tcs", s.answered_tcs},
              {"total_tcs", s.total_tcs},
              {"suppressed", s.suppressed()},
              {"flags", s.flags},
              {"diagnostics", s.diagnostics}};
}

json mcqa_score_json(const McqaScore& s) {
  return json{{"accuracy_pct", s.accuracy_pct},
              {"per_run_accuracy_pct", s.per_run_accuracy_pct},
              {"consistency", s.consistency},
              {"items_scored", s.items_scored},
              {"runs", s.runs},
              {"diagnostics", s.diagnostics}};
}

json calibration_json(const Calibration& c) {
  json bins = json::array();
  for (const auto& b : c.bins) {
    bins.push_back(json{{"bin_lo", b.lo},
                        {"bin_hi", b.hi},
                        {"n", b.n},
                        {"conf_mean", optional_json(b.conf_mean)},
                        {"acc", optional_json(b.accuracy)}});
  }
  return json{{"ece", c.ece}, {"brier", c.brier}, {"cw_rate_pct", optional_json(c.cw_rate_pct)},
              {"samples", c.samples}, {"bins", bins}};
}

std::string reliability_csv(const std::vector<ReliabilityBin>& bins) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,n,conf_mean,acc\n";
  for (const auto& b : bins) {
    out << fmt(b.lo) << ',' << fmt(b.hi) << ',' << b.n << ',' << (b.conf_mean ? fmt(*b.conf_mean) : "") << ','
        << (b.accuracy ? fmt(*b.accuracy) : "") << '\n';
  }
  return out.str();
}

std::string reliability_csv(const json& calibration) {
  std::vector<ReliabilityBin> bins;
  try {
    for (const auto& b : calibration.at("bins")) {
      ReliabilityBin bin;
      bin.lo = b.at("bin_lo").get<double>();
      bin.hi = b.at("bin_hi").get<double>();
      bin.n = b.at("n").get<std::size_t>();
      if (!b.at("conf_mean").is_null()) bin.conf_mean = b["conf_mean"].get<double>();
      if (!b.at("acc").is_null()) bin.accuracy = b["acc"].get<double>();
      bins.push_back(bin);
    }
  } catch (const json::exception& e) {
    throw Error("bad calibration block: " + std::string(e.what()));
  }
  return reliability_csv(bins);
}

std::string per_tc_csv(const OpenScore& s) {
  std::ostringstream out;
  out << "testcase,runs,flows_scored,coverage,mae_us,mape_pct\n";
  for (const auto& tc : s.per_tc) {
    out << tc.testcase << ',' << tc.runs << ',' << tc.flows_scored << ',' << fmt(tc.coverage) << ','
        << (tc.mae_us ? fmt(*tc.mae_us) : "") << ',' << (tc.mape_pct ? fmt(*tc.mape_pct) : "") << '\n';
  }
  return out.str();
}

std::string per_tc_csv(const json& open_score) {
  OpenScore s;
  try {
    for (const auto& t : open_score.at("per_tc")) {
      TcScore tc;
      tc.testcase = t.at("testcase").get<std::string>();
      tc.runs = t.at("runs").get<std::size_t>();
      tc.flows_scored = t.at("flows_scored").get<std::size_t>();
      tc.coverage = t.at("coverage").get<double>();
      if (!t.at("mae_us").is_null()) tc.mae_us = t["mae_us"].get<double>();
      if (!t.at("mape_pct").is_null()) tc.mape_pct = t["mape_pct"].get<double>();
      s.per_tc.push_back(std::move(tc));
    }
  } catch (const json::exception& e) {
    throw Error("bad open-ended score block: " + std::string(e.what()));
  }
  return per_tc_csv(s);
}

}  // namespace tsnwcd::eval
