#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsnwcd/netmodel.hpp"

// Discrete-event simulation of CBS egress ports and CQF ping-pong queues.
// Time is exact (rational microseconds) and there is a single global clock.
namespace tsnwcd::sim {

using net::FlowId;
using net::Port;

class HorizonTooShortError : public Error {
 public:
  using Error::Error;
};

class CqfCapacityError : public Error {
 public:
  using Error::Error;
};

enum class ReleasePolicy { kSynchronized, kJittered };
std::string_view to_string(ReleasePolicy policy);
ReleasePolicy parse_release_policy(std::string_view text);

struct SimConfig {
  Rational horizon_us = 50000;
  std::uint64_t seed = 1;
  ReleasePolicy release_policy = ReleasePolicy::kSynchronized;
  // Saturating best-effort source behind every CBS port.
  bool best_effort = false;
  std::optional<Port> trace_port;
};

struct TracePoint {
  Rational t_us;
  Rational credit_bits;
};

struct CreditRange {
  Rational min;
  Rational max;
};

struct SimReport {
  std::string testcase;
  net::Mechanism mechanism = net::Mechanism::kCbs;
  std::map<FlowId, Rational> max_delay_us;
  std::map<FlowId, long> frame_count;
  std::map<FlowId, Rational> phase_us;
  std::map<Port, CreditRange> credit_range;  // CBS only
  std::vector<TracePoint> credit_trace;       // CBS, for SimConfig::trace_port
};

// Release times are phase + m * period for every m with release < horizon.
// Every released frame must be delivered before 2 * horizon.
SimReport simulate_cbs(const net::TestCase& tc, const SimConfig& cfg);
SimReport simulate_cqf(const net::TestCase& tc, const SimConfig& cfg);
// Dispatches on tc.mechanism.
SimReport simulate(const net::TestCase& tc, const SimConfig& cfg);

std::vector<TracePoint> credit_trace(const net::TestCase& tc, SimConfig cfg, const Port& port);

nlohmann::json report_json(const SimReport& report, const SimConfig& cfg);
std::string trace_csv(const std::vector<TracePoint>& trace);

// Single egress port with strict-priority classes, used to replay small
// hand-built scenarios. Classes are listed highest priority first; a class
// without idle slope is a plain strict-priority queue.
struct PortClass {
  std::string name;
  std::optional<Rational> idle_slope;
};

struct ScenarioFrame {
  int id = 0;
  std::size_t class_index = 0;
  Rational bits;
  Rational arrival_us;
};

struct Transmission {
  int id = 0;
  std::size_t class_index = 0;
  Rational start_us;
  Rational end_us;
};

struct PortScenario {
  Rational link_rate = 100;
  std::vector<PortClass> classes;
  std::vector<ScenarioFrame> frames;
};

struct PortReplay {
  std::vector<Transmission> transmissions;
  // Credit trace per CBS class, indexed like `classes`.
  std::vector<std::vector<TracePoint>> credit;
};

PortReplay simulate_port(const PortScenario& scenario);

}  // namespace tsnwcd::sim
