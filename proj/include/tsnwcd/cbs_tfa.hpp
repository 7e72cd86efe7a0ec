#pragma once

#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsnwcd/minplus.hpp"
#include "tsnwcd/netmodel.hpp"

// Total Flow Analysis for Class-A CBS traffic (no time-triggered traffic).
namespace tsnwcd::cbs {

using minplus::Curve;
using net::FlowId;
using net::Port;

struct CbsClassConfig {
  int class_index = 1;
  Rational idle_slope;    // bits/us
  Rational send_slope;    // idle_slope - C, negative
  Rational l_max_class;   // bits
  Rational l_max_lower;   // bits, 0 when nothing of lower priority can block

  static CbsClassConfig make(Rational idle_slope, const Rational& link_rate, Rational l_max_class,
                             Rational l_max_lower, int class_index = 1);
  // Throws std::invalid_argument when the slopes or frame sizes are out of range.
  void check(const Rational& link_rate) const;
};

struct CreditBounds {
  Rational c_min;
  Rational c_max;
};

// classes[0] is the highest priority; bounds for classes[index].
CreditBounds credit_bounds(std::span<const CbsClassConfig> classes, std::size_t index, const Rational& link_rate);
CreditBounds credit_bounds(const CbsClassConfig& cfg, const Rational& link_rate);

minplus::RateLatency cbs_service_curve(const CbsClassConfig& cfg, const Rational& link_rate);
minplus::TokenBucket source_arrival(const net::Flow& flow, const net::NetworkConstants& constants);
Curve propagate_arrival(const Curve& arrival, const Rational& upstream_delay);
Curve link_shaping(const Rational& link_rate, const Rational& l_max_on_link);
Curve cbs_shaping(const CbsClassConfig& prev_port, const Rational& link_rate, const Rational& l_max_on_link);

// Flows entering a port from one predecessor. `shaping` holds the link and,
// for switch predecessors, the CBS shaping curves; empty for the talker port.
struct SourceGroup {
  std::vector<Curve> flow_arrivals;
  std::vector<Curve> shaping;
};
Curve aggregate_arrival(const std::vector<SourceGroup>& groups);

struct PortAnalysis {
  Port port;
  Curve arrival;
  Curve service;
  Rational delay_bound;
  std::set<FlowId> contributing_flows;
};

struct HopDelay {
  Port port;
  Rational delay;
};

struct FlowBound {
  std::vector<HopDelay> hops;
  Rational queuing;    // sum of per-hop D
  Rational constants;  // propagation, switching and sync terms
  Rational e2e;
};

struct CbsReport {
  std::string testcase;
  std::map<Port, PortAnalysis> per_port;
  std::map<FlowId, FlowBound> flows;
  int iterations = 0;
  bool converged = false;
};

class UnstablePortError : public Error {
 public:
  UnstablePortError(std::vector<std::string> ports, const std::string& message)
      : Error(message), ports_(std::move(ports)) {}
  const std::vector<std::string>& ports() const { return ports_; }

 private:
  std::vector<std::string> ports_;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

struct TfaOptions {
  double tolerance_us = 1e-9;
  int max_iterations = 1000;
};

// Fixed-point TFA over all egress ports, including the talker ports.
CbsReport tfa_solve(const net::TestCase& tc, const TfaOptions& options = {});

// Port configuration used by tfa_solve for the port's class traffic.
CbsClassConfig port_config(const net::TestCase& tc, const Rational& l_max_class);

nlohmann::json report_json(const CbsReport& report);

}  // namespace tsnwcd::cbs
