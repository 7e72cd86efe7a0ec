#pragma once

#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "tsnwcd/netmodel.hpp"

// Closed-form Cyclic Queuing and Forwarding bounds.
namespace tsnwcd::cqf {

using net::FlowId;

class HypercycleError : public Error {
 public:
  using Error::Error;
};

struct CqfConfig {
  Rational cycle_us;
  std::map<FlowId, Rational> offsets_us;
  net::XiPolicy xi_policy = net::XiPolicy::kPerLinkPropPlusSync;
  std::optional<Rational> explicit_xi_us;

  // Reads cycle, offsets and xi settings from the test-case constants.
  static CqfConfig from(const net::TestCase& tc);
  Rational offset(FlowId id) const;
};

// LCM of the flow periods. Throws HypercycleError when `cycle` does not
// divide it. With no flows the hypercycle is one cycle.
Rational hypercycle(const std::vector<net::Flow>& flows, const std::optional<Rational>& cycle = std::nullopt);

Rational xi(const net::Route& route, const net::Topology& topology, const net::NetworkConstants& constants,
            const CqfConfig& cfg);
Rational xi(const net::Route& route, const net::NetworkConstants& constants, const CqfConfig& cfg);

// offset + (SW_num + 1) * T + xi
Rational cqf_wcd(const net::Flow& flow, const net::Route& route, const CqfConfig& cfg, const Rational& xi_us);

struct CapacityDiagnostic {
  net::Port port;
  long cycle = 0;  // slot index within the hypercycle
  Rational load_us;
};

// Every frame released at m * period (offsets 0) is sent by the i-th port of
// its route during cycle floor(release / T) + i. Lists (port, slot) pairs
// whose summed transmission time exceeds T.
std::vector<CapacityDiagnostic> cycle_capacity_check(const net::TestCase& tc, const CqfConfig& cfg);

struct FlowBound {
  std::size_t sw_num = 0;
  Rational xi_us;
  Rational wcd_us;
};

struct CqfReport {
  std::string testcase;
  Rational cycle_us;
  Rational hypercycle_us;
  std::map<FlowId, FlowBound> flows;
  std::vector<CapacityDiagnostic> capacity;
};

CqfReport cqf_solve(const net::TestCase& tc);
nlohmann::json report_json(const CqfReport& report);

}  // namespace tsnwcd::cqf
