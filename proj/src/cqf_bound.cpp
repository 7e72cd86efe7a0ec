#include "tsnwcd/cqf_bound.hpp"

#include "tsnwcd/bundle.hpp"

namespace tsnwcd::cqf {

CqfConfig CqfConfig::from(const net::TestCase& tc) {
  const auto& k = tc.constants;
  if (!k.cycle_us || *k.cycle_us <= 0) throw Error("CQF requires a positive cycle_us in " + tc.name);
  CqfConfig cfg;
  cfg.cycle_us = *k.cycle_us;
  cfg.offsets_us = k.offsets_us;
  cfg.xi_policy = k.xi_policy;
  cfg.explicit_xi_us = k.explicit_xi_us;
  return cfg;
}

Rational CqfConfig::offset(FlowId id) const {
  auto it = offsets_us.find(id);
  return it == offsets_us.end() ? Rational(0) : it->second;
}

Rational hypercycle(const std::vector<net::Flow>& flows, const std::optional<Rational>& cycle) {
  if (flows.empty()) {
    if (!cycle) throw HypercycleError("hypercycle of an empty flow set needs a cycle duration");
    return *cycle;
  }
  Rational h = flows.front().period_us;
  for (const auto& f : flows) {
    if (f.period_us <= 0) throw HypercycleError("flow " + std::to_string(f.id) + " has a non-positive period");
    h = lcm(h, f.period_us);
  }
  if (cycle) {
    if (*cycle <= 0) throw HypercycleError("cycle duration must be positive");
    if (!is_integer(h / *cycle)) {
      throw HypercycleError("cycle " + to_exact_string(*cycle) + " us does not divide hypercycle " +
                            to_exact_string(h) + " us");
    }
  }
  return h;
}

Rational xi(const net::Route& route, const net::NetworkConstants& constants, const CqfConfig& cfg) {
  if (cfg.xi_policy == net::XiPolicy::kExplicit) {
    if (!cfg.explicit_xi_us) throw Error("explicit xi policy without explicit_xi_us");
    return *cfg.explicit_xi_us;
  }
  return constants.propagation_us * static_cast<long>(route.link_count()) + constants.sync_error_us;
}

Rational xi(const net::Route& route, const net::Topology& topology, const net::NetworkConstants& constants,
            const CqfConfig& cfg) {
  if (cfg.xi_policy == net::XiPolicy::kExplicit) return xi(route, constants, cfg);
  Rational out = constants.sync_error_us;
  for (std::size_t i = 0; i + 1 < route.hops.size(); ++i) {
    out += topology.link(route.hops[i], route.hops[i + 1]).propagation_us;
  }
  return out;
}

Rational cqf_wcd(const net::Flow& flow, const net::Route& route, const CqfConfig& cfg, const Rational& xi_us) {
  return cfg.offset(flow.id) + cfg.cycle_us * static_cast<long>(route.switch_count() + 1) + xi_us;
}

std::vector<CapacityDiagnostic> cycle_capacity_check(const net::TestCase& tc, const CqfConfig& cfg) {
  std::vector<CapacityDiagnostic> out;
  if (tc.flows.empty()) return out;
  const Rational& t = cfg.cycle_us;
  Rational h = hypercycle(tc.flows, t);
  long slots = floor_of(h / t).get_si();
  std::map<net::Port, std::map<long, Rational>> load;
  for (const auto& r : tc.routes) {
    const net::Flow& f = tc.flow(r.flow_id);
    Rational tx = tc.constants.frame_bits(f.payload_bytes) / tc.constants.link_rate_bits_per_us;
    auto ports = r.ports();
    for (Rational release(0); release < h; release += f.period_us) {
      long c0 = floor_of(release / t).get_si();
      for (std::size_t i = 0; i < ports.size(); ++i) {
        long slot = (c0 + static_cast<long>(i)) % slots;
        load[ports[i]][slot] += tx;
      }
    }
  }
  for (const auto& [port, per_slot] : load) {
    for (const auto& [slot, l] : per_slot) {
      if (l > t) out.push_back({port, slot, l});
    }
  }
  return out;
}

CqfReport cqf_solve(const net::TestCase& tc) {
  if (tc.mechanism != net::Mechanism::kCqf) throw Error("cqf_solve requires a CQF test case");
  auto diagnostics = net::validate_testcase(tc);
  if (!diagnostics.empty()) {
    throw Error("invalid test case " + tc.name + ": " + diagnostics.front().invariant + " (" +
                diagnostics.front().entity + "): " + diagnostics.front().message);
  }
  CqfConfig cfg = CqfConfig::from(tc);
  CqfReport report;
  report.testcase = tc.name;
  report.cycle_us = cfg.cycle_us;
  report.hypercycle_us = hypercycle(tc.flows, cfg.cycle_us);
  for (const auto& [id, off] : cfg.offsets_us) {
    if (off < 0 || off >= report.hypercycle_us) {
      throw Error("offset of flow " + std::to_string(id) + " must lie in [0, hypercycle)");
    }
  }
  for (const auto& r : tc.routes) {
    const net::Flow& f = tc.flow(r.flow_id);
    FlowBound fb;
    fb.sw_num = r.switch_count();
    fb.xi_us = xi(r, tc.topology, tc.constants, cfg);
    fb.wcd_us = cqf_wcd(f, r, cfg, fb.xi_us);
    report.flows.emplace(r.flow_id, std::move(fb));
  }
  report.capacity = cycle_capacity_check(tc, cfg);
  return report;
}

nlohmann::json report_json(const CqfReport& report) {
  using nlohmann::json;
  json flows = json::array();
  for (const auto& [id, fb] : report.flows) {
    flows.push_back({{"id", id},
                     {"sw_num", fb.sw_num},
                     {"xi_us", to_double(fb.xi_us)},
                     {"wcd_us", to_double(fb.wcd_us)},
                     {"wcd_exact", to_exact_string(fb.wcd_us)}});
  }
  json capacity = json::array();
  for (const auto& d : report.capacity) {
    capacity.push_back({{"port", d.port.label()}, {"cycle", d.cycle}, {"load_us", to_double(d.load_us)}});
  }
  return {{"testcase", report.testcase},
          {"mechanism", "CQF"},
          {"T_us", net::rational_to_json(report.cycle_us)},
          {"hypercycle_us", net::rational_to_json(report.hypercycle_us)},
          {"flows", flows},
          {"capacity_violations", capacity}};
}

}  // namespace tsnwcd::cqf
