#include "tsnwcd/cbs_tfa.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

namespace tsnwcd::cbs {

using minplus::RateLatency;
using minplus::TokenBucket;
using net::TestCase;

CbsClassConfig CbsClassConfig::make(Rational idle_slope, const Rational& link_rate, Rational l_max_class,
                                    Rational l_max_lower, int class_index) {
  CbsClassConfig cfg;
  cfg.class_index = class_index;
  cfg.send_slope = idle_slope - link_rate;
  cfg.idle_slope = std::move(idle_slope);
  cfg.l_max_class = std::move(l_max_class);
  cfg.l_max_lower = std::move(l_max_lower);
  return cfg;
}

void CbsClassConfig::check(const Rational& link_rate) const {
  if (idle_slope <= 0 || idle_slope >= link_rate) throw std::invalid_argument("idle slope must be in (0, C)");
  if (send_slope != idle_slope - link_rate) throw std::invalid_argument("send slope must equal idle slope - C");
  if (l_max_class < 0) throw std::invalid_argument("class frame size must be >= 0");
  if (l_max_lower < 0) throw std::invalid_argument("lower-priority frame size must be >= 0");
}

CreditBounds credit_bounds(std::span<const CbsClassConfig> classes, std::size_t index, const Rational& link_rate) {
  if (index >= classes.size()) throw std::out_of_range("class index");
  const CbsClassConfig& cfg = classes[index];
  cfg.check(link_rate);
  Rational higher_c_min(0), higher_idle(0);
  for (std::size_t j = 0; j < index; ++j) {
    classes[j].check(link_rate);
    higher_c_min += classes[j].send_slope * classes[j].l_max_class / link_rate;
    higher_idle += classes[j].idle_slope;
  }
  CreditBounds out;
  out.c_min = cfg.send_slope * cfg.l_max_class / link_rate;
  out.c_max = cfg.idle_slope * (higher_c_min - cfg.l_max_lower) / (higher_idle - link_rate);
  return out;
}

CreditBounds credit_bounds(const CbsClassConfig& cfg, const Rational& link_rate) {
  return credit_bounds(std::span<const CbsClassConfig>(&cfg, 1), 0, link_rate);
}

RateLatency cbs_service_curve(const CbsClassConfig& cfg, const Rational& link_rate) {
  CreditBounds b = credit_bounds(cfg, link_rate);
  return RateLatency{cfg.idle_slope, b.c_max / cfg.idle_slope};
}

TokenBucket source_arrival(const net::Flow& flow, const net::NetworkConstants& constants) {
  Rational bits = constants.frame_bits(flow.payload_bytes);
  return TokenBucket{bits, bits / flow.period_us};
}

Curve propagate_arrival(const Curve& arrival, const Rational& upstream_delay) {
  return minplus::shift_delay(arrival, upstream_delay);
}

Curve link_shaping(const Rational& link_rate, const Rational& l_max_on_link) {
  return Curve::affine(l_max_on_link, link_rate);
}

Curve cbs_shaping(const CbsClassConfig& prev_port, const Rational& link_rate, const Rational& l_max_on_link) {
  CreditBounds b = credit_bounds(prev_port, link_rate);
  return Curve::affine(b.c_max - b.c_min + l_max_on_link, prev_port.idle_slope);
}

Curve aggregate_arrival(const std::vector<SourceGroup>& groups) {
  Curve total;
  for (const auto& g : groups) {
    if (g.flow_arrivals.empty()) continue;
    Curve sum = g.flow_arrivals.front();
    for (std::size_t i = 1; i < g.flow_arrivals.size(); ++i) sum = minplus::sum_of(sum, g.flow_arrivals[i]);
    for (const auto& s : g.shaping) sum = minplus::min_of(sum, s);
    total = minplus::sum_of(total, sum);
  }
  return total;
}

CbsClassConfig port_config(const TestCase& tc, const Rational& l_max_class) {
  const auto& k = tc.constants;
  Rational lower(0);
  if (k.best_effort_max_payload_bytes > 0) lower = k.frame_bits(k.best_effort_max_payload_bytes);
  return CbsClassConfig::make(k.idle_slope_bits_per_us(), k.link_rate_bits_per_us, l_max_class, lower);
}

namespace {

struct Visit {
  FlowId flow;
  std::size_t hop;  // index of the port in the flow's route
};

struct PortState {
  std::vector<Visit> visits;
  CbsClassConfig config;
  Curve service;
  Rational delay;
  Curve arrival;
};

std::vector<Port> port_order(const std::map<Port, PortState>& ports,
                             const std::map<FlowId, std::vector<Port>>& flow_ports) {
  std::map<Port, std::set<Port>> next;
  std::map<Port, int> indegree;
  for (const auto& [p, _] : ports) indegree[p] = 0;
  for (const auto& [_, seq] : flow_ports) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      if (next[seq[i]].insert(seq[i + 1]).second) ++indegree[seq[i + 1]];
    }
  }
  std::set<Port> ready;
  for (const auto& [p, d] : indegree)
    if (d == 0) ready.insert(p);
  std::vector<Port> order;
  std::set<Port> done;
  while (!ready.empty()) {
    Port p = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(p);
    done.insert(p);
    for (const auto& n : next[p])
      if (--indegree[n] == 0) ready.insert(n);
  }
  // Ports on dependency cycles keep lexicographic order.
  for (const auto& [p, _] : ports)
    if (!done.count(p)) order.push_back(p);
  return order;
}

Rational abs_r(const Rational& v) { return v < 0 ? Rational(-v) : v; }

}  // namespace

CbsReport tfa_solve(const TestCase& tc, const TfaOptions& options) {
  if (tc.mechanism != net::Mechanism::kCbs) throw Error("tfa_solve requires a CBS test case");
  auto diagnostics = net::validate_testcase(tc);
  if (!diagnostics.empty()) {
    throw Error("invalid test case " + tc.name + ": " + diagnostics.front().invariant + " (" +
                diagnostics.front().entity + "): " + diagnostics.front().message);
  }
  const auto& k = tc.constants;
  const Rational& c = k.link_rate_bits_per_us;

  std::map<FlowId, std::vector<Port>> flow_ports;
  std::map<FlowId, TokenBucket> buckets;
  std::map<Port, PortState> ports;
  for (const auto& r : tc.routes) {
    flow_ports[r.flow_id] = r.ports();
    buckets[r.flow_id] = source_arrival(tc.flow(r.flow_id), k);
    const auto& seq = flow_ports[r.flow_id];
    for (std::size_t i = 0; i < seq.size(); ++i) ports[seq[i]].visits.push_back({r.flow_id, i});
  }

  std::vector<std::string> unstable;
  for (auto& [p, st] : ports) {
    std::sort(st.visits.begin(), st.visits.end(), [](const Visit& a, const Visit& b) { return a.flow < b.flow; });
    Rational l_max(0), rate(0);
    for (const auto& v : st.visits) {
      l_max = std::max(l_max, buckets[v.flow].burst_bits);
      rate += buckets[v.flow].rate_bits_per_us;
    }
    st.config = port_config(tc, l_max);
    st.service = cbs_service_curve(st.config, c).curve();
    if (rate >= st.config.idle_slope) unstable.push_back(p.label());
  }
  if (!unstable.empty()) {
    std::string msg = "unstable ports (aggregate rate >= idle slope):";
    for (const auto& u : unstable) msg += " " + u;
    throw UnstablePortError(unstable, msg);
  }

  std::vector<Port> order = port_order(ports, flow_ports);
  Rational tolerance = rational_from_double(options.tolerance_us);

  CbsReport report;
  report.testcase = tc.name;
  bool converged = ports.empty();
  int iteration = 0;
  if (ports.empty()) iteration = 1;
  while (!converged && iteration < options.max_iterations) {
    ++iteration;
    Rational max_change(0);
    for (const auto& p : order) {
      PortState& st = ports.at(p);
      std::map<std::optional<Port>, std::vector<Visit>> by_pred;
      for (const auto& v : st.visits) {
        std::optional<Port> pred;
        if (v.hop > 0) pred = flow_ports[v.flow][v.hop - 1];
        by_pred[pred].push_back(v);
      }
      std::vector<SourceGroup> groups;
      for (const auto& [pred, visits] : by_pred) {
        SourceGroup g;
        Rational l_max(0);
        for (const auto& v : visits) {
          Rational upstream(0);
          const auto& seq = flow_ports[v.flow];
          for (std::size_t j = 0; j < v.hop; ++j) upstream += ports.at(seq[j]).delay;
          g.flow_arrivals.push_back(propagate_arrival(buckets[v.flow].curve(), upstream));
          l_max = std::max(l_max, buckets[v.flow].burst_bits);
        }
        if (pred) {
          g.shaping.push_back(link_shaping(c, l_max));
          if (tc.topology.is_switch(pred->node)) g.shaping.push_back(cbs_shaping(ports.at(*pred).config, c, l_max));
        }
        groups.push_back(std::move(g));
      }
      st.arrival = aggregate_arrival(groups);
      Rational d;
      try {
        d = minplus::h_dev(st.arrival, st.service);
      } catch (const minplus::InstabilityError& e) {
        throw UnstablePortError({p.label()}, p.label() + ": " + e.what());
      }
      max_change = std::max(max_change, abs_r(d - st.delay));
      st.delay = std::move(d);
    }
    converged = max_change < tolerance;
  }
  report.iterations = iteration;
  report.converged = converged;
  if (!converged) {
    throw NonConvergenceError("TFA did not converge within " + std::to_string(options.max_iterations) +
                              " iterations for " + tc.name);
  }

  for (const auto& [p, st] : ports) {
    PortAnalysis pa{p, st.arrival, st.service, st.delay, {}};
    for (const auto& v : st.visits) pa.contributing_flows.insert(v.flow);
    report.per_port.emplace(p, std::move(pa));
  }
  for (const auto& r : tc.routes) {
    FlowBound fb;
    for (const auto& p : flow_ports[r.flow_id]) {
      fb.hops.push_back({p, ports.at(p).delay});
      fb.queuing += ports.at(p).delay;
    }
    for (std::size_t i = 0; i + 1 < r.hops.size(); ++i) {
      fb.constants += tc.topology.link(r.hops[i], r.hops[i + 1]).propagation_us;
    }
    fb.constants += k.switching_us * static_cast<long>(r.switch_count());
    fb.constants += k.sync_error_us;
    fb.e2e = fb.queuing + fb.constants;
    report.flows.emplace(r.flow_id, std::move(fb));
  }
  return report;
}

nlohmann::json report_json(const CbsReport& report) {
  using nlohmann::json;
  json flows = json::array();
  for (const auto& [id, fb] : report.flows) {
    json hops = json::array();
    for (const auto& h : fb.hops) hops.push_back({{"port", h.port.label()}, {"d_us", to_double(h.delay)}});
    flows.push_back({{"id", id},
                     {"wcd_us", to_double(fb.e2e)},
                     {"wcd_exact", to_exact_string(fb.e2e)},
                     {"queuing_us", to_double(fb.queuing)},
                     {"constants_us", to_double(fb.constants)},
                     {"per_hop", hops}});
  }
  json ports = json::array();
  for (const auto& [p, pa] : report.per_port) {
    ports.push_back({{"port", p.label()},
                     {"d_us", to_double(pa.delay_bound)},
                     {"arrival_rate", to_double(pa.arrival.final_slope())},
                     {"service_rate", to_double(pa.service.final_slope())},
                     {"flows", std::vector<FlowId>(pa.contributing_flows.begin(), pa.contributing_flows.end())}});
  }
  return {{"testcase", report.testcase},
          {"mechanism", "CBS"},
          {"flows", flows},
          {"ports", ports},
          {"converged", report.converged},
          {"iterations", report.iterations}};
}

}  // namespace tsnwcd::cbs
