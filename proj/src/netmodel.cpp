#include "tsnwcd/netmodel.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <set>
#include <sstream>
#include <unordered_set>

namespace tsnwcd::net {
namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n";
  auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(kSpace);
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Calls fn(line_number, content) for each non-blank, non-comment line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    std::string_view raw = text.substr(start, end == std::string_view::npos ? end : end - start);
    ++number;
    std::string_view line = trim(raw);
    if (!line.empty() && line.front() != '#') fn(number, line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
}

std::int64_t parse_int(std::string_view field, const char* source, int line, const char* name) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(source, line, name, "expected an integer, got '" + std::string(field) + "'");
  }
  return value;
}

Rational parse_number(std::string_view field, const char* source, int line, const char* name) {
  try {
    return parse_rational(field);
  } catch (const std::invalid_argument&) {
    throw ParseError(source, line, name, "expected a number, got '" + std::string(field) + "'");
  }
}

bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char c) {
    return c == ',' || c == '>' || c == ':' || c == ' ' || c == '\t';
  });
}

std::pair<std::string, std::string> ordered(std::string_view a, std::string_view b) {
  if (b < a) std::swap(a, b);
  return {std::string(a), std::string(b)};
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  return kind == NodeKind::kSwitch ? "sw" : "es";
}

std::string_view to_string(Mechanism mechanism) {
  return mechanism == Mechanism::kCbs ? "CBS" : "CQF";
}

Mechanism parse_mechanism(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "cbs") return Mechanism::kCbs;
  if (lower == "cqf") return Mechanism::kCqf;
  throw Error("unknown mechanism '" + std::string(text) + "' (expected cbs or cqf)");
}

std::string_view to_string(XiPolicy policy) {
  return policy == XiPolicy::kExplicit ? "explicit" : "per_link_prop_plus_sync";
}

XiPolicy parse_xi_policy(std::string_view text) {
  if (text == "per_link_prop_plus_sync") return XiPolicy::kPerLinkPropPlusSync;
  if (text == "explicit") return XiPolicy::kExplicit;
  throw Error("unknown xi policy '" + std::string(text) + "'");
}

// --- Topology ---------------------------------------------------------------

void Topology::add_node(Node node) {
  if (!valid_id(node.id)) throw Error("invalid node id '" + node.id + "'");
  if (node_index_.count(node.id)) throw Error("duplicate node '" + node.id + "'");
  node_index_.emplace(node.id, nodes_.size());
  adjacency_[node.id];
  nodes_.push_back(std::move(node));
}

void Topology::add_link(Link link) {
  for (const auto* end : {&link.a, &link.b}) {
    if (!has_node(*end)) throw Error("link references unknown node '" + *end + "'");
  }
  if (link.a == link.b) throw Error("self-loop link on '" + link.a + "'");
  if (link.b < link.a) std::swap(link.a, link.b);
  auto key = ordered(link.a, link.b);
  if (link_index_.count(key)) {
    throw Error("duplicate link between '" + link.a + "' and '" + link.b + "'");
  }
  link_index_.emplace(key, links_.size());
  auto insert_sorted = [](std::vector<std::string>& v, const std::string& id) {
    v.insert(std::lower_bound(v.begin(), v.end(), id), id);
  };
  insert_sorted(adjacency_[link.a], link.b);
  insert_sorted(adjacency_[link.b], link.a);
  links_.push_back(std::move(link));
}

bool Topology::has_node(std::string_view id) const {
  return node_index_.count(std::string(id)) != 0;
}

const Node& Topology::node(std::string_view id) const {
  auto it = node_index_.find(std::string(id));
  if (it == node_index_.end()) throw Error("unknown node '" + std::string(id) + "'");
  return nodes_[it->second];
}

bool Topology::is_switch(std::string_view id) const {
  return has_node(id) && node(id).kind == NodeKind::kSwitch;
}

bool Topology::linked(std::string_view a, std::string_view b) const {
  return link_index_.count(ordered(a, b)) != 0;
}

const Link& Topology::link(std::string_view a, std::string_view b) const {
  auto it = link_index_.find(ordered(a, b));
  if (it == link_index_.end()) {
    throw Error("no link between '" + std::string(a) + "' and '" + std::string(b) + "'");
  }
  return links_[it->second];
}

const std::vector<std::string>& Topology::neighbors(std::string_view id) const {
  auto it = adjacency_.find(std::string(id));
  if (it == adjacency_.end()) throw Error("unknown node '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> Topology::end_stations() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::kEndStation) out.push_back(n.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Topology::connected() const {
  if (nodes_.empty()) return true;
  std::unordered_set<std::string> seen{nodes_.front().id};
  std::deque<std::string> frontier{nodes_.front().id};
  while (!frontier.empty()) {
    std::string current = std::move(frontier.front());
    frontier.pop_front();
    for (const auto& next : neighbors(current)) {
      if (seen.insert(next).second) frontier.push_back(next);
    }
  }
  return seen.size() == nodes_.size();
}

std::vector<Port> Route::ports() const {
  std::vector<Port> out;
  for (std::size_t i = 0; i + 1 < hops.size(); ++i) out.push_back({hops[i], hops[i + 1]});
  return out;
}

const Flow& TestCase::flow(FlowId id) const {
  for (const auto& f : flows) {
    if (f.id == id) return f;
  }
  throw Error("unknown flow " + std::to_string(id));
}

const Route& TestCase::route(FlowId id) const {
  for (const auto& r : routes) {
    if (r.flow_id == id) return r;
  }
  throw Error("no route for flow " + std::to_string(id));
}

// --- Flow file --------------------------------------------------------------

std::vector<Flow> parse_flows(std::string_view text) {
  constexpr const char* kSource = "flows";
  std::vector<Flow> flows;
  std::set<FlowId> ids;
  for_each_line(text, [&](int line, std::string_view content) {
    auto fields = split(content, ',');
    if (fields.size() != 6) {
      throw ParseError(kSource, line, "",
                       "expected 6 comma-separated fields, got " + std::to_string(fields.size()));
    }
    Flow f;
    f.id = parse_int(fields[0], kSource, line, "id");
    if (f.id < 0) throw ParseError(kSource, line, "id", "flow id must be non-negative");
    f.src = std::string(fields[1]);
    f.dst = std::string(fields[2]);
    if (!valid_id(f.src)) throw ParseError(kSource, line, "src", "invalid node id");
    if (!valid_id(f.dst)) throw ParseError(kSource, line, "dst", "invalid node id");
    if (f.src == f.dst) throw ParseError(kSource, line, "dst", "src and dst must differ");
    f.period_us = parse_number(fields[3], kSource, line, "period");
    if (f.period_us <= 0) throw ParseError(kSource, line, "period", "period must be positive");
    f.deadline_us = parse_number(fields[4], kSource, line, "deadline");
    if (f.deadline_us < 0) throw ParseError(kSource, line, "deadline", "deadline must be >= 0");
    f.payload_bytes = parse_int(fields[5], kSource, line, "payload");
    if (f.payload_bytes <= 0) throw ParseError(kSource, line, "payload", "payload must be positive");
    if (f.payload_bytes > kMtuBytes) {
      throw ParseError(kSource, line, "payload",
                       "payload " + std::to_string(f.payload_bytes) + " exceeds MTU " +
                           std::to_string(kMtuBytes));
    }
    if (!ids.insert(f.id).second) {
      throw ParseError(kSource, line, "id", "duplicate flow id " + std::to_string(f.id));
    }
    flows.push_back(std::move(f));
  });
  return flows;
}

std::string serialize_flows(const std::vector<Flow>& flows) {
  std::string out;
  for (const auto& f : flows) {
    out += std::to_string(f.id) + "," + f.src + "," + f.dst + "," + to_exact_string(f.period_us) +
           "," + to_exact_string(f.deadline_us) + "," + std::to_string(f.payload_bytes) + "\n";
  }
  return out;
}

// --- Topology file ----------------------------------------------------------

Topology parse_topology(std::string_view text) {
  constexpr const char* kSource = "topology";
  Topology topo;
  for_each_line(text, [&](int line, std::string_view content) {
    auto fields = split(content, ',');
    if (fields.size() != 3) {
      throw ParseError(kSource, line, "", "expected 3 comma-separated fields");
    }
    try {
      if (fields[0] == "node") {
        NodeKind kind;
        if (fields[2] == "es") {
          kind = NodeKind::kEndStation;
        } else if (fields[2] == "sw") {
          kind = NodeKind::kSwitch;
        } else {
          throw ParseError(kSource, line, "kind",
                           "node kind must be es or sw, got '" + std::string(fields[2]) + "'");
        }
        topo.add_node({std::string(fields[1]), kind});
      } else if (fields[0] == "link") {
        topo.add_link({std::string(fields[1]), std::string(fields[2])});
      } else {
        throw ParseError(kSource, line, "record",
                         "expected 'node' or 'link', got '" + std::string(fields[0]) + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(kSource, line, std::string(fields[0]), e.what());
    }
  });
  if (!topo.connected()) throw ParseError(kSource, 0, "", "topology graph is disconnected");
  return topo;
}

std::string serialize_topology(const Topology& topology) {
  std::string out;
  for (const auto& n : topology.nodes()) {
    out += "node," + n.id + "," + std::string(to_string(n.kind)) + "\n";
  }
  for (const auto& l : topology.links()) out += "link," + l.a + "," + l.b + "\n";
  return out;
}

// --- Route file -------------------------------------------------------------

namespace {

std::vector<std::pair<int, Route>> parse_route_lines(std::string_view text) {
  constexpr const char* kSource = "routes";
  std::vector<std::pair<int, Route>> out;
  std::set<FlowId> ids;
  for_each_line(text, [&](int line, std::string_view content) {
    auto colon = content.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError(kSource, line, "", "expected 'flowId:node1>node2>...'");
    }
    Route r;
    r.flow_id = parse_int(trim(content.substr(0, colon)), kSource, line, "flow_id");
    for (auto hop : split(content.substr(colon + 1), '>')) {
      if (!valid_id(hop)) throw ParseError(kSource, line, "hops", "empty or invalid hop");
      r.hops.emplace_back(hop);
    }
    if (r.hops.size() < 2) throw ParseError(kSource, line, "hops", "route needs at least 2 hops");
    std::set<std::string_view> seen;
    for (const auto& hop : r.hops) {
      if (!seen.insert(hop).second) {
        throw ParseError(kSource, line, "hops", "route is not a simple path: '" + hop + "' repeats");
      }
    }
    if (!ids.insert(r.flow_id).second) {
      throw ParseError(kSource, line, "flow_id",
                       "duplicate route for flow " + std::to_string(r.flow_id));
    }
    out.emplace_back(line, std::move(r));
  });
  return out;
}

}  // namespace

std::vector<Route> parse_routes(std::string_view text) {
  std::vector<Route> out;
  for (auto& [line, r] : parse_route_lines(text)) out.push_back(std::move(r));
  return out;
}

std::vector<Route> parse_routes(std::string_view text, const Topology& topology,
                                const std::vector<Flow>& flows) {
  constexpr const char* kSource = "routes";
  std::map<FlowId, const Flow*> by_id;
  for (const auto& f : flows) by_id.emplace(f.id, &f);
  std::vector<Route> out;
  for (auto& [line, r] : parse_route_lines(text)) {
    auto it = by_id.find(r.flow_id);
    if (it == by_id.end()) {
      throw ParseError(kSource, line, "flow_id", "unknown flow id " + std::to_string(r.flow_id));
    }
    for (const auto& hop : r.hops) {
      if (!topology.has_node(hop)) throw ParseError(kSource, line, "hops", "unknown node '" + hop + "'");
    }
    for (std::size_t i = 0; i + 1 < r.hops.size(); ++i) {
      if (!topology.linked(r.hops[i], r.hops[i + 1])) {
        throw ParseError(kSource, line, "hops",
                         "no link between '" + r.hops[i] + "' and '" + r.hops[i + 1] + "'");
      }
    }
    if (r.hops.front() != it->second->src || r.hops.back() != it->second->dst) {
      throw ParseError(kSource, line, "hops", "route endpoints do not match flow src/dst");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_routes(const std::vector<Route>& routes) {
  std::string out;
  for (const auto& r : routes) {
    out += std::to_string(r.flow_id) + ":";
    for (std::size_t i = 0; i < r.hops.size(); ++i) {
      if (i) out += ">";
      out += r.hops[i];
    }
    out += "\n";
  }
  return out;
}

void apply_constants(Topology& topology, const NetworkConstants& constants) {
  Topology updated;
  for (const auto& n : topology.nodes()) updated.add_node(n);
  for (auto l : topology.links()) {
    l.rate_bits_per_us = constants.link_rate_bits_per_us;
    l.propagation_us = constants.propagation_us;
    updated.add_link(std::move(l));
  }
  topology = std::move(updated);
}

// --- Validation -------------------------------------------------------------

std::vector<Diagnostic> validate_testcase(const TestCase& tc) {
  std::vector<Diagnostic> out;
  auto report = [&](std::string invariant, std::string entity, std::string message) {
    out.push_back({std::move(invariant), std::move(entity), std::move(message)});
  };
  const auto& topo = tc.topology;
  const auto& k = tc.constants;

  for (const auto& l : topo.links()) {
    std::string entity = "link " + l.a + "-" + l.b;
    if (l.rate_bits_per_us <= 0) report("link.rate_positive", entity, "rate must be > 0");
    if (l.propagation_us < 0) report("link.propagation_nonnegative", entity, "propagation < 0");
  }
  if (!topo.connected()) report("topology.connected", "topology", "graph is disconnected");

  if (k.link_rate_bits_per_us <= 0) {
    report("constants.link_rate_positive", "constants", "link rate must be > 0");
  }
  if (k.idle_slope_fraction <= 0 || k.idle_slope_fraction >= 1) {
    report("constants.idle_slope_fraction", "constants", "idle slope fraction must be in (0, 1)");
  }
  if (k.frame_overhead_bytes < 0) report("constants.frame_overhead", "constants", "overhead < 0");
  if (k.propagation_us < 0 || k.switching_us < 0 || k.sync_error_us < 0) {
    report("constants.delays_nonnegative", "constants", "constant delays must be >= 0");
  }
  if (tc.mechanism == Mechanism::kCqf && (!k.cycle_us || *k.cycle_us <= 0)) {
    report("constants.cycle_positive", "constants", "CQF requires a positive cycle duration");
  }
  if (k.xi_policy == XiPolicy::kExplicit && !k.explicit_xi_us) {
    report("constants.explicit_xi", "constants", "explicit xi policy without a value");
  }

  std::set<FlowId> flow_ids;
  for (const auto& f : tc.flows) {
    std::string entity = "flow " + std::to_string(f.id);
    if (!flow_ids.insert(f.id).second) report("flow.unique_id", entity, "duplicate flow id");
    if (f.src == f.dst) report("flow.src_ne_dst", entity, "src equals dst");
    for (const auto* end : {&f.src, &f.dst}) {
      if (!topo.has_node(*end)) {
        report("flow.endpoint_exists", entity, "unknown node '" + *end + "'");
      } else if (topo.node(*end).kind != NodeKind::kEndStation) {
        report("flow.endpoint_is_end_station", entity, "'" + *end + "' is not an end-station");
      }
    }
    if (f.period_us <= 0) report("flow.period_positive", entity, "period must be > 0");
    if (f.payload_bytes <= 0 || f.payload_bytes > kMtuBytes) {
      report("flow.payload_range", entity, "payload must be in (0, MTU]");
    }
  }

  std::set<FlowId> routed;
  for (const auto& r : tc.routes) {
    std::string entity = "route " + std::to_string(r.flow_id);
    if (!routed.insert(r.flow_id).second) {
      report("route.unique", entity, "more than one route for flow");
      continue;
    }
    if (!flow_ids.count(r.flow_id)) {
      report("route.flow_exists", entity, "route references an unknown flow");
      continue;
    }
    if (r.hops.size() < 2) {
      report("route.length", entity, "route has fewer than 2 hops");
      continue;
    }
    const Flow& f = tc.flow(r.flow_id);
    if (r.hops.front() != f.src) report("route.starts_at_src", entity, "first hop is not the flow src");
    if (r.hops.back() != f.dst) report("route.ends_at_dst", entity, "last hop is not the flow dst");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < r.hops.size(); ++i) {
      const auto& hop = r.hops[i];
      if (!seen.insert(hop).second) report("route.simple_path", entity, "node '" + hop + "' repeats");
      if (!topo.has_node(hop)) {
        report("route.node_exists", entity, "unknown node '" + hop + "'");
        continue;
      }
      bool interior = i > 0 && i + 1 < r.hops.size();
      if (interior && topo.node(hop).kind == NodeKind::kEndStation) {
        report("route.interior_is_switch", entity, "end-station '" + hop + "' inside route");
      }
      if (i + 1 < r.hops.size() && topo.has_node(r.hops[i + 1]) && !topo.linked(hop, r.hops[i + 1])) {
        report("route.hops_linked", entity, "no link between '" + hop + "' and '" + r.hops[i + 1] + "'");
      }
    }
  }
  for (FlowId id : flow_ids) {
    if (!routed.count(id)) report("route.exists", "flow " + std::to_string(id), "flow has no route");
  }
  return out;
}

}  // namespace tsnwcd::net
