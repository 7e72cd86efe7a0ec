#include "tsnwcd/testgen.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "tsnwcd/bundle.hpp"
#include "tsnwcd/parallel.hpp"
#include "tsnwcd/random.hpp"

namespace tsnwcd::gen {

using json = nlohmann::json;
using Path = std::vector<std::string>;

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kOneSwitch: return "one_switch";
    case TopologyKind::kMediumMesh: return "medium_mesh";
    case TopologyKind::kRing: return "ring";
  }
  return "?";
}

TopologyKind parse_topology_kind(std::string_view text) {
  if (text == "one_switch") return TopologyKind::kOneSwitch;
  if (text == "medium_mesh") return TopologyKind::kMediumMesh;
  if (text == "ring") return TopologyKind::kRing;
  throw Error("unknown topology kind '" + std::string(text) + "'");
}

void GenSpec::check() const {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw Error("gen spec '" + name + "': " + field + " " + why);
  };
  if (hosts_per_switch < 1) fail("hosts_per_switch", "must be >= 1");
  switch (topology_kind) {
    case TopologyKind::kOneSwitch:
      if (switch_count != 1) fail("switch_count", "must be 1 for one_switch");
      if (hosts_per_switch < 2) fail("hosts_per_switch", "must be >= 2 for one_switch");
      break;
    case TopologyKind::kRing:
      if (switch_count < 3) fail("switch_count", "must be >= 3 for ring");
      break;
    case TopologyKind::kMediumMesh:
      if (switch_count < 2) fail("switch_count", "must be >= 2 for medium_mesh");
      break;
  }
  if (flow_count < 1) fail("flow_count", "must be >= 1");
  if (period_choices.empty()) fail("period_choices", "must not be empty");
  for (auto p : period_choices) {
    if (p <= 0) fail("period_choices", "must be positive");
  }
  if (payload_range.first < 1 || payload_range.second > net::kMtuBytes || payload_range.first > payload_range.second) {
    fail("payload_range", "must lie within [1, 1500] bytes");
  }
  if (deadline_range.first <= 0 || deadline_range.first > deadline_range.second) {
    fail("deadline_range", "must be a positive range");
  }
}

json spec_to_json(const GenSpec& s) {
  json j;
  j["name"] = s.name;
  j["topology"] = std::string(to_string(s.topology_kind));
  j["hosts_per_switch"] = s.hosts_per_switch;
  j["switch_count"] = s.switch_count;
  j["flow_count"] = s.flow_count;
  j["period_choices"] = s.period_choices;
  j["payload_range"] = {s.payload_range.first, s.payload_range.second};
  j["deadline_range"] = {s.deadline_range.first, s.deadline_range.second};
  j["seed"] = s.seed;
  j["constants"] = net::constants_to_json(s.constants, s.mechanism);
  return j;
}

GenSpec spec_from_json(const json& j) {
  GenSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.topology_kind = parse_topology_kind(j.at("topology").get<std::string>());
    if (s.topology_kind == TopologyKind::kOneSwitch) s.switch_count = 1;
    s.hosts_per_switch = j.value("hosts_per_switch", s.hosts_per_switch);
    s.switch_count = j.value("switch_count", s.switch_count);
    s.flow_count = j.value("flow_count", s.flow_count);
    if (j.contains("period_choices")) s.period_choices = j["period_choices"].get<std::vector<std::int64_t>>();
    if (j.contains("payload_range")) {
      s.payload_range = {j["payload_range"].at(0).get<std::int64_t>(), j["payload_range"].at(1).get<std::int64_t>()};
    }
    if (j.contains("deadline_range")) {
      s.deadline_range = {j["deadline_range"].at(0).get<std::int64_t>(), j["deadline_range"].at(1).get<std::int64_t>()};
    }
    s.seed = j.value("seed", s.seed);
    if (j.contains("mechanism")) s.mechanism = net::parse_mechanism(j["mechanism"].get<std::string>());
    if (j.contains("constants")) s.constants = net::constants_from_json(j["constants"], &s.mechanism);
  } catch (const json::exception& e) {
    throw Error("bad gen spec: " + std::string(e.what()));
  }
  if (s.mechanism == net::Mechanism::kCqf && !s.constants.cycle_us) s.constants.cycle_us = 500;
  s.check();
  return s;
}

namespace {

std::string host_name(int sw, int h) { return "node" + std::to_string(sw) + "_" + std::to_string(h); }
std::string switch_name(int sw) { return "sw" + std::to_string(sw); }

void add_link(net::Topology& topo, const std::string& a, const std::string& b) {
  topo.add_link(net::Link{std::min(a, b), std::max(a, b)});
}

// Lexicographically smallest shortest path from `from` to `to` avoiding the
// blocked nodes and edges; empty when none exists.
Path smallest_shortest_path(const net::Topology& topo, const std::string& from, const std::string& to,
                            const std::unordered_set<std::string>& blocked_nodes,
                            const std::set<std::pair<std::string, std::string>>& blocked_edges) {
  auto usable = [&](const std::string& a, const std::string& b) {
    return !blocked_nodes.count(b) && !blocked_edges.count({a, b});
  };
  std::unordered_map<std::string, std::size_t> dist{{to, 0}};
  std::deque<std::string> queue{to};
  while (!queue.empty()) {
    std::string u = queue.front();
    queue.pop_front();
    for (const auto& v : topo.neighbors(u)) {
      if (dist.count(v) || blocked_nodes.count(v) || blocked_edges.count({v, u})) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  if (!dist.count(from)) return {};
  Path path{from};
  while (path.back() != to) {
    const std::string& u = path.back();
    for (const auto& v : topo.neighbors(u)) {
      auto it = dist.find(v);
      if (it != dist.end() && it->second + 1 == dist[u] && usable(u, v)) {
        path.push_back(v);
        break;
      }
    }
  }
  return path;
}

bool path_less(const Path& a, const Path& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

net::Topology gen_topology(const GenSpec& spec) {
  spec.check();
  Rng rng(spec.seed);
  net::Topology topo;
  const int k = spec.switch_count;
  for (int s = 1; s <= k; ++s) topo.add_node({switch_name(s), net::NodeKind::kSwitch});
  for (int s = 1; s <= k; ++s) {
    for (int h = 1; h <= spec.hosts_per_switch; ++h) topo.add_node({host_name(s, h), net::NodeKind::kEndStation});
  }
  switch (spec.topology_kind) {
    case TopologyKind::kOneSwitch:
      break;
    case TopologyKind::kRing:
      for (int s = 1; s <= k; ++s) add_link(topo, switch_name(s), switch_name(s % k + 1));
      break;
    case TopologyKind::kMediumMesh: {
      std::set<std::pair<int, int>> edges;
      for (int s = 2; s <= k; ++s) edges.insert({static_cast<int>(rng.uniform(1, s - 1)), s});
      for (int a = 1; a <= k; ++a) {
        for (int b = a + 1; b <= k; ++b) {
          if (edges.count({a, b})) continue;
          if (rng.chance(1, 2)) edges.insert({a, b});
        }
      }
      for (const auto& [a, b] : edges) add_link(topo, switch_name(a), switch_name(b));
      break;
    }
  }
  for (int s = 1; s <= k; ++s) {
    for (int h = 1; h <= spec.hosts_per_switch; ++h) add_link(topo, host_name(s, h), switch_name(s));
  }
  net::apply_constants(topo, spec.constants);
  return topo;
}

std::vector<net::Flow> gen_flows(const GenSpec& spec, const net::Topology& topology) {
  spec.check();
  auto hosts = topology.end_stations();
  std::sort(hosts.begin(), hosts.end());
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& a : hosts) {
    for (const auto& b : hosts) {
      if (a != b) pairs.emplace_back(a, b);
    }
  }
  if (pairs.size() < static_cast<std::size_t>(spec.flow_count)) {
    throw Error("gen spec '" + spec.name + "': " + std::to_string(spec.flow_count) + " flows requested but only " +
                std::to_string(pairs.size()) + " distinct end-station pairs exist");
  }
  // Seeded stream independent of the topology draws.
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<net::Flow> flows;
  for (int i = 0; i < spec.flow_count; ++i) {
    std::size_t j = i + rng.below(pairs.size() - i);
    std::swap(pairs[i], pairs[j]);
    net::Flow f;
    f.id = i;
    f.src = pairs[i].first;
    f.dst = pairs[i].second;
    f.period_us = spec.period_choices[rng.below(spec.period_choices.size())];
    f.payload_bytes = rng.uniform(spec.payload_range.first, spec.payload_range.second);
    f.deadline_us = rng.uniform(spec.deadline_range.first, spec.deadline_range.second);
    flows.push_back(std::move(f));
  }
  return flows;
}

std::vector<Path> k_shortest_paths(const net::Topology& topology, const std::string& src, const std::string& dst,
                                   std::size_t k) {
  if (k == 0) throw Error("k_shortest_paths: k must be >= 1");
  Path first = smallest_shortest_path(topology, src, dst, {}, {});
  if (first.empty()) throw Error("no path from " + src + " to " + dst);
  std::vector<Path> found{first};
  std::set<Path, decltype(&path_less)> candidates(&path_less);
  while (found.size() < k) {
    const Path& last = found.back();
    for (std::size_t i = 0; i + 1 < last.size(); ++i) {
      Path root(last.begin(), last.begin() + i + 1);
      std::set<std::pair<std::string, std::string>> blocked_edges;
      for (const auto& p : found) {
        if (p.size() > i + 1 && std::equal(root.begin(), root.end(), p.begin())) {
          blocked_edges.insert({p[i], p[i + 1]});
        }
      }
      std::unordered_set<std::string> blocked_nodes(root.begin(), root.end() - 1);
      Path spur = smallest_shortest_path(topology, root.back(), dst, blocked_nodes, blocked_edges);
      if (spur.empty()) continue;
      Path full = root;
      full.insert(full.end(), spur.begin() + 1, spur.end());
      if (std::find(found.begin(), found.end(), full) == found.end()) candidates.insert(std::move(full));
    }
    if (candidates.empty()) break;
    found.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }
  return found;
}

std::vector<net::Route> k_shortest_routes(const net::Topology& topology, const net::Flow& flow, std::size_t k) {
  std::vector<net::Route> routes;
  for (auto& p : k_shortest_paths(topology, flow.src, flow.dst, k)) routes.push_back({flow.id, std::move(p)});
  return routes;
}

net::TestCase generate(const GenSpec& spec) {
  net::TestCase tc;
  tc.name = spec.name;
  tc.mechanism = spec.mechanism;
  tc.constants = spec.constants;
  tc.topology = gen_topology(spec);
  tc.flows = gen_flows(spec, tc.topology);
  for (const auto& f : tc.flows) tc.routes.push_back(k_shortest_routes(tc.topology, f, 1).front());
  return tc;
}

void emit_testcase(const std::filesystem::path& dir, const net::TestCase& tc) {
  auto problems = net::validate_testcase(tc);
  if (!problems.empty()) {
    const auto& d = problems.front();
    throw Error("test case '" + tc.name + "' is invalid: " + d.invariant + " (" + d.entity + "): " + d.message);
  }
  net::write_testcase(dir, tc);
}

std::vector<GenSpec> parse_manifest(const json& manifest) {
  if (!manifest.is_object() || !manifest.contains("testcases") || !manifest["testcases"].is_array()) {
    throw Error("manifest must be an object with a 'testcases' array");
  }
  std::vector<GenSpec> specs;
  std::set<std::string> names;
  for (const auto& entry : manifest["testcases"]) {
    specs.push_back(spec_from_json(entry));
    if (specs.back().name.empty()) throw Error("manifest entry without a name");
    if (!names.insert(specs.back().name).second) throw Error("duplicate test case name '" + specs.back().name + "'");
  }
  return specs;
}

json manifest_json(const std::vector<GenSpec>& specs) {
  json list = json::array();
  for (const auto& s : specs) list.push_back(spec_to_json(s));
  return json{{"testcases", list}};
}

std::vector<GenSpec> load_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(net::read_file(path));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return parse_manifest(j);
}

void generate_corpus(const std::vector<GenSpec>& specs, const std::filesystem::path& out_dir, unsigned jobs) {
  parallel_for(specs.size(), jobs, [&](std::size_t i) { emit_testcase(out_dir / specs[i].name, generate(specs[i])); });
}

}  // namespace tsnwcd::gen
