#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tsnwcd/error.hpp"
#include "tsnwcd/rational.hpp"

namespace tsnwcd::net {

using FlowId = std::int64_t;

inline constexpr std::int64_t kMtuBytes = 1500;

enum class NodeKind { kEndStation, kSwitch };
enum class Mechanism { kCbs, kCqf };

std::string_view to_string(NodeKind kind);
std::string_view to_string(Mechanism mechanism);
Mechanism parse_mechanism(std::string_view text);

struct Node {
  std::string id;
  NodeKind kind = NodeKind::kEndStation;

  bool operator==(const Node&) const = default;
};

// Undirected; endpoints are stored with a < b.
struct Link {
  std::string a;
  std::string b;
  Rational rate_bits_per_us = 100;
  Rational propagation_us = 1;

  bool operator==(const Link&) const = default;
};

// A directed egress port: traffic leaving `node` toward `next`.
struct Port {
  std::string node;
  std::string next;

  auto operator<=>(const Port&) const = default;
  std::string label() const { return node + "->" + next; }
};

class Topology {
 public:
  Topology() = default;

  // Throws tsnwcd::Error on duplicate ids, unknown endpoints or duplicate links.
  void add_node(Node node);
  void add_link(Link link);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }

  bool has_node(std::string_view id) const;
  const Node& node(std::string_view id) const;
  bool is_switch(std::string_view id) const;
  bool linked(std::string_view a, std::string_view b) const;
  const Link& link(std::string_view a, std::string_view b) const;
  // Neighbours in ascending id order.
  const std::vector<std::string>& neighbors(std::string_view id) const;
  std::vector<std::string> end_stations() const;
  bool connected() const;

  bool operator==(const Topology& other) const {
    return nodes_ == other.nodes_ && links_ == other.links_;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::map<std::pair<std::string, std::string>, std::size_t> link_index_;
  std::unordered_map<std::string, std::vector<std::string>> adjacency_;
};

struct Flow {
  FlowId id = 0;
  std::string src;
  std::string dst;
  Rational period_us;
  Rational deadline_us;
  std::int64_t payload_bytes = 0;

  bool operator==(const Flow&) const = default;
};

struct Route {
  FlowId flow_id = 0;
  std::vector<std::string> hops;

  // Interior switch count (SW_num). Valid routes have only switches inside.
  std::size_t switch_count() const { return hops.size() < 2 ? 0 : hops.size() - 2; }
  std::size_t link_count() const { return hops.empty() ? 0 : hops.size() - 1; }
  std::vector<Port> ports() const;

  bool operator==(const Route&) const = default;
};

enum class XiPolicy { kPerLinkPropPlusSync, kExplicit };

std::string_view to_string(XiPolicy policy);
XiPolicy parse_xi_policy(std::string_view text);

struct NetworkConstants {
  Rational link_rate_bits_per_us = 100;
  Rational propagation_us = 1;
  Rational switching_us = 1;
  Rational sync_error_us = 1;
  Rational idle_slope_fraction = Rational(3, 4);
  std::int64_t frame_overhead_bytes = 42;
  bool cut_through = true;
  // Lower-priority blocking frame assumed by the credit analysis;
  // 0 disables the interference term.
  std::int64_t best_effort_max_payload_bytes = kMtuBytes;
  std::optional<Rational> cycle_us;
  XiPolicy xi_policy = XiPolicy::kPerLinkPropPlusSync;
  std::optional<Rational> explicit_xi_us;
  std::map<FlowId, Rational> offsets_us;

  Rational frame_bits(std::int64_t payload_bytes) const {
    return Rational((payload_bytes + frame_overhead_bytes) * 8);
  }
  Rational idle_slope_bits_per_us() const { return idle_slope_fraction * link_rate_bits_per_us; }

  bool operator==(const NetworkConstants&) const = default;
};

struct TestCase {
  std::string name;
  Topology topology;
  std::vector<Flow> flows;
  std::vector<Route> routes;
  Mechanism mechanism = Mechanism::kCbs;
  NetworkConstants constants;

  const Flow& flow(FlowId id) const;
  const Route& route(FlowId id) const;

  bool operator==(const TestCase&) const = default;
};

struct Diagnostic {
  std::string invariant;
  std::string entity;
  std::string message;
};

// Flow file: one "id,src,dst,period_us,deadline_us,payload_bytes" per line.
std::vector<Flow> parse_flows(std::string_view text);
std::string serialize_flows(const std::vector<Flow>& flows);

// Topology file: "node,<id>,<es|sw>" and "link,<a>,<b>" lines.
Topology parse_topology(std::string_view text);
std::string serialize_topology(const Topology& topology);

// Route file: "flowId:node1>node2>...>nodeK". The context-free overload
// checks syntax and simple-path shape only.
std::vector<Route> parse_routes(std::string_view text);
std::vector<Route> parse_routes(std::string_view text, const Topology& topology,
                                const std::vector<Flow>& flows);
std::string serialize_routes(const std::vector<Route>& routes);

// Applies rate and propagation from the constants to every link.
void apply_constants(Topology& topology, const NetworkConstants& constants);

std::vector<Diagnostic> validate_testcase(const TestCase& tc);

}  // namespace tsnwcd::net
