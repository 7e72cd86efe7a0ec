#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsnwcd/netmodel.hpp"

// Seeded generation of test cases: topology families, flow sets and
// k-shortest routes. Everything here is a pure function of its inputs.
namespace tsnwcd::gen {

enum class TopologyKind { kOneSwitch, kMediumMesh, kRing };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view text);

struct GenSpec {
  std::string name;
  TopologyKind topology_kind = TopologyKind::kOneSwitch;
  int hosts_per_switch = 5;
  int switch_count = 1;
  int flow_count = 20;
  std::vector<std::int64_t> period_choices{1000, 2500, 5000};
  std::pair<std::int64_t, std::int64_t> payload_range{64, 1500};
  std::pair<std::int64_t, std::int64_t> deadline_range{500, 1500};
  std::uint64_t seed = 1;
  net::Mechanism mechanism = net::Mechanism::kCbs;
  net::NetworkConstants constants;

  // Throws tsnwcd::Error naming the offending field.
  void check() const;
};

nlohmann::json spec_to_json(const GenSpec& spec);
GenSpec spec_from_json(const nlohmann::json& json);

// Switches are sw1..swK; hosts are node<k>_<h>, attached to swk.
net::Topology gen_topology(const GenSpec& spec);

// Distinct ordered (src, dst) end-station pairs. Throws tsnwcd::Error when
// the topology has fewer pairs than spec.flow_count.
std::vector<net::Flow> gen_flows(const GenSpec& spec, const net::Topology& topology);

// Loop-free paths ordered by hop count, then by node-id sequence.
// Returns fewer than k paths when fewer exist; throws if src and dst are
// not connected.
std::vector<std::vector<std::string>> k_shortest_paths(const net::Topology& topology, const std::string& src,
                                                       const std::string& dst, std::size_t k);
std::vector<net::Route> k_shortest_routes(const net::Topology& topology, const net::Flow& flow, std::size_t k);

// Full test case: topology, flows and the first shortest route per flow.
net::TestCase generate(const GenSpec& spec);

// Validates, then writes the four bundle files into dir.
void emit_testcase(const std::filesystem::path& dir, const net::TestCase& tc);

// Manifest: {"testcases": [GenSpec JSON, ...]}. Each case lands in
// out_dir/<name>/. Names must be unique.
std::vector<GenSpec> parse_manifest(const nlohmann::json& manifest);
nlohmann::json manifest_json(const std::vector<GenSpec>& specs);
std::vector<GenSpec> load_manifest(const std::filesystem::path& path);
void generate_corpus(const std::vector<GenSpec>& specs, const std::filesystem::path& out_dir, unsigned jobs = 1);

}  // namespace tsnwcd::gen
