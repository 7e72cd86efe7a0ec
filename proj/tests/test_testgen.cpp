#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <set>

#include "tsnwcd/bundle.hpp"
#include "tsnwcd/testgen.hpp"

using namespace tsnwcd;
using namespace tsnwcd::gen;
namespace fs = std::filesystem;
using Path = std::vector<std::string>;

namespace {

GenSpec spec(TopologyKind kind, int switches, int hosts, int flows, std::uint64_t seed = 1) {
  GenSpec s;
  s.name = "tc";
  s.topology_kind = kind;
  s.switch_count = switches;
  s.hosts_per_switch = hosts;
  s.flow_count = flows;
  s.seed = seed;
  return s;
}

// Every simple path, ranked by hop count then node sequence.
std::vector<Path> brute_force_paths(const net::Topology& topo, const std::string& src, const std::string& dst) {
  std::vector<Path> all;
  Path cur{src};
  std::function<void()> dfs = [&] {
    if (cur.back() == dst) {
      all.push_back(cur);
      return;
    }
    for (const auto& v : topo.neighbors(cur.back())) {
      if (std::find(cur.begin(), cur.end(), v) != cur.end()) continue;
      cur.push_back(v);
      dfs();
      cur.pop_back();
    }
  };
  dfs();
  std::sort(all.begin(), all.end(), [](const Path& a, const Path& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return all;
}

std::set<std::string> files_in(const fs::path& dir) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  return names;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(GenTopology, Counts) {
  auto star = gen_topology(spec(TopologyKind::kOneSwitch, 1, 5, 1));
  EXPECT_EQ(star.nodes().size(), 6u);
  EXPECT_EQ(star.links().size(), 5u);

  auto ring = gen_topology(spec(TopologyKind::kRing, 6, 2, 1));
  EXPECT_EQ(ring.nodes().size(), 6u + 6 * 2);
  EXPECT_EQ(ring.links().size(), 6u + 6 * 2);
  EXPECT_TRUE(ring.linked("sw6", "sw1"));
  for (int s = 1; s <= 6; ++s) EXPECT_EQ(ring.neighbors("sw" + std::to_string(s)).size(), 4u);
}

TEST(GenTopology, MeshIsConnectedAndSeeded) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = spec(TopologyKind::kMediumMesh, 6, 2, 1, seed);
    auto topo = gen_topology(s);
    EXPECT_TRUE(topo.connected());
    std::size_t switch_links = topo.links().size() - 12;
    EXPECT_GE(switch_links, 5u);
    EXPECT_LE(switch_links, 15u);
    EXPECT_EQ(topo, gen_topology(s));
  }
  EXPECT_NE(gen_topology(spec(TopologyKind::kMediumMesh, 8, 1, 1, 1)),
            gen_topology(spec(TopologyKind::kMediumMesh, 8, 1, 1, 2)));
}

TEST(GenTopology, RejectsBadSpecs) {
  EXPECT_THROW(gen_topology(spec(TopologyKind::kRing, 2, 1, 1)), Error);
  EXPECT_THROW(gen_topology(spec(TopologyKind::kOneSwitch, 2, 3, 1)), Error);
  auto s = spec(TopologyKind::kOneSwitch, 1, 3, 1);
  s.payload_range = {64, 1501};
  EXPECT_THROW(s.check(), Error);
  s = spec(TopologyKind::kOneSwitch, 1, 3, 0);
  EXPECT_THROW(s.check(), Error);
}

TEST(GenFlows, SinglePairOnTwoHostStar) {
  auto s = spec(TopologyKind::kOneSwitch, 1, 2, 1);
  auto flows = gen_flows(s, gen_topology(s));
  ASSERT_EQ(flows.size(), 1u);
  EXPECT_EQ((std::set<std::string>{flows[0].src, flows[0].dst}), (std::set<std::string>{"node1_1", "node1_2"}));
}

TEST(GenFlows, InvariantsAndDeterminism) {
  auto s = spec(TopologyKind::kRing, 4, 2, 20, 7);
  auto topo = gen_topology(s);
  auto flows = gen_flows(s, topo);
  ASSERT_EQ(flows.size(), 20u);
  EXPECT_EQ(net::serialize_flows(flows), net::serialize_flows(gen_flows(s, topo)));
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& f : flows) {
    EXPECT_TRUE(pairs.insert({f.src, f.dst}).second);
    EXPECT_NE(f.src, f.dst);
    EXPECT_GE(f.payload_bytes, 64);
    EXPECT_LE(f.payload_bytes, 1500);
    EXPECT_TRUE(f.period_us == 1000 || f.period_us == 2500 || f.period_us == 5000);
    EXPECT_GE(f.deadline_us, 500);
    EXPECT_LE(f.deadline_us, 1500);
  }
}

TEST(GenFlows, NotEnoughPairs) {
  auto s = spec(TopologyKind::kOneSwitch, 1, 3, 7);
  EXPECT_THROW(gen_flows(s, gen_topology(s)), Error);
  s.flow_count = 6;
  EXPECT_EQ(gen_flows(s, gen_topology(s)).size(), 6u);
}

TEST(KShortest, StarHasOnePath) {
  auto topo = gen_topology(spec(TopologyKind::kOneSwitch, 1, 3, 1));
  auto paths = k_shortest_paths(topo, "node1_1", "node1_3", 3);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0], (Path{"node1_1", "sw1", "node1_3"}));
}

TEST(KShortest, RingOppositeSwitches) {
  auto topo = gen_topology(spec(TopologyKind::kRing, 6, 1, 1));
  auto paths = k_shortest_paths(topo, "node1_1", "node4_1", 2);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0], (Path{"node1_1", "sw1", "sw2", "sw3", "sw4", "node4_1"}));
  EXPECT_EQ(paths[1], (Path{"node1_1", "sw1", "sw6", "sw5", "sw4", "node4_1"}));
  auto all = brute_force_paths(topo, "node1_1", "node4_1");
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all, paths);
}

TEST(KShortest, MatchesBruteForceOnSmallMeshes) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto topo = gen_topology(spec(TopologyKind::kMediumMesh, 4 + seed % 3, 1, 1, seed));
    auto hosts = topo.end_stations();
    for (const auto& a : hosts) {
      for (const auto& b : hosts) {
        if (a == b) continue;
        auto all = brute_force_paths(topo, a, b);
        for (std::size_t k : {1u, 3u, 100u}) {
          auto got = k_shortest_paths(topo, a, b, k);
          std::vector<Path> want(all.begin(), all.begin() + std::min(k, all.size()));
          ASSERT_EQ(got, want) << "seed " << seed << " " << a << "->" << b << " k=" << k;
        }
      }
    }
  }
}

TEST(KShortest, Errors) {
  net::Topology topo;
  topo.add_node({"a", net::NodeKind::kEndStation});
  topo.add_node({"b", net::NodeKind::kEndStation});
  EXPECT_THROW(k_shortest_paths(topo, "a", "b", 1), Error);
  auto star = gen_topology(spec(TopologyKind::kOneSwitch, 1, 2, 1));
  EXPECT_THROW(k_shortest_paths(star, "node1_1", "node1_2", 0), Error);
}

TEST(Generate, ValidAcrossKinds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (auto kind : {TopologyKind::kOneSwitch, TopologyKind::kRing, TopologyKind::kMediumMesh}) {
      auto s = kind == TopologyKind::kOneSwitch ? spec(kind, 1, 8, 20, seed) : spec(kind, 5, 2, 20, seed);
      auto tc = generate(s);
      EXPECT_TRUE(net::validate_testcase(tc).empty()) << to_string(kind) << " seed " << seed;
      EXPECT_EQ(tc.routes.size(), tc.flows.size());
    }
  }
}

TEST(Emit, RoundTripAndFileSet) {
  auto s = spec(TopologyKind::kRing, 4, 2, 10, 3);
  s.name = "TC1";
  auto tc = generate(s);
  auto dir = fresh_dir("tsnwcd_emit_test");
  emit_testcase(dir, tc);
  EXPECT_EQ(files_in(dir), (std::set<std::string>{"TC1_topo.txt", "TC1_flows.txt", "TC1_route.txt", "TC1_config.json"}));
  EXPECT_EQ(net::load_testcase(dir), tc);
  fs::remove_all(dir);
}

TEST(Emit, RejectsInvalid) {
  auto tc = generate(spec(TopologyKind::kOneSwitch, 1, 3, 2));
  tc.routes.pop_back();
  auto dir = fresh_dir("tsnwcd_emit_bad");
  EXPECT_THROW(emit_testcase(dir, tc), Error);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Manifest, SpecJsonRoundTrip) {
  auto s = spec(TopologyKind::kMediumMesh, 5, 2, 12, 99);
  s.name = "m";
  s.mechanism = net::Mechanism::kCqf;
  s.constants.cycle_us = 500;
  s.period_choices = {1000, 2000};
  s.deadline_range = {100, 200};
  GenSpec back = spec_from_json(spec_to_json(s));
  EXPECT_EQ(spec_to_json(back), spec_to_json(s));
  EXPECT_EQ(back.constants, s.constants);
  EXPECT_THROW(parse_manifest(nlohmann::json{{"testcases", {spec_to_json(s), spec_to_json(s)}}}), Error);
}

TEST(Manifest, HundredCaseBatchReplays) {
  std::vector<GenSpec> specs;
  for (int i = 0; i < 100; ++i) {
    auto kind = static_cast<TopologyKind>(i % 3);
    auto s = kind == TopologyKind::kOneSwitch ? spec(kind, 1, 6, 15, 1000 + i) : spec(kind, 4, 2, 15, 1000 + i);
    s.name = "TC" + std::to_string(i + 1);
    specs.push_back(s);
  }
  auto a = fresh_dir("tsnwcd_corpus_a");
  auto b = fresh_dir("tsnwcd_corpus_b");
  generate_corpus(specs, a, 1);
  generate_corpus(parse_manifest(manifest_json(specs)), b, 4);
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    auto other = b / fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(net::read_file(e.path()), net::read_file(other)) << other;
    ++compared;
  }
  EXPECT_EQ(compared, 400u);
  fs::remove_all(a);
  fs::remove_all(b);
}
