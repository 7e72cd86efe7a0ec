#include <gtest/gtest.h>

#include "tsnwcd/cbs_tfa.hpp"
#include "tsnwcd/cqf_bound.hpp"
#include "tsnwcd/shaper_sim.hpp"

using namespace tsnwcd;
using namespace tsnwcd::sim;

namespace {

Rational q(long p, long d = 1) { return ratio(p, d); }

net::TestCase star(net::Mechanism mech, const std::string& flows, const std::string& routes) {
  net::TestCase tc;
  tc.name = "star";
  tc.mechanism = mech;
  if (mech == net::Mechanism::kCqf) tc.constants.cycle_us = 50;
  tc.topology = net::parse_topology(
      "node,sw1,sw\nnode,node1_1,es\nnode,node1_2,es\nnode,node1_3,es\n"
      "link,node1_1,sw1\nlink,node1_2,sw1\nlink,node1_3,sw1\n");
  tc.flows = net::parse_flows(flows);
  tc.routes = net::parse_routes(routes, tc.topology, tc.flows);
  return tc;
}

net::TestCase chain3(net::Mechanism mech, long payload) {
  net::TestCase tc;
  tc.name = "chain";
  tc.mechanism = mech;
  tc.constants.cycle_us = 50;
  tc.topology = net::parse_topology(
      "node,sw1,sw\nnode,sw2,sw\nnode,sw3,sw\nnode,a,es\nnode,b,es\n"
      "link,a,sw1\nlink,sw1,sw2\nlink,sw2,sw3\nlink,sw3,b\n");
  tc.flows = {net::Flow{0, "a", "b", q(400), q(500), payload}};
  tc.routes = {net::Route{0, {"a", "sw1", "sw2", "sw3", "b"}}};
  return tc;
}

SimConfig config(long horizon, std::uint64_t seed = 1) {
  SimConfig cfg;
  cfg.horizon_us = horizon;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(SimulateCbs, SingleFrameHandTrace) {
  net::TestCase tc = star(net::Mechanism::kCbs, "0,node1_1,node1_2,1000,500,100\n", "0:node1_1>sw1>node1_2\n");
  // One release only: horizon 10000 gives 10 releases, all identical.
  SimReport r = simulate_cbs(tc, config(10000));
  Rational tx = q((100 + 42) * 8, 100);
  EXPECT_EQ(r.max_delay_us.at(0), tx + 2 * 1 + 1);
  EXPECT_EQ(r.frame_count.at(0), 10);
}

TEST(SimulateCbs, StoreAndForwardAddsOneFrameTime) {
  net::TestCase tc = star(net::Mechanism::kCbs, "0,node1_1,node1_2,1000,500,100\n", "0:node1_1>sw1>node1_2\n");
  tc.constants.cut_through = false;
  Rational tx = q((100 + 42) * 8, 100);
  EXPECT_EQ(simulate_cbs(tc, config(10000)).max_delay_us.at(0), 2 * tx + 3);
}

TEST(SimulateCbs, CreditDipsAndRecovers) {
  net::TestCase tc = star(net::Mechanism::kCbs, "0,node1_1,node1_2,1000,500,100\n", "0:node1_1>sw1>node1_2\n");
  auto trace = credit_trace(tc, config(10000), net::Port{"sw1", "node1_2"});
  ASSERT_FALSE(trace.empty());
  Rational tx = q(1136, 100);
  Rational lowest = 0;
  for (const auto& p : trace) lowest = std::min(lowest, p.credit_bits);
  EXPECT_EQ(lowest, q(-25) * tx);
  EXPECT_EQ(trace.back().credit_bits, 0);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].t_us == trace[i - 1].t_us) continue;
    Rational slope = (trace[i].credit_bits - trace[i - 1].credit_bits) / (trace[i].t_us - trace[i - 1].t_us);
    EXPECT_TRUE(slope == 75 || slope == -25 || slope == 0) << slope;
  }
}

TEST(SimulateCbs, IdlePortTraceStaysAtZero) {
  net::TestCase tc = star(net::Mechanism::kCbs, "0,node1_1,node1_2,1000,500,100\n", "0:node1_1>sw1>node1_2\n");
  auto trace = credit_trace(tc, config(10000), net::Port{"sw1", "node1_3"});
  for (const auto& p : trace) EXPECT_EQ(p.credit_bits, 0);
}

TEST(SimulateCbs, ZeroFlows) {
  net::TestCase tc = star(net::Mechanism::kCbs, "", "");
  SimReport r = simulate_cbs(tc, config(1000));
  EXPECT_TRUE(r.max_delay_us.empty());
}

TEST(SimulateCbs, ShortHorizonRejected) {
  net::TestCase tc = star(net::Mechanism::kCbs, "0,node1_1,node1_2,1000,500,100\n", "0:node1_1>sw1>node1_2\n");
  EXPECT_THROW(simulate_cbs(tc, config(5000)), Error);
}

TEST(SimulateCbs, CreditStaysWithinAnalyticalBounds) {
  net::TestCase tc = star(net::Mechanism::kCbs,
                          "0,node1_1,node1_3,1000,500,1500\n1,node1_2,node1_3,1000,500,1500\n"
                          "2,node1_1,node1_2,2500,500,700\n",
                          "0:node1_1>sw1>node1_3\n1:node1_2>sw1>node1_3\n2:node1_1>sw1>node1_2\n");
  SimConfig cfg = config(50000);
  cfg.best_effort = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    cfg.seed = seed;
    cfg.release_policy = ReleasePolicy::kJittered;
    SimReport r = simulate_cbs(tc, cfg);
    cbs::CbsReport bound = cbs::tfa_solve(tc);
    for (const auto& [p, range] : r.credit_range) {
      Rational l_max(0);
      for (FlowId f : bound.per_port.at(p).contributing_flows) {
        l_max = std::max(l_max, tc.constants.frame_bits(tc.flow(f).payload_bytes));
      }
      auto cb = cbs::credit_bounds(cbs::port_config(tc, l_max), tc.constants.link_rate_bits_per_us);
      EXPECT_GE(range.min, cb.c_min) << p.label();
      EXPECT_LE(range.max, cb.c_max) << p.label();
    }
    for (const auto& [id, d] : r.max_delay_us) EXPECT_LE(d, bound.flows.at(id).e2e);
  }
}

TEST(SimulateCbs, Deterministic) {
  net::TestCase tc = star(net::Mechanism::kCbs, "0,node1_1,node1_3,1000,500,900\n1,node1_2,node1_3,2500,500,300\n",
                          "0:node1_1>sw1>node1_3\n1:node1_2>sw1>node1_3\n");
  SimConfig cfg = config(25000, 42);
  cfg.release_policy = ReleasePolicy::kJittered;
  EXPECT_EQ(report_json(simulate_cbs(tc, cfg), cfg).dump(), report_json(simulate_cbs(tc, cfg), cfg).dump());
}

TEST(SimulatePort, TwoAvbQueuesAndBestEffortOrder) {
  PortScenario s;
  s.link_rate = 100;
  s.classes = {{"avb-high", q(25)}, {"avb-low", q(25)}, {"best-effort", std::nullopt}};
  s.frames = {{1, 0, q(1000), q(0)}, {4, 0, q(1000), q(0)}, {2, 1, q(1000), q(0)}, {3, 2, q(1000), q(0)}};
  PortReplay r = simulate_port(s);
  ASSERT_EQ(r.transmissions.size(), 4u);
  std::vector<int> order;
  for (const auto& t : r.transmissions) order.push_back(t.id);
  EXPECT_EQ(order, (std::vector<int>{1, 2, 3, 4}));
  // Frame 4 waits for the high queue's credit to climb back to zero.
  EXPECT_EQ(r.transmissions[3].start_us, 40);
  EXPECT_EQ(r.credit[0].back().credit_bits, 0);
}

TEST(SimulateCqf, ThreeSwitchFlowWithinBound) {
  net::TestCase tc = chain3(net::Mechanism::kCqf, 100);
  SimReport r = simulate_cqf(tc, config(4000));
  EXPECT_LE(r.max_delay_us.at(0), 205);
  // Talker sends at 0, sw1..sw3 send at 50, 100, 150.
  Rational tx = q(1136, 100);
  EXPECT_EQ(r.max_delay_us.at(0), 150 + tx + 1);
}

TEST(SimulateCqf, CycleBoundaryCostsOneCycle) {
  net::TestCase tc = star(net::Mechanism::kCqf, "0,node1_1,node1_2,400,500,100\n", "0:node1_1>sw1>node1_2\n");
  // Arrival at sw1 is release + 2 (propagation + switching).
  tc.constants.offsets_us[0] = q(479, 10);
  SimReport before = simulate_cqf(tc, config(4000));
  tc.constants.offsets_us[0] = q(481, 10);
  SimReport after = simulate_cqf(tc, config(4000));
  Rational deliver_before = before.max_delay_us.at(0) + q(479, 10);
  Rational deliver_after = after.max_delay_us.at(0) + q(481, 10);
  EXPECT_EQ(deliver_after - deliver_before, 50);
}

TEST(SimulateCqf, OverflowDetected) {
  net::TestCase tc = chain3(net::Mechanism::kCqf, 965);
  EXPECT_THROW(simulate_cqf(tc, config(4000)), CqfCapacityError);
}

TEST(SimulateCqf, ZeroFlows) {
  net::TestCase tc = star(net::Mechanism::kCqf, "", "");
  EXPECT_TRUE(simulate_cqf(tc, config(1000)).max_delay_us.empty());
}

TEST(SimulateCqf, JitteredPhasesAreCycleMultiples) {
  net::TestCase tc = star(net::Mechanism::kCqf, "0,node1_1,node1_2,400,500,100\n1,node1_3,node1_2,400,500,100\n",
                          "0:node1_1>sw1>node1_2\n1:node1_3>sw1>node1_2\n");
  SimConfig cfg = config(4000, 9);
  cfg.release_policy = ReleasePolicy::kJittered;
  SimReport r = simulate_cqf(tc, cfg);
  auto bound = cqf::cqf_solve(tc);
  for (const auto& [id, phase] : r.phase_us) {
    EXPECT_TRUE(is_integer(phase / 50));
    EXPECT_LE(r.max_delay_us.at(id), bound.flows.at(id).wcd_us);
  }
}
