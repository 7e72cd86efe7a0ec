#include <gtest/gtest.h>

#include "oracle.hpp"
#include "tsnwcd/cbs_tfa.hpp"

using namespace tsnwcd;
using namespace tsnwcd::cbs;
using minplus::RateLatency;
using minplus::TokenBucket;

namespace {

Rational q(long p, long d = 1) { return ratio(p, d); }

net::TestCase star(int hosts, const std::vector<std::array<int, 3>>& flows /* src, dst, payload */,
                   long period = 1000) {
  net::TestCase tc;
  tc.name = "star";
  std::string topo = "node,sw1,sw\n";
  for (int h = 1; h <= hosts; ++h) topo += "node,node1_" + std::to_string(h) + ",es\n";
  for (int h = 1; h <= hosts; ++h) topo += "link,node1_" + std::to_string(h) + ",sw1\n";
  tc.topology = net::parse_topology(topo);
  std::string ftext, rtext;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    auto [s, d, payload] = flows[i];
    std::string src = "node1_" + std::to_string(s), dst = "node1_" + std::to_string(d);
    ftext += std::to_string(i) + "," + src + "," + dst + "," + std::to_string(period) + ",500," +
             std::to_string(payload) + "\n";
    rtext += std::to_string(i) + ":" + src + ">sw1>" + dst + "\n";
  }
  tc.flows = net::parse_flows(ftext);
  tc.routes = net::parse_routes(rtext, tc.topology, tc.flows);
  return tc;
}

// sw1 - sw2 - sw3 line with one host per switch.
net::TestCase line3() {
  net::TestCase tc;
  tc.name = "line";
  tc.topology = net::parse_topology(
      "node,sw1,sw\nnode,sw2,sw\nnode,sw3,sw\nnode,node1_1,es\nnode,node2_1,es\nnode,node3_1,es\n"
      "link,sw1,sw2\nlink,sw2,sw3\nlink,node1_1,sw1\nlink,node2_1,sw2\nlink,node3_1,sw3\n");
  tc.flows = net::parse_flows(
      "0,node1_1,node3_1,1000,500,1000\n1,node2_1,node3_1,2500,500,400\n2,node1_1,node2_1,5000,500,1500\n");
  tc.routes = net::parse_routes("0:node1_1>sw1>sw2>sw3>node3_1\n1:node2_1>sw2>sw3>node3_1\n2:node1_1>sw1>sw2>node2_1\n",
                                tc.topology, tc.flows);
  return tc;
}

}  // namespace

TEST(CreditBounds, DefaultConstants) {
  auto cfg = CbsClassConfig::make(q(75), q(100), q(8056), q(12336));
  CreditBounds b = credit_bounds(cfg, q(100));
  EXPECT_EQ(b.c_min, -2014);
  EXPECT_EQ(b.c_max, 9252);
  auto tiny = CbsClassConfig::make(q(75), q(100), q(0), q(12336));
  EXPECT_EQ(credit_bounds(tiny, q(100)).c_min, 0);
}

TEST(CreditBounds, SecondClassUsesHigherClassTerms) {
  // Class A (idSl 50) above class B (idSl 25), lower frame 12336.
  std::vector<CbsClassConfig> classes{CbsClassConfig::make(q(50), q(100), q(8000), q(12336)),
                                      CbsClassConfig::make(q(25), q(100), q(4000), q(12336), 2)};
  CreditBounds b = credit_bounds(classes, 1, q(100));
  // c_max = 25 * (c_min_A - 12336) / (50 - 100), c_min_A = -50 * 8000 / 100.
  EXPECT_EQ(b.c_max, q(25) * (q(-4000) - q(12336)) / q(-50));
  EXPECT_EQ(b.c_min, -3000);
}

TEST(CreditBounds, RejectsBadSlopes) {
  EXPECT_THROW(credit_bounds(CbsClassConfig::make(q(100), q(100), q(1), q(1)), q(100)), std::invalid_argument);
  EXPECT_THROW(credit_bounds(CbsClassConfig::make(q(0), q(100), q(1), q(1)), q(100)), std::invalid_argument);
}

TEST(ServiceCurve, RateLatencyFromCredit) {
  auto cfg = CbsClassConfig::make(q(75), q(100), q(8056), q(12336));
  RateLatency rl = cbs_service_curve(cfg, q(100));
  EXPECT_EQ(rl.rate_bits_per_us, 75);
  EXPECT_EQ(rl.latency_us, q(12336, 100));
  EXPECT_NEAR(rl.latency_us.get_d(), 123.36, 1e-12);
  auto other = CbsClassConfig::make(q(75), q(100), q(100), q(12336));
  EXPECT_EQ(cbs_service_curve(other, q(100)), rl);
  auto none = CbsClassConfig::make(q(75), q(100), q(8056), q(0));
  EXPECT_EQ(cbs_service_curve(none, q(100)).latency_us, 0);
}

TEST(SourceArrival, SingleFlow) {
  net::Flow f{0, "a", "b", q(2500), q(709), 965};
  TokenBucket tb = source_arrival(f, net::NetworkConstants{});
  EXPECT_EQ(tb.burst_bits, 8056);
  EXPECT_EQ(tb.rate_bits_per_us, q(32224, 10000));
  net::Flow g = f;
  g.payload_bytes = 2 * 965 + 42;
  EXPECT_EQ(source_arrival(g, {}).burst_bits, 2 * 8056);
}

TEST(Shaping, LinkAndCbsCurves) {
  EXPECT_EQ(link_shaping(q(100), q(8056)), (TokenBucket{q(8056), q(100)}.curve()));
  auto cfg = CbsClassConfig::make(q(75), q(100), q(8056), q(12336));
  EXPECT_EQ(cbs_shaping(cfg, q(100), q(8056)), (TokenBucket{q(19322), q(75)}.curve()));
  auto flat = CbsClassConfig::make(q(75), q(100), q(0), q(0));
  EXPECT_EQ(cbs_shaping(flat, q(100), q(8056)).burst(), 8056);
}

TEST(AggregateArrival, Cases) {
  Curve bucket = TokenBucket{q(8000), q(3)}.curve();
  SourceGroup single{{bucket}, {link_shaping(q(100), q(12000))}};
  EXPECT_EQ(aggregate_arrival({single}), bucket);
  EXPECT_EQ(aggregate_arrival({}), Curve::zero());

  SourceGroup g1{{bucket, TokenBucket{q(4000), q(2)}.curve()}, {link_shaping(q(100), q(8000))}};
  SourceGroup g2{{TokenBucket{q(9000), q(1)}.curve()}, {link_shaping(q(100), q(9000))}};
  Curve got = aggregate_arrival({g1, g2});
  auto a = oracle::from(TokenBucket{q(12000), q(5)}.curve());
  auto s = oracle::from(link_shaping(q(100), q(8000)));
  auto b = oracle::from(TokenBucket{q(9000), q(1)}.curve());
  for (int i = 0; i <= 10000; ++i) {
    double t = 500.0 * i / 10000;
    double want = std::min(a(t), s(t)) + b(t);
    ASSERT_TRUE(oracle::close(got(rational_from_double(t)).get_d(), want)) << t;
  }
}

TEST(TfaSolve, SingleFlowMatchesClosedForm) {
  net::TestCase tc = star(2, {{1, 2, 965}}, 2500);
  CbsReport r = tfa_solve(tc);
  ASSERT_TRUE(r.converged);
  const FlowBound& fb = r.flows.at(0);
  ASSERT_EQ(fb.hops.size(), 2u);

  // Independent closed forms: talker port T + b/R, then the switch port sees
  // min(b + rho D1 + rho t, b + C t) against the same rate-latency.
  double b = 8056, rho = 8056.0 / 2500, big_r = 75, lat = 12336.0 / 100, c = 100;
  double d1 = lat + b / big_r;
  double cross = rho * d1 / (c - rho);
  double d2 = lat + (b + c * cross) / big_r - cross;
  EXPECT_TRUE(oracle::close(fb.hops[0].delay.get_d(), d1));
  EXPECT_TRUE(oracle::close(fb.hops[1].delay.get_d(), d2));
  EXPECT_EQ(fb.constants, 2 + 1 + 1);
  EXPECT_EQ(fb.e2e, fb.queuing + fb.constants);

  // The switch port value equals h_dev of its own inputs.
  Curve alpha = minplus::min_of(minplus::shift_delay(TokenBucket{q(8056), q(8056, 2500)}.curve(), fb.hops[0].delay),
                                link_shaping(q(100), q(8056)));
  EXPECT_EQ(fb.hops[1].delay, minplus::h_dev(alpha, RateLatency{q(75), q(12336, 100)}.curve()));
}

TEST(TfaSolve, NoFlowsConvergesImmediately) {
  net::TestCase tc = star(2, {});
  CbsReport r = tfa_solve(tc);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.flows.empty());
}

TEST(TfaSolve, FeedForwardConvergesWithinHops) {
  std::vector<std::array<int, 3>> flows;
  for (int i = 0; i < 10; ++i) flows.push_back({i % 5 + 1, (i + 2) % 5 + 1, 100 + 50 * i});
  CbsReport r = tfa_solve(star(5, flows, 1000));
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 3);
}

TEST(TfaSolve, StoredCurvesReproduceDelays) {
  CbsReport r = tfa_solve(line3());
  for (const auto& [p, pa] : r.per_port) EXPECT_EQ(pa.delay_bound, minplus::h_dev(pa.arrival, pa.service)) << p.label();
  for (const auto& [id, fb] : r.flows) {
    Rational sum(0);
    for (const auto& h : fb.hops) sum += h.delay;
    EXPECT_EQ(sum, fb.queuing);
  }
}

TEST(TfaSolve, AddingAFlowNeverDecreasesBounds) {
  net::TestCase base = line3();
  CbsReport before = tfa_solve(base);
  net::TestCase more = base;
  more.flows.push_back(net::Flow{3, "node1_1", "node3_1", q(1000), q(500), 700});
  more.routes.push_back(net::Route{3, {"node1_1", "sw1", "sw2", "sw3", "node3_1"}});
  CbsReport after = tfa_solve(more);
  for (const auto& [p, pa] : before.per_port) EXPECT_GE(after.per_port.at(p).delay_bound, pa.delay_bound);
  for (const auto& [id, fb] : before.flows) EXPECT_GE(after.flows.at(id).e2e, fb.e2e);
}

TEST(TfaSolve, OverloadedPortIsUnstable) {
  std::vector<std::array<int, 3>> flows;
  for (int i = 0; i < 8; ++i) flows.push_back({1, 2, 1500});
  try {
    tfa_solve(star(2, flows, 1000));
    FAIL();
  } catch (const UnstablePortError& e) {
    EXPECT_FALSE(e.ports().empty());
  }
}

TEST(TfaSolve, RejectsCqfCase) {
  net::TestCase tc = star(2, {{1, 2, 100}});
  tc.mechanism = net::Mechanism::kCqf;
  tc.constants.cycle_us = 100;
  EXPECT_THROW(tfa_solve(tc), Error);
}

TEST(TfaSolve, ReportJsonShape) {
  auto j = report_json(tfa_solve(star(2, {{1, 2, 965}}, 2500)));
  EXPECT_EQ(j["mechanism"], "CBS");
  ASSERT_EQ(j["flows"].size(), 1u);
  EXPECT_EQ(j["flows"][0]["per_hop"].size(), 2u);
  EXPECT_TRUE(j["converged"].get<bool>());
}
