#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

#include <json.hpp>

#include "tsnwcd/bundle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsnwcd;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  std::string cmd = std::string(TSNWCD_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

json summary(const Run& r) {
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1) << r.out;
  return json::parse(r.out);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tsnwcd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // node1_1 - sw1 - sw2 - sw3 - node4_1 with T = 50 us.
  fs::path cqf_case() {
    net::TestCase tc;
    tc.name = "TC1";
    tc.mechanism = net::Mechanism::kCqf;
    tc.constants.cycle_us = 50;
    tc.topology = net::parse_topology(
        "node,sw1,sw\nnode,sw2,sw\nnode,sw3,sw\nnode,node1_1,es\nnode,node4_1,es\n"
        "link,node1_1,sw1\nlink,sw1,sw2\nlink,sw2,sw3\nlink,sw3,node4_1\n");
    tc.flows = net::parse_flows("0,node1_1,node4_1,400,500,100\n");
    tc.routes = net::parse_routes("0:node1_1>sw1>sw2>sw3>node4_1\n", tc.topology, tc.flows);
    fs::path p = dir_ / "cqf";
    net::write_testcase(p, tc);
    return p;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string tree(const fs::path& root) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += fs::relative(f, root).string() + "\n" + net::read_file(f);
  return all;
}

}  // namespace

TEST_F(CliTest, AnalyzeCqfWorkedValue) {
  auto r = cli("analyze --tc " + cqf_case().string() + " --out " + path("truth.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  json s = summary(r);
  EXPECT_EQ(s["command"], "analyze");
  EXPECT_EQ(s["ok"], true);
  json truth = json::parse(net::read_file(path("truth.json")));
  EXPECT_EQ(truth["flows"][0]["wcd_us"], 205.0);
  EXPECT_EQ(truth["flows"][0]["sw_num"], 3);
}

TEST_F(CliTest, GenIsDeterministic) {
  auto a = cli("gen --manifest corpus/manifest.json --out " + path("a") + " --jobs 1");
  auto b = cli("gen --manifest corpus/manifest.json --out " + path("b") + " --jobs 3");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(summary(a)["testcases"], 30);
  EXPECT_EQ(tree(path("a")), tree(path("b")));
  EXPECT_EQ(tree(path("a")), tree("corpus/tc"));
}

TEST_F(CliTest, AnalyzeCorpusAndCurves) {
  auto r = cli("analyze --tc corpus/tc --mechanism cbs --jobs 2 --out " + path("truth"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(summary(r)["testcases"], 30);
  EXPECT_TRUE(fs::exists(path("truth/TC7.json")));
  auto c = cli("analyze --tc corpus/tc/TC1 --out " + path("tc1.json") + " --dump-curves " + path("curves"));
  ASSERT_EQ(c.code, 0) << c.out;
  EXPECT_TRUE(fs::exists(path("curves/sw1_node1_1_service.csv")));
}

TEST_F(CliTest, ScoreFixture) {
  auto r = cli("score --truth-dir tests/fixtures/three_tc/truth --pred-dir tests/fixtures/three_tc/pred --min-tcs 3 --out " +
               path("metrics.json") + " --per-tc-csv " + path("per_tc.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  json s = summary(r);
  EXPECT_NEAR(s["mae_us"].get<double>(), 18.5, 1e-9);
  EXPECT_EQ(s["suppressed"], false);
  json m = json::parse(net::read_file(path("metrics.json")));
  EXPECT_NEAR(m["open"]["per_tc"][1]["mape_pct"].get<double>(), 11.5, 1e-9);

  auto rep = cli("report --metrics " + path("metrics.json") + " --per-tc-csv " + path("again.csv"));
  ASSERT_EQ(rep.code, 0);
  EXPECT_EQ(net::read_file(path("again.csv")), net::read_file(path("per_tc.csv")));
}

TEST_F(CliTest, ScoreMcqaAndReport) {
  net::write_file(path("items.json"), R"([{"id": "1", "question": "?", "options": ["a", "b"], "correct": 0},
                                          {"id": "2", "question": "?", "options": ["a", "b"], "correct": 1}])");
  net::write_file(path("runs.jsonl"),
                  "{\"id\": \"1\", \"runs\": [{\"answer\": \"A\", \"confidence\": 0.9}, {\"answer\": \"A\", \"confidence\": 0.9}]}\n"
                  "{\"id\": \"2\", \"runs\": [{\"answer\": \"A\", \"confidence\": 0.85}, {\"answer\": \"B\", \"confidence\": 0.6}]}\n");
  auto r = cli("score-mcqa --items " + path("items.json") + " --runs " + path("runs.jsonl") + " --out " + path("m.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  json s = summary(r);
  EXPECT_EQ(s["accuracy_pct"], 75.0);
  EXPECT_EQ(s["consistency"], 0.5);
  EXPECT_EQ(s["cw_rate_pct"], 100.0);
  auto rep = cli("report --metrics " + path("m.json") + " --reliability-csv " + path("r.csv"));
  ASSERT_EQ(rep.code, 0);
  EXPECT_EQ(net::read_file(path("r.csv")).rfind("bin_lo,bin_hi,n,conf_mean,acc\n", 0), 0u);
}

TEST_F(CliTest, PromptAndSim) {
  auto p = cli("prompt --tc " + cqf_case().string() + " --out " + path("p.txt"));
  ASSERT_EQ(p.code, 0);
  EXPECT_NE(net::read_file(path("p.txt")).find("compute the Hypercycle"), std::string::npos);
  auto s = cli("sim --tc " + cqf_case().string() + " --horizon 4000 --out " + path("sim.json"));
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_LE(summary(s)["max_delay_us"].get<double>(), 205);
}

TEST_F(CliTest, ConfigFileAndPrecedence) {
  net::write_file(path("cfg.ini"), "[sim]\nseed=7\nrelease=jittered\nhorizon=4000\n");
  auto a = cli("--config " + path("cfg.ini") + " sim --tc " + cqf_case().string() + " --out " + path("a.json"));
  ASSERT_EQ(a.code, 0) << a.out;
  json ja = json::parse(net::read_file(path("a.json")));
  EXPECT_EQ(ja["seed"], 7);
  EXPECT_EQ(ja["release_policy"], "jittered");
  auto b = cli("--config " + path("cfg.ini") + " sim --tc " + cqf_case().string() + " --seed 9 --out " + path("b.json"));
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(json::parse(net::read_file(path("b.json")))["seed"], 9);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("analyze --bogus").code, 2);
  EXPECT_EQ(cli("analyze --tc " + cqf_case().string()).code, 2);
  EXPECT_EQ(cli("analyze --tc " + cqf_case().string() + " --mechanism tas --out x").code, 2);
  EXPECT_EQ(cli("--help").code, 0);

  // CQF bundle analyzed as CBS is fine; a CBS bundle without a cycle cannot be CQF.
  auto cbs = cli("analyze --tc " + cqf_case().string() + " --mechanism cbs --out " + path("c.json"));
  EXPECT_EQ(cbs.code, 0);
  net::TestCase tc = net::load_testcase(cqf_case());
  tc.constants.cycle_us.reset();
  tc.mechanism = net::Mechanism::kCbs;
  net::write_testcase(dir_ / "nocycle", tc);
  auto bad = cli("analyze --tc " + path("nocycle") + " --mechanism cqf --out " + path("d.json"));
  EXPECT_EQ(bad.code, 1);
  json s = summary(bad);
  EXPECT_EQ(s["ok"], false);
  EXPECT_TRUE(s.contains("error"));
}

TEST_F(CliTest, UnstableCbsIsDomainError) {
  net::TestCase tc;
  tc.name = "hot";
  tc.topology = net::parse_topology(
      "node,sw1,sw\nnode,a,es\nnode,b,es\nnode,c,es\nlink,a,sw1\nlink,b,sw1\nlink,c,sw1\n");
  tc.flows = net::parse_flows("0,a,c,100,500,1500\n1,b,c,100,500,1500\n");
  tc.routes = net::parse_routes("0:a>sw1>c\n1:b>sw1>c\n", tc.topology, tc.flows);
  net::write_testcase(dir_ / "hot", tc);
  auto r = cli("analyze --tc " + path("hot") + " --out " + path("h.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("h.json")));
}
