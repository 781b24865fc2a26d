/* Copyright 2026 The dynbatch Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Runs the dynbatch binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dynbatch/generators.h"
#include "dynbatch/graph.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;  // stdout and stderr
};

CliRun run(const std::string& args) {
  const std::string cmd =
      std::string("DYNBATCH_LOG_LEVEL=off ") + DYNBATCH_CLI_PATH + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf;
  size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string subgraph(const std::string& name) {
  return std::string(DYNBATCH_DATA_DIR) + "/subgraphs/" + name;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dynbatch_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, GenWritesReloadableGraphs) {
  const CliRun r = run("gen --family tree --count 8 --leaves 4..12 --seed 7 --out " + path("d"));
  ASSERT_EQ(r.code, 0) << r.out;
  int files = 0;
  for (const auto& e : fs::directory_iterator(path("d"))) {
    ++files;
    const dynbatch::DataflowGraph g = dynbatch::load_graph_file(e.path().string());
    EXPECT_GT(g.num_nodes(), 0);
  }
  EXPECT_EQ(files, 8);
}

TEST_F(CliTest, GenLatticePassesValidator) {
  const CliRun r =
      run("gen --family lattice --len 20 --words 6 --seed 1 --out " + path("d"));
  ASSERT_EQ(r.code, 0) << r.out;
  for (const auto& e : fs::directory_iterator(path("d"))) {
    const auto g = dynbatch::load_graph_file(e.path().string());
    EXPECT_EQ(dynbatch::validate_lattice(g, 2, 4), "");
    EXPECT_EQ(g.num_nodes(), 26);
  }
}

TEST_F(CliTest, GenWithoutFamilyIsUsageError) {
  EXPECT_EQ(run("gen --count 2 --out " + path("d")).code, 2);
  EXPECT_EQ(run("gen --family nope").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(CliTest, TrainConvergesAndIsReproducible) {
  const std::string common = "train --family tree --count 4 --batch 2 --seed 3 --encoder sort ";
  const CliRun a = run(common + "--out " + path("a.json") + " --log " + path("log.json"));
  ASSERT_EQ(a.code, 0) << a.out;
  const CliRun b = run(common + "--out " + path("b.json"));
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));

  const auto log = nlohmann::json::parse(slurp(path("log.json")));
  EXPECT_TRUE(log["reached_lower_bound"].get<bool>());
  EXPECT_EQ(log["checkpoints"].back()["total_batches"], log["lower_bound_total"]);
  const auto graphs =
      dynbatch::generate([] {
        dynbatch::GeneratorParams p;
        p.family = dynbatch::Family::kTree;
        p.count = 4;
        p.batch = 2;
        p.min_size = 4;
        p.max_size = 12;
        return p;
      }(), 3);
  int lb = 0;
  for (const auto& g : graphs) lb += dynbatch::lower_bound(g);
  EXPECT_EQ(log["lower_bound_total"].get<int>(), lb);
}

TEST_F(CliTest, TrainRejectsZeroEpisodes) {
  const CliRun r = run("train --family tree --max-episodes 0 --out " + path("p.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("p.json")));
}

TEST_F(CliTest, BenchReportsLowerBoundPerGraph) {
  const CliRun r = run("bench --suite chain --no-timing --json " + path("r.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  ASSERT_EQ(j.size(), 1u);
  for (const auto& g : j[0]["graphs"]) {
    const int lb = g["lower_bound"];
    for (const char* a : {"agenda", "sc", "fsm-base", "fsm-max", "fsm-sort"}) {
      EXPECT_EQ(g["batches"][a].get<int>(), lb) << a;
    }
  }
  const CliRun again = run("bench --suite chain --no-timing --json " + path("s.json"));
  EXPECT_EQ(slurp(path("r.json")), slurp(path("s.json")));
}

TEST_F(CliTest, BenchFlagsTheSwappedPair) {
  const CliRun r = run("bench --fixture swapped-pair --algorithms fsm-base,sc");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("fsm-base above lower bound"), std::string::npos) << r.out;
}

TEST_F(CliTest, PlanTwoBatchExampleIsZeroCopy) {
  const CliRun r = run("plan " + subgraph("two_batch.dsl") + " --json " + path("p.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("p.json")));
  EXPECT_EQ(j["planned"]["memory_kernels"], 0);
  EXPECT_EQ(j["label"]["gathers"], 2);
  EXPECT_EQ(j["label"]["scatters"], 1);
}

TEST_F(CliTest, PlanLstmBeatsLabelOrder) {
  const CliRun r = run("plan " + subgraph("lstm_cell.dsl") + " --json " + path("p.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(path("p.json")));
  EXPECT_LT(j["planned"]["memory_kernels"].get<int>(), j["label"]["memory_kernels"].get<int>());
  EXPECT_LT(j["planned"]["bytes_moved"].get<int>(), j["label"]["bytes_moved"].get<int>());
}

TEST_F(CliTest, PlanReportsParseErrorLine) {
  std::ofstream(path("bad.dsl")) << "input a\nb = tanh(a)\nc = tanh(zz)\n";
  const CliRun r = run("plan " + path("bad.dsl"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 3"), std::string::npos) << r.out;
}

TEST_F(CliTest, VerifyPassesAndMutantFails) {
  const CliRun ok = run("verify --cases 40 --pq-cases 100 --layout-cases 60");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  const CliRun bad = run("verify --cases 10 --pq-cases 10 --layout-cases 60 --mutant skip-broadcast");
  EXPECT_EQ(bad.code, 1) << bad.out;
  EXPECT_NE(bad.out.find("FAIL alignment"), std::string::npos) << bad.out;
}

}  // namespace
