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

#include "dynbatch/graph.h"

#include <gtest/gtest.h>

#include "dynbatch/fixtures.h"
#include "dynbatch/generators.h"
#include "test_util.h"

namespace dynbatch {
namespace {

DataflowGraph diamond() {
  GraphBuilder b;
  b.add_node("A", {});        // 0
  b.add_node("B", {0});       // 1
  b.add_node("A", {0});       // 2
  b.add_node("A", {1, 2});    // 3
  return std::move(b).build("diamond");
}

TEST(GraphTest, DepthIsOnePlusDeepestInput) {
  const DataflowGraph g = diamond();
  EXPECT_EQ(g.depth(0), 1);
  EXPECT_EQ(g.depth(1), 2);
  EXPECT_EQ(g.depth(2), 2);
  EXPECT_EQ(g.depth(3), 3);
  EXPECT_EQ(longest_path(g), 3);
}

TEST(GraphTest, TypedPredecessorsSkipOtherTypes) {
  const DataflowGraph g = diamond();
  // 0 -> 1(B) -> 3 has no intermediate A, and neither has 0 -> 2.
  std::vector<NodeId> p3(g.typed_preds(3).begin(), g.typed_preds(3).end());
  std::sort(p3.begin(), p3.end());
  EXPECT_EQ(p3, (std::vector<NodeId>{0, 2}));
  EXPECT_TRUE(g.typed_preds(1).empty());
}

// u is a typed predecessor of v when some path u ~> v has only other-type
// intermediate nodes.
TEST(GraphTest, TypedPredecessorsMatchPathOracle) {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    const DataflowGraph g = random_dag(14, 3, 0.25, seed);
    const int n = g.num_nodes();
    std::vector<std::vector<NodeId>> succ(n);
    for (NodeId v = 0; v < n; ++v) {
      for (NodeId u : g.inputs(v)) succ[u].push_back(v);
    }
    std::vector<std::vector<NodeId>> expected(n);
    for (NodeId u = 0; u < n; ++u) {
      std::vector<char> seen(n, 0);
      std::vector<NodeId> stack = succ[u];
      while (!stack.empty()) {
        const NodeId w = stack.back();
        stack.pop_back();
        if (seen[w]++) continue;
        if (g.type_of(w) == g.type_of(u)) {
          expected[w].push_back(u);
          continue;
        }
        for (NodeId x : succ[w]) stack.push_back(x);
      }
    }
    for (NodeId v = 0; v < n; ++v) {
      std::sort(expected[v].begin(), expected[v].end());
      std::vector<NodeId> got(g.typed_preds(v).begin(), g.typed_preds(v).end());
      std::sort(got.begin(), got.end());
      EXPECT_EQ(got, expected[v]) << "seed " << seed << " node " << v;
    }
  }
}

TEST(GraphTest, LowerBoundMatchesClosureOracle) {
  for (uint64_t seed = 0; seed < 60; ++seed) {
    const DataflowGraph g = random_dag(16, 1 + seed % 4, 0.2, seed);
    EXPECT_EQ(lower_bound(g), testing::closure_lower_bound(g)) << "seed " << seed;
  }
  EXPECT_EQ(lower_bound(fixtures::spine_tree()), testing::closure_lower_bound(fixtures::spine_tree()));
}

TEST(GraphTest, TreeFixtureShape) {
  const DataflowGraph g = fixtures::spine_tree();
  EXPECT_EQ(g.num_nodes(), 16);
  EXPECT_EQ(g.nodes_of_type(g.find_type("I")).size(), 3u);
  EXPECT_EQ(g.nodes_of_type(g.find_type("O")).size(), 7u);
  EXPECT_EQ(g.nodes_of_type(g.find_type("R")).size(), 6u);
  EXPECT_EQ(lower_bound(g), 10);
}

TEST(GraphTest, TreeFixtureMeanDepths) {
  const DataflowGraph g = fixtures::spine_tree();
  EXPECT_DOUBLE_EQ(g.mean_depth(g.find_type("I")), 2.0);
  EXPECT_DOUBLE_EQ(g.mean_depth(g.find_type("O")), 13.0 / 7.0);
}

TEST(GraphTest, BuilderRejectsCyclesAndDanglingInputs) {
  {
    GraphBuilder b;
    b.add_node("A", {1});
    b.add_node("A", {0});
    EXPECT_THROW(std::move(b).build(), GraphError);
  }
  {
    GraphBuilder b;
    b.add_node("A", {5});
    EXPECT_THROW(std::move(b).build(), GraphError);
  }
  {
    GraphBuilder b;
    b.add_node("A", {0});
    EXPECT_THROW(std::move(b).build(), GraphError);
  }
}

TEST(GraphTest, JsonRoundTrip) {
  const DataflowGraph g = fixtures::swapped_tree_pair();
  const DataflowGraph h = load_graph(graph_to_json(g));
  EXPECT_EQ(graph_to_json(h), graph_to_json(g));
  EXPECT_EQ(h.num_nodes(), g.num_nodes());
  EXPECT_EQ(lower_bound(h), lower_bound(g));
}

TEST(GraphTest, LoadRejectsMalformedJson) {
  EXPECT_ANY_THROW(load_graph("{"));
  EXPECT_ANY_THROW(load_graph(R"({"types":["A"],"nodes":[{"id":0,"type":"B","inputs":[]}]})"));
  EXPECT_ANY_THROW(load_graph(R"({"types":["A"],"nodes":[{"id":0,"type":"A","inputs":[0]}]})"));
}

TEST(GraphTest, MergeUnifiesTypesByName) {
  GraphBuilder a;
  a.add_node("X", {});
  a.add_node("Y", {0});
  GraphBuilder b;
  b.add_node("Y", {});
  const std::vector<DataflowGraph> parts = {std::move(a).build(), std::move(b).build()};
  const DataflowGraph m = merge_graphs(parts, "m");
  EXPECT_EQ(m.num_nodes(), 3);
  EXPECT_EQ(m.num_types(), 2);
  EXPECT_EQ(m.type_of(2), m.find_type("Y"));
  EXPECT_EQ(m.inputs(1).size(), 1u);
  EXPECT_TRUE(m.inputs(2).empty());
}

TEST(GraphTest, TypedSubgraphKeepsOnlyOneType) {
  const DataflowGraph g = fixtures::spine_tree();
  const TypeId r = g.find_type("R");
  const TypedSubgraph sub = typed_subgraph(g, r);
  EXPECT_EQ(sub.graph.num_nodes(), 6);
  EXPECT_EQ(longest_path(sub.graph), 6);
  for (NodeId v = 0; v < sub.graph.num_nodes(); ++v) EXPECT_EQ(g.type_of(sub.origin[v]), r);
}

TEST(ExecutionStateTest, FrontierUpdatesIncrementally) {
  const DataflowGraph g = diamond();
  ExecutionState s(g);
  const TypeId a = g.find_type("A");
  const TypeId b = g.find_type("B");
  EXPECT_EQ(s.ready_types(), std::vector<TypeId>{a});
  EXPECT_EQ(s.typed_frontier_count(a), 1);
  s.issue(a);
  EXPECT_EQ(s.ready_count(a), 1);
  EXPECT_EQ(s.ready_count(b), 1);
  // Node 3 waits on node 2 only within G^A.
  EXPECT_EQ(s.typed_frontier_count(a), 1);
  s.issue(a);
  EXPECT_EQ(s.typed_frontier_count(a), 1);
  EXPECT_EQ(s.ready_count(a), 0);
  s.issue(b);
  s.issue(a);
  EXPECT_TRUE(s.done());
}

TEST(ExecutionStateTest, ExecuteRejectsInvalidBatches) {
  const DataflowGraph g = diamond();
  ExecutionState s(g);
  const std::vector<NodeId> not_ready = {3};
  EXPECT_THROW(s.execute(not_ready), GraphError);
  const std::vector<NodeId> twice = {0, 0};
  EXPECT_THROW(s.execute(twice), GraphError);
  const std::vector<NodeId> out_of_range = {9};
  EXPECT_THROW(s.execute(out_of_range), GraphError);
  s.issue(g.find_type("A"));
  const std::vector<NodeId> mixed = {1, 2};
  EXPECT_THROW(s.execute(mixed), GraphError);
  EXPECT_EQ(s.num_executed(), 1);
}

}  // namespace
}  // namespace dynbatch
