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

#include "dynbatch/pqtree.h"

#include <gtest/gtest.h>

#include <random>

#include "test_util.h"

namespace dynbatch {
namespace {

std::vector<int> iota_vec(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::set<std::vector<int>> frontier_set(const PQTree& t) {
  const auto f = t.all_frontiers();
  return {f.begin(), f.end()};
}

TEST(PQTreeTest, InitialTreeAdmitsEveryOrder) {
  const auto u = iota_vec(4);
  PQTree t(u);
  EXPECT_EQ(t.kind(t.root()), PQTree::Kind::kP);
  EXPECT_EQ(t.all_frontiers().size(), 24u);
  PQTree one(std::vector<int>{7});
  EXPECT_EQ(one.kind(one.root()), PQTree::Kind::kLeaf);
  EXPECT_EQ(one.frontier(), std::vector<int>{7});
}

TEST(PQTreeTest, OverlappingSetsFormAQNode) {
  const auto u = iota_vec(4);
  PQTree t(u);
  ASSERT_TRUE(t.reduce(std::vector<int>{0, 1}).ok);
  ASSERT_TRUE(t.reduce(std::vector<int>{1, 2}).ok);
  EXPECT_EQ(frontier_set(t), testing::consecutive_orders(4, {{0, 1}, {1, 2}}));
  const auto block = t.find_block(std::vector<int>{0, 1, 2});
  ASSERT_TRUE(block.has_value());
  EXPECT_EQ(t.kind(block->node), PQTree::Kind::kQ);
}

TEST(PQTreeTest, ConflictLeavesTreeUnchanged) {
  // {0,1}, {1,2}, {2,3} force the chain 0-1-2-3; {0,2} then cannot hold.
  const auto u = iota_vec(5);
  PQTree t(u);
  for (const auto& s : std::vector<std::vector<int>>{{0, 1}, {1, 2}, {2, 3}}) {
    ASSERT_TRUE(t.reduce(s).ok);
  }
  const std::string before = t.to_string();
  const auto r = t.reduce(std::vector<int>{0, 2});
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(t.to_string(), before);
  EXPECT_TRUE(testing::consecutive_orders(5, {{0, 1}, {1, 2}, {2, 3}, {0, 2}}).empty());
  EXPECT_EQ(frontier_set(t), testing::consecutive_orders(5, {{0, 1}, {1, 2}, {2, 3}}));
}

TEST(PQTreeTest, TrivialReductionsAreNoOps) {
  const auto u = iota_vec(3);
  PQTree t(u);
  const auto r = t.reduce(std::vector<int>{1});
  EXPECT_TRUE(r.ok);
  EXPECT_FALSE(r.changed);
  EXPECT_TRUE(t.reduce(u).ok);
  EXPECT_EQ(t.all_frontiers().size(), 6u);
  EXPECT_THROW(t.reduce(std::vector<int>{0, 9}), std::out_of_range);
}

TEST(PQTreeTest, FrontiersMatchBruteForceOnRandomSystems) {
  std::mt19937_64 rng(2024);
  int failures_checked = 0;
  for (int c = 0; c < 400; ++c) {
    const int n = std::uniform_int_distribution<int>(2, 7)(rng);
    const auto u = iota_vec(n);
    PQTree t(u);
    std::vector<std::vector<int>> applied;
    const int m = std::uniform_int_distribution<int>(1, 5)(rng);
    for (int k = 0; k < m; ++k) {
      std::vector<int> s = u;
      std::shuffle(s.begin(), s.end(), rng);
      s.resize(std::uniform_int_distribution<int>(2, n)(rng));
      auto with = applied;
      with.push_back(s);
      const auto expected = testing::consecutive_orders(n, with);
      const std::string before = t.to_string();
      if (!t.reduce(s).ok) {
        EXPECT_TRUE(expected.empty()) << "case " << c;
        EXPECT_EQ(t.to_string(), before);
        ++failures_checked;
        continue;
      }
      applied = std::move(with);
      const auto frontiers = t.all_frontiers();
      EXPECT_EQ(std::set<std::vector<int>>(frontiers.begin(), frontiers.end()), expected)
          << "case " << c << " tree " << t.to_string();
      EXPECT_EQ(frontiers.size(), expected.size());
    }
  }
  EXPECT_GT(failures_checked, 0);
}

TEST(PQTreeTest, ParentPointersStayConsistent) {
  std::mt19937_64 rng(5);
  const auto u = iota_vec(8);
  PQTree t(u);
  for (int k = 0; k < 30; ++k) {
    std::vector<int> s = u;
    std::shuffle(s.begin(), s.end(), rng);
    s.resize(std::uniform_int_distribution<int>(2, 4)(rng));
    t.reduce(s);
    std::vector<int> stack = {t.root()};
    int leaves = 0;
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      ASSERT_TRUE(t.alive(n));
      if (t.kind(n) == PQTree::Kind::kLeaf) {
        ++leaves;
        EXPECT_EQ(t.leaf_of(t.variable(n)), n);
        continue;
      }
      EXPECT_GE(t.num_children(n), t.kind(n) == PQTree::Kind::kP ? 3 : 2);
      for (int c : t.children(n)) {
        EXPECT_EQ(t.parent(c), n);
        stack.push_back(c);
      }
    }
    EXPECT_EQ(leaves, 8);
  }
}

TEST(PQTreeTest, FindBlockReportsRuns) {
  const auto u = iota_vec(5);
  PQTree t(u);
  t.reduce(std::vector<int>{0, 1});
  t.reduce(std::vector<int>{1, 2});
  t.reduce(std::vector<int>{2, 3});
  const auto run = t.find_block(std::vector<int>{1, 2});
  ASSERT_TRUE(run.has_value());
  EXPECT_TRUE(run->is_run());
  EXPECT_FALSE(t.find_block(std::vector<int>{0, 2}).has_value());
  EXPECT_FALSE(t.find_block(std::vector<int>{0, 4}).has_value());
}

TEST(PQTreeTest, AffectedBatchesFollowAncestors) {
  const auto u = iota_vec(5);
  PQTree t(u);
  t.tag(t.root(), 3);
  const auto r = t.reduce(std::vector<int>{0, 1});
  ASSERT_TRUE(r.changed);
  EXPECT_TRUE(t.affected_batches(r).count(3));
}

}  // namespace
}  // namespace dynbatch
