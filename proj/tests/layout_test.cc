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

#include "dynbatch/layout.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dynbatch/harness.h"

namespace dynbatch {
namespace {

SubgraphIR fixture(const std::string& name) {
  return load_subgraph_file(std::string(DYNBATCH_DATA_DIR) + "/subgraphs/" + name + ".dsl");
}

std::vector<int> ids(const SubgraphIR& ir, const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& n : names) out.push_back(ir.find(n));
  return out;
}

struct Planned {
  SubgraphIR ir;
  BatchSchedule schedule;
  std::vector<BatchOperands> operands;
  LayoutPlan plan;
  LayoutPlan label;
};

Planned run(const std::string& name) {
  Planned p;
  p.ir = fixture(name);
  p.schedule = schedule_subgraph(p.ir);
  p.operands = extract_operands(p.ir, p.schedule);
  p.plan = plan_layout(p.ir, p.operands);
  p.label = label_order_plan(p.ir);
  return p;
}

// Zero-copy by trying every member permutation.
bool brute_zero_copy(const SubgraphIR& ir, const LayoutPlan& plan, const BatchOperands& b) {
  std::vector<int> perm(b.width());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    auto check = [&](const std::vector<int>& op) {
      if (is_broadcast(op)) return;
      for (size_t i = 0; i + 1 < perm.size(); ++i) {
        const int v = op[perm[i]];
        ok = ok && plan.offset[op[perm[i + 1]]] == plan.offset[v] + ir.vars[v].size;
      }
    };
    check(b.result);
    for (const auto& s : b.sources) check(s);
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

TEST(ScheduleSubgraphTest, IndependentGatesShareOneBatch) {
  const SubgraphIR ir = parse_subgraph(
      "input x:2\nparam A:4, B:4, C:4, D:4, a:2, b:2, c:2, d:2\n"
      "p = affine(A, x, a)\nq = affine(B, x, b)\nr = affine(C, x, c)\ns = affine(D, x, d)\n");
  EXPECT_EQ(schedule_subgraph(ir).size(), 1);
}

TEST(ScheduleSubgraphTest, DistinctChainNeedsOneBatchPerOp) {
  const SubgraphIR ir = parse_subgraph("input a\nb = tanh(a)\nc = sigmoid(b)\nd = relu(c)\n");
  EXPECT_EQ(schedule_subgraph(ir).size(), 3);
}

TEST(ScheduleSubgraphTest, FixturesReachTheLowerBound) {
  for (const char* name : {"two_batch", "lstm_cell", "gru_cell", "infeasible"}) {
    const SubgraphIR ir = fixture(name);
    EXPECT_EQ(schedule_subgraph(ir).size(), lower_bound(op_graph(ir))) << name;
  }
  EXPECT_EQ(schedule_subgraph(fixture("two_batch")).size(), 2);
}

TEST(ExtractOperandsTest, TwoBatchExample) {
  const Planned p = run("two_batch");
  ASSERT_EQ(p.operands.size(), 2u);
  const BatchOperands& b1 = p.operands[0];
  EXPECT_EQ(b1.result, ids(p.ir, {"x4", "x5"}));
  ASSERT_EQ(b1.sources.size(), 2u);
  EXPECT_EQ(b1.sources[0], ids(p.ir, {"x1", "x3"}));
  EXPECT_EQ(b1.sources[1], ids(p.ir, {"x2", "x1"}));
  const BatchOperands& b2 = p.operands[1];
  EXPECT_EQ(b2.result, ids(p.ir, {"x8", "x6", "x7"}));
  EXPECT_EQ(b2.sources[0], ids(p.ir, {"x3", "x4", "x5"}));
}

TEST(ExtractOperandsTest, SharedWeightIsBroadcast) {
  const SubgraphIR ir = parse_subgraph("input a, b\nparam W\nc = mul(W, a)\nd = mul(W, b)\n");
  const auto ops = extract_operands(ir, schedule_subgraph(ir));
  ASSERT_EQ(ops.size(), 1u);
  EXPECT_TRUE(is_broadcast(ops[0].sources[0]));
  const auto checks = check_ideal(ir, label_order_plan(ir), ops);
  EXPECT_EQ(checks[0].broadcast_sources, std::vector<int>{0});
}

TEST(PlanLayoutTest, TwoBatchExampleIsZeroCopy) {
  const Planned p = run("two_batch");
  for (const BatchCheck& c : check_ideal(p.ir, p.plan, p.operands)) EXPECT_TRUE(c.zero_copy);
  const CostReport r = cost_report(p.ir, p.schedule, p.operands,
                                   check_ideal(p.ir, p.plan, p.operands), "planned");
  EXPECT_EQ(r.memory_kernels(), 0);
  EXPECT_EQ(r.bytes_moved(), 0);
}

TEST(PlanLayoutTest, ReferenceOrderIsZeroCopy) {
  const SubgraphIR ir = fixture("two_batch");
  const auto ops = extract_operands(ir, schedule_subgraph(ir));
  const LayoutPlan plan = make_plan(ir, ids(ir, {"x2", "x1", "x3", "x4", "x5", "x8", "x6", "x7"}));
  for (const BatchCheck& c : check_ideal(ir, plan, ops)) EXPECT_TRUE(c.zero_copy);
}

TEST(PlanLayoutTest, LabelOrderNeedsTwoGathersAndOneScatter) {
  const Planned p = run("two_batch");
  EXPECT_EQ(p.label.order, ids(p.ir, {"x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8"}));
  const auto checks = check_ideal(p.ir, p.label, p.operands);
  EXPECT_FALSE(checks[0].zero_copy);
  EXPECT_EQ(checks[0].source_copies, (std::vector<int>{0, 1}));
  EXPECT_FALSE(checks[0].result_copy);
  EXPECT_FALSE(checks[1].zero_copy);
  EXPECT_TRUE(checks[1].result_copy);
  EXPECT_TRUE(checks[1].source_copies.empty());
  const CostReport r = cost_report(p.ir, p.schedule, p.operands, checks, "label");
  EXPECT_EQ(r.gathers, 2);
  EXPECT_EQ(r.scatters, 1);
  EXPECT_EQ(r.broadcasts, 0);
  EXPECT_EQ(r.copy_bytes, (2 + 2 + 3) * 4);
}

TEST(PlanLayoutTest, InfeasibleBatchIsTheOnlyOneFlagged) {
  const Planned p = run("infeasible");
  EXPECT_EQ(p.plan.copy_flagged, std::vector<int>{1});
  const auto checks = check_ideal(p.ir, p.plan, p.operands);
  EXPECT_TRUE(checks[0].zero_copy);
  EXPECT_FALSE(checks[1].zero_copy);
  // No variable order makes both batches zero-copy.
  std::vector<int> order(p.ir.vars.size());
  std::iota(order.begin(), order.end(), 0);
  int feasible = 0;
  do {
    const LayoutPlan plan = make_plan(p.ir, order);
    bool all = true;
    for (const BatchOperands& b : p.operands) all = all && brute_zero_copy(p.ir, plan, b);
    feasible += all;
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(feasible, 0);
}

TEST(PlanLayoutTest, CellFixturesNeedOnlyBroadcasts) {
  for (const char* name : {"lstm_cell", "gru_cell"}) {
    const Planned p = run(name);
    EXPECT_TRUE(p.plan.copy_flagged.empty()) << name;
    const CostReport planned = cost_report(p.ir, p.schedule, p.operands,
                                           check_ideal(p.ir, p.plan, p.operands), "planned");
    const CostReport label = cost_report(p.ir, p.schedule, p.operands,
                                         check_ideal(p.ir, p.label, p.operands), "label");
    EXPECT_EQ(planned.copy_kernels(), 0) << name;
    EXPECT_GT(planned.broadcasts, 0) << name;
    EXPECT_EQ(planned.memory_kernels(), planned.broadcasts) << name;
    EXPECT_LT(planned.memory_kernels(), label.memory_kernels()) << name;
    EXPECT_LT(planned.bytes_moved(), label.bytes_moved()) << name;
    EXPECT_EQ(planned.broadcast_bytes, label.broadcast_bytes) << name;
  }
}

TEST(PlanLayoutTest, PlanCoversEveryVariableOnce) {
  for (const char* name : {"two_batch", "lstm_cell", "gru_cell", "infeasible"}) {
    const Planned p = run(name);
    std::vector<int> sorted = p.plan.order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> all(p.ir.vars.size());
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(sorted, all) << name;
    long long prev = -1;
    for (int v : p.plan.order) {
      EXPECT_GT(p.plan.offset[v], prev);
      prev = p.plan.offset[v];
    }
  }
  const SubgraphIR ir = parse_subgraph("input a\nb = tanh(a)\n");
  const auto ops = extract_operands(ir, schedule_subgraph(ir));
  EXPECT_TRUE(check_ideal(ir, plan_layout(ir, ops), ops)[0].zero_copy);
}

TEST(PlanLayoutTest, MakePlanRejectsBadOrders) {
  const SubgraphIR ir = parse_subgraph("input a\nb = tanh(a)\n");
  EXPECT_THROW(make_plan(ir, {0}), std::invalid_argument);
  EXPECT_THROW(make_plan(ir, {0, 0}), std::invalid_argument);
  EXPECT_THROW(make_plan(ir, {0, 2}), std::invalid_argument);
}

TEST(CheckIdealTest, MatchesPermutationBruteForce) {
  std::mt19937_64 rng(17);
  int zero = 0;
  int total = 0;
  for (uint64_t seed = 0; seed < 150; ++seed) {
    const SubgraphIR ir = random_subgraph(8 + seed % 6, 3, seed);
    const auto ops = extract_operands(ir, schedule_subgraph(ir));
    std::vector<LayoutPlan> plans = {plan_layout(ir, ops), label_order_plan(ir)};
    std::vector<int> order(ir.vars.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    plans.push_back(make_plan(ir, order));
    for (const LayoutPlan& plan : plans) {
      const auto checks = check_ideal(ir, plan, ops);
      for (size_t k = 0; k < ops.size(); ++k) {
        if (ops[k].width() > 6) continue;
        ++total;
        zero += checks[k].zero_copy;
        EXPECT_EQ(checks[k].zero_copy, brute_zero_copy(ir, plan, ops[k])) << ir.name << " " << k;
      }
    }
  }
  EXPECT_GT(zero, 0);
  EXPECT_GT(total, zero);
}

TEST(CheckIdealTest, GlobalReversalPreservesZeroCopy) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const SubgraphIR ir = random_subgraph(10, 3, seed);
    const auto ops = extract_operands(ir, schedule_subgraph(ir));
    const LayoutPlan plan = plan_layout(ir, ops);
    const LayoutPlan reversed = make_plan(ir, {plan.order.rbegin(), plan.order.rend()});
    const auto a = check_ideal(ir, plan, ops);
    const auto b = check_ideal(ir, reversed, ops);
    for (size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].zero_copy, b[k].zero_copy);
  }
  const Planned p = run("lstm_cell");
  const LayoutPlan reversed = make_plan(p.ir, {p.plan.order.rbegin(), p.plan.order.rend()});
  for (const BatchCheck& c : check_ideal(p.ir, reversed, p.operands)) EXPECT_TRUE(c.zero_copy);
}

TEST(PlannerTest, SurvivingBatchesAreZeroCopy) {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    const SubgraphIR ir = random_subgraph(4 + seed % 10, 2 + seed % 4, seed);
    const auto ops = extract_operands(ir, schedule_subgraph(ir));
    const LayoutPlan plan = plan_layout(ir, ops);
    for (const BatchCheck& c : check_ideal(ir, plan, ops)) {
      const bool flagged = std::count(plan.copy_flagged.begin(), plan.copy_flagged.end(), c.batch);
      EXPECT_TRUE(flagged || c.zero_copy) << ir.name << " batch " << c.batch;
    }
  }
}

TEST(CostReportTest, AddingAViolatingBatchNeverLowersCost) {
  const Planned p = run("two_batch");
  const auto base_checks = check_ideal(p.ir, p.plan, p.operands);
  const CostReport base = cost_report(p.ir, p.schedule, p.operands, base_checks, "planned");
  // Append a batch of x1 and x8: never adjacent in the plan.
  SubgraphIR ir = p.ir;
  const int y1 = static_cast<int>(ir.vars.size());
  ir.vars.push_back(Variable{"y1", 1});
  ir.vars.push_back(Variable{"y2", 1});
  ir.ops.push_back(Op{y1, "tanh", {ir.find("x1")}, 0});
  ir.ops.push_back(Op{y1 + 1, "tanh", {ir.find("x8")}, 0});
  BatchSchedule s = p.schedule;
  s.batches.push_back(Batch{0, {static_cast<NodeId>(ir.ops.size() - 2),
                                static_cast<NodeId>(ir.ops.size() - 1)}});
  auto ops = p.operands;
  BatchOperands extra;
  extra.id = 2;
  extra.result = {y1, y1 + 1};
  extra.sources = {{ir.find("x1"), ir.find("x8")}};
  ops.push_back(extra);
  std::vector<int> order = p.plan.order;
  order.push_back(y1);
  order.push_back(y1 + 1);
  const LayoutPlan plan = make_plan(ir, order);
  const CostReport more = cost_report(ir, s, ops, check_ideal(ir, plan, ops), "planned");
  EXPECT_GE(more.memory_kernels(), base.memory_kernels() + 1);
  EXPECT_GT(more.bytes_moved(), base.bytes_moved());
}

TEST(CostReportTest, JsonMirrorsTotals) {
  const Planned p = run("lstm_cell");
  const CostReport r = cost_report(p.ir, p.schedule, p.operands,
                                   check_ideal(p.ir, p.label, p.operands), "label", 2);
  const std::string json = cost_report_json(r);
  EXPECT_NE(json.find("\"gathers\": " + std::to_string(r.gathers)), std::string::npos);
  EXPECT_NE(json.find("\"bytes_moved\": " + std::to_string(r.bytes_moved())), std::string::npos);
  EXPECT_NE(cost_report_text(r).find("total:"), std::string::npos);
}

TEST(LabelOrderTest, NumbersSortNumerically) {
  const SubgraphIR ir = parse_subgraph("input x10, x2, x1, y\n");
  EXPECT_EQ(label_order_plan(ir).order, ids(ir, {"x1", "x2", "x10", "y"}));
}

}  // namespace
}  // namespace dynbatch
