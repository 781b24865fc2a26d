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

#ifndef DYNBATCH_LAYOUT_H_
#define DYNBATCH_LAYOUT_H_

#include <string>
#include <vector>

#include "dynbatch/alignment.h"
#include "dynbatch/batching.h"
#include "dynbatch/subgraph_ir.h"

namespace dynbatch {

// Minimum-batch schedule of the subgraph's op graph.
BatchSchedule schedule_subgraph(const SubgraphIR& ir, int limit = 64);

// Operands of every batch, members in schedule order. Variable ids index
// ir.vars; source j collects argument j of every member.
std::vector<BatchOperands> extract_operands(const SubgraphIR& ir, const BatchSchedule& s);

// A memory order over every variable and the resulting element offsets.
struct LayoutPlan {
  std::vector<int> order;          // variable ids, front to back
  std::vector<long long> offset;   // by variable id
  std::vector<int> copy_flagged;   // batches the aligner gave up on
  int structural_updates = 0;
  int universe_size = 0;
};

LayoutPlan make_plan(const SubgraphIR& ir, std::vector<int> order);

// Aligned order, then variables outside every constraint in first-use
// order (arguments before destination), then unused declarations.
LayoutPlan plan_layout(const SubgraphIR& ir, const std::vector<BatchOperands>& batches,
                       const AlignmentOptions& options = {});

// Variables in natural name order (x2 before x10).
LayoutPlan label_order_plan(const SubgraphIR& ir);

// Per-batch outcome under a fixed plan. Under a member permutation an
// operand is aligned when its variables sit at ascending adjacent offsets.
struct BatchCheck {
  int batch = 0;
  int width = 0;
  bool zero_copy = false;
  bool result_copy = false;             // needs a scatter
  std::vector<int> source_copies;       // source indices needing a gather
  std::vector<int> broadcast_sources;   // source indices with repeats
  std::vector<int> member_order;        // permutation used
};

// A batch is zero-copy when the permutation sorting its result by offset
// aligns every non-broadcast operand. Otherwise copies are attributed under
// whichever candidate permutation aligns the most operands; candidates are
// member order, result order, then each source's order, earliest wins ties.
std::vector<BatchCheck> check_ideal(const SubgraphIR& ir, const LayoutPlan& plan,
                                    const std::vector<BatchOperands>& batches);

struct KernelCost {
  int batch = 0;
  std::string op_type;
  int width = 0;
  int gathers = 0;
  int scatters = 0;
  int broadcasts = 0;
  long long copy_bytes = 0;
  long long broadcast_bytes = 0;
};

struct CostReport {
  std::string subgraph;
  std::string plan;
  int element_bytes = 4;
  std::vector<KernelCost> kernels;
  int gathers = 0;
  int scatters = 0;
  int broadcasts = 0;
  long long copy_bytes = 0;
  long long broadcast_bytes = 0;

  int copy_kernels() const { return gathers + scatters; }
  int memory_kernels() const { return gathers + scatters + broadcasts; }
  long long bytes_moved() const { return copy_bytes + broadcast_bytes; }
};

CostReport cost_report(const SubgraphIR& ir, const BatchSchedule& s,
                       const std::vector<BatchOperands>& batches,
                       const std::vector<BatchCheck>& checks, std::string plan_name,
                       int element_bytes = 4);

std::string cost_report_json(const CostReport& r);
std::string cost_report_text(const CostReport& r);

}  // namespace dynbatch

#endif  // DYNBATCH_LAYOUT_H_
