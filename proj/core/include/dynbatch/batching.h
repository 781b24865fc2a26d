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

#ifndef DYNBATCH_BATCHING_H_
#define DYNBATCH_BATCHING_H_

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dynbatch/graph.h"

namespace dynbatch {

struct Batch {
  TypeId type = -1;
  std::vector<NodeId> members;
};

struct BatchSchedule {
  std::string graph_name;
  std::vector<Batch> batches;

  int size() const { return static_cast<int>(batches.size()); }
};

// Next-type strategies for the batching loop.
struct DepthChooser {};
struct AgendaChooser {};
struct SufficientConditionChooser {};
struct FixedSequenceChooser {
  std::vector<TypeId> sequence;
};
struct CustomChooser {
  std::string name;
  std::function<TypeId(const ExecutionState&)> choose;
};
using TypeChooser = std::variant<DepthChooser, AgendaChooser, SufficientConditionChooser,
                                 FixedSequenceChooser, CustomChooser>;

std::string chooser_name(const TypeChooser& chooser);

class ScheduleError : public GraphError {
 public:
  using GraphError::GraphError;
};

// Repeatedly picks a type and issues every ready node of it until the graph
// is exhausted. The depth chooser instead issues its precomputed
// (depth, type) groups one per batch. Throws ScheduleError if a chooser
// names a type with no ready node.
BatchSchedule run_batching(const DataflowGraph& g, const TypeChooser& chooser);

// (depth, type) groups sorted by depth, then type id.
std::vector<Batch> depth_groups(const DataflowGraph& g);

// Ready type with the smallest mean depth over all nodes of that type.
TypeId choose_agenda(const ExecutionState& state);

// |ready nodes of type a| / |frontier of the unexecuted part of G^a|.
// Requires at least one ready node of type a.
double readiness_ratio(const ExecutionState& state, TypeId a);

// Ready type with the largest readiness ratio; ties go to the larger ready
// count, then the lower type id.
TypeId choose_sufficient_condition(const ExecutionState& state);

// Exact minimum-length schedule by A* over executed-node sets, using the
// residual lower bound as heuristic. Each step issues every ready node of
// the chosen type. If `first` is set, the schedule must start with it.
// Throws ScheduleError when the graph exceeds `limit` nodes (at most 64).
BatchSchedule optimal_schedule(const DataflowGraph& g, int limit = 24,
                               std::optional<TypeId> first = {});

struct CostSummary {
  int num_batches = 0;
  std::vector<int> per_type_batches;
};

// Replays the schedule; throws ScheduleError on a dependency, homogeneity,
// duplication or coverage violation.
CostSummary validate_schedule(const DataflowGraph& g, const BatchSchedule& s);

// {"batches": [{"type":"I","members":[4,7]}, ...]}
std::string schedule_to_json(const DataflowGraph& g, const BatchSchedule& s);
BatchSchedule schedule_from_json(const DataflowGraph& g, std::string_view text);

}  // namespace dynbatch

#endif  // DYNBATCH_BATCHING_H_
