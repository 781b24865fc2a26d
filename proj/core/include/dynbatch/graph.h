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

#ifndef DYNBATCH_GRAPH_H_
#define DYNBATCH_GRAPH_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dynbatch {

using NodeId = int32_t;
using TypeId = int32_t;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A typed dataflow DAG. Node ids and type ids are dense. Immutable once
// built; all derived tables (reverse edges, depths, same-type dependency
// edges) are computed at construction.
class DataflowGraph {
 public:
  DataflowGraph() = default;

  int num_nodes() const { return static_cast<int>(node_type_.size()); }
  int num_types() const { return static_cast<int>(type_names_.size()); }
  bool empty() const { return node_type_.empty(); }

  TypeId type_of(NodeId v) const { return node_type_[v]; }
  const std::string& type_name(TypeId t) const { return type_names_[t]; }
  const std::vector<std::string>& type_names() const { return type_names_; }
  // Returns -1 when absent.
  TypeId find_type(std::string_view name) const;

  std::span<const NodeId> inputs(NodeId v) const { return inputs_[v]; }
  std::span<const NodeId> outputs(NodeId v) const { return outputs_[v]; }
  std::span<const NodeId> nodes_of_type(TypeId t) const {
    return nodes_by_type_[t];
  }

  // Topological depth: nodes fed only by graph inputs have depth 1.
  int depth(NodeId v) const { return depth_[v]; }
  const std::vector<int>& depths() const { return depth_; }
  // Mean depth over all nodes of type t (0 for an unused type).
  double mean_depth(TypeId t) const { return mean_depth_[t]; }

  // Edges of the same-type dependency graph G^a restricted to the node's
  // own type: u is a predecessor of v iff type(u) == type(v) and some path
  // u ~> v has no intermediate node of that type.
  std::span<const NodeId> typed_preds(NodeId v) const { return typed_preds_[v]; }
  std::span<const NodeId> typed_succs(NodeId v) const { return typed_succs_[v]; }

  // Nodes in a topological order (ids sorted by depth, then id).
  std::span<const NodeId> topo_order() const { return topo_order_; }

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

 private:
  friend class GraphBuilder;
  void finalize();

  std::string name_;
  std::vector<std::string> type_names_;
  std::vector<TypeId> node_type_;
  std::vector<std::vector<NodeId>> inputs_;
  std::vector<std::vector<NodeId>> outputs_;
  std::vector<std::vector<NodeId>> nodes_by_type_;
  std::vector<int> depth_;
  std::vector<double> mean_depth_;
  std::vector<std::vector<NodeId>> typed_preds_;
  std::vector<std::vector<NodeId>> typed_succs_;
  std::vector<NodeId> topo_order_;
};

class GraphBuilder {
 public:
  // Interns a type name; returns the existing id if already present.
  TypeId add_type(std::string_view name);
  // Appends a node and returns its id. Inputs may reference nodes added
  // later; everything is validated by build().
  NodeId add_node(TypeId type, std::vector<NodeId> inputs);
  NodeId add_node(std::string_view type, std::vector<NodeId> inputs) {
    return add_node(add_type(type), std::move(inputs));
  }
  int num_nodes() const { return static_cast<int>(types_.size()); }

  // Throws GraphError on dangling inputs or cycles.
  DataflowGraph build(std::string name = {}) &&;

 private:
  std::vector<std::string> type_names_;
  std::vector<TypeId> types_;
  std::vector<std::vector<NodeId>> inputs_;
};

// Graph JSON: {"types": [...], "nodes": [{"id":0,"type":"I","inputs":[]}]}
DataflowGraph load_graph(std::string_view json_text);
DataflowGraph load_graph_file(const std::string& path);
std::string graph_to_json(const DataflowGraph& g);

// Disjoint union; types are merged by name. Used to form mini-batches.
DataflowGraph merge_graphs(std::span<const DataflowGraph> parts,
                           std::string name = {});

struct TypedSubgraph {
  DataflowGraph graph;
  std::vector<NodeId> origin;  // subgraph node -> node in the source graph
};

// G^a: the type-a nodes with an edge u->v whenever v depends on u through
// a path with no other type-a node.
TypedSubgraph typed_subgraph(const DataflowGraph& g, TypeId a);

// Depth map as a plain vector indexed by node id.
std::vector<int> topo_depth(const DataflowGraph& g);

// Longest node-path length of the DAG (0 for an empty graph).
int longest_path(const DataflowGraph& g);

// Sum over types of the longest same-type dependency chain.
int lower_bound(const DataflowGraph& g);

// Mutable execution progress over an immutable graph. The frontier is kept
// per type and updated incrementally from remaining-input counters.
class ExecutionState {
 public:
  explicit ExecutionState(const DataflowGraph& g);

  const DataflowGraph& graph() const { return *graph_; }
  bool done() const { return num_executed_ == graph_->num_nodes(); }
  int num_executed() const { return num_executed_; }
  bool executed(NodeId v) const { return executed_[v] != 0; }

  std::span<const NodeId> ready(TypeId t) const { return ready_[t]; }
  int ready_count(TypeId t) const { return static_cast<int>(ready_[t].size()); }
  // Types with at least one ready node, ascending.
  std::vector<TypeId> ready_types() const;
  int total_ready() const;

  // |Frontier(G^a_t)|: unexecuted type-a nodes whose same-type
  // predecessors have all executed.
  int typed_frontier_count(TypeId t) const { return typed_frontier_[t]; }

  // Executes every ready node of type t and returns them in ready order.
  std::vector<NodeId> issue(TypeId t);
  // Executes a subset of ready nodes (all of one type). Throws GraphError
  // if a node is not ready.
  void execute(std::span<const NodeId> nodes);

 private:
  void mark_executed(NodeId v);
  void drop_from_ready(TypeId t, std::span<const NodeId> nodes);

  const DataflowGraph* graph_;
  std::vector<uint8_t> executed_;
  std::vector<int> remaining_inputs_;
  std::vector<int> remaining_typed_;
  std::vector<std::vector<NodeId>> ready_;
  std::vector<int> typed_frontier_;
  int num_executed_ = 0;
};

}  // namespace dynbatch

#endif  // DYNBATCH_GRAPH_H_
