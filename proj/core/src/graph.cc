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

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace dynbatch {

using json = nlohmann::json;

TypeId DataflowGraph::find_type(std::string_view name) const {
  for (TypeId t = 0; t < num_types(); ++t) {
    if (type_names_[t] == name) return t;
  }
  return -1;
}

void DataflowGraph::finalize() {
  const int n = num_nodes();
  const int num_t = num_types();
  outputs_.assign(n, {});
  nodes_by_type_.assign(num_t, {});
  for (NodeId v = 0; v < n; ++v) {
    nodes_by_type_[node_type_[v]].push_back(v);
    for (NodeId u : inputs_[v]) outputs_[u].push_back(v);
  }

  // Kahn's algorithm; the queue is a min-heap so the order is canonical.
  std::vector<int> indeg(n);
  for (NodeId v = 0; v < n; ++v) indeg[v] = static_cast<int>(inputs_[v].size());
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.push(v);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    NodeId v = ready.top();
    ready.pop();
    order.push_back(v);
    for (NodeId w : outputs_[v]) {
      if (--indeg[w] == 0) ready.push(w);
    }
  }
  if (static_cast<int>(order.size()) != n) {
    for (NodeId v = 0; v < n; ++v) {
      if (indeg[v] > 0) {
        throw GraphError("cycle detected through node " + std::to_string(v));
      }
    }
  }

  depth_.assign(n, 0);
  for (NodeId v : order) {
    int d = 0;
    for (NodeId u : inputs_[v]) d = std::max(d, depth_[u]);
    depth_[v] = d + 1;
  }
  topo_order_ = order;
  std::stable_sort(topo_order_.begin(), topo_order_.end(),
                   [&](NodeId a, NodeId b) { return depth_[a] < depth_[b]; });

  mean_depth_.assign(num_t, 0.0);
  for (TypeId t = 0; t < num_t; ++t) {
    const auto& members = nodes_by_type_[t];
    if (members.empty()) continue;
    long sum = 0;
    for (NodeId v : members) sum += depth_[v];
    mean_depth_[t] = static_cast<double>(sum) / static_cast<double>(members.size());
  }

  // exposed[v]: ancestors u of v reachable through a path whose interior
  // avoids type(u). Kept as sorted vectors.
  std::vector<std::vector<NodeId>> exposed(n);
  typed_preds_.assign(n, {});
  typed_succs_.assign(n, {});
  std::vector<NodeId> scratch;
  for (NodeId v : order) {
    scratch.clear();
    for (NodeId w : inputs_[v]) {
      scratch.push_back(w);
      const TypeId tw = node_type_[w];
      for (NodeId u : exposed[w]) {
        if (node_type_[u] != tw) scratch.push_back(u);
      }
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    exposed[v] = scratch;
    for (NodeId u : scratch) {
      if (node_type_[u] == node_type_[v]) {
        typed_preds_[v].push_back(u);
        typed_succs_[u].push_back(v);
      }
    }
  }
}

TypeId GraphBuilder::add_type(std::string_view name) {
  for (TypeId t = 0; t < static_cast<TypeId>(type_names_.size()); ++t) {
    if (type_names_[t] == name) return t;
  }
  type_names_.emplace_back(name);
  return static_cast<TypeId>(type_names_.size() - 1);
}

NodeId GraphBuilder::add_node(TypeId type, std::vector<NodeId> inputs) {
  if (type < 0 || type >= static_cast<TypeId>(type_names_.size())) {
    throw GraphError("unknown type id " + std::to_string(type));
  }
  types_.push_back(type);
  inputs_.push_back(std::move(inputs));
  return static_cast<NodeId>(types_.size() - 1);
}

DataflowGraph GraphBuilder::build(std::string name) && {
  const int n = static_cast<int>(types_.size());
  for (NodeId v = 0; v < n; ++v) {
    auto& in = inputs_[v];
    for (NodeId u : in) {
      if (u < 0 || u >= n) {
        throw GraphError("dangling input " + std::to_string(u) + " of node " +
                         std::to_string(v));
      }
      if (u == v) throw GraphError("cycle detected through node " + std::to_string(v));
    }
  }
  DataflowGraph g;
  g.name_ = std::move(name);
  g.type_names_ = std::move(type_names_);
  g.node_type_ = std::move(types_);
  g.inputs_ = std::move(inputs_);
  g.finalize();
  return g;
}

DataflowGraph load_graph(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed graph JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw GraphError("graph JSON needs a \"nodes\" array");
  }
  GraphBuilder b;
  std::set<std::string> declared;
  if (doc.contains("types")) {
    try {
      for (const auto& t : doc["types"]) declared.insert(t.get<std::string>());
      for (const auto& t : doc["types"]) b.add_type(t.get<std::string>());
    } catch (const json::exception& e) {
      throw GraphError(std::string("malformed graph types: ") + e.what());
    }
  }
  const auto& nodes = doc["nodes"];
  const int n = static_cast<int>(nodes.size());
  std::vector<int> seen(n, 0);
  struct Raw {
    std::string type;
    std::vector<NodeId> inputs;
  };
  std::vector<Raw> raw(n);
  try {
    for (const auto& node : nodes) {
      const auto id = node.at("id").get<long>();
      if (id < 0 || id >= n) {
        throw GraphError("node id " + std::to_string(id) +
                         " outside the dense range 0.." + std::to_string(n - 1));
      }
      if (seen[id]++) throw GraphError("duplicate node_id " + std::to_string(id));
      raw[id].type = node.at("type").get<std::string>();
      if (node.contains("inputs")) {
        raw[id].inputs = node["inputs"].get<std::vector<NodeId>>();
      }
    }
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed graph node: ") + e.what());
  }
  for (auto& r : raw) {
    if (doc.contains("types") && !declared.count(r.type)) throw GraphError("undeclared type '" + r.type + "'");
    b.add_node(r.type, std::move(r.inputs));
  }
  std::string name;
  if (doc.contains("name") && doc["name"].is_string()) name = doc["name"];
  return std::move(b).build(std::move(name));
}

DataflowGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  DataflowGraph g = load_graph(ss.str());
  if (g.name().empty()) g.set_name(path);
  return g;
}

std::string graph_to_json(const DataflowGraph& g) {
  json doc;
  if (!g.name().empty()) doc["name"] = g.name();
  doc["types"] = g.type_names();
  json nodes = json::array();
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    json node;
    node["id"] = v;
    node["type"] = g.type_name(g.type_of(v));
    node["inputs"] = std::vector<NodeId>(g.inputs(v).begin(), g.inputs(v).end());
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump();
}

DataflowGraph merge_graphs(std::span<const DataflowGraph> parts, std::string name) {
  GraphBuilder b;
  for (const auto& part : parts) {
    for (const auto& t : part.type_names()) b.add_type(t);
  }
  for (const auto& part : parts) {
    const NodeId base = b.num_nodes();
    for (NodeId v = 0; v < part.num_nodes(); ++v) {
      std::vector<NodeId> in;
      for (NodeId u : part.inputs(v)) in.push_back(u + base);
      b.add_node(part.type_name(part.type_of(v)), std::move(in));
    }
  }
  return std::move(b).build(std::move(name));
}

TypedSubgraph typed_subgraph(const DataflowGraph& g, TypeId a) {
  TypedSubgraph out;
  GraphBuilder b;
  const TypeId local = b.add_type(g.type_name(a));
  std::vector<NodeId> local_id(g.num_nodes(), -1);
  for (NodeId v : g.nodes_of_type(a)) {
    local_id[v] = static_cast<NodeId>(out.origin.size());
    out.origin.push_back(v);
  }
  for (NodeId v : out.origin) {
    std::vector<NodeId> in;
    for (NodeId u : g.typed_preds(v)) in.push_back(local_id[u]);
    b.add_node(local, std::move(in));
  }
  out.graph = std::move(b).build(g.name() + "/" + g.type_name(a));
  return out;
}

std::vector<int> topo_depth(const DataflowGraph& g) { return g.depths(); }

int longest_path(const DataflowGraph& g) {
  int best = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) best = std::max(best, g.depth(v));
  return best;
}

int lower_bound(const DataflowGraph& g) {
  // chain[v] = most type(v) nodes on any path ending at v, counted through
  // same-type dependency edges.
  std::vector<int> chain(g.num_nodes(), 0);
  std::vector<int> best(g.num_types(), 0);
  for (NodeId v : g.topo_order()) {
    int c = 0;
    for (NodeId u : g.typed_preds(v)) c = std::max(c, chain[u]);
    chain[v] = c + 1;
    best[g.type_of(v)] = std::max(best[g.type_of(v)], chain[v]);
  }
  return std::accumulate(best.begin(), best.end(), 0);
}

ExecutionState::ExecutionState(const DataflowGraph& g)
    : graph_(&g),
      executed_(g.num_nodes(), 0),
      remaining_inputs_(g.num_nodes()),
      remaining_typed_(g.num_nodes()),
      ready_(g.num_types()),
      typed_frontier_(g.num_types(), 0) {
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    remaining_inputs_[v] = static_cast<int>(g.inputs(v).size());
    remaining_typed_[v] = static_cast<int>(g.typed_preds(v).size());
    if (remaining_inputs_[v] == 0) ready_[g.type_of(v)].push_back(v);
    if (remaining_typed_[v] == 0) ++typed_frontier_[g.type_of(v)];
  }
}

std::vector<TypeId> ExecutionState::ready_types() const {
  std::vector<TypeId> out;
  for (TypeId t = 0; t < graph_->num_types(); ++t) {
    if (!ready_[t].empty()) out.push_back(t);
  }
  return out;
}

int ExecutionState::total_ready() const {
  int total = 0;
  for (const auto& r : ready_) total += static_cast<int>(r.size());
  return total;
}

void ExecutionState::mark_executed(NodeId v) {
  const DataflowGraph& g = *graph_;
  executed_[v] = 1;
  ++num_executed_;
  --typed_frontier_[g.type_of(v)];
  for (NodeId w : g.outputs(v)) {
    if (--remaining_inputs_[w] == 0) ready_[g.type_of(w)].push_back(w);
  }
  for (NodeId w : g.typed_succs(v)) {
    if (--remaining_typed_[w] == 0) ++typed_frontier_[g.type_of(w)];
  }
}

std::vector<NodeId> ExecutionState::issue(TypeId t) {
  std::vector<NodeId> batch;
  batch.swap(ready_[t]);
  for (NodeId v : batch) mark_executed(v);
  return batch;
}

void ExecutionState::drop_from_ready(TypeId t, std::span<const NodeId> nodes) {
  auto& r = ready_[t];
  std::erase_if(r, [&](NodeId v) {
    return std::find(nodes.begin(), nodes.end(), v) != nodes.end();
  });
}

void ExecutionState::execute(std::span<const NodeId> nodes) {
  if (nodes.empty()) return;
  for (NodeId v : nodes) {
    if (v < 0 || v >= graph_->num_nodes()) {
      throw GraphError("node " + std::to_string(v) + " does not exist");
    }
  }
  const TypeId t = graph_->type_of(nodes.front());
  for (NodeId v : nodes) {
    if (graph_->type_of(v) != t) throw GraphError("mixed-type batch");
    if (executed_[v] || remaining_inputs_[v] != 0) {
      throw GraphError("node " + std::to_string(v) + " is not ready");
    }
  }
  std::vector<NodeId> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    throw GraphError("node " + std::to_string(*dup) + " appears twice in one batch");
  }
  drop_from_ready(t, nodes);
  for (NodeId v : nodes) mark_executed(v);
}

}  // namespace dynbatch
