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

#ifndef DYNBATCH_GENERATORS_H_
#define DYNBATCH_GENERATORS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dynbatch/graph.h"

namespace dynbatch {

enum class Family { kChain, kBichain, kTree, kTree2Type, kLattice };

std::string_view family_name(Family f);
std::optional<Family> parse_family(std::string_view name);

struct GeneratorParams {
  Family family = Family::kTree;
  int count = 1;     // graphs produced
  int batch = 1;     // instances merged into each graph (a mini-batch)
  // Size range per instance: chain length, tree leaves, or lattice length.
  int min_size = 4;
  int max_size = 12;
  // Lattice only. words >= 0 fixes the word count per sentence, otherwise
  // word_density * length words are drawn.
  int words = -1;
  double word_density = 0.5;
  int min_span = 2;
  int max_span = 4;
};

// Throws std::invalid_argument on bad parameters. Pure function of
// (params, seed).
std::vector<DataflowGraph> generate(const GeneratorParams& params, uint64_t seed);

// Shape of a binary parse tree. Node 0 is the root; leaves have no
// children.
struct TreeShape {
  struct Node {
    int left = -1;
    int right = -1;
  };
  std::vector<Node> nodes;
  bool is_leaf(int i) const { return nodes[i].left < 0; }
};

// Builds the tree-network dataflow graph: one internal-cell node per
// internal tree node (leaves are graph inputs), one output node per tree
// node, and a reduction chain over the outputs in post-order.
// internal_type(i) names the type of internal tree node i.
struct TreeTypes {
  std::string output = "O";
  std::string reduce = "R";
};
void append_tree(GraphBuilder& b, const TreeShape& shape,
                 const std::vector<std::string>& internal_type,
                 const TreeTypes& types, std::optional<NodeId> feed = {},
                 NodeId* last_reduce = nullptr);

TreeShape left_spine_tree(int leaves);

// A lattice: char_0..char_{len-1} chained, and one word cell per
// (start, end) span taking char_start and feeding char_end.
DataflowGraph lattice_graph(int len, const std::vector<std::pair<int, int>>& words,
                            std::string name = {});

// Random DAG for oracle checks: node i takes each earlier node as input
// with probability edge_prob, and one of `types` types named t0, t1, ...
DataflowGraph random_dag(int nodes, int types, double edge_prob, uint64_t seed);

// Structural check used by tests and the CLI: recomputes the word spans
// of a lattice graph. Returns an error message or empty.
std::string validate_lattice(const DataflowGraph& g, int min_span, int max_span);

}  // namespace dynbatch

#endif  // DYNBATCH_GENERATORS_H_
