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

#ifndef DYNBATCH_ALIGNMENT_H_
#define DYNBATCH_ALIGNMENT_H_

#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dynbatch/pqtree.h"

namespace dynbatch {

// Operands of one batched operation. Position i of every list belongs to
// the i-th member operation of the batch.
struct BatchOperands {
  int id = 0;
  std::vector<int> result;
  std::vector<std::vector<int>> sources;

  int width() const { return static_cast<int>(result.size()); }
};

// True when an operand repeats a variable (a broadcast parameter).
bool is_broadcast(std::span<const int> operand);

// Operands that generate layout constraints: width >= 2, no repeats.
// The result operand comes first when it qualifies.
std::vector<std::vector<int>> layout_operands(const BatchOperands& b);

// Variables of all layout operands, in first-use order.
std::vector<int> layout_universe(std::span<const BatchOperands> batches);

class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Builds the tree from every batch's operand adjacency sets. A batch stops
// at its first set that cannot be reduced and is reported in `failed`; its
// earlier sets stay applied.
PQTree construct_tree(std::span<const int> universe, std::span<const BatchOperands> batches,
                      std::vector<int>* failed);

// Position sets describing the structure of an operand's block: one set
// per internal node inside the block, plus the union of every adjacent
// pair of Q-node children.
std::vector<std::vector<int>> subtree_constraints(PQTree& tree, std::span<const int> operand);

struct BroadcastResult {
  std::vector<int> erased;  // batch ids whose transformed constraints failed
  int structural_updates = 0;
};

// Propagates every operand's subtree structure to the other operands of
// the same batch until no reduction changes the tree. A batch whose
// constraint fails is erased and no longer propagated.
BroadcastResult broadcast_constraints(PQTree& tree, std::span<const BatchOperands> batches);

// Aligned internal nodes of two operands. For a Q-node `flip` says whether
// the two read their children in opposite directions. For a P-node `perm`
// maps child index i of ref_node to child index perm[i] of node.
struct NodeRelation {
  PQTree::Kind kind = PQTree::Kind::kQ;
  int ref_node = -1;
  int node = -1;
  bool flip = false;
  std::vector<int> perm;
};

// Simultaneous walk over each operand's block against the result operand.
// Throws AlignmentError if the structures are not isomorphic.
std::vector<NodeRelation> parse_equiv_node_order_pairs(PQTree& tree, const BatchOperands& b);

// Union-find whose edges carry a group element relating a node's order to
// its parent's: s_x = T_x * s_parent. No path compression, so a batch's
// unions can be rolled back.
template <class Group>
class AnnotatedUnionFind {
 public:
  using T = typename Group::Element;

  // s_b = t * s_a. Returns false (and changes nothing) if incompatible
  // with the relations already present.
  bool unite(int a, const T& t, int b, int size);
  // (root, A) with s_x = A * s_root.
  std::pair<int, T> find(int x, int size);
  // Undo the links made since the last commit().
  void rollback();
  void commit() { log_.clear(); }

 private:
  int index(int node, int size);

  std::unordered_map<int, int> index_;
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<T> up_;
  std::vector<int> log_;
};

// Directions of Q-nodes: element true means reversed.
struct FlipGroup {
  using Element = bool;
  static Element identity(int) { return false; }
  static Element compose(Element a, Element b) { return a != b; }
  static Element inverse(Element a) { return a; }
};

// Child orders of P-nodes: element p lists, for each output slot i, the
// child index p[i]. compose(a, b)[i] = a[b[i]].
struct PermGroup {
  using Element = std::vector<int>;
  static Element identity(int n);
  static Element compose(const Element& a, const Element& b);
  static Element inverse(const Element& a);
};

struct OrderAnnotation {
  std::unordered_map<int, bool> q_reversed;
  std::unordered_map<int, std::vector<int>> p_order;
  std::vector<int> incompatible;  // batch ids whose relations were dropped
};

// Unions the relations of every batch; a batch whose relations conflict
// (or whose operands are not isomorphic) is dropped as a whole. Each root
// takes the stored order; all other orders follow from it.
OrderAnnotation decide_nodes_order(PQTree& tree, std::span<const BatchOperands> batches);

// Depth-first leaf sequence under the annotated orders.
std::vector<int> get_leaf_order(const PQTree& tree, const OrderAnnotation& annotation);

struct AlignmentOptions {
  bool broadcast = true;  // false skips constraint broadcasting
};

struct AlignmentResult {
  std::vector<int> order;         // leaf order over the layout universe
  std::vector<int> erased;        // batches dropped by a failed reduction
  std::vector<int> incompatible;  // batches dropped by order annotation
  int structural_updates = 0;
  int universe_size = 0;
  std::string tree;
};

// Full pipeline: construct, broadcast, annotate, read the leaf order. When
// a batch fails it is erased and the pipeline restarts without it.
AlignmentResult align_batches(std::span<const BatchOperands> batches,
                              const AlignmentOptions& options = {});

}  // namespace dynbatch

#endif  // DYNBATCH_ALIGNMENT_H_
