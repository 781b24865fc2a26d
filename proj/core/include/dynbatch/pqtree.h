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

#ifndef DYNBATCH_PQTREE_H_
#define DYNBATCH_PQTREE_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dynbatch {

// PQ tree over a universe of integer variables, reduced with the
// Booth-Lueker templates. Nodes live in an arena and are never reused, so
// node ids stay valid as keys after a node dies.
class PQTree {
 public:
  enum class Kind : uint8_t { kLeaf, kP, kQ };

  // The initial tree admits every permutation. Variables must be distinct.
  explicit PQTree(std::span<const int> universe);

  struct ReduceResult {
    bool ok = false;
    bool changed = false;
    std::vector<int> touched;  // nodes created, restructured or removed
  };

  // Restricts the tree to orders where `vars` are consecutive. On failure
  // the tree is left unchanged. Throws std::out_of_range for a variable
  // outside the universe.
  ReduceResult reduce(std::span<const int> vars);

  // Subtree (or consecutive run of a Q-node's children) spanning exactly
  // `vars`. Empty if `vars` are not consecutive in every frontier.
  struct Block {
    int node = -1;
    int first = -1;  // run bounds when `node` is a Q-node covered in part
    int last = -1;
    bool is_run() const { return first >= 0; }
  };
  std::optional<Block> find_block(std::span<const int> vars);

  int root() const { return root_; }
  int universe_size() const { return static_cast<int>(leaf_.size()); }
  bool alive(int n) const { return nodes_[n].alive; }
  Kind kind(int n) const { return nodes_[n].kind; }
  int variable(int n) const { return nodes_[n].var; }
  int parent(int n) const { return nodes_[n].parent; }
  int num_children(int n) const { return nodes_[n].nchild; }
  int first_child(int n) const { return nodes_[n].first; }
  int last_child(int n) const { return nodes_[n].last; }
  int next_sibling(int n) const { return nodes_[n].next; }
  int prev_sibling(int n) const { return nodes_[n].prev; }
  std::vector<int> children(int n) const;
  // Returns -1 for variables outside the universe.
  int leaf_of(int var) const;
  // Variables under n in stored left-to-right order.
  std::vector<int> leaves(int n) const;
  // Leaves of the stored frontier of the whole tree.
  std::vector<int> frontier() const { return root_ < 0 ? std::vector<int>{} : leaves(root_); }

  // Every leaf order reachable by permuting P-children and reversing
  // Q-nodes. Exponential; intended for universes of at most ~9 variables.
  std::vector<std::vector<int>> all_frontiers() const;

  // Parenthesised dump, e.g. Q(x2,x1,x3,P(x4,x5,x6)).
  std::string to_string(const std::function<std::string(int)>& var_name = {}) const;

  // Node <-> batch bookkeeping used by the alignment pass.
  void tag(int node, int batch);
  // Batches tagged on a touched node or on any live ancestor of one.
  std::set<int> affected_batches(const ReduceResult& r) const;

 private:
  enum Label : uint8_t { kEmpty = 0, kFull, kPartial };

  struct Node {
    Kind kind = Kind::kLeaf;
    int var = -1;
    int parent = -1;
    int first = -1, last = -1;
    int prev = -1, next = -1;
    int nchild = 0;
    bool alive = true;
  };

  struct Scratch {
    int count = 0;
    std::vector<int> pert_children;
  };

  int new_node(Kind k);
  void append_child(int parent, int c);
  void prepend_child(int parent, int c);
  void detach(int c);
  void replace_in_parent(int old_node, int new_node);
  void reverse_children(int n);
  // Replaces `child` by its own children (in order or reversed).
  void splice(int child, bool reversed);
  int group(const std::vector<int>& members);
  void kill(int n);
  void canonicalize(int n);

  bool mark(std::span<const int> vars);
  Label label_of(int n) const;
  // Returns false when the pattern at n admits no template.
  bool classify(int n, bool is_root, Label* out);
  bool q_run(int n, std::vector<int>* run) const;
  int apply(int n, bool is_root);
  void clear_scratch();
  void touch(int n) { touched_.push_back(n); }

  std::vector<Node> nodes_;
  std::unordered_map<int, int> leaf_;  // var -> leaf node
  int root_ = -1;

  // Per-reduce state.
  std::unordered_map<int, Scratch> scratch_;
  std::unordered_map<int, Label> labels_;
  int pert_root_ = -1;
  bool changed_ = false;
  std::vector<int> touched_;

  std::unordered_map<int, std::set<int>> node_batches_;
};

}  // namespace dynbatch

#endif  // DYNBATCH_PQTREE_H_
