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

#include "dynbatch/alignment.h"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

namespace dynbatch {
namespace {

using Kind = PQTree::Kind;

// A tree node, or a consecutive run of a Q-node's children.
struct View {
  int node = -1;
  int first = -1;
  int last = -1;
};

View view_of(const PQTree::Block& b) { return View{b.node, b.first, b.last}; }

Kind kind_of(const PQTree& t, const View& v) { return v.first >= 0 ? Kind::kQ : t.kind(v.node); }

std::vector<int> children_of(const PQTree& t, const View& v) {
  if (v.first < 0) return t.children(v.node);
  std::vector<int> out;
  for (int c = v.first;; c = t.next_sibling(c)) {
    out.push_back(c);
    if (c == v.last) break;
  }
  return out;
}

std::unordered_map<int, int> positions(std::span<const int> operand) {
  std::unordered_map<int, int> pos;
  for (int i = 0; i < static_cast<int>(operand.size()); ++i) pos[operand[i]] = i;
  return pos;
}

std::vector<int> position_set(const PQTree& t, int node, const std::unordered_map<int, int>& pos) {
  std::vector<int> out;
  for (int v : t.leaves(node)) out.push_back(pos.at(v));
  std::sort(out.begin(), out.end());
  return out;
}

PQTree::Block block_or_throw(PQTree& tree, std::span<const int> operand) {
  auto blk = tree.find_block(operand);
  if (!blk) throw AlignmentError("operand is not consecutive in the tree");
  return *blk;
}

}  // namespace

bool is_broadcast(std::span<const int> operand) {
  std::unordered_set<int> seen;
  for (int v : operand) {
    if (!seen.insert(v).second) return true;
  }
  return false;
}

std::vector<std::vector<int>> layout_operands(const BatchOperands& b) {
  std::vector<std::vector<int>> out;
  auto consider = [&](const std::vector<int>& op) {
    if (op.size() >= 2 && !is_broadcast(op)) out.push_back(op);
  };
  consider(b.result);
  for (const auto& s : b.sources) consider(s);
  return out;
}

std::vector<int> layout_universe(std::span<const BatchOperands> batches) {
  std::vector<int> out;
  std::unordered_set<int> seen;
  for (const auto& b : batches) {
    for (const auto& op : layout_operands(b)) {
      for (int v : op) {
        if (seen.insert(v).second) out.push_back(v);
      }
    }
  }
  return out;
}

PQTree construct_tree(std::span<const int> universe, std::span<const BatchOperands> batches,
                      std::vector<int>* failed) {
  PQTree tree(universe);
  for (const auto& b : batches) {
    for (const auto& op : layout_operands(b)) {
      if (!tree.reduce(op).ok) {
        if (failed) failed->push_back(b.id);
        break;
      }
    }
  }
  return tree;
}

std::vector<std::vector<int>> subtree_constraints(PQTree& tree, std::span<const int> operand) {
  const PQTree::Block blk = block_or_throw(tree, operand);
  const auto pos = positions(operand);
  std::vector<std::vector<int>> out;
  std::function<void(const View&)> rec = [&](const View& v) {
    const std::vector<int> kids = children_of(tree, v);
    std::vector<std::vector<int>> sets;
    for (int c : kids) sets.push_back(position_set(tree, c, pos));
    for (size_t i = 0; i < kids.size(); ++i) {
      if (tree.kind(kids[i]) == Kind::kLeaf) continue;
      out.push_back(sets[i]);
      rec(View{kids[i]});
    }
    if (kind_of(tree, v) == Kind::kQ) {
      for (size_t i = 0; i + 1 < kids.size(); ++i) {
        std::vector<int> pair = sets[i];
        pair.insert(pair.end(), sets[i + 1].begin(), sets[i + 1].end());
        std::sort(pair.begin(), pair.end());
        out.push_back(std::move(pair));
      }
    }
  };
  if (tree.kind(blk.node) != Kind::kLeaf) rec(view_of(blk));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

BroadcastResult broadcast_constraints(PQTree& tree, std::span<const BatchOperands> batches) {
  BroadcastResult result;
  const int n = static_cast<int>(batches.size());
  std::vector<std::vector<std::vector<int>>> ops(n);
  for (int i = 0; i < n; ++i) ops[i] = layout_operands(batches[i]);
  std::deque<int> queue;
  std::vector<char> queued(n, 1), erased(n, 0);
  for (int i = 0; i < n; ++i) queue.push_back(i);

  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    queued[i] = 0;
    if (erased[i] || ops[i].size() < 2) continue;
    std::set<std::vector<int>> cons;
    for (const auto& op : ops[i]) {
      tree.tag(block_or_throw(tree, op).node, i);
      for (auto& c : subtree_constraints(tree, op)) cons.insert(std::move(c));
    }
    std::set<int> affected;
    for (const auto& c : cons) {
      for (const auto& op : ops[i]) {
        std::vector<int> vars;
        for (int p : c) vars.push_back(op[p]);
        const PQTree::ReduceResult r = tree.reduce(vars);
        if (!r.ok) {
          erased[i] = 1;
          break;
        }
        if (r.changed) {
          ++result.structural_updates;
          for (int b : tree.affected_batches(r)) affected.insert(b);
        }
      }
      if (erased[i]) break;
    }
    if (erased[i]) {
      result.erased.push_back(batches[i].id);
      continue;
    }
    for (int b : affected) {
      if (b >= 0 && b < n && !queued[b] && !erased[b]) {
        queued[b] = 1;
        queue.push_back(b);
      }
    }
    // Operands of this batch may have been restructured by its own
    // reductions; revisit until it is stable.
    if (!affected.empty() && !queued[i]) {
      queued[i] = 1;
      queue.push_back(i);
    }
  }
  return result;
}

std::vector<NodeRelation> parse_equiv_node_order_pairs(PQTree& tree, const BatchOperands& b) {
  const auto ops = layout_operands(b);
  std::vector<NodeRelation> out;
  if (ops.size() < 2) return out;
  const auto ref_pos = positions(ops[0]);
  const View ref_view = view_of(block_or_throw(tree, ops[0]));

  for (size_t k = 1; k < ops.size(); ++k) {
    const auto pos = positions(ops[k]);
    const View view = view_of(block_or_throw(tree, ops[k]));
    std::function<void(const View&, const View&)> match = [&](const View& r, const View& o) {
      const Kind kr = kind_of(tree, r), ko = kind_of(tree, o);
      if (kr != ko) throw AlignmentError("operand structures differ in node kind");
      if (kr == Kind::kLeaf) return;
      const std::vector<int> rc = children_of(tree, r), oc = children_of(tree, o);
      if (rc.size() != oc.size()) throw AlignmentError("operand structures differ in arity");
      std::map<std::vector<int>, int> where;
      for (size_t j = 0; j < oc.size(); ++j) where[position_set(tree, oc[j], pos)] = static_cast<int>(j);
      std::vector<int> tau(rc.size());
      for (size_t i = 0; i < rc.size(); ++i) {
        auto it = where.find(position_set(tree, rc[i], ref_pos));
        if (it == where.end()) throw AlignmentError("operand structures differ in leaf sets");
        tau[i] = it->second;
      }
      NodeRelation rel;
      rel.kind = kr;
      rel.ref_node = r.node;
      rel.node = o.node;
      if (kr == Kind::kQ) {
        const int m = static_cast<int>(tau.size());
        bool same = true, reversed = true;
        for (int i = 0; i < m; ++i) {
          same = same && tau[i] == i;
          reversed = reversed && tau[i] == m - 1 - i;
        }
        if (!same && !reversed) throw AlignmentError("Q-node children are not aligned");
        rel.flip = !same;
        // A run flipped inside its Q-node reverses the whole node.
      } else {
        rel.perm = tau;
      }
      out.push_back(std::move(rel));
      for (size_t i = 0; i < rc.size(); ++i) match(View{rc[i]}, View{oc[tau[i]]});
    };
    match(ref_view, view);
  }
  return out;
}

template <class Group>
int AnnotatedUnionFind<Group>::index(int node, int size) {
  auto [it, fresh] = index_.try_emplace(node, static_cast<int>(parent_.size()));
  if (fresh) {
    parent_.push_back(it->second);
    rank_.push_back(0);
    up_.push_back(Group::identity(size));
  }
  return it->second;
}

template <class Group>
std::pair<int, typename Group::Element> AnnotatedUnionFind<Group>::find(int x, int size) {
  int cur = index(x, size);
  T acc = Group::identity(size);
  while (parent_[cur] != cur) {
    acc = Group::compose(acc, up_[cur]);
    cur = parent_[cur];
  }
  return {cur, acc};
}

template <class Group>
bool AnnotatedUnionFind<Group>::unite(int a, const T& t, int b, int size) {
  auto [ra, A] = find(a, size);
  auto [rb, B] = find(b, size);
  // s_b = t s_a, s_a = A s_ra, s_b = B s_rb  =>  s_rb = B^-1 t A s_ra.
  const T link = Group::compose(Group::inverse(B), Group::compose(t, A));
  if (ra == rb) return link == Group::identity(size);
  if (rank_[ra] < rank_[rb]) {
    parent_[ra] = rb;
    up_[ra] = Group::inverse(link);
    log_.push_back(ra);
  } else {
    parent_[rb] = ra;
    up_[rb] = link;
    if (rank_[ra] == rank_[rb]) {
      ++rank_[ra];
      log_.push_back(~rb);  // marks a rank bump on ra
    } else {
      log_.push_back(rb);
    }
  }
  return true;
}

template <class Group>
void AnnotatedUnionFind<Group>::rollback() {
  for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
    const bool bumped = *it < 0;
    const int child = bumped ? ~*it : *it;
    if (bumped) --rank_[parent_[child]];
    parent_[child] = child;
    up_[child] = Group::identity(static_cast<int>(up_[child].size()));
  }
  log_.clear();
}

// bool has no size(); specialise the identity reset.
template <>
void AnnotatedUnionFind<FlipGroup>::rollback() {
  for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
    const bool bumped = *it < 0;
    const int child = bumped ? ~*it : *it;
    if (bumped) --rank_[parent_[child]];
    parent_[child] = child;
    up_[child] = false;
  }
  log_.clear();
}

template class AnnotatedUnionFind<FlipGroup>;
template class AnnotatedUnionFind<PermGroup>;

PermGroup::Element PermGroup::identity(int n) {
  Element e(n);
  std::iota(e.begin(), e.end(), 0);
  return e;
}

PermGroup::Element PermGroup::compose(const Element& a, const Element& b) {
  Element out(b.size());
  for (size_t i = 0; i < b.size(); ++i) out[i] = a[b[i]];
  return out;
}

PermGroup::Element PermGroup::inverse(const Element& a) {
  Element out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[a[i]] = static_cast<int>(i);
  return out;
}

OrderAnnotation decide_nodes_order(PQTree& tree, std::span<const BatchOperands> batches) {
  OrderAnnotation ann;
  AnnotatedUnionFind<FlipGroup> flips;
  AnnotatedUnionFind<PermGroup> perms;
  std::vector<std::pair<int, int>> members;  // (node, child count)
  for (const auto& b : batches) {
    std::vector<NodeRelation> rels;
    try {
      rels = parse_equiv_node_order_pairs(tree, b);
    } catch (const AlignmentError&) {
      ann.incompatible.push_back(b.id);
      continue;
    }
    bool ok = true;
    for (const auto& r : rels) {
      if (r.kind == Kind::kQ) {
        ok = flips.unite(r.ref_node, r.flip, r.node, 0);
      } else {
        ok = perms.unite(r.ref_node, r.perm, r.node, static_cast<int>(r.perm.size()));
      }
      if (!ok) break;
    }
    if (!ok) {
      flips.rollback();
      perms.rollback();
      ann.incompatible.push_back(b.id);
      continue;
    }
    flips.commit();
    perms.commit();
    for (const auto& r : rels) {
      members.emplace_back(r.ref_node, static_cast<int>(r.perm.size()));
      members.emplace_back(r.node, static_cast<int>(r.perm.size()));
    }
  }
  for (auto [node, size] : members) {
    if (tree.kind(node) == Kind::kQ) {
      ann.q_reversed[node] = flips.find(node, 0).second;
    } else {
      ann.p_order[node] = perms.find(node, size).second;
    }
  }
  return ann;
}

std::vector<int> get_leaf_order(const PQTree& tree, const OrderAnnotation& annotation) {
  std::vector<int> out;
  if (tree.root() < 0) return out;
  std::function<void(int)> dfs = [&](int n) {
    if (tree.kind(n) == Kind::kLeaf) {
      out.push_back(tree.variable(n));
      return;
    }
    std::vector<int> kids = tree.children(n);
    if (tree.kind(n) == Kind::kQ) {
      auto it = annotation.q_reversed.find(n);
      if (it != annotation.q_reversed.end() && it->second) std::reverse(kids.begin(), kids.end());
      for (int c : kids) dfs(c);
    } else {
      auto it = annotation.p_order.find(n);
      if (it == annotation.p_order.end()) {
        for (int c : kids) dfs(c);
      } else {
        for (int i : it->second) dfs(kids[i]);
      }
    }
  };
  dfs(tree.root());
  return out;
}

AlignmentResult align_batches(std::span<const BatchOperands> batches,
                              const AlignmentOptions& options) {
  AlignmentResult result;
  std::set<int> dropped;
  for (;;) {
    std::vector<BatchOperands> active;
    for (const auto& b : batches) {
      if (!dropped.count(b.id)) active.push_back(b);
    }
    const std::vector<int> universe = layout_universe(active);
    std::vector<int> failed;
    PQTree tree = construct_tree(universe, active, &failed);
    if (!failed.empty()) {
      // Earlier operands of a failed batch may already be applied; rebuild.
      for (int id : failed) {
        dropped.insert(id);
        result.erased.push_back(id);
      }
      continue;
    }
    if (options.broadcast) {
      const BroadcastResult br = broadcast_constraints(tree, active);
      if (!br.erased.empty()) {
        // Restart so the erased batches leave no partial constraints behind.
        for (int id : br.erased) {
          dropped.insert(id);
          result.erased.push_back(id);
        }
        continue;
      }
      result.structural_updates = br.structural_updates;
    }
    const OrderAnnotation ann = decide_nodes_order(tree, active);
    result.incompatible = ann.incompatible;
    result.order = get_leaf_order(tree, ann);
    result.universe_size = static_cast<int>(universe.size());
    result.tree = tree.to_string();
    break;
  }
  return result;
}

}  // namespace dynbatch
