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

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace dynbatch {

PQTree::PQTree(std::span<const int> universe) {
  for (int v : universe) {
    if (leaf_.count(v)) throw std::invalid_argument("duplicate variable " + std::to_string(v));
    const int n = new_node(Kind::kLeaf);
    nodes_[n].var = v;
    leaf_[v] = n;
  }
  if (universe.size() == 1) {
    root_ = leaf_.at(universe[0]);
  } else if (universe.size() > 1) {
    root_ = new_node(universe.size() == 2 ? Kind::kQ : Kind::kP);
    for (int v : universe) append_child(root_, leaf_.at(v));
  }
  touched_.clear();
}

int PQTree::new_node(Kind k) {
  Node n;
  n.kind = k;
  nodes_.push_back(n);
  const int id = static_cast<int>(nodes_.size()) - 1;
  touch(id);
  return id;
}

int PQTree::leaf_of(int var) const {
  auto it = leaf_.find(var);
  return it == leaf_.end() ? -1 : it->second;
}

std::vector<int> PQTree::children(int n) const {
  std::vector<int> out;
  out.reserve(nodes_[n].nchild);
  for (int c = nodes_[n].first; c >= 0; c = nodes_[c].next) out.push_back(c);
  return out;
}

std::vector<int> PQTree::leaves(int n) const {
  std::vector<int> out;
  std::vector<int> stack{n};
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    if (nodes_[x].kind == Kind::kLeaf) {
      out.push_back(nodes_[x].var);
      continue;
    }
    for (int c = nodes_[x].last; c >= 0; c = nodes_[c].prev) stack.push_back(c);
  }
  return out;
}

void PQTree::append_child(int p, int c) {
  Node& pn = nodes_[p];
  Node& cn = nodes_[c];
  cn.parent = p;
  cn.next = -1;
  cn.prev = pn.last;
  if (pn.last >= 0) nodes_[pn.last].next = c;
  else pn.first = c;
  pn.last = c;
  ++pn.nchild;
  touch(p);
}

void PQTree::prepend_child(int p, int c) {
  Node& pn = nodes_[p];
  Node& cn = nodes_[c];
  cn.parent = p;
  cn.prev = -1;
  cn.next = pn.first;
  if (pn.first >= 0) nodes_[pn.first].prev = c;
  else pn.last = c;
  pn.first = c;
  ++pn.nchild;
  touch(p);
}

void PQTree::detach(int c) {
  Node& cn = nodes_[c];
  const int p = cn.parent;
  if (p < 0) return;
  Node& pn = nodes_[p];
  if (cn.prev >= 0) nodes_[cn.prev].next = cn.next;
  else pn.first = cn.next;
  if (cn.next >= 0) nodes_[cn.next].prev = cn.prev;
  else pn.last = cn.prev;
  --pn.nchild;
  cn.parent = cn.prev = cn.next = -1;
  touch(p);
}

void PQTree::replace_in_parent(int old_node, int new_node) {
  Node& o = nodes_[old_node];
  Node& n = nodes_[new_node];
  if (o.parent < 0) {
    if (root_ == old_node) root_ = new_node;
    n.parent = -1;
    return;
  }
  const int p = o.parent;
  n.parent = p;
  n.prev = o.prev;
  n.next = o.next;
  if (o.prev >= 0) nodes_[o.prev].next = new_node;
  else nodes_[p].first = new_node;
  if (o.next >= 0) nodes_[o.next].prev = new_node;
  else nodes_[p].last = new_node;
  o.parent = o.prev = o.next = -1;
  touch(p);
}

void PQTree::reverse_children(int n) {
  for (int c = nodes_[n].first; c >= 0;) {
    const int next = nodes_[c].next;
    std::swap(nodes_[c].prev, nodes_[c].next);
    c = next;
  }
  std::swap(nodes_[n].first, nodes_[n].last);
  touch(n);
}

void PQTree::splice(int child, bool reversed) {
  const int p = nodes_[child].parent;
  std::vector<int> kids = children(child);
  if (reversed) std::reverse(kids.begin(), kids.end());
  for (int k : kids) {
    detach(k);
    // Insert k right before `child`.
    Node& kn = nodes_[k];
    Node& cn = nodes_[child];
    kn.parent = p;
    kn.next = child;
    kn.prev = cn.prev;
    if (cn.prev >= 0) nodes_[cn.prev].next = k;
    else nodes_[p].first = k;
    cn.prev = k;
    ++nodes_[p].nchild;
  }
  detach(child);
  kill(child);
  changed_ = true;
}

int PQTree::group(const std::vector<int>& members) {
  if (members.size() == 1) return members[0];
  const int g = new_node(members.size() == 2 ? Kind::kQ : Kind::kP);
  for (int m : members) append_child(g, m);
  return g;
}

void PQTree::kill(int n) {
  nodes_[n].alive = false;
  touch(n);
}

void PQTree::canonicalize(int n) {
  if (!nodes_[n].alive || nodes_[n].kind == Kind::kLeaf) return;
  if (nodes_[n].nchild == 1) {
    const int c = nodes_[n].first;
    detach(c);
    replace_in_parent(n, c);
    kill(n);
  } else if (nodes_[n].kind == Kind::kP && nodes_[n].nchild == 2) {
    nodes_[n].kind = Kind::kQ;
    touch(n);
  }
}

void PQTree::clear_scratch() {
  scratch_.clear();
  labels_.clear();
  pert_root_ = -1;
}

bool PQTree::mark(std::span<const int> vars) {
  clear_scratch();
  int distinct = 0;
  for (int v : vars) {
    int x = leaf_of(v);
    if (x < 0) throw std::out_of_range("variable " + std::to_string(v) + " not in universe");
    if (scratch_.count(x)) continue;
    ++distinct;
    scratch_[x].count = 1;
    bool fresh = true;
    for (int p = nodes_[x].parent; p >= 0; x = p, p = nodes_[p].parent) {
      const bool p_fresh = !scratch_.count(p);
      Scratch& sp = scratch_[p];
      if (fresh) sp.pert_children.push_back(x);
      ++sp.count;
      fresh = p_fresh;
    }
  }
  if (distinct < 2) return false;
  int x = leaf_of(vars[0]);
  while (scratch_.at(x).count < distinct) x = nodes_[x].parent;
  pert_root_ = x;
  return true;
}

PQTree::Label PQTree::label_of(int n) const {
  auto it = labels_.find(n);
  return it == labels_.end() ? kEmpty : it->second;
}

bool PQTree::q_run(int n, std::vector<int>* run) const {
  const auto& pert = scratch_.at(n).pert_children;
  int start = pert.front();
  while (nodes_[start].prev >= 0 && label_of(nodes_[start].prev) != kEmpty) {
    start = nodes_[start].prev;
  }
  run->clear();
  for (int c = start; c >= 0 && label_of(c) != kEmpty; c = nodes_[c].next) run->push_back(c);
  return run->size() == pert.size();
}

bool PQTree::classify(int n, bool is_root, Label* out) {
  const auto& pert = scratch_.at(n).pert_children;
  int nf = 0, np = 0;
  for (int c : pert) {
    if (label_of(c) == kFull) ++nf;
    else ++np;
  }
  if (nf == nodes_[n].nchild) {
    *out = kFull;
    return true;
  }
  *out = kPartial;
  if (nodes_[n].kind == Kind::kP) return is_root ? np <= 2 : np <= 1;

  std::vector<int> run;
  if (!q_run(n, &run)) return false;
  for (size_t i = 1; i + 1 < run.size(); ++i) {
    if (label_of(run[i]) != kFull) return false;
  }
  if (is_root) return true;
  auto all_full = [&](size_t from, size_t to) {
    for (size_t i = from; i < to; ++i) {
      if (label_of(run[i]) != kFull) return false;
    }
    return true;
  };
  const bool right = run.back() == nodes_[n].last && all_full(1, run.size());
  const bool left = run.front() == nodes_[n].first && all_full(0, run.size() - 1);
  return right || left;
}

int PQTree::apply(int n, bool is_root) {
  if (nodes_[n].kind == Kind::kLeaf) {
    labels_[n] = kFull;
    return n;
  }
  std::vector<int> kids;
  for (int c : std::vector<int>(scratch_.at(n).pert_children)) kids.push_back(apply(c, false));
  scratch_.at(n).pert_children = kids;

  std::vector<int> full, partial;
  for (int c : kids) (label_of(c) == kFull ? full : partial).push_back(c);
  if (static_cast<int>(full.size()) == nodes_[n].nchild) {
    labels_[n] = kFull;
    return n;
  }

  if (nodes_[n].kind == Kind::kP) {
    changed_ = true;
    auto take_full = [&]() -> int {
      if (full.empty()) return -1;
      for (int f : full) detach(f);
      return group(full);
    };
    if (is_root) {
      const int g = take_full();
      if (partial.empty()) {  // P2
        append_child(n, g);
        canonicalize(n);
        return n;
      }
      const int y = partial[0];
      if (g >= 0) append_child(y, g);  // P4 / P6
      if (partial.size() == 2) {
        const int y2 = partial[1];
        detach(y2);
        std::vector<int> rest = children(y2);
        for (auto it = rest.rbegin(); it != rest.rend(); ++it) {
          detach(*it);
          append_child(y, *it);
        }
        kill(y2);
      }
      if (nodes_[n].nchild == 1) {
        detach(y);
        replace_in_parent(n, y);
        kill(n);
        return y;
      }
      canonicalize(n);
      return n;
    }
    if (partial.empty()) {  // P3
      const int q = new_node(Kind::kQ);
      replace_in_parent(n, q);
      const int g = take_full();
      int e = n;
      if (nodes_[n].nchild == 1) {
        e = nodes_[n].first;
        detach(e);
        kill(n);
      } else {
        canonicalize(n);
      }
      append_child(q, e);
      append_child(q, g);
      labels_[q] = kPartial;
      return q;
    }
    // P5
    const int y = partial[0];
    detach(y);
    replace_in_parent(n, y);
    const int g = take_full();
    if (g >= 0) append_child(y, g);
    if (nodes_[n].nchild == 0) {
      kill(n);
    } else if (nodes_[n].nchild == 1) {
      const int e = nodes_[n].first;
      detach(e);
      kill(n);
      prepend_child(y, e);
    } else {
      canonicalize(n);
      prepend_child(y, n);
    }
    labels_[y] = kPartial;
    return y;
  }

  // Q-node.
  std::vector<int> run;
  q_run(n, &run);
  if (is_root) {  // Q3
    const int front = run.front(), back = run.back();
    if (label_of(front) == kPartial) splice(front, false);
    if (back != front && label_of(back) == kPartial) splice(back, true);
    return n;
  }
  // Q2: orient so the full end is `last`.
  bool right = run.back() == nodes_[n].last;
  for (size_t i = 1; right && i < run.size(); ++i) right = label_of(run[i]) == kFull;
  if (!right) {
    reverse_children(n);
    std::reverse(run.begin(), run.end());
  }
  if (label_of(run.front()) == kPartial) splice(run.front(), false);
  labels_[n] = kPartial;
  return n;
}

PQTree::ReduceResult PQTree::reduce(std::span<const int> vars) {
  ReduceResult r;
  touched_.clear();
  changed_ = false;
  if (!mark(vars)) {
    clear_scratch();
    r.ok = true;
    return r;
  }
  // Dry run: label bottom-up without touching the tree.
  std::function<bool(int)> dry = [&](int n) -> bool {
    if (nodes_[n].kind == Kind::kLeaf) {
      labels_[n] = kFull;
      return true;
    }
    for (int c : scratch_.at(n).pert_children) {
      if (!dry(c)) return false;
    }
    Label l;
    if (!classify(n, n == pert_root_, &l)) return false;
    labels_[n] = l;
    return true;
  };
  if (!dry(pert_root_)) {
    clear_scratch();
    r.ok = false;
    return r;
  }
  labels_.clear();
  apply(pert_root_, true);
  clear_scratch();
  r.ok = true;
  r.changed = changed_;
  std::sort(touched_.begin(), touched_.end());
  touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
  if (changed_) r.touched = std::move(touched_);
  touched_.clear();
  return r;
}

std::optional<PQTree::Block> PQTree::find_block(std::span<const int> vars) {
  if (vars.empty()) return std::nullopt;
  if (!mark(vars)) {
    clear_scratch();
    return Block{leaf_of(vars[0])};
  }
  std::function<bool(int)> dry = [&](int n) -> bool {
    if (nodes_[n].kind == Kind::kLeaf) {
      labels_[n] = kFull;
      return true;
    }
    for (int c : scratch_.at(n).pert_children) {
      if (!dry(c)) return false;
    }
    Label l;
    if (!classify(n, false, &l)) {
      // Only the root may be covered in part.
      if (n != pert_root_) return false;
      l = kPartial;
    }
    labels_[n] = l;
    return true;
  };
  std::optional<Block> out;
  if (dry(pert_root_)) {
    const int r = pert_root_;
    if (labels_[r] == kFull) {
      out = Block{r};
    } else if (nodes_[r].kind == Kind::kQ) {
      std::vector<int> run;
      bool ok = q_run(r, &run);
      for (int c : run) ok = ok && label_of(c) == kFull;
      if (ok) out = Block{r, run.front(), run.back()};
    }
  }
  clear_scratch();
  return out;
}

std::vector<std::vector<int>> PQTree::all_frontiers() const {
  std::function<std::vector<std::vector<int>>(int)> rec = [&](int n) {
    std::vector<std::vector<int>> out;
    if (nodes_[n].kind == Kind::kLeaf) {
      out.push_back({nodes_[n].var});
      return out;
    }
    const std::vector<int> kids = children(n);
    std::vector<std::vector<std::vector<int>>> sub;
    for (int c : kids) sub.push_back(rec(c));
    auto product = [&](const std::vector<int>& order) {
      std::vector<std::vector<int>> acc{{}};
      for (int i : order) {
        std::vector<std::vector<int>> next;
        for (const auto& prefix : acc) {
          for (const auto& s : sub[i]) {
            auto seq = prefix;
            seq.insert(seq.end(), s.begin(), s.end());
            next.push_back(std::move(seq));
          }
        }
        acc = std::move(next);
      }
      out.insert(out.end(), acc.begin(), acc.end());
    };
    std::vector<int> order(kids.size());
    std::iota(order.begin(), order.end(), 0);
    if (nodes_[n].kind == Kind::kQ) {
      product(order);
      std::reverse(order.begin(), order.end());
      product(order);
    } else {
      do {
        product(order);
      } while (std::next_permutation(order.begin(), order.end()));
    }
    return out;
  };
  if (root_ < 0) return {{}};
  auto all = rec(root_);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

std::string PQTree::to_string(const std::function<std::string(int)>& var_name) const {
  std::function<std::string(int)> rec = [&](int n) -> std::string {
    const Node& nd = nodes_[n];
    if (nd.kind == Kind::kLeaf) return var_name ? var_name(nd.var) : std::to_string(nd.var);
    std::string s = nd.kind == Kind::kP ? "P(" : "Q(";
    for (int c = nd.first; c >= 0; c = nodes_[c].next) {
      if (c != nd.first) s += ',';
      s += rec(c);
    }
    return s + ')';
  };
  return root_ < 0 ? std::string("()") : rec(root_);
}

void PQTree::tag(int node, int batch) { node_batches_[node].insert(batch); }

std::set<int> PQTree::affected_batches(const ReduceResult& r) const {
  std::set<int> out;
  std::set<int> visited;
  for (int t : r.touched) {
    for (int x = t; x >= 0 && visited.insert(x).second;
         x = nodes_[x].alive ? nodes_[x].parent : -1) {
      auto it = node_batches_.find(x);
      if (it != node_batches_.end()) out.insert(it->second.begin(), it->second.end());
    }
  }
  return out;
}

}  // namespace dynbatch
