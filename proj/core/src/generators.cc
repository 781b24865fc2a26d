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

#include "dynbatch/generators.h"

#include <algorithm>
#include <functional>
#include <random>
#include <stdexcept>

#include "dynbatch/fixtures.h"

namespace dynbatch {
namespace {

constexpr std::string_view kCharCell = "char_cell";
constexpr std::string_view kWordCell = "word_cell";

int draw(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

TreeShape random_tree(std::mt19937_64& rng, int leaves) {
  TreeShape shape;
  std::function<int(int)> grow = [&](int k) -> int {
    const int id = static_cast<int>(shape.nodes.size());
    shape.nodes.emplace_back();
    if (k == 1) return id;
    const int left_leaves = draw(rng, 1, k - 1);
    const int l = grow(left_leaves);
    const int r = grow(k - left_leaves);
    shape.nodes[id].left = l;
    shape.nodes[id].right = r;
    return id;
  };
  grow(leaves);
  return shape;
}

void append_chain(GraphBuilder& b, int len) {
  const TypeId cell = b.add_type("cell");
  NodeId prev = -1;
  for (int i = 0; i < len; ++i) {
    prev = b.add_node(cell, prev < 0 ? std::vector<NodeId>{} : std::vector<NodeId>{prev});
  }
}

void append_bichain(GraphBuilder& b, int len) {
  const TypeId lstm = b.add_type("lstm");
  const TypeId tag = b.add_type("tag");
  std::vector<NodeId> fwd(len), bwd(len);
  for (int i = 0; i < len; ++i) {
    fwd[i] = b.add_node(lstm, i == 0 ? std::vector<NodeId>{} : std::vector<NodeId>{fwd[i - 1]});
  }
  for (int i = len - 1; i >= 0; --i) {
    bwd[i] = b.add_node(lstm, i == len - 1 ? std::vector<NodeId>{}
                                           : std::vector<NodeId>{bwd[i + 1]});
  }
  for (int i = 0; i < len; ++i) b.add_node(tag, {fwd[i], bwd[i]});
}

void append_lattice(GraphBuilder& b, int len, const std::vector<std::pair<int, int>>& words) {
  const TypeId ch = b.add_type(kCharCell);
  const TypeId wd = b.add_type(kWordCell);
  // Chars take ids base..base+len-1 and words follow; char inputs may name
  // word ids before those words are added.
  const NodeId base = b.num_nodes();
  std::vector<std::vector<NodeId>> char_inputs(len);
  for (int i = 1; i < len; ++i) char_inputs[i].push_back(base + i - 1);
  for (size_t k = 0; k < words.size(); ++k) {
    char_inputs[words[k].second].push_back(base + len + static_cast<NodeId>(k));
  }
  for (int i = 0; i < len; ++i) b.add_node(ch, std::move(char_inputs[i]));
  for (auto [s, e] : words) b.add_node(wd, {base + s});
}

std::vector<std::pair<int, int>> random_words(std::mt19937_64& rng, int len, int count,
                                              int min_span, int max_span) {
  std::vector<std::pair<int, int>> candidates;
  for (int s = 0; s < len; ++s) {
    for (int span = min_span; span <= max_span; ++span) {
      if (s + span < len) candidates.emplace_back(s, s + span);
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  if (count > static_cast<int>(candidates.size())) count = static_cast<int>(candidates.size());
  candidates.resize(count);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::kChain: return "chain";
    case Family::kBichain: return "bichain";
    case Family::kTree: return "tree";
    case Family::kTree2Type: return "tree2type";
    case Family::kLattice: return "lattice";
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view name) {
  for (Family f : {Family::kChain, Family::kBichain, Family::kTree, Family::kTree2Type,
                   Family::kLattice}) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

TreeShape left_spine_tree(int leaves) {
  TreeShape shape;
  if (leaves < 1) throw std::invalid_argument("a tree needs at least one leaf");
  // Internal nodes are stored root first; internal k joins internal k+1
  // (or the first leaf pair) with one fresh leaf on the right.
  std::function<int(int)> grow = [&](int k) -> int {
    const int id = static_cast<int>(shape.nodes.size());
    shape.nodes.emplace_back();
    if (k == 1) return id;
    const int l = grow(k - 1);
    const int r = static_cast<int>(shape.nodes.size());
    shape.nodes.emplace_back();
    shape.nodes[id].left = l;
    shape.nodes[id].right = r;
    return id;
  };
  grow(leaves);
  return shape;
}

void append_tree(GraphBuilder& b, const TreeShape& shape,
                 const std::vector<std::string>& internal_type, const TreeTypes& types,
                 std::optional<NodeId> feed, NodeId* last_reduce) {
  const TypeId out_t = b.add_type(types.output);
  const TypeId red_t = b.add_type(types.reduce);
  std::vector<NodeId> outputs;
  auto fed = [&](std::vector<NodeId> in) {
    if (in.empty() && feed) in.push_back(*feed);
    return in;
  };
  // Post-order: returns the cell node of tree node i, -1 for leaves.
  std::function<NodeId(int)> visit = [&](int i) -> NodeId {
    if (shape.is_leaf(i)) {
      outputs.push_back(b.add_node(out_t, fed({})));
      return -1;
    }
    const NodeId l = visit(shape.nodes[i].left);
    const NodeId r = visit(shape.nodes[i].right);
    std::vector<NodeId> in;
    if (l >= 0) in.push_back(l);
    if (r >= 0) in.push_back(r);
    const NodeId cell = b.add_node(b.add_type(internal_type.at(i)), fed(std::move(in)));
    outputs.push_back(b.add_node(out_t, {cell}));
    return cell;
  };
  visit(0);
  NodeId acc = outputs.front();
  for (size_t k = 1; k < outputs.size(); ++k) acc = b.add_node(red_t, {acc, outputs[k]});
  if (last_reduce) *last_reduce = acc;
}

DataflowGraph lattice_graph(int len, const std::vector<std::pair<int, int>>& words,
                            std::string name) {
  for (auto [s, e] : words) {
    if (s < 0 || e >= len || e <= s) throw std::invalid_argument("word span out of range");
  }
  GraphBuilder b;
  append_lattice(b, len, words);
  return std::move(b).build(std::move(name));
}

std::vector<DataflowGraph> generate(const GeneratorParams& p, uint64_t seed) {
  if (p.count <= 0 || p.batch <= 0) throw std::invalid_argument("count and batch must be > 0");
  if (p.min_size <= 0 || p.max_size < p.min_size) {
    throw std::invalid_argument("size range must satisfy 0 < min <= max");
  }
  if (p.family == Family::kLattice) {
    if (p.min_span < 2 || p.max_span < p.min_span || p.max_span >= p.min_size) {
      throw std::invalid_argument("word spans must lie in [2, lattice length)");
    }
    if (p.words < 0 && p.word_density < 0) throw std::invalid_argument("negative word density");
  }
  std::mt19937_64 rng(seed);
  std::vector<DataflowGraph> out;
  out.reserve(p.count);
  for (int gi = 0; gi < p.count; ++gi) {
    GraphBuilder b;
    for (int inst = 0; inst < p.batch; ++inst) {
      const int size = draw(rng, p.min_size, p.max_size);
      switch (p.family) {
        case Family::kChain:
          append_chain(b, size);
          break;
        case Family::kBichain:
          append_bichain(b, size);
          break;
        case Family::kTree:
        case Family::kTree2Type: {
          TreeShape shape = random_tree(rng, size);
          std::vector<std::string> kinds(shape.nodes.size(), "I");
          if (p.family == Family::kTree2Type) {
            b.add_type("Ia");
            b.add_type("Ib");
            for (size_t i = 0; i < shape.nodes.size(); ++i) {
              kinds[i] = (std::uniform_int_distribution<int>(0, 1)(rng) == 0) ? "Ia" : "Ib";
            }
          } else {
            b.add_type("I");
          }
          append_tree(b, shape, kinds, TreeTypes{});
          break;
        }
        case Family::kLattice: {
          const int count = p.words >= 0
                                ? p.words
                                : static_cast<int>(p.word_density * size + 0.5);
          append_lattice(b, size, random_words(rng, size, count, p.min_span, p.max_span));
          break;
        }
      }
    }
    out.push_back(std::move(b).build(std::string(family_name(p.family)) + "-" +
                                     std::to_string(seed) + "-" + std::to_string(gi)));
  }
  return out;
}

DataflowGraph random_dag(int nodes, int types, double edge_prob, uint64_t seed) {
  if (nodes < 1 || types < 1 || edge_prob < 0.0 || edge_prob > 1.0) {
    throw std::invalid_argument("random_dag: bad parameters");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(edge_prob);
  GraphBuilder b;
  for (int t = 0; t < types; ++t) b.add_type("t" + std::to_string(t));
  for (int i = 0; i < nodes; ++i) {
    std::vector<NodeId> in;
    for (int j = 0; j < i; ++j) {
      if (edge(rng)) in.push_back(j);
    }
    b.add_node(static_cast<TypeId>(draw(rng, 0, types - 1)), std::move(in));
  }
  return std::move(b).build("dag-" + std::to_string(seed));
}

std::string validate_lattice(const DataflowGraph& g, int min_span, int max_span) {
  const TypeId ch = g.find_type(kCharCell);
  const TypeId wd = g.find_type(kWordCell);
  if (ch < 0) return "no char_cell type";
  // Position of every char along its chain.
  std::vector<int> pos(g.num_nodes(), -1);
  for (NodeId v : g.nodes_of_type(ch)) {
    int chars_in = 0;
    for (NodeId u : g.inputs(v)) {
      if (g.type_of(u) == ch) ++chars_in;
      else if (g.type_of(u) != wd) return "char cell fed by a foreign type";
    }
    if (chars_in > 1) return "char cell with two char predecessors";
    if (chars_in == 0) {
      int i = 0;
      for (NodeId cur = v; cur >= 0;) {
        pos[cur] = i++;
        NodeId next = -1;
        for (NodeId w : g.outputs(cur)) {
          if (g.type_of(w) == ch) {
            if (next >= 0) return "char chain forks";
            next = w;
          }
        }
        cur = next;
      }
    }
  }
  for (NodeId v : g.nodes_of_type(ch)) {
    if (pos[v] < 0) return "char cell not on a chain";
  }
  if (wd < 0) return {};
  for (NodeId w : g.nodes_of_type(wd)) {
    if (g.inputs(w).size() != 1 || g.type_of(g.inputs(w)[0]) != ch) {
      return "word cell must read exactly one char cell";
    }
    if (g.outputs(w).size() != 1 || g.type_of(g.outputs(w)[0]) != ch) {
      return "word cell must feed exactly one char cell";
    }
    const int span = pos[g.outputs(w)[0]] - pos[g.inputs(w)[0]];
    if (span < min_span || span > max_span) {
      return "word span " + std::to_string(span) + " outside [" + std::to_string(min_span) +
             ", " + std::to_string(max_span) + "]";
    }
  }
  return {};
}

namespace fixtures {

DataflowGraph spine_tree() {
  GraphBuilder b;
  b.add_type("I");
  b.add_type("O");
  b.add_type("R");
  TreeShape shape = left_spine_tree(4);
  append_tree(b, shape, std::vector<std::string>(shape.nodes.size(), "I"), TreeTypes{});
  return std::move(b).build("spine-tree");
}

DataflowGraph swapped_tree_pair() {
  GraphBuilder b;
  b.add_type("I");
  b.add_type("O");
  b.add_type("R");
  TreeShape shape = left_spine_tree(4);
  NodeId last = -1;
  append_tree(b, shape, std::vector<std::string>(shape.nodes.size(), "I"), TreeTypes{}, {},
              &last);
  append_tree(b, shape, std::vector<std::string>(shape.nodes.size(), "O"),
              TreeTypes{.output = "I", .reduce = "R"}, last);
  return std::move(b).build("swapped-tree-pair");
}

DataflowGraph small_lattice() { return lattice_graph(6, {{1, 3}, {2, 5}}, "small-lattice"); }

}  // namespace fixtures
}  // namespace dynbatch
