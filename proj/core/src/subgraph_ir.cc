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

#include "dynbatch/subgraph_ir.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace dynbatch {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s.front()))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const size_t comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

// Result size of an op, or an error message.
std::optional<int> result_size(const std::string& kind, const std::vector<int>& sizes,
                               std::string* err) {
  auto fail = [&](std::string msg) -> std::optional<int> {
    *err = kind + ": " + msg;
    return std::nullopt;
  };
  auto all_equal = [&] {
    for (int s : sizes) {
      if (s != sizes.front()) return false;
    }
    return true;
  };
  static const char* kUnary[] = {"tanh", "sigmoid", "relu", "exp", "neg", "one_minus"};
  for (const char* u : kUnary) {
    if (kind == u) {
      if (sizes.size() != 1) return fail("expects 1 argument");
      return sizes[0];
    }
  }
  if (kind == "add" || kind == "sub" || kind == "mul") {
    if (sizes.size() != 2) return fail("expects 2 arguments");
    if (!all_equal()) return fail("size mismatch");
    return sizes[0];
  }
  if (kind == "sum") {
    if (sizes.empty()) return fail("expects at least 1 argument");
    if (!all_equal()) return fail("size mismatch");
    return sizes[0];
  }
  if (kind == "affine") {
    if (sizes.size() != 3) return fail("expects (W, x, b)");
    if (sizes[0] != sizes[1] * sizes[2]) return fail("size mismatch: |W| must be |x|*|b|");
    return sizes[2];
  }
  if (kind == "matvec") {
    if (sizes.size() != 2) return fail("expects (W, x)");
    if (sizes[0] % sizes[1] != 0) return fail("size mismatch: |x| must divide |W|");
    return sizes[0] / sizes[1];
  }
  if (kind == "concat") {
    if (sizes.empty()) return fail("expects at least 1 argument");
    return std::accumulate(sizes.begin(), sizes.end(), 0);
  }
  *err = "unknown op kind '" + kind + "'";
  return std::nullopt;
}

}  // namespace

int SubgraphIR::find(std::string_view var) const {
  for (int i = 0; i < static_cast<int>(vars.size()); ++i) {
    if (vars[i].name == var) return i;
  }
  return -1;
}

std::string SubgraphIR::op_type(const Op& op) const {
  std::string t = op.kind + "/" + std::to_string(op.args.size());
  for (size_t i = 0; i < op.args.size(); ++i) {
    t += (i ? "," : ":") + std::to_string(vars[op.args[i]].size);
  }
  return t;
}

SubgraphIR parse_subgraph(std::string_view text) {
  SubgraphIR ir;
  std::unordered_map<std::string, int> ids;
  auto declare = [&](std::string_view name, int size, Variable::Role role, int line) {
    if (!is_identifier(name)) throw ParseError(line, "bad variable name '" + std::string(name) + "'");
    if (ids.count(std::string(name))) {
      throw ParseError(line, "variable '" + std::string(name) + "' assigned twice (SSA)");
    }
    ids[std::string(name)] = static_cast<int>(ir.vars.size());
    ir.vars.push_back(Variable{std::string(name), size, role});
    return static_cast<int>(ir.vars.size()) - 1;
  };
  auto lookup = [&](std::string_view name, int line) {
    auto it = ids.find(std::string(name));
    if (it == ids.end()) throw ParseError(line, "undefined variable '" + std::string(name) + "'");
    return it->second;
  };

  int line_no = 0;
  std::vector<std::pair<std::string, int>> pending_outputs;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const size_t space = line.find_first_of(" \t");
    const std::string_view head = line.substr(0, space);
    const std::string_view rest = space == std::string_view::npos ? "" : trim(line.substr(space));
    if (head == "subgraph") {
      if (!is_identifier(rest)) throw ParseError(line_no, "bad subgraph name");
      ir.name = std::string(rest);
    } else if (head == "input" || head == "param") {
      const auto role = head == "input" ? Variable::Role::kInput : Variable::Role::kParam;
      for (std::string_view decl : split_commas(rest)) {
        int size = 1;
        std::string_view name = decl;
        if (const size_t colon = decl.find(':'); colon != std::string_view::npos) {
          name = trim(decl.substr(0, colon));
          const std::string num(trim(decl.substr(colon + 1)));
          try {
            size_t used = 0;
            size = std::stoi(num, &used);
            if (used != num.size() || size <= 0) throw std::invalid_argument(num);
          } catch (const std::exception&) {
            throw ParseError(line_no, "bad size '" + num + "'");
          }
        }
        declare(name, size, role, line_no);
      }
    } else if (head == "output") {
      for (std::string_view name : split_commas(rest)) pending_outputs.emplace_back(name, line_no);
    } else {
      const size_t eq = line.find('=');
      const size_t open = line.find('(');
      const size_t close = line.rfind(')');
      if (eq == std::string_view::npos || open == std::string_view::npos ||
          close == std::string_view::npos || open < eq || close < open ||
          !trim(line.substr(close + 1)).empty()) {
        throw ParseError(line_no, "expected '<var> = <op>(<args>)'");
      }
      const std::string_view dest = trim(line.substr(0, eq));
      const std::string kind(trim(line.substr(eq + 1, open - eq - 1)));
      const std::string_view arg_text = trim(line.substr(open + 1, close - open - 1));
      Op op;
      op.kind = kind;
      op.line = line_no;
      std::vector<int> sizes;
      if (!arg_text.empty()) {
        for (std::string_view a : split_commas(arg_text)) {
          op.args.push_back(lookup(a, line_no));
          sizes.push_back(ir.vars[op.args.back()].size);
        }
      }
      std::string err;
      const auto size = result_size(kind, sizes, &err);
      if (!size) throw ParseError(line_no, err);
      op.dest = declare(dest, *size, Variable::Role::kLocal, line_no);
      ir.ops.push_back(std::move(op));
    }
  }
  for (const auto& [name, line] : pending_outputs) ir.outputs.push_back(lookup(name, line));
  return ir;
}

SubgraphIR load_subgraph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_subgraph(ss.str());
}

DataflowGraph op_graph(const SubgraphIR& ir) {
  GraphBuilder b;
  std::vector<int> producer(ir.vars.size(), -1);
  for (int i = 0; i < static_cast<int>(ir.ops.size()); ++i) producer[ir.ops[i].dest] = i;
  for (const Op& op : ir.ops) {
    std::vector<NodeId> in;
    for (int a : op.args) {
      if (producer[a] >= 0 && std::find(in.begin(), in.end(), producer[a]) == in.end()) {
        in.push_back(producer[a]);
      }
    }
    b.add_node(ir.op_type(op), std::move(in));
  }
  return std::move(b).build(ir.name);
}

}  // namespace dynbatch
