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

#ifndef DYNBATCH_SUBGRAPH_IR_H_
#define DYNBATCH_SUBGRAPH_IR_H_

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynbatch/graph.h"

namespace dynbatch {

// A static subgraph in SSA form. Line grammar:
//   subgraph <name>
//   input <v>[:<size>], ...
//   param <v>[:<size>], ...
//   <v> = <op>(<v>, ...)
//   output <v>, ...
// Sizes are abstract element counts (default 1); '#' starts a comment.
struct Variable {
  enum class Role { kInput, kParam, kLocal };
  std::string name;
  int size = 1;
  Role role = Role::kLocal;
};

struct Op {
  int dest = -1;
  std::string kind;
  std::vector<int> args;
  int line = 0;
};

struct SubgraphIR {
  std::string name;
  std::vector<Variable> vars;  // variable id = index
  std::vector<Op> ops;         // program order
  std::vector<int> outputs;

  // Returns -1 when absent.
  int find(std::string_view var) const;
  // Kind, arity and argument sizes; ops of equal type can share a batch.
  std::string op_type(const Op& op) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Supported ops: tanh sigmoid relu exp neg one_minus (unary), add sub mul
// (equal sizes), sum (one or more equal sizes), affine(W, x, b) with
// |W| = |b|*|x|, matvec(W, x) with |x| dividing |W|, concat.
SubgraphIR parse_subgraph(std::string_view text);
SubgraphIR load_subgraph_file(const std::string& path);

// One node per op, typed by op_type, with an edge for every local argument.
DataflowGraph op_graph(const SubgraphIR& ir);

}  // namespace dynbatch

#endif  // DYNBATCH_SUBGRAPH_IR_H_
