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

#include <gtest/gtest.h>

namespace dynbatch {
namespace {

int error_line(const std::string& text) {
  try {
    parse_subgraph(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

TEST(SubgraphIRTest, MinimalProgram) {
  const SubgraphIR ir = parse_subgraph("input x1\nx2 = tanh(x1)\n");
  ASSERT_EQ(ir.ops.size(), 1u);
  EXPECT_EQ(ir.vars.size(), 2u);
  EXPECT_EQ(ir.vars[ir.ops[0].dest].name, "x2");
  EXPECT_EQ(ir.ops[0].args, std::vector<int>{0});
}

TEST(SubgraphIRTest, SizesAndRoles) {
  const SubgraphIR ir = parse_subgraph(
      "subgraph cell  # comment\n"
      "input x:4, h:4\n"
      "param W:32, b:4\n"
      "xh = concat(x, h)\n"
      "a = affine(W, xh, b)\n"
      "y = sigmoid(a)\n"
      "output y\n");
  EXPECT_EQ(ir.name, "cell");
  EXPECT_EQ(ir.vars[ir.find("xh")].size, 8);
  EXPECT_EQ(ir.vars[ir.find("a")].size, 4);
  EXPECT_EQ(ir.vars[ir.find("W")].role, Variable::Role::kParam);
  EXPECT_EQ(ir.vars[ir.find("x")].role, Variable::Role::kInput);
  EXPECT_EQ(ir.vars[ir.find("y")].role, Variable::Role::kLocal);
  EXPECT_EQ(ir.outputs, std::vector<int>{ir.find("y")});
  EXPECT_EQ(ir.find("nope"), -1);
}

TEST(SubgraphIRTest, GateOpsShareAType) {
  const SubgraphIR ir = parse_subgraph(
      "input xh:8\n"
      "param Wi:32, Wf:32, Wo:32, Wg:32, bi:4, bf:4, bo:4, bg:4\n"
      "i = affine(Wi, xh, bi)\n"
      "f = affine(Wf, xh, bf)\n"
      "o = affine(Wo, xh, bo)\n"
      "g = affine(Wg, xh, bg)\n"
      "y = tanh(g)\n");
  const std::string t = ir.op_type(ir.ops[0]);
  for (int k = 1; k < 4; ++k) EXPECT_EQ(ir.op_type(ir.ops[k]), t);
  EXPECT_NE(ir.op_type(ir.ops[4]), t);
  EXPECT_EQ(t, "affine/3:32,8,4");
}

TEST(SubgraphIRTest, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("input a\nb = tanh(a)\nb = tanh(a)\n"), 3);  // SSA
  EXPECT_EQ(error_line("input a\nb = tanh(a)\na = tanh(b)\n"), 3);  // input reassigned
  EXPECT_EQ(error_line("input a\n\nb = tanh(c)\n"), 3);             // undefined
  EXPECT_EQ(error_line("input a\nb = frob(a)\n"), 2);               // unknown op
  EXPECT_EQ(error_line("input a:2, b:3\nc = add(a, b)\n"), 2);      // size mismatch
  EXPECT_EQ(error_line("input a\nb = add(a)\n"), 2);                // arity
  EXPECT_EQ(error_line("input a:0\n"), 1);                          // bad size
  EXPECT_EQ(error_line("input a\nb tanh(a)\n"), 2);                 // malformed
  EXPECT_EQ(error_line("input a\noutput z\n"), 2);                  // undefined output
  EXPECT_EQ(error_line("input a\nparam W:7\nc = affine(W, a, a)\n"), 3);
}

TEST(SubgraphIRTest, OpGraphFollowsDataflow) {
  const SubgraphIR ir = parse_subgraph(
      "input a, b\n"
      "c = mul(a, b)\n"
      "d = tanh(c)\n"
      "e = add(c, d)\n");
  const DataflowGraph g = op_graph(ir);
  ASSERT_EQ(g.num_nodes(), 3);
  EXPECT_TRUE(g.inputs(0).empty());
  EXPECT_EQ(std::vector<NodeId>(g.inputs(1).begin(), g.inputs(1).end()), std::vector<NodeId>{0});
  EXPECT_EQ(std::vector<NodeId>(g.inputs(2).begin(), g.inputs(2).end()),
            (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(g.type_name(g.type_of(0)), "mul/2:1,1");
}

TEST(SubgraphIRTest, LoadsFixtureFiles) {
  for (const char* name : {"two_batch", "lstm_cell", "gru_cell", "infeasible"}) {
    const SubgraphIR ir =
        load_subgraph_file(std::string(DYNBATCH_DATA_DIR) + "/subgraphs/" + name + ".dsl");
    EXPECT_FALSE(ir.ops.empty()) << name;
  }
  EXPECT_THROW(load_subgraph_file("/nonexistent.dsl"), std::runtime_error);
}

}  // namespace
}  // namespace dynbatch
