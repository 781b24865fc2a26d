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

#ifndef DYNBATCH_HARNESS_H_
#define DYNBATCH_HARNESS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dynbatch/alignment.h"
#include "dynbatch/batching.h"
#include "dynbatch/fsm_rl.h"
#include "dynbatch/generators.h"
#include "dynbatch/subgraph_ir.h"

namespace dynbatch {

// depth, agenda, sc, fsm-base, fsm-max, fsm-sort.
const std::vector<std::string>& all_algorithms();

struct Suite {
  std::string name;
  GeneratorParams params;
  uint64_t seed = 1;
};

// The fixed benchmark suites: tree, tree2type, lattice and chain.
std::vector<Suite> default_suites();
Suite default_suite(Family family);

// Default training settings for benchmarks (seed 1).
RLConfig default_rl();

struct ExperimentConfig {
  std::vector<std::string> algorithms = all_algorithms();
  RLConfig rl = default_rl();
  // Train the FSM policies on a separately seeded set of the same family
  // instead of the evaluation graphs.
  bool held_out = false;
  uint64_t train_seed = 1000;
  // Throws std::invalid_argument.
  void validate() const;
};

struct GraphRow {
  std::string graph;
  int nodes = 0;
  int lower_bound = 0;
  std::map<std::string, int> batches;  // by algorithm
};

struct TrainingSummary {
  std::string algorithm;
  int episodes = 0;
  bool reached_lower_bound = false;
  int best_total = 0;
  int lower_bound_total = 0;
  int states = 0;
  double wall_seconds = 0.0;
};

struct BenchReport {
  std::string suite;
  std::vector<std::string> algorithms;
  std::vector<GraphRow> rows;
  std::map<std::string, long long> totals;
  long long lower_bound_total = 0;
  long long best_total = 0;  // per-graph minimum over algorithms, summed
  std::vector<TrainingSummary> training;
  // One entry per (algorithm, graph) where a learned policy stays above the
  // lower bound.
  std::vector<std::string> flags;
};

// Runs every algorithm on every evaluation graph. Each count comes from
// validate_schedule. FSM policies are trained on `train_graphs`.
BenchReport run_bench(const std::string& suite, std::span<const DataflowGraph> eval_graphs,
                      std::span<const DataflowGraph> train_graphs, const ExperimentConfig& cfg);

// Generates the suite, trains (held out or not) and benchmarks.
BenchReport run_suite(const Suite& suite, const ExperimentConfig& cfg);

std::string bench_report_json(const BenchReport& r, bool with_timing = true);
std::string bench_report_text(const BenchReport& r);

// Random SSA program over scalar inputs using add, sub, mul, tanh and
// sigmoid, with arguments drawn uniformly from the defined variables.
SubgraphIR random_subgraph(int ops, int inputs, uint64_t seed);

// A feasible operand system with Σ|b| = batches * 3 * width: variables sit
// in a hidden order, every operand is a window of `width` consecutive
// variables and each batch lists its operands under one shared shuffle.
std::vector<BatchOperands> scaling_instance(int batches, int width, uint64_t seed);

// Minimum batch count by breadth-first search over executed sets, written
// independently of optimal_schedule. At most 20 nodes.
int brute_force_optimum(const DataflowGraph& g);

struct VerifyOptions {
  int cases = 200;
  int max_nodes = 16;
  int pq_cases = 500;
  int pq_max_n = 8;
  int layout_cases = 200;
  uint64_t seed = 1;
  AlignmentOptions alignment;  // the negative control disables broadcasting
};

struct OracleResult {
  std::string name;
  int cases = 0;
  int checks = 0;
  int violations = 0;
  std::string first_violation;
  double wall_seconds = 0.0;

  bool passed() const { return violations == 0; }
};

// ready_start: a start type with readiness ratio 1 never lengthens the optimum.
// optimum: A* matches breadth-first search; heuristics never beat it.
// lower_bound: no schedule is shorter than the summed typed depths.
// pq_frontier: tree frontiers equal the brute-force valid permutations.
// alignment: planned layouts are zero-copy on every surviving batch, and
//   planted feasible systems lose no batch.
std::vector<OracleResult> run_verify(const VerifyOptions& options);
std::string verify_report_json(const std::vector<OracleResult>& results, bool with_timing = true);

}  // namespace dynbatch

#endif  // DYNBATCH_HARNESS_H_
