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

#ifndef DYNBATCH_TOOLS_COMMANDS_H_
#define DYNBATCH_TOOLS_COMMANDS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynbatch/fsm_rl.h"
#include "dynbatch/generators.h"

namespace dynbatch::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;  // an oracle or check did not hold
inline constexpr int kUsage = 2;   // bad arguments or input files

// Generator flags shared by gen, train and bench.
struct GenFlags {
  std::string family;
  int count = 1;
  int batch = 1;
  std::string size;  // "N" or "LO..HI"
  int words = -1;
  double density = -1.0;  // negative keeps the family default
  std::string span = "2..4";
  uint64_t seed = 1;

  GeneratorParams params() const;
};

struct GenArgs {
  GenFlags gen;
  std::string out = ".";
};

struct TrainArgs {
  GenFlags gen;
  std::vector<std::string> graphs;  // graph files or directories
  std::string encoder = "sort";
  RLConfig rl;
  std::string out;
  std::string log;
};

struct BenchArgs {
  std::string suite = "all";
  std::string fixture;
  std::vector<std::string> graphs;
  std::string algorithms;  // comma separated, empty for all
  RLConfig rl;
  bool held_out = false;
  uint64_t train_seed = 1000;
  std::string json;
  bool no_timing = false;
};

struct PlanArgs {
  std::string path;
  int element_bytes = 4;
  std::string json;
};

struct VerifyArgs {
  int cases = 200;
  int max_nodes = 16;
  int pq_cases = 500;
  int pq_max_n = 8;
  int layout_cases = 200;
  uint64_t seed = 1;
  std::string mutant;
  std::string json;
  bool no_timing = false;
};

// "7" or "4..12".
std::pair<int, int> parse_range(const std::string& text);

int run_gen(const GenArgs& a);
int run_train(const TrainArgs& a);
int run_bench(const BenchArgs& a);
int run_plan(const PlanArgs& a);
int run_verify(const VerifyArgs& a);

}  // namespace dynbatch::cli

#endif  // DYNBATCH_TOOLS_COMMANDS_H_
