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

// dynbatch command line: gen | train | bench | plan | verify.
// Log level comes from DYNBATCH_LOG_LEVEL (trace ... off, default warn).

#include <cstdlib>
#include <exception>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "commands.h"
#include "dynbatch/subgraph_ir.h"

namespace {

using namespace dynbatch::cli;

void add_gen_flags(CLI::App* cmd, GenFlags* g, bool family_required) {
  auto* family = cmd->add_option("--family", g->family, "chain|bichain|tree|tree2type|lattice");
  if (family_required) family->required();
  cmd->add_option("--count", g->count, "graphs to generate");
  cmd->add_option("--batch", g->batch, "instances merged per graph");
  cmd->add_option("--size,--leaves,--len", g->size, "instance size N or LO..HI");
  cmd->add_option("--words", g->words, "lattice words per sentence");
  cmd->add_option("--density", g->density, "lattice words per character");
  cmd->add_option("--span", g->span, "lattice word span LO..HI");
  cmd->add_option("--seed", g->seed, "generator seed");
}

void add_rl_flags(CLI::App* cmd, dynbatch::RLConfig* rl) {
  cmd->add_option("--alpha", rl->alpha, "reward weight of the readiness ratio");
  cmd->add_option("--lr", rl->learning_rate, "learning rate");
  cmd->add_option("--epsilon", rl->epsilon, "initial exploration rate");
  cmd->add_option("--n-steps", rl->n_steps, "bootstrapping horizon");
  cmd->add_option("--max-episodes", rl->max_episodes, "training budget");
  cmd->add_option("--check-every", rl->check_every, "episodes between checkpoints");
  cmd->add_option("--rl-seed", rl->seed, "training seed");
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("dynbatch");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DYNBATCH_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Dynamic batching and memory layout planning"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate benchmark graphs as JSON");
  add_gen_flags(gen_cmd, &gen.gen, true);
  gen_cmd->add_option("--out", gen.out, "output directory");

  TrainArgs train;
  train.rl.seed = 1;
  auto* train_cmd = app.add_subcommand("train", "learn an FSM batching policy");
  add_gen_flags(train_cmd, &train.gen, false);
  add_rl_flags(train_cmd, &train.rl);
  train_cmd->add_option("--graphs", train.graphs, "graph files or directories");
  train_cmd->add_option("--encoder", train.encoder, "base|max|sort");
  train_cmd->add_option("--out", train.out, "policy file")->required();
  train_cmd->add_option("--log", train.log, "training log (JSON)");

  BenchArgs bench;
  bench.rl.seed = 1;
  auto* bench_cmd = app.add_subcommand("bench", "compare batching algorithms");
  add_rl_flags(bench_cmd, &bench.rl);
  bench_cmd->add_option("--suite", bench.suite, "tree|tree2type|lattice|chain|all");
  bench_cmd->add_option("--fixture", bench.fixture, "spine-tree|swapped-pair|small-lattice");
  bench_cmd->add_option("--graphs", bench.graphs, "graph files or directories");
  bench_cmd->add_option("--algorithms", bench.algorithms, "comma separated subset");
  bench_cmd->add_flag("--held-out", bench.held_out, "train on a separately seeded set");
  bench_cmd->add_option("--train-seed", bench.train_seed, "seed of the held-out set");
  bench_cmd->add_option("--json", bench.json, "report file");
  bench_cmd->add_flag("--no-timing", bench.no_timing, "omit wall times from JSON");

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "plan the memory layout of a subgraph");
  plan_cmd->add_option("subgraph", plan.path, "DSL file")->required();
  plan_cmd->add_option("--element-bytes", plan.element_bytes, "bytes per element");
  plan_cmd->add_option("--json", plan.json, "report file");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "run the randomized oracle suite");
  verify_cmd->add_option("--cases", verify.cases, "random graphs per schedule oracle");
  verify_cmd->add_option("--max-nodes", verify.max_nodes, "largest random graph");
  verify_cmd->add_option("--pq-cases", verify.pq_cases, "random constraint systems");
  verify_cmd->add_option("--pq-max-n", verify.pq_max_n, "largest PQ universe");
  verify_cmd->add_option("--layout-cases", verify.layout_cases, "random subgraphs");
  verify_cmd->add_option("--seed", verify.seed, "oracle seed");
  verify_cmd->add_option("--mutant", verify.mutant, "negative control: skip-broadcast");
  verify_cmd->add_option("--json", verify.json, "report file");
  verify_cmd->add_flag("--no-timing", verify.no_timing, "omit wall times from JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train);
    if (*bench_cmd) return run_bench(bench);
    if (*plan_cmd) return run_plan(plan);
    if (*verify_cmd) return run_verify(verify);
  } catch (const dynbatch::ParseError& e) {
    std::cerr << "error: " << plan.path << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
