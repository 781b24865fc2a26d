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

#include "commands.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "dynbatch/batching.h"
#include "dynbatch/fixtures.h"
#include "dynbatch/harness.h"
#include "dynbatch/layout.h"
#include "json.hpp"

namespace dynbatch::cli {
namespace {

namespace fs = std::filesystem;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text << "\n";
}

std::vector<DataflowGraph> load_graphs(const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const std::string& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.path().extension() == ".json") found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw std::invalid_argument("no graph files found");
  std::vector<DataflowGraph> out;
  for (const std::string& f : files) out.push_back(load_graph_file(f));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t comma = std::min(s.find(',', pos), s.size());
    if (comma > pos) out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

std::optional<DataflowGraph> fixture(const std::string& name) {
  if (name == "spine-tree") return fixtures::spine_tree();
  if (name == "swapped-pair") return fixtures::swapped_tree_pair();
  if (name == "small-lattice") return fixtures::small_lattice();
  return std::nullopt;
}

nlohmann::ordered_json cost_json(const CostReport& r) {
  return nlohmann::ordered_json::parse(cost_report_json(r));
}

}  // namespace

std::pair<int, int> parse_range(const std::string& text) {
  auto num = [&](const std::string& s) {
    size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != s.size()) throw std::invalid_argument("bad range '" + text + "'");
    return v;
  };
  const size_t dots = text.find("..");
  if (dots == std::string::npos) {
    const int v = num(text);
    return {v, v};
  }
  return {num(text.substr(0, dots)), num(text.substr(dots + 2))};
}

GeneratorParams GenFlags::params() const {
  GeneratorParams p;
  const auto f = parse_family(family);
  if (!f) throw std::invalid_argument("unknown family '" + family + "'");
  p = default_suite(*f).params;
  p.count = count;
  p.batch = batch;
  if (!size.empty()) std::tie(p.min_size, p.max_size) = parse_range(size);
  p.words = words;
  if (density >= 0.0) p.word_density = density;
  std::tie(p.min_span, p.max_span) = parse_range(span);
  return p;
}

int run_gen(const GenArgs& a) {
  const GeneratorParams p = a.gen.params();
  const auto graphs = generate(p, a.gen.seed);
  fs::create_directories(a.out);
  for (const DataflowGraph& g : graphs) {
    if (p.family == Family::kLattice && p.batch == 1) {
      const std::string err = validate_lattice(g, p.min_span, p.max_span);
      if (!err.empty()) throw std::logic_error("generated lattice is invalid: " + err);
    }
    const std::string path = (fs::path(a.out) / (g.name() + ".json")).string();
    write_file(path, graph_to_json(g));
    std::cout << path << " nodes=" << g.num_nodes() << " lower_bound=" << lower_bound(g) << "\n";
  }
  return kOk;
}

int run_train(const TrainArgs& a) {
  const Encoder e = [&] {
    const auto parsed = parse_encoder(a.encoder);
    if (!parsed) throw std::invalid_argument("unknown encoder '" + a.encoder + "'");
    return *parsed;
  }();
  a.rl.validate();
  std::vector<DataflowGraph> graphs;
  std::string family;
  if (!a.graphs.empty()) {
    graphs = load_graphs(a.graphs);
    family = "custom";
  } else {
    graphs = generate(a.gen.params(), a.gen.seed);
    family = a.gen.family;
  }
  spdlog::info("training fsm-{} on {} graphs", a.encoder, graphs.size());
  const TrainResult r = train(graphs, e, a.rl, family);
  save_policy(r.policy, a.out);

  nlohmann::ordered_json log;
  log["encoder"] = a.encoder;
  log["episodes"] = r.log.episodes;
  log["lower_bound_total"] = r.log.lower_bound_total;
  log["best_total"] = r.log.best_total;
  log["best_episode"] = r.log.best_episode;
  log["reached_lower_bound"] = r.log.reached_lower_bound;
  log["states"] = r.policy.table.size();
  log["wall_seconds"] = r.log.wall_seconds;
  log["checkpoints"] = nlohmann::ordered_json::array();
  for (const Checkpoint& c : r.log.checkpoints) {
    log["checkpoints"].push_back({{"episode", c.episode}, {"total_batches", c.total_batches}});
  }
  if (!a.log.empty()) write_file(a.log, log.dump(2));
  std::cout << "fsm-" << a.encoder << ": " << r.log.episodes << " episodes, best "
            << r.log.best_total << " / lower bound " << r.log.lower_bound_total
            << (r.log.reached_lower_bound ? " (reached)" : "") << "\n";
  return kOk;
}

int run_bench(const BenchArgs& a) {
  ExperimentConfig cfg;
  if (!a.algorithms.empty()) cfg.algorithms = split_list(a.algorithms);
  cfg.rl = a.rl;
  cfg.held_out = a.held_out;
  cfg.train_seed = a.train_seed;
  cfg.validate();

  std::vector<BenchReport> reports;
  if (!a.fixture.empty()) {
    const auto g = fixture(a.fixture);
    if (!g) throw std::invalid_argument("unknown fixture '" + a.fixture + "'");
    const std::vector<DataflowGraph> graphs = {*g};
    reports.push_back(dynbatch::run_bench(a.fixture, graphs, graphs, cfg));
  } else if (!a.graphs.empty()) {
    const auto graphs = load_graphs(a.graphs);
    reports.push_back(dynbatch::run_bench("custom", graphs, graphs, cfg));
  } else {
    for (const Suite& s : default_suites()) {
      if (a.suite == "all" || a.suite == s.name) reports.push_back(run_suite(s, cfg));
    }
    if (reports.empty()) throw std::invalid_argument("unknown suite '" + a.suite + "'");
  }

  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const BenchReport& r : reports) {
    std::cout << bench_report_text(r) << "\n";
    j.push_back(nlohmann::ordered_json::parse(bench_report_json(r, !a.no_timing)));
  }
  if (!a.json.empty()) write_file(a.json, j.dump(2));
  return kOk;
}

int run_plan(const PlanArgs& a) {
  if (a.element_bytes <= 0) throw std::invalid_argument("--element-bytes must be positive");
  const SubgraphIR ir = load_subgraph_file(a.path);
  const BatchSchedule s = schedule_subgraph(ir);
  const auto operands = extract_operands(ir, s);
  const LayoutPlan planned = plan_layout(ir, operands);
  const LayoutPlan label = label_order_plan(ir);
  const CostReport planned_cost =
      cost_report(ir, s, operands, check_ideal(ir, planned, operands), "planned", a.element_bytes);
  const CostReport label_cost =
      cost_report(ir, s, operands, check_ideal(ir, label, operands), "label", a.element_bytes);

  nlohmann::ordered_json j;
  j["subgraph"] = ir.name;
  j["num_batches"] = s.size();
  j["batches"] = nlohmann::ordered_json::array();
  for (const Batch& b : s.batches) {
    nlohmann::ordered_json members = nlohmann::ordered_json::array();
    for (NodeId m : b.members) members.push_back(ir.vars[ir.ops[m].dest].name);
    j["batches"].push_back(std::move(members));
  }
  std::string order_text;
  for (int v : planned.order) {
    j["order"].push_back(ir.vars[v].name);
    j["offsets"][ir.vars[v].name] = planned.offset[v];
    order_text += (order_text.empty() ? "" : " ") + ir.vars[v].name;
  }
  j["copy_flagged"] = planned.copy_flagged;
  j["structural_updates"] = planned.structural_updates;
  j["planned"] = cost_json(planned_cost);
  j["label"] = cost_json(label_cost);
  if (!a.json.empty()) write_file(a.json, j.dump(2));

  std::cout << "order: " << order_text << "\n";
  if (!planned.copy_flagged.empty()) {
    std::cout << "copy-flagged batches:";
    for (int b : planned.copy_flagged) std::cout << " " << b;
    std::cout << "\n";
  }
  std::cout << cost_report_text(planned_cost) << cost_report_text(label_cost);
  return kOk;
}

int run_verify(const VerifyArgs& a) {
  VerifyOptions o;
  o.cases = a.cases;
  o.max_nodes = a.max_nodes;
  o.pq_cases = a.pq_cases;
  o.pq_max_n = a.pq_max_n;
  o.layout_cases = a.layout_cases;
  o.seed = a.seed;
  if (a.mutant == "skip-broadcast") {
    o.alignment.broadcast = false;
  } else if (!a.mutant.empty()) {
    throw std::invalid_argument("unknown mutant '" + a.mutant + "'");
  }
  const auto results = dynbatch::run_verify(o);
  bool ok = true;
  for (const OracleResult& r : results) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << ": " << r.cases << " cases, "
              << r.checks << " checks, " << r.violations << " violations";
    if (!r.passed()) std::cout << " (" << r.first_violation << ")";
    std::cout << "\n";
    ok = ok && r.passed();
  }
  if (!a.json.empty()) write_file(a.json, verify_report_json(results, !a.no_timing));
  return ok ? kOk : kFailed;
}

}  // namespace dynbatch::cli
