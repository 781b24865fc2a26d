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

#include "dynbatch/harness.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "dynbatch/layout.h"
#include "dynbatch/pqtree.h"
#include "json.hpp"

namespace dynbatch {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int draw(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool is_fsm(const std::string& algorithm) { return algorithm.rfind("fsm-", 0) == 0; }

TypeChooser heuristic(const std::string& name) {
  if (name == "depth") return DepthChooser{};
  if (name == "agenda") return AgendaChooser{};
  if (name == "sc") return SufficientConditionChooser{};
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

void record(OracleResult* r, const std::string& what) {
  if (r->violations++ == 0) r->first_violation = what;
}

// Every permutation of 0..n-1 in which each set is consecutive.
std::set<std::vector<int>> brute_force_orders(int n, const std::vector<std::vector<int>>& sets) {
  std::set<std::vector<int>> out;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> pos(n);
  do {
    for (int i = 0; i < n; ++i) pos[perm[i]] = i;
    bool ok = true;
    for (const auto& s : sets) {
      int lo = n;
      int hi = -1;
      for (int v : s) {
        lo = std::min(lo, pos[v]);
        hi = std::max(hi, pos[v]);
      }
      if (hi - lo + 1 != static_cast<int>(s.size())) {
        ok = false;
        break;
      }
    }
    if (ok) out.insert(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

OracleResult ready_start_oracle(const VerifyOptions& o) {
  OracleResult r;
  r.name = "ready_start";
  const auto t0 = Clock::now();
  for (int c = 0; c < o.cases; ++c) {
    std::mt19937_64 rng(o.seed * 1000003 + c);
    const int n = draw(rng, 2, o.max_nodes);
    const DataflowGraph g = random_dag(n, draw(rng, 2, 3), 0.1 + 0.05 * draw(rng, 0, 4), rng());
    ++r.cases;
    const int opt = optimal_schedule(g, 64).size();
    ExecutionState s(g);
    for (TypeId a : s.ready_types()) {
      if (readiness_ratio(s, a) != 1.0) continue;
      ++r.checks;
      const int constrained = optimal_schedule(g, 64, a).size();
      if (constrained != opt) {
        record(&r, g.name() + ": starting with " + g.type_name(a) + " gives " +
                       std::to_string(constrained) + ", optimum " + std::to_string(opt));
      }
    }
  }
  r.wall_seconds = seconds_since(t0);
  return r;
}

// Covers the optimum and lower-bound oracles over the same random graphs.
std::pair<OracleResult, OracleResult> schedule_oracles(const VerifyOptions& o) {
  OracleResult opt_r;
  opt_r.name = "optimum";
  OracleResult lb_r;
  lb_r.name = "lower_bound";
  const auto t0 = Clock::now();
  for (int c = 0; c < o.cases; ++c) {
    std::mt19937_64 rng(o.seed * 7919 + c);
    const int n = draw(rng, 1, std::min(o.max_nodes, 20));
    const DataflowGraph g = random_dag(n, draw(rng, 1, 3), 0.1 + 0.05 * draw(rng, 0, 4), rng());
    ++opt_r.cases;
    ++lb_r.cases;
    const int lb = lower_bound(g);
    const BatchSchedule opt = optimal_schedule(g, 64);
    const int opt_n = validate_schedule(g, opt).num_batches;
    const int bfs = brute_force_optimum(g);
    ++opt_r.checks;
    if (opt_n != bfs) {
      record(&opt_r, g.name() + ": A* " + std::to_string(opt_n) + ", search " + std::to_string(bfs));
    }
    std::vector<std::pair<std::string, int>> counts = {{"optimum", opt_n}};
    for (const char* h : {"depth", "agenda", "sc"}) {
      const int k = validate_schedule(g, run_batching(g, heuristic(h))).num_batches;
      counts.emplace_back(h, k);
      ++opt_r.checks;
      if (k < opt_n) {
        record(&opt_r, g.name() + ": " + h + " " + std::to_string(k) + " beats optimum " +
                           std::to_string(opt_n));
      }
    }
    for (const auto& [name, k] : counts) {
      ++lb_r.checks;
      if (k < lb) {
        record(&lb_r, g.name() + ": " + name + " " + std::to_string(k) + " below lower bound " +
                          std::to_string(lb));
      }
    }
  }
  opt_r.wall_seconds = lb_r.wall_seconds = seconds_since(t0);
  return {opt_r, lb_r};
}

OracleResult pq_oracle(const VerifyOptions& o) {
  OracleResult r;
  r.name = "pq_frontier";
  const auto t0 = Clock::now();
  for (int c = 0; c < o.pq_cases; ++c) {
    std::mt19937_64 rng(o.seed * 104729 + c);
    const int n = draw(rng, 2, o.pq_max_n);
    std::vector<int> universe(n);
    std::iota(universe.begin(), universe.end(), 0);
    PQTree tree(universe);
    std::vector<std::vector<int>> applied;
    ++r.cases;
    const int m = draw(rng, 1, 5);
    for (int k = 0; k < m; ++k) {
      std::vector<int> set = universe;
      std::shuffle(set.begin(), set.end(), rng);
      set.resize(draw(rng, 2, n));
      const std::string before = tree.to_string();
      const bool ok = tree.reduce(set).ok;
      auto with = applied;
      with.push_back(set);
      const auto expected = brute_force_orders(n, with);
      ++r.checks;
      if (!ok) {
        if (!expected.empty()) record(&r, "case " + std::to_string(c) + ": feasible reduction failed");
        if (tree.to_string() != before) {
          record(&r, "case " + std::to_string(c) + ": failed reduction changed the tree");
        }
        continue;
      }
      applied = std::move(with);
      const auto frontiers = tree.all_frontiers();
      const std::set<std::vector<int>> got(frontiers.begin(), frontiers.end());
      if (got != expected || frontiers.size() != got.size()) {
        record(&r, "case " + std::to_string(c) + ": " + std::to_string(got.size()) +
                       " frontiers, expected " + std::to_string(expected.size()));
      }
    }
  }
  r.wall_seconds = seconds_since(t0);
  return r;
}

OracleResult alignment_oracle(const VerifyOptions& o) {
  OracleResult r;
  r.name = "alignment";
  const auto t0 = Clock::now();
  for (int c = 0; c < o.layout_cases; ++c) {
    std::mt19937_64 rng(o.seed * 15485863 + c);
    const SubgraphIR ir = random_subgraph(draw(rng, 3, 12), draw(rng, 2, 5), rng());
    const BatchSchedule s = schedule_subgraph(ir);
    const auto operands = extract_operands(ir, s);
    const LayoutPlan plan = plan_layout(ir, operands, o.alignment);
    const auto checks = check_ideal(ir, plan, operands);
    ++r.cases;
    ++r.checks;
    if (plan.structural_updates > plan.universe_size) {
      record(&r, ir.name + ": " + std::to_string(plan.structural_updates) +
                     " structural updates exceed universe " + std::to_string(plan.universe_size));
    }
    for (const BatchCheck& bc : checks) {
      ++r.checks;
      const bool flagged = std::binary_search(plan.copy_flagged.begin(), plan.copy_flagged.end(),
                                              bc.batch);
      if (!flagged && !bc.zero_copy) {
        record(&r, ir.name + ": surviving batch " + std::to_string(bc.batch) + " needs copies");
      }
    }
  }
  // Planted systems have a zero-copy order by construction, so nothing may
  // be dropped.
  for (int c = 0; c < o.layout_cases; ++c) {
    std::mt19937_64 rng(o.seed * 32452843 + c);
    const auto operands = scaling_instance(draw(rng, 2, 6), draw(rng, 2, 4), rng());
    SubgraphIR ir;
    ir.name = "planted" + std::to_string(c);
    int vars = 0;
    for (const BatchOperands& b : operands) {
      for (int v : b.result) vars = std::max(vars, v + 1);
      for (const auto& src : b.sources) {
        for (int v : src) vars = std::max(vars, v + 1);
      }
    }
    for (int v = 0; v < vars; ++v) ir.vars.push_back(Variable{"v" + std::to_string(v), 1});
    const LayoutPlan plan = plan_layout(ir, operands, o.alignment);
    ++r.cases;
    ++r.checks;
    if (!plan.copy_flagged.empty()) {
      record(&r, ir.name + ": feasible system lost " + std::to_string(plan.copy_flagged.size()) +
                     " batches");
    }
    for (const BatchCheck& bc : check_ideal(ir, plan, operands)) {
      ++r.checks;
      if (!bc.zero_copy) record(&r, ir.name + ": batch " + std::to_string(bc.batch) + " needs copies");
    }
  }
  r.wall_seconds = seconds_since(t0);
  return r;
}

}  // namespace

const std::vector<std::string>& all_algorithms() {
  static const std::vector<std::string> kAll = {"depth",    "agenda",  "sc",
                                                "fsm-base", "fsm-max", "fsm-sort"};
  return kAll;
}

Suite default_suite(Family family) {
  Suite s;
  s.name = std::string(family_name(family));
  s.params.family = family;
  s.seed = 42;
  switch (family) {
    case Family::kTree:
    case Family::kTree2Type:
      s.params.count = 8;
      s.params.batch = 4;
      s.params.min_size = 4;
      s.params.max_size = 12;
      break;
    case Family::kLattice:
      s.params.count = 8;
      s.params.batch = 1;
      s.params.min_size = 20;
      s.params.max_size = 40;
      s.params.word_density = 1.0;
      break;
    case Family::kChain:
    case Family::kBichain:
      s.params.count = 4;
      s.params.batch = 4;
      s.params.min_size = 8;
      s.params.max_size = 24;
      break;
  }
  return s;
}

std::vector<Suite> default_suites() {
  return {default_suite(Family::kTree), default_suite(Family::kTree2Type),
          default_suite(Family::kLattice), default_suite(Family::kChain)};
}

RLConfig default_rl() {
  RLConfig cfg;
  cfg.seed = 1;
  return cfg;
}

void ExperimentConfig::validate() const {
  if (algorithms.empty()) throw std::invalid_argument("no algorithms selected");
  for (const std::string& a : algorithms) {
    if (std::find(all_algorithms().begin(), all_algorithms().end(), a) == all_algorithms().end()) {
      throw std::invalid_argument("unknown algorithm '" + a + "'");
    }
  }
  rl.validate();
}

BenchReport run_bench(const std::string& suite, std::span<const DataflowGraph> eval_graphs,
                      std::span<const DataflowGraph> train_graphs, const ExperimentConfig& cfg) {
  cfg.validate();
  BenchReport r;
  r.suite = suite;
  r.algorithms = cfg.algorithms;

  std::map<std::string, FsmPolicy> policies;
  for (const std::string& a : cfg.algorithms) {
    if (!is_fsm(a)) continue;
    const Encoder e = *parse_encoder(a.substr(4));
    TrainResult t = train(train_graphs, e, cfg.rl, suite);
    r.training.push_back(TrainingSummary{a, t.log.episodes, t.log.reached_lower_bound,
                                         t.log.best_total, t.log.lower_bound_total,
                                         t.policy.table.size(), t.log.wall_seconds});
    policies.emplace(a, std::move(t.policy));
  }

  for (const DataflowGraph& g : eval_graphs) {
    GraphRow row;
    row.graph = g.name();
    row.nodes = g.num_nodes();
    row.lower_bound = lower_bound(g);
    int best = -1;
    for (const std::string& a : cfg.algorithms) {
      const BatchSchedule s = is_fsm(a) ? run_batching(g, policies.at(a).chooser())
                                        : run_batching(g, heuristic(a));
      const int k = validate_schedule(g, s).num_batches;
      row.batches[a] = k;
      r.totals[a] += k;
      best = best < 0 ? k : std::min(best, k);
      if (is_fsm(a) && k > row.lower_bound) {
        r.flags.push_back(a + " above lower bound on " + g.name() + " (" + std::to_string(k) +
                          " > " + std::to_string(row.lower_bound) + ")");
      }
    }
    r.lower_bound_total += row.lower_bound;
    r.best_total += best;
    r.rows.push_back(std::move(row));
  }
  return r;
}

BenchReport run_suite(const Suite& suite, const ExperimentConfig& cfg) {
  const auto eval = generate(suite.params, suite.seed);
  if (!cfg.held_out) return run_bench(suite.name, eval, eval, cfg);
  const auto train_set = generate(suite.params, cfg.train_seed);
  return run_bench(suite.name, eval, train_set, cfg);
}

std::string bench_report_json(const BenchReport& r, bool with_timing) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["algorithms"] = r.algorithms;
  j["graphs"] = nlohmann::ordered_json::array();
  for (const GraphRow& row : r.rows) {
    nlohmann::ordered_json g;
    g["graph"] = row.graph;
    g["nodes"] = row.nodes;
    g["lower_bound"] = row.lower_bound;
    for (const std::string& a : r.algorithms) g["batches"][a] = row.batches.at(a);
    j["graphs"].push_back(std::move(g));
  }
  j["lower_bound_total"] = r.lower_bound_total;
  j["best_total"] = r.best_total;
  for (const std::string& a : r.algorithms) {
    j["totals"][a] = r.totals.at(a);
    j["ratio_to_best"][a] =
        r.best_total > 0 ? static_cast<double>(r.totals.at(a)) / r.best_total : 1.0;
  }
  j["training"] = nlohmann::ordered_json::array();
  for (const TrainingSummary& t : r.training) {
    nlohmann::ordered_json e;
    e["algorithm"] = t.algorithm;
    e["episodes"] = t.episodes;
    e["reached_lower_bound"] = t.reached_lower_bound;
    e["best_total"] = t.best_total;
    e["lower_bound_total"] = t.lower_bound_total;
    e["states"] = t.states;
    if (with_timing) e["wall_seconds"] = t.wall_seconds;
    j["training"].push_back(std::move(e));
  }
  j["flags"] = r.flags;
  return j.dump(2);
}

std::string bench_report_text(const BenchReport& r) {
  char buf[64];
  std::string out = "suite " + r.suite + "\n";
  std::snprintf(buf, sizeof buf, "%-24s %6s %6s", "graph", "nodes", "lb");
  out += buf;
  for (const std::string& a : r.algorithms) {
    std::snprintf(buf, sizeof buf, " %9s", a.c_str());
    out += buf;
  }
  out += "\n";
  for (const GraphRow& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-24s %6d %6d", row.graph.c_str(), row.nodes, row.lower_bound);
    out += buf;
    for (const std::string& a : r.algorithms) {
      std::snprintf(buf, sizeof buf, " %9d", row.batches.at(a));
      out += buf;
    }
    out += "\n";
  }
  std::snprintf(buf, sizeof buf, "%-24s %6s %6lld", "total", "", r.lower_bound_total);
  out += buf;
  for (const std::string& a : r.algorithms) {
    std::snprintf(buf, sizeof buf, " %9lld", r.totals.at(a));
    out += buf;
  }
  out += "\n";
  for (const TrainingSummary& t : r.training) {
    std::snprintf(buf, sizeof buf, "%s: %d episodes, best %d / lb %d, %.2fs\n",
                  t.algorithm.c_str(), t.episodes, t.best_total, t.lower_bound_total,
                  t.wall_seconds);
    out += buf;
  }
  for (const std::string& f : r.flags) out += "flag: " + f + "\n";
  return out;
}

SubgraphIR random_subgraph(int ops, int inputs, uint64_t seed) {
  if (ops < 1 || inputs < 1) throw std::invalid_argument("random_subgraph: bad parameters");
  static const char* kKinds[] = {"add", "sub", "mul", "tanh", "sigmoid"};
  std::mt19937_64 rng(seed);
  std::string text = "subgraph rand" + std::to_string(seed) + "\ninput ";
  int vars = 0;
  std::vector<std::string> names;
  for (int i = 0; i < inputs; ++i) {
    names.push_back("in" + std::to_string(i));
    text += (i ? ", " : "") + names.back();
  }
  text += "\n";
  for (int k = 0; k < ops; ++k) {
    const std::string kind = kKinds[draw(rng, 0, 4)];
    std::string line = "v" + std::to_string(vars++) + " = " + kind + "(";
    const int n = kind == "tanh" || kind == "sigmoid" ? 1 : 2;
    for (int a = 0; a < n; ++a) {
      line += (a ? ", " : "") + names[draw(rng, 0, static_cast<int>(names.size()) - 1)];
    }
    text += line + ")\n";
    names.push_back("v" + std::to_string(vars - 1));
  }
  text += "output " + names.back() + "\n";
  return parse_subgraph(text);
}

std::vector<BatchOperands> scaling_instance(int batches, int width, uint64_t seed) {
  if (batches < 1 || width < 2) throw std::invalid_argument("scaling_instance: bad parameters");
  std::mt19937_64 rng(seed);
  const int vars = batches * width;
  std::vector<int> hidden(vars);  // memory position -> variable
  std::iota(hidden.begin(), hidden.end(), 0);
  std::shuffle(hidden.begin(), hidden.end(), rng);
  std::vector<BatchOperands> out;
  for (int k = 0; k < batches; ++k) {
    BatchOperands b;
    b.id = k;
    std::vector<int> shuffle(width);
    std::iota(shuffle.begin(), shuffle.end(), 0);
    std::shuffle(shuffle.begin(), shuffle.end(), rng);
    auto window = [&](int start) {
      std::vector<int> w;
      for (int i : shuffle) w.push_back(hidden[start + i]);
      return w;
    };
    // Results tile the order so each variable is produced once.
    b.result = window(k * width);
    for (int j = 0; j < 2; ++j) b.sources.push_back(window(draw(rng, 0, vars - width)));
    out.push_back(std::move(b));
  }
  return out;
}

int brute_force_optimum(const DataflowGraph& g) {
  const int n = g.num_nodes();
  if (n > 20) throw std::invalid_argument("brute_force_optimum: at most 20 nodes");
  if (n == 0) return 0;
  std::vector<uint32_t> need(n, 0);
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId u : g.inputs(v)) need[v] |= 1u << u;
  }
  const uint32_t all = (1u << n) - 1;
  std::unordered_map<uint32_t, int> dist = {{0u, 0}};
  std::vector<uint32_t> layer = {0u};
  for (int d = 0;; ++d) {
    std::vector<uint32_t> next;
    for (uint32_t s : layer) {
      if (s == all) return d;
      std::vector<uint32_t> by_type(g.num_types(), 0);
      for (NodeId v = 0; v < n; ++v) {
        if (!(s >> v & 1u) && (need[v] & ~s) == 0) by_type[g.type_of(v)] |= 1u << v;
      }
      for (uint32_t add : by_type) {
        if (add && dist.emplace(s | add, d + 1).second) next.push_back(s | add);
      }
    }
    layer = std::move(next);
  }
}

std::vector<OracleResult> run_verify(const VerifyOptions& o) {
  if (o.cases < 0 || o.pq_cases < 0 || o.layout_cases < 0 || o.max_nodes < 2 ||
      o.max_nodes > 64 || o.pq_max_n < 2 || o.pq_max_n > 9) {
    throw std::invalid_argument("verify: bad options");
  }
  std::vector<OracleResult> out;
  out.push_back(ready_start_oracle(o));
  auto [opt, lb] = schedule_oracles(o);
  out.push_back(std::move(opt));
  out.push_back(std::move(lb));
  out.push_back(pq_oracle(o));
  out.push_back(alignment_oracle(o));
  return out;
}

std::string verify_report_json(const std::vector<OracleResult>& results, bool with_timing) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const OracleResult& r : results) {
    nlohmann::ordered_json e;
    e["oracle"] = r.name;
    e["passed"] = r.passed();
    e["cases"] = r.cases;
    e["checks"] = r.checks;
    e["violations"] = r.violations;
    if (!r.passed()) e["first_violation"] = r.first_violation;
    if (with_timing) e["wall_seconds"] = r.wall_seconds;
    j.push_back(std::move(e));
  }
  return j.dump(2);
}

}  // namespace dynbatch
