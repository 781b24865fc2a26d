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

#include "dynbatch/batching.h"

#include <algorithm>
#include <bit>
#include <queue>
#include <tuple>
#include <unordered_map>

#include "json.hpp"

namespace dynbatch {
namespace {

using json = nlohmann::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_ready(const ExecutionState& state, TypeId t, const std::string& who) {
  if (t < 0 || t >= state.graph().num_types() || state.ready_count(t) == 0) {
    throw ScheduleError(who + " chose type " + std::to_string(t) + " with no ready node");
  }
}

// Sum over types of the longest same-type chain among nodes outside `done`.
int residual_bound(const DataflowGraph& g, uint64_t done, std::vector<int>& chain,
                   std::vector<int>& best) {
  std::fill(best.begin(), best.end(), 0);
  int total = 0;
  for (NodeId v : g.topo_order()) {
    if (done >> v & 1) continue;
    int c = 0;
    for (NodeId u : g.typed_preds(v)) {
      if (!(done >> u & 1)) c = std::max(c, chain[u]);
    }
    chain[v] = c + 1;
    const TypeId t = g.type_of(v);
    if (chain[v] > best[t]) {
      total += chain[v] - best[t];
      best[t] = chain[v];
    }
  }
  return total;
}

}  // namespace

std::string chooser_name(const TypeChooser& chooser) {
  return std::visit(Overloaded{
                        [](const DepthChooser&) -> std::string { return "depth"; },
                        [](const AgendaChooser&) -> std::string { return "agenda"; },
                        [](const SufficientConditionChooser&) -> std::string { return "sc"; },
                        [](const FixedSequenceChooser&) -> std::string { return "fixed"; },
                        [](const CustomChooser& c) { return c.name; },
                    },
                    chooser);
}

std::vector<Batch> depth_groups(const DataflowGraph& g) {
  std::vector<Batch> groups;
  std::vector<NodeId> order(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) order[v] = v;
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return std::tuple(g.depth(a), g.type_of(a), a) < std::tuple(g.depth(b), g.type_of(b), b);
  });
  for (NodeId v : order) {
    if (groups.empty() || g.type_of(groups.back().members.front()) != g.type_of(v) ||
        g.depth(groups.back().members.front()) != g.depth(v)) {
      groups.push_back(Batch{g.type_of(v), {}});
    }
    groups.back().members.push_back(v);
  }
  return groups;
}

TypeId choose_agenda(const ExecutionState& state) {
  const DataflowGraph& g = state.graph();
  TypeId best = -1;
  for (TypeId t : state.ready_types()) {
    if (best < 0 || g.mean_depth(t) < g.mean_depth(best)) best = t;
  }
  return best;
}

double readiness_ratio(const ExecutionState& state, TypeId a) {
  const int ready = state.ready_count(a);
  const int frontier = state.typed_frontier_count(a);
  if (ready == 0 || frontier == 0) {
    throw ScheduleError("readiness ratio needs a ready node of type " + std::to_string(a));
  }
  return static_cast<double>(ready) / static_cast<double>(frontier);
}

TypeId choose_sufficient_condition(const ExecutionState& state) {
  TypeId best = -1;
  // Compare ready/frontier fractions exactly by cross-multiplication.
  long best_num = 0, best_den = 1;
  for (TypeId t : state.ready_types()) {
    const long num = state.ready_count(t);
    const long den = state.typed_frontier_count(t);
    if (best < 0 || num * best_den > best_num * den ||
        (num * best_den == best_num * den && num > best_num)) {
      best = t;
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

BatchSchedule run_batching(const DataflowGraph& g, const TypeChooser& chooser) {
  BatchSchedule s;
  s.graph_name = g.name();
  if (std::holds_alternative<DepthChooser>(chooser)) {
    ExecutionState state(g);
    for (Batch& b : depth_groups(g)) {
      state.execute(b.members);
      s.batches.push_back(std::move(b));
    }
    return s;
  }
  ExecutionState state(g);
  size_t step = 0;
  while (!state.done()) {
    const TypeId t = std::visit(
        Overloaded{
            [&](const DepthChooser&) -> TypeId { return -1; },
            [&](const AgendaChooser&) { return choose_agenda(state); },
            [&](const SufficientConditionChooser&) { return choose_sufficient_condition(state); },
            [&](const FixedSequenceChooser& f) -> TypeId {
              if (step >= f.sequence.size()) {
                throw ScheduleError("fixed sequence exhausted before the graph");
              }
              return f.sequence[step];
            },
            [&](const CustomChooser& c) { return c.choose(state); },
        },
        chooser);
    require_ready(state, t, chooser_name(chooser));
    s.batches.push_back(Batch{t, state.issue(t)});
    ++step;
  }
  return s;
}

BatchSchedule optimal_schedule(const DataflowGraph& g, int limit, std::optional<TypeId> first) {
  const int n = g.num_nodes();
  if (n > limit || n > 64) {
    throw ScheduleError("optimal_schedule budget exceeded: " + std::to_string(n) +
                        " nodes > limit " + std::to_string(std::min(limit, 64)));
  }
  BatchSchedule s;
  s.graph_name = g.name();
  if (n == 0) return s;

  std::vector<uint64_t> need(n, 0);
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId u : g.inputs(v)) need[v] |= uint64_t{1} << u;
  }
  const uint64_t full = n == 64 ? ~uint64_t{0} : (uint64_t{1} << n) - 1;
  auto ready_of = [&](uint64_t done, TypeId t) {
    uint64_t r = 0;
    for (NodeId v : g.nodes_of_type(t)) {
      if (!(done >> v & 1) && (need[v] & ~done) == 0) r |= uint64_t{1} << v;
    }
    return r;
  };

  std::vector<int> chain(n), best(g.num_types());
  struct Parent {
    uint64_t prev;
    TypeId type;
    int cost;
  };
  std::unordered_map<uint64_t, Parent> seen;
  using Entry = std::tuple<int, int, uint64_t>;  // f, -g, state
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  if (first) {
    const uint64_t r = ready_of(0, *first);
    if (r == 0) throw ScheduleError("first type has no ready node");
    seen[r] = Parent{0, *first, 1};
    open.emplace(1 + residual_bound(g, r, chain, best), -1, r);
  } else {
    seen[0] = Parent{0, -1, 0};
    open.emplace(residual_bound(g, 0, chain, best), 0, 0);
  }
  uint64_t goal = 0;
  bool found = false;
  while (!open.empty()) {
    auto [f, neg_cost, state] = open.top();
    open.pop();
    const int cost = -neg_cost;
    if (seen.at(state).cost != cost) continue;
    if (state == full) {
      goal = state;
      found = true;
      break;
    }
    for (TypeId t = 0; t < g.num_types(); ++t) {
      const uint64_t r = ready_of(state, t);
      if (r == 0) continue;
      const uint64_t next = state | r;
      auto it = seen.find(next);
      if (it != seen.end() && it->second.cost <= cost + 1) continue;
      seen[next] = Parent{state, t, cost + 1};
      open.emplace(cost + 1 + residual_bound(g, next, chain, best), -(cost + 1), next);
    }
  }
  if (!found) throw ScheduleError("optimal_schedule found no complete schedule");

  for (uint64_t cur = goal;;) {
    const Parent& p = seen.at(cur);
    Batch b{p.type, {}};
    for (uint64_t diff = cur & ~p.prev; diff; diff &= diff - 1) {
      b.members.push_back(static_cast<NodeId>(std::countr_zero(diff)));
    }
    s.batches.push_back(std::move(b));
    if (p.cost == 1) break;
    cur = p.prev;
  }
  std::reverse(s.batches.begin(), s.batches.end());
  return s;
}

CostSummary validate_schedule(const DataflowGraph& g, const BatchSchedule& s) {
  CostSummary out;
  out.per_type_batches.assign(g.num_types(), 0);
  ExecutionState state(g);
  for (size_t i = 0; i < s.batches.size(); ++i) {
    const Batch& b = s.batches[i];
    const std::string where = "batch " + std::to_string(i) + ": ";
    if (b.members.empty()) throw ScheduleError(where + "empty batch");
    if (b.type < 0 || b.type >= g.num_types()) throw ScheduleError(where + "unknown type");
    for (NodeId v : b.members) {
      if (v < 0 || v >= g.num_nodes()) {
        throw ScheduleError(where + "node " + std::to_string(v) + " does not exist");
      }
      if (g.type_of(v) != b.type) {
        throw ScheduleError(where + "mixed-type batch at node " + std::to_string(v));
      }
      if (state.executed(v)) {
        throw ScheduleError(where + "node " + std::to_string(v) + " duplicated");
      }
      for (NodeId u : g.inputs(v)) {
        if (!state.executed(u)) {
          throw ScheduleError(where + "node " + std::to_string(v) +
                              " issued before its input " + std::to_string(u));
        }
      }
    }
    try {
      state.execute(b.members);
    } catch (const GraphError& e) {
      throw ScheduleError(where + e.what());
    }
    ++out.num_batches;
    ++out.per_type_batches[b.type];
  }
  if (!state.done()) {
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (!state.executed(v)) {
        throw ScheduleError("node " + std::to_string(v) + " missing from the schedule");
      }
    }
  }
  return out;
}

std::string schedule_to_json(const DataflowGraph& g, const BatchSchedule& s) {
  json batches = json::array();
  for (const Batch& b : s.batches) {
    batches.push_back({{"type", g.type_name(b.type)}, {"members", b.members}});
  }
  return json{{"batches", std::move(batches)}}.dump();
}

BatchSchedule schedule_from_json(const DataflowGraph& g, std::string_view text) {
  BatchSchedule s;
  s.graph_name = g.name();
  try {
    const json doc = json::parse(text);
    for (const auto& b : doc.at("batches")) {
      const auto name = b.at("type").get<std::string>();
      const TypeId t = g.find_type(name);
      if (t < 0) throw ScheduleError("unknown type " + name);
      s.batches.push_back(Batch{t, b.at("members").get<std::vector<NodeId>>()});
    }
  } catch (const json::exception& e) {
    throw ScheduleError(std::string("malformed schedule JSON: ") + e.what());
  }
  return s;
}

}  // namespace dynbatch
