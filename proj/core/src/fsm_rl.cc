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

#include "dynbatch/fsm_rl.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dynbatch {
namespace {

using json = nlohmann::json;
constexpr int kPolicyVersion = 1;

struct Step {
  std::string state;
  std::string action;
  double reward;
};

// Greedy action during training: unseen pairs count as 0, which is above
// every reachable value since rewards are negative.
TypeId greedy_train(const QTable& q, const std::string& key, const ExecutionState& state) {
  const DataflowGraph& g = state.graph();
  TypeId best = -1;
  double best_q = 0.0;
  for (TypeId t : state.ready_types()) {
    const double v = q.get(key, g.type_name(t)).value_or(0.0);
    if (best < 0 || v > best_q) {
      best = t;
      best_q = v;
    }
  }
  return best;
}

double max_q(const QTable& q, const std::string& key, const std::vector<std::string>& actions) {
  double best = -INFINITY;
  for (const auto& a : actions) best = std::max(best, q.get(key, a).value_or(0.0));
  return best;
}

}  // namespace

std::string_view encoder_name(Encoder e) {
  switch (e) {
    case Encoder::kBase: return "base";
    case Encoder::kMax: return "max";
    case Encoder::kSort: return "sort";
  }
  return "?";
}

std::optional<Encoder> parse_encoder(std::string_view name) {
  for (Encoder e : {Encoder::kBase, Encoder::kMax, Encoder::kSort}) {
    if (encoder_name(e) == name) return e;
  }
  return std::nullopt;
}

std::string encode(const ExecutionState& state, Encoder e) {
  const DataflowGraph& g = state.graph();
  std::vector<TypeId> types = state.ready_types();
  auto join = [&](const std::vector<TypeId>& ts) {
    std::string out;
    for (size_t i = 0; i < ts.size(); ++i) {
      if (i) out += ',';
      out += g.type_name(ts[i]);
    }
    return out;
  };
  auto by_count = [&](TypeId a, TypeId b) {
    const int ca = state.ready_count(a), cb = state.ready_count(b);
    return ca != cb ? ca > cb : a < b;
  };
  switch (e) {
    case Encoder::kBase:
      return "{" + join(types) + "}";
    case Encoder::kMax: {
      std::string key = "{" + join(types) + "}";
      if (!types.empty()) key += "|" + g.type_name(*std::min_element(types.begin(), types.end(), by_count));
      return key;
    }
    case Encoder::kSort:
      std::stable_sort(types.begin(), types.end(), by_count);
      return "(" + join(types) + ")";
  }
  return {};
}

void RLConfig::validate() const {
  if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive");
  if (!(learning_rate > 0 && learning_rate <= 1)) {
    throw std::invalid_argument("learning rate must be in (0, 1]");
  }
  if (epsilon < 0 || epsilon > 1 || epsilon_floor < 0 || epsilon_floor > 1) {
    throw std::invalid_argument("epsilon values must be in [0, 1]");
  }
  if (epsilon_decay <= 0 || epsilon_decay > 1) {
    throw std::invalid_argument("epsilon decay must be in (0, 1]");
  }
  if (decay_every < 1) throw std::invalid_argument("decay interval must be >= 1");
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (gamma < 0 || gamma > 1) throw std::invalid_argument("gamma must be in [0, 1]");
  if (max_episodes < 1) throw std::invalid_argument("max_episodes must be >= 1");
  if (check_every < 1 || check_every > max_episodes) {
    throw std::invalid_argument("check_every must be in [1, max_episodes]");
  }
}

double reward(const ExecutionState& state, TypeId a, const RLConfig& cfg) {
  return -1.0 + cfg.alpha * readiness_ratio(state, a);
}

std::optional<double> QTable::get(const std::string& state, const std::string& action) const {
  auto row = rows_.find(state);
  if (row == rows_.end()) return std::nullopt;
  auto it = row->second.find(action);
  if (it == row->second.end()) return std::nullopt;
  return it->second;
}

void QTable::set(const std::string& state, const std::string& action, double q) {
  rows_[state][action] = q;
}

int QTable::size() const {
  int n = 0;
  for (const auto& [_, row] : rows_) n += static_cast<int>(row.size());
  return n;
}

TypeId FsmPolicy::act(const ExecutionState& state) const {
  const std::vector<TypeId> ready = state.ready_types();
  if (ready.size() == 1) return ready.front();
  const std::string key = encode(state, encoder);
  const DataflowGraph& g = state.graph();
  TypeId best = -1;
  double best_q = 0.0;
  for (TypeId t : ready) {
    auto q = table.get(key, g.type_name(t));
    if (q && (best < 0 || *q > best_q)) {
      best = t;
      best_q = *q;
    }
  }
  return best >= 0 ? best : choose_sufficient_condition(state);
}

TypeChooser FsmPolicy::chooser() const {
  return CustomChooser{"fsm-" + std::string(encoder_name(encoder)),
                       [this](const ExecutionState& s) { return act(s); }};
}

int evaluate(const FsmPolicy& policy, std::span<const DataflowGraph> graphs) {
  int total = 0;
  const TypeChooser c = policy.chooser();
  for (const auto& g : graphs) {
    BatchSchedule s = run_batching(g, c);
    total += validate_schedule(g, s).num_batches;
  }
  return total;
}

TrainResult train(std::span<const DataflowGraph> graphs, Encoder e, const RLConfig& cfg,
                  std::string family) {
  cfg.validate();
  if (graphs.empty()) throw std::invalid_argument("training needs at least one graph");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  FsmPolicy& policy = result.policy;
  policy.encoder = e;
  policy.alpha = cfg.alpha;
  policy.seed = cfg.seed;
  policy.family = std::move(family);
  TrainingLog& log = result.log;
  for (const auto& g : graphs) log.lower_bound_total += lower_bound(g);

  QTable q;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Step> trace;
  std::vector<std::vector<std::string>> options;  // ready type names per step
  bool have_best = false;

  for (int ep = 0; ep < cfg.max_episodes; ++ep) {
    const DataflowGraph& g = graphs[ep % graphs.size()];
    const double eps = std::max(
        cfg.epsilon_floor, cfg.epsilon * std::pow(cfg.epsilon_decay, ep / cfg.decay_every));
    trace.clear();
    options.clear();
    ExecutionState state(g);
    while (!state.done()) {
      const std::string key = encode(state, e);
      const std::vector<TypeId> ready = state.ready_types();
      TypeId a;
      if (coin(rng) < eps) {
        a = ready[std::uniform_int_distribution<size_t>(0, ready.size() - 1)(rng)];
      } else {
        a = greedy_train(q, key, state);
      }
      std::vector<std::string> names;
      for (TypeId t : ready) names.push_back(g.type_name(t));
      options.push_back(std::move(names));
      trace.push_back(Step{key, g.type_name(a), reward(state, a, cfg)});
      state.issue(a);
    }

    // n-step backups; the bootstrap term vanishes past the episode end.
    const int len = static_cast<int>(trace.size());
    for (int t = 0; t < len; ++t) {
      double target = 0.0, discount = 1.0;
      for (int i = 0; i < cfg.n_steps && t + i < len; ++i) {
        target += discount * trace[t + i].reward;
        discount *= cfg.gamma;
      }
      if (t + cfg.n_steps < len) {
        target += discount * max_q(q, trace[t + cfg.n_steps].state, options[t + cfg.n_steps]);
      }
      const double old = q.get(trace[t].state, trace[t].action).value_or(0.0);
      q.set(trace[t].state, trace[t].action, old + cfg.learning_rate * (target - old));
    }

    log.episodes = ep + 1;
    if ((ep + 1) % cfg.check_every == 0 || ep + 1 == cfg.max_episodes) {
      FsmPolicy candidate = policy;
      candidate.table = q;
      const int total = evaluate(candidate, graphs);
      log.checkpoints.push_back(Checkpoint{ep + 1, total});
      if (!have_best || total < log.best_total) {
        have_best = true;
        log.best_total = total;
        log.best_episode = ep + 1;
        policy.table = q;
      }
      if (total == log.lower_bound_total) {
        log.reached_lower_bound = true;
        break;
      }
    }
  }
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string policy_to_json(const FsmPolicy& p) {
  json entries = json::array();
  for (const auto& [state, row] : p.table.rows()) {
    for (const auto& [action, q] : row) {
      entries.push_back({{"state", state}, {"action", action}, {"q", q}});
    }
  }
  json doc = {{"version", kPolicyVersion},
              {"encoder", std::string(encoder_name(p.encoder))},
              {"alpha", p.alpha},
              {"seed", p.seed},
              {"family", p.family},
              {"entries", std::move(entries)}};
  return doc.dump(1);
}

FsmPolicy policy_from_json(std::string_view text) {
  FsmPolicy p;
  try {
    const json doc = json::parse(text);
    const int version = doc.at("version").get<int>();
    if (version != kPolicyVersion) {
      throw PolicyError("unsupported policy version " + std::to_string(version));
    }
    const auto enc = parse_encoder(doc.at("encoder").get<std::string>());
    if (!enc) throw PolicyError("unknown encoder in policy file");
    p.encoder = *enc;
    p.alpha = doc.at("alpha").get<double>();
    p.seed = doc.value("seed", uint64_t{0});
    p.family = doc.value("family", std::string{});
    for (const auto& entry : doc.at("entries")) {
      p.table.set(entry.at("state").get<std::string>(), entry.at("action").get<std::string>(),
                  entry.at("q").get<double>());
    }
  } catch (const json::exception& e) {
    throw PolicyError(std::string("malformed policy file: ") + e.what());
  }
  return p;
}

void save_policy(const FsmPolicy& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PolicyError("cannot write " + path);
  out << policy_to_json(p) << '\n';
}

FsmPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PolicyError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return policy_from_json(ss.str());
}

}  // namespace dynbatch
