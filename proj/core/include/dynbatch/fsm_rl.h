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

#ifndef DYNBATCH_FSM_RL_H_
#define DYNBATCH_FSM_RL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynbatch/batching.h"
#include "dynbatch/graph.h"

namespace dynbatch {

// Frontier state encoders. All keys are built from type names:
//   base  "{I,O}"    ready types in type-id order
//   max   "{I,O}|O"  base plus the type with the most ready nodes
//   sort  "(O,I)"    ready types by descending ready count
// Count ties resolve to the lower type id.
enum class Encoder { kBase, kMax, kSort };

std::string_view encoder_name(Encoder e);
std::optional<Encoder> parse_encoder(std::string_view name);

std::string encode(const ExecutionState& state, Encoder e);

struct RLConfig {
  double alpha = 0.5;  // weight of the readiness term in the reward
  double learning_rate = 0.1;
  double epsilon = 0.5;
  double epsilon_decay = 0.95;  // applied every decay_every episodes
  int decay_every = 10;
  double epsilon_floor = 0.02;
  int n_steps = 4;
  double gamma = 1.0;
  int max_episodes = 1000;
  int check_every = 50;
  uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
};

// -1 + alpha * readiness_ratio(state, a).
double reward(const ExecutionState& state, TypeId a, const RLConfig& cfg);

// (encoded state, action type name) -> value.
class QTable {
 public:
  std::optional<double> get(const std::string& state, const std::string& action) const;
  void set(const std::string& state, const std::string& action, double q);
  int size() const;
  const std::map<std::string, std::map<std::string, double>>& rows() const { return rows_; }

  bool operator==(const QTable&) const = default;

 private:
  std::map<std::string, std::map<std::string, double>> rows_;
};

struct FsmPolicy {
  Encoder encoder = Encoder::kSort;
  double alpha = 0.5;
  uint64_t seed = 0;
  std::string family;
  QTable table;

  // Greedy over ready types that have a table entry; Q ties go to the
  // lower type id. Falls back to the sufficient-condition chooser.
  TypeId act(const ExecutionState& state) const;
  // Chooser wrapper for run_batching. The policy must outlive it.
  TypeChooser chooser() const;
};

inline TypeId policy_act(const FsmPolicy& p, const ExecutionState& s) { return p.act(s); }

struct Checkpoint {
  int episode = 0;  // episodes completed
  int total_batches = 0;
};

struct TrainingLog {
  std::vector<Checkpoint> checkpoints;
  int lower_bound_total = 0;
  int episodes = 0;
  bool reached_lower_bound = false;
  int best_total = 0;
  int best_episode = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  FsmPolicy policy;  // table snapshot from the best checkpoint
  TrainingLog log;
};

// Tabular n-step Q-learning over the batching loop. Episodes cycle over the
// graphs; every check_every episodes the greedy policy is evaluated on all
// of them and training stops once the total equals the summed lower bound.
TrainResult train(std::span<const DataflowGraph> graphs, Encoder e, const RLConfig& cfg,
                  std::string family = {});

// Sum of greedy batch counts over the graphs (schedules are validated).
int evaluate(const FsmPolicy& policy, std::span<const DataflowGraph> graphs);

// {"version":1,"encoder":"sort","alpha":0.5,"entries":[...]}
std::string policy_to_json(const FsmPolicy& p);
FsmPolicy policy_from_json(std::string_view text);
void save_policy(const FsmPolicy& p, const std::string& path);
FsmPolicy load_policy(const std::string& path);

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dynbatch

#endif  // DYNBATCH_FSM_RL_H_
