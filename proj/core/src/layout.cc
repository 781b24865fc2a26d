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

#include "dynbatch/layout.h"

#include <algorithm>
#include <cctype>
#include <numeric>

#include <cstdio>

#include "json.hpp"

namespace dynbatch {
namespace {

// Digit runs compare by value, everything else bytewise.
bool natural_less(const std::string& a, const std::string& b) {
  size_t i = 0;
  size_t j = 0;
  auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      size_t ie = i;
      size_t je = j;
      while (ie < a.size() && digit(a[ie])) ++ie;
      while (je < b.size() && digit(b[je])) ++je;
      std::string_view na(a.data() + i, ie - i);
      std::string_view nb(b.data() + j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return a.size() - i < b.size() - j;
  return a < b;
}

bool aligned(const LayoutPlan& plan, const SubgraphIR& ir, const std::vector<int>& operand,
             const std::vector<int>& perm) {
  for (size_t i = 0; i + 1 < perm.size(); ++i) {
    const int v = operand[perm[i]];
    const int w = operand[perm[i + 1]];
    if (plan.offset[w] != plan.offset[v] + ir.vars[v].size) return false;
  }
  return true;
}

std::vector<int> sorted_by_offset(const LayoutPlan& plan, const std::vector<int>& operand) {
  std::vector<int> perm(operand.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    return plan.offset[operand[a]] < plan.offset[operand[b]];
  });
  return perm;
}

BatchCheck check_batch(const SubgraphIR& ir, const LayoutPlan& plan, const BatchOperands& b) {
  BatchCheck c;
  c.batch = b.id;
  c.width = b.width();
  std::vector<int> identity(b.width());
  std::iota(identity.begin(), identity.end(), 0);
  c.member_order = identity;
  if (b.width() < 2) {
    c.zero_copy = true;
    return c;
  }
  std::vector<int> checked;  // source indices subject to alignment
  for (int j = 0; j < static_cast<int>(b.sources.size()); ++j) {
    if (is_broadcast(b.sources[j])) {
      c.broadcast_sources.push_back(j);
    } else {
      checked.push_back(j);
    }
  }
  auto score = [&](const std::vector<int>& perm) {
    int n = aligned(plan, ir, b.result, perm) ? 1 : 0;
    for (int j : checked) n += aligned(plan, ir, b.sources[j], perm) ? 1 : 0;
    return n;
  };

  std::vector<std::vector<int>> candidates = {identity, sorted_by_offset(plan, b.result)};
  for (int j : checked) candidates.push_back(sorted_by_offset(plan, b.sources[j]));
  if (score(candidates[1]) == 1 + static_cast<int>(checked.size())) {
    c.zero_copy = true;
    c.member_order = candidates[1];
    return c;
  }
  int best = -1;
  for (const auto& perm : candidates) {
    const int s = score(perm);
    if (s > best) {
      best = s;
      c.member_order = perm;
    }
  }
  c.result_copy = !aligned(plan, ir, b.result, c.member_order);
  for (int j : checked) {
    if (!aligned(plan, ir, b.sources[j], c.member_order)) c.source_copies.push_back(j);
  }
  return c;
}

long long operand_elements(const SubgraphIR& ir, const std::vector<int>& operand) {
  long long n = 0;
  for (int v : operand) n += ir.vars[v].size;
  return n;
}

}  // namespace

BatchSchedule schedule_subgraph(const SubgraphIR& ir, int limit) {
  return optimal_schedule(op_graph(ir), limit);
}

std::vector<BatchOperands> extract_operands(const SubgraphIR& ir, const BatchSchedule& s) {
  std::vector<BatchOperands> out;
  for (int k = 0; k < s.size(); ++k) {
    const Batch& batch = s.batches[k];
    BatchOperands b;
    b.id = k;
    const size_t arity = ir.ops.at(batch.members.front()).args.size();
    b.sources.resize(arity);
    for (NodeId m : batch.members) {
      const Op& op = ir.ops.at(m);
      if (op.args.size() != arity) {
        throw ScheduleError("batch " + std::to_string(k) + " mixes arities");
      }
      b.result.push_back(op.dest);
      for (size_t j = 0; j < arity; ++j) b.sources[j].push_back(op.args[j]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

LayoutPlan make_plan(const SubgraphIR& ir, std::vector<int> order) {
  LayoutPlan plan;
  plan.offset.assign(ir.vars.size(), -1);
  long long at = 0;
  for (int v : order) {
    if (v < 0 || v >= static_cast<int>(ir.vars.size()) || plan.offset[v] >= 0) {
      throw std::invalid_argument("order is not a permutation of variables (" +
                                  std::to_string(v) + ")");
    }
    plan.offset[v] = at;
    at += ir.vars[v].size;
  }
  if (order.size() != ir.vars.size()) {
    throw std::invalid_argument("order does not cover every variable");
  }
  plan.order = std::move(order);
  return plan;
}

LayoutPlan plan_layout(const SubgraphIR& ir, const std::vector<BatchOperands>& batches,
                       const AlignmentOptions& options) {
  const AlignmentResult aligned_result = align_batches(batches, options);
  std::vector<int> order = aligned_result.order;
  std::vector<char> placed(ir.vars.size(), 0);
  for (int v : order) placed[v] = 1;
  auto place = [&](int v) {
    if (!placed[v]) {
      placed[v] = 1;
      order.push_back(v);
    }
  };
  for (const Op& op : ir.ops) {
    for (int a : op.args) place(a);
    place(op.dest);
  }
  for (int v = 0; v < static_cast<int>(ir.vars.size()); ++v) place(v);

  LayoutPlan plan = make_plan(ir, std::move(order));
  plan.copy_flagged = aligned_result.erased;
  plan.copy_flagged.insert(plan.copy_flagged.end(), aligned_result.incompatible.begin(),
                      aligned_result.incompatible.end());
  std::sort(plan.copy_flagged.begin(), plan.copy_flagged.end());
  plan.structural_updates = aligned_result.structural_updates;
  plan.universe_size = aligned_result.universe_size;
  return plan;
}

LayoutPlan label_order_plan(const SubgraphIR& ir) {
  std::vector<int> order(ir.vars.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return natural_less(ir.vars[a].name, ir.vars[b].name);
  });
  return make_plan(ir, std::move(order));
}

std::vector<BatchCheck> check_ideal(const SubgraphIR& ir, const LayoutPlan& plan,
                                    const std::vector<BatchOperands>& batches) {
  std::vector<BatchCheck> out;
  for (const BatchOperands& b : batches) out.push_back(check_batch(ir, plan, b));
  return out;
}

CostReport cost_report(const SubgraphIR& ir, const BatchSchedule& s,
                       const std::vector<BatchOperands>& batches,
                       const std::vector<BatchCheck>& checks, std::string plan_name,
                       int element_bytes) {
  if (batches.size() != checks.size() || static_cast<int>(batches.size()) != s.size()) {
    throw std::invalid_argument("schedule, operands and checks disagree in length");
  }
  CostReport r;
  r.subgraph = ir.name;
  r.plan = std::move(plan_name);
  r.element_bytes = element_bytes;
  for (size_t k = 0; k < batches.size(); ++k) {
    const BatchOperands& b = batches[k];
    const BatchCheck& c = checks[k];
    KernelCost kc;
    kc.batch = b.id;
    kc.op_type = ir.op_type(ir.ops.at(s.batches[k].members.front()));
    kc.width = b.width();
    kc.gathers = static_cast<int>(c.source_copies.size());
    kc.scatters = c.result_copy ? 1 : 0;
    kc.broadcasts = static_cast<int>(c.broadcast_sources.size());
    for (int j : c.source_copies) kc.copy_bytes += operand_elements(ir, b.sources[j]) * element_bytes;
    if (c.result_copy) kc.copy_bytes += operand_elements(ir, b.result) * element_bytes;
    for (int j : c.broadcast_sources) {
      kc.broadcast_bytes += operand_elements(ir, b.sources[j]) * element_bytes;
    }
    r.gathers += kc.gathers;
    r.scatters += kc.scatters;
    r.broadcasts += kc.broadcasts;
    r.copy_bytes += kc.copy_bytes;
    r.broadcast_bytes += kc.broadcast_bytes;
    r.kernels.push_back(std::move(kc));
  }
  return r;
}

std::string cost_report_json(const CostReport& r) {
  nlohmann::json j;
  j["subgraph"] = r.subgraph;
  j["plan"] = r.plan;
  j["element_bytes"] = r.element_bytes;
  j["gathers"] = r.gathers;
  j["scatters"] = r.scatters;
  j["broadcasts"] = r.broadcasts;
  j["copy_kernels"] = r.copy_kernels();
  j["memory_kernels"] = r.memory_kernels();
  j["copy_bytes"] = r.copy_bytes;
  j["broadcast_bytes"] = r.broadcast_bytes;
  j["bytes_moved"] = r.bytes_moved();
  j["kernels"] = nlohmann::json::array();
  for (const KernelCost& k : r.kernels) {
    j["kernels"].push_back({{"batch", k.batch},
                            {"op_type", k.op_type},
                            {"width", k.width},
                            {"gathers", k.gathers},
                            {"scatters", k.scatters},
                            {"broadcasts", k.broadcasts},
                            {"copy_bytes", k.copy_bytes},
                            {"broadcast_bytes", k.broadcast_bytes}});
  }
  return j.dump(2);
}

std::string cost_report_text(const CostReport& r) {
  char buf[160];
  std::string out = r.subgraph + " [" + r.plan + "]\n";
  std::snprintf(buf, sizeof buf, "%5s  %-24s %5s %7s %8s %10s %10s\n", "batch", "op", "width",
                "gather", "scatter", "broadcast", "bytes");
  out += buf;
  for (const KernelCost& k : r.kernels) {
    std::snprintf(buf, sizeof buf, "%5d  %-24s %5d %7d %8d %10d %10lld\n", k.batch,
                  k.op_type.c_str(), k.width, k.gathers, k.scatters, k.broadcasts,
                  k.copy_bytes + k.broadcast_bytes);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "total: %d gathers, %d scatters, %d broadcasts, %lld bytes moved\n",
                r.gathers, r.scatters, r.broadcasts, r.bytes_moved());
  return out + buf;
}

}  // namespace dynbatch
