#ifndef BAIM_GATING_HPP
#define BAIM_GATING_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "baim/parameter.hpp"
#include "baim/rng.hpp"
#include "baim/tape.hpp"
#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

// Task-selecting gate: softmax over M task logits from the raw input.
struct TsGate {
  Parameter W;  // [M x input_dim]
  Parameter b;  // [M]

  int tasks() const { return static_cast<int>(W.value.rows()); }
  int input_dim() const { return static_cast<int>(W.value.cols()); }
};

// Learner-selecting gate for one squad: top-K selection with weights from
// a softmax restricted to the selected logits.
struct LsGate {
  int squad_id = 0;
  Parameter W;  // [n_t x input_dim]
  Parameter b;  // [n_t]
  int top_k = 1;

  int squad_size() const { return static_cast<int>(W.value.rows()); }
};

inline TsGate make_tsgate(int tasks, int input_dim, RngStream& rng) {
  if (tasks < 1) throw config_error("tsgate: needs at least one task");
  TsGate g;
  g.W = make_param("tsgate/W", {tasks, input_dim}, rng);
  g.b = make_param("tsgate/b", {tasks}, rng);
  return g;
}

inline LsGate make_lsgate(int squad_id, int squad_size, int input_dim, int k, RngStream& rng) {
  if (k < 1 || k > squad_size)
    throw config_error("lsgate" + std::to_string(squad_id) + ": K=" + std::to_string(k) +
                       " outside [1, " + std::to_string(squad_size) + "]");
  LsGate g;
  g.squad_id = squad_id;
  g.W = make_param("lsgate" + std::to_string(squad_id) + "/W", {squad_size, input_dim}, rng);
  g.b = make_param("lsgate" + std::to_string(squad_id) + "/b", {squad_size}, rng);
  g.top_k = k;
  return g;
}

// The sparse N-dimensional route: exactly K nonzero weights, all inside
// the selected task's section, summing to one.
struct SparseRoute {
  int task = 0;
  std::vector<std::pair<int, real>> selected;  // (global learner id, weight), ascending by id
  int total_learners = 0;

  std::vector<real> dense() const {
    std::vector<real> v(static_cast<std::size_t>(total_learners), real(0));
    for (const auto& [id, w] : selected) v[static_cast<std::size_t>(id)] = w;
    return v;
  }
};

inline Tensor gate_logits(const Parameter& W, const Parameter& b, const Tensor& x) {
  return apply_linear_value(W.value, b.value, x);
}

// Hard task choice: argmax of softmax(Wx+b) with lowest-index tie-break,
// or the forced task when an override is given.
inline std::pair<int, Tensor> tsgate_route(const TsGate& gate, const Tensor& x,
                                           std::optional<int> override_task = std::nullopt) {
  Tensor logits = gate_logits(gate.W, gate.b, x);
  Tensor probs = Tape::softmax_value(logits);
  int task;
  if (override_task.has_value()) {
    task = *override_task;
    if (task < 0 || task >= gate.tasks())
      throw config_error("tsgate_route: override task " + std::to_string(task) + " outside [0," +
                         std::to_string(gate.tasks()) + ")");
  } else {
    task = 0;
    for (int t = 1; t < gate.tasks(); ++t)
      if (logits[t] > logits[task]) task = t;
  }
  return {task, std::move(probs)};
}

// Top-K squad-local indices by logit value, lowest index on ties.
inline std::vector<int> top_k_indices(const Tensor& logits, int k) {
  std::vector<int> order(static_cast<std::size_t>(logits.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits[a] > logits[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

// One squad section of the route: squad-local indices plus weights.
struct RouteSection {
  std::vector<int> local_indices;  // ascending
  Tensor weights;                  // aligned with local_indices
};

inline RouteSection lsgate_select(const LsGate& gate, const Tensor& x) {
  if (gate.top_k > gate.squad_size())
    throw config_error("lsgate_select: K exceeds squad size");
  Tensor logits = gate_logits(gate.W, gate.b, x);
  RouteSection sec;
  sec.local_indices = top_k_indices(logits, gate.top_k);
  Tape tape;
  sec.weights = tape.value(tape.subset_softmax(tape.constant(logits), sec.local_indices));
  return sec;
}

inline SparseRoute assemble_route(int task, const RouteSection& section,
                                  const std::vector<std::vector<int>>& squads) {
  SparseRoute route;
  route.task = task;
  int total = 0;
  for (const auto& squad : squads) total += static_cast<int>(squad.size());
  route.total_learners = total;
  const auto& squad = squads.at(static_cast<std::size_t>(task));
  for (std::size_t k = 0; k < section.local_indices.size(); ++k)
    route.selected.emplace_back(squad.at(static_cast<std::size_t>(section.local_indices[k])),
                                section.weights[static_cast<long>(k)]);
  std::sort(route.selected.begin(), route.selected.end());
  return route;
}

}  // namespace baim

#endif  // BAIM_GATING_HPP
