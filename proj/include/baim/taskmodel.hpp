#ifndef BAIM_TASKMODEL_HPP
#define BAIM_TASKMODEL_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "baim/forward.hpp"
#include "baim/gating.hpp"
#include "baim/graph.hpp"
#include "baim/learner.hpp"
#include "baim/types.hpp"

namespace baim {

// One learner copied into a task model. Own-squad learners carry every
// stage; foreign learners only the prefix 0..max_stage their exported
// features require. Dropped stages hold empty parameters.
struct TaskPart {
  Learner learner;
  int max_stage = -1;

  bool is_fragment() const { return max_stage < learner.spec.stage_count() - 1; }
};

// Self-contained per-task model: the squad, its LSGate, the replicated
// active projection edges, and the foreign fragments they reach. No
// TSGate and no reference back to the full graph.
struct TaskModel {
  int task_id = 0;
  LsGate lsgate;
  std::vector<int> own_learners;  // global ids, original squad order
  std::vector<TaskPart> parts;    // ascending by learner id
  std::vector<ProjectionEdge> edges;  // active edges only, original ids, ascending
  std::map<std::string, std::string> meta;

  TaskPart& part(int learner_id) {
    for (auto& p : parts)
      if (p.learner.spec.learner_id == learner_id) return p;
    throw config_error("task model: learner " + std::to_string(learner_id) + " not present");
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn(lsgate.W);
    fn(lsgate.b);
    for (auto& p : parts) {
      const auto& spec = p.learner.spec;
      for (int s = 0; s <= p.max_stage; ++s) {
        if (s == spec.stage_of_latent) {
          fn(p.learner.mu_w);
          fn(p.learner.mu_b);
          fn(p.learner.logvar_w);
          fn(p.learner.logvar_b);
        } else {
          fn(p.learner.stage_w[static_cast<std::size_t>(s)]);
          fn(p.learner.stage_b[static_cast<std::size_t>(s)]);
        }
      }
    }
    for (auto& e : edges) fn(e.W);
  }

  long parameter_count() {
    long n = 0;
    for_each_param([&](Parameter& p) { n += p.size(); });
    return n;
  }
};

// Upstream closure of every stage of squad t over active edges, as a
// per-learner max included stage.
inline std::map<int, int> extraction_closure(const BaimGraph& g, int task) {
  std::set<StageNode> need;
  std::vector<StageNode> work;
  for (int id : g.squads.at(static_cast<std::size_t>(task)))
    for (int s = 0; s < g.learners[static_cast<std::size_t>(id)].spec.stage_count(); ++s)
      work.push_back({id, s});
  while (!work.empty()) {
    StageNode n = work.back();
    work.pop_back();
    if (!need.insert(n).second) continue;
    if (n.stage > 0) work.push_back({n.learner, n.stage - 1});
    for (const auto& e : g.edges)
      if (e.active && e.dst_learner == n.learner && e.dst_stage == n.stage)
        work.push_back({e.src_learner, e.src_stage});
  }
  std::map<int, int> max_stage;
  for (const auto& n : need) {
    auto it = max_stage.find(n.learner);
    if (it == max_stage.end() || it->second < n.stage) max_stage[n.learner] = n.stage;
  }
  return max_stage;
}

// Partition the trained graph on one task: copy the squad's learners in
// full, foreign prefixes up to their deepest contributing stage, the
// squad's LSGate, and every active edge whose destination lies in the
// closure. Pruned-out edges are not carried.
inline TaskModel extract_task_model(const BaimGraph& g, int task) {
  if (task < 0 || task >= g.task_count())
    throw config_error("extract_task_model: task " + std::to_string(task) + " outside [0," +
                       std::to_string(g.task_count()) + ")");
  std::map<int, int> closure = extraction_closure(g, task);

  TaskModel tm;
  tm.task_id = task;
  tm.lsgate = g.lsgates[static_cast<std::size_t>(task)];
  tm.own_learners = g.squads[static_cast<std::size_t>(task)];

  for (const auto& [learner_id, max_stage] : closure) {
    TaskPart part;
    part.learner = g.learners[static_cast<std::size_t>(learner_id)];
    part.max_stage = max_stage;
    const auto& spec = part.learner.spec;
    for (int s = max_stage + 1; s < spec.stage_count(); ++s) {
      if (s == spec.stage_of_latent) {
        part.learner.mu_w = Parameter();
        part.learner.mu_b = Parameter();
        part.learner.logvar_w = Parameter();
        part.learner.logvar_b = Parameter();
      } else {
        part.learner.stage_w[static_cast<std::size_t>(s)] = Parameter();
        part.learner.stage_b[static_cast<std::size_t>(s)] = Parameter();
      }
    }
    tm.parts.push_back(std::move(part));
  }

  for (const auto& e : g.edges) {
    if (!e.active) continue;
    auto it = closure.find(e.dst_learner);
    if (it == closure.end() || e.dst_stage > it->second) continue;
    tm.edges.push_back(e);
  }
  return tm;
}

inline ExecView task_model_view(TaskModel& tm) {
  ExecView v;
  for (auto& p : tm.parts) v.units[p.learner.spec.learner_id] = {&p.learner, p.max_stage};
  v.edges = &tm.edges;
  return v;
}

struct TaskForwardResult {
  Tensor y;
  ActivationTrace trace;
};

// Identical semantics (and bit-identical deterministic output) to
// baim_forward with the task override: same shared executor, same
// canonical op order restricted to the closure.
inline TaskForwardResult taskmodel_forward(TaskModel& tm, const Tensor& x, Mode mode,
                                           RngStream* rng = nullptr) {
  // Squad layout mirrors the originating graph so route indices agree.
  std::vector<std::vector<int>> squads(static_cast<std::size_t>(tm.task_id) + 1);
  squads[static_cast<std::size_t>(tm.task_id)] = tm.own_learners;
  ExecView view = task_model_view(tm);
  Tape tape;
  RoutedNodes nodes =
      routed_forward_nodes(tape, view, tm.lsgate, tm.task_id, squads, x, mode, rng);
  TaskForwardResult r;
  r.y = tape.value(nodes.y);
  r.trace = std::move(nodes.trace);
  return r;
}

// Edge-side cache of downloaded task models. A miss signals the caller
// (the workflow harness) to fetch from the cloud and count the bytes.
struct Toolbox {
  std::map<int, TaskModel> models;

  TaskModel* lookup(int task_id) {
    auto it = models.find(task_id);
    return it == models.end() ? nullptr : &it->second;
  }

  void store(int task_id, TaskModel model) { models[task_id] = std::move(model); }
};

}  // namespace baim

#endif  // BAIM_TASKMODEL_HPP
