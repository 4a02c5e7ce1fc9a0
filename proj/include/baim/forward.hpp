#ifndef BAIM_FORWARD_HPP
#define BAIM_FORWARD_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "baim/gating.hpp"
#include "baim/graph.hpp"
#include "baim/learner.hpp"
#include "baim/tape.hpp"
#include "baim/types.hpp"

namespace baim {

// Which learners and stages ran for one input, and which projection
// edges fed them.
struct ActivationTrace {
  SparseRoute route;
  std::vector<StageNode> executed;  // sorted in execution order
  std::vector<int> edge_hits;       // active edge ids traversed, ascending
};

// A uniform executor view over either a full BaimGraph or an extracted
// TaskModel: learners available up to a per-learner max stage, plus the
// projection edges among them. Running both model forms through this one
// view is what makes extraction output-equivalent bit for bit.
struct ExecView {
  struct Unit {
    Learner* learner = nullptr;
    int max_stage = -1;  // inclusive
  };
  std::map<int, Unit> units;                 // keyed by original learner id
  std::vector<ProjectionEdge>* edges = nullptr;

  static ExecView of_graph(BaimGraph& g) {
    ExecView v;
    for (auto& l : g.learners)
      v.units[l.spec.learner_id] = {&l, l.spec.stage_count() - 1};
    v.edges = &g.edges;
    return v;
  }

  const Learner& learner(int id) const { return *units.at(id).learner; }
};

// Upstream closure of `targets`: every (learner, stage) transitively
// required through same-learner chains and active projection edges,
// returned in canonical (stage, learner) execution order.
inline std::vector<StageNode> activation_closure(const ExecView& view,
                                                 const std::vector<StageNode>& targets) {
  std::set<StageNode> need;
  std::vector<StageNode> work = targets;
  while (!work.empty()) {
    StageNode n = work.back();
    work.pop_back();
    if (!need.insert(n).second) continue;
    if (n.stage > 0) work.push_back({n.learner, n.stage - 1});
    for (const auto& e : *view.edges) {
      if (!e.active || e.dst_learner != n.learner || e.dst_stage != n.stage) continue;
      if (!view.units.count(e.src_learner)) continue;
      work.push_back({e.src_learner, e.src_stage});
    }
  }
  std::vector<StageNode> order(need.begin(), need.end());
  std::sort(order.begin(), order.end(), exec_before);
  return order;
}

struct RoutedNodes {
  int y = -1;                     // gate-weighted mixture of reconstructions
  int weights = -1;               // K-vector, aligned with section order
  int mix_kl = -1;                // sum_k w_k * KL_k (scalar)
  RouteSection section;
  ActivationTrace trace;
};

// Routes x through one squad's LSGate and executes the selected learners
// plus their upstream closure in canonical topological order. Projection
// injections are added to the original stage input in ascending edge-id
// order. This routine is the normative op sequence: any two model forms
// holding bit-identical parameters produce bit-identical outputs.
inline RoutedNodes routed_forward_nodes(Tape& tape, ExecView& view, LsGate& gate, int task,
                                        const std::vector<std::vector<int>>& squads,
                                        const Tensor& x, Mode mode, RngStream* rng) {
  require_unit_range(x, "routed forward");
  RoutedNodes out;

  // Gate on tape so mixture weights receive gradients.
  int x_node = tape.constant(x);
  int logits = tape.linear(tape.leaf(gate.W), tape.leaf(gate.b), x_node);
  if (gate.top_k > gate.squad_size()) throw config_error("routed forward: K exceeds squad size");
  out.section.local_indices = top_k_indices(tape.value(logits), gate.top_k);
  out.weights = tape.subset_softmax(logits, out.section.local_indices);
  out.section.weights = tape.value(out.weights);
  out.trace.route = assemble_route(task, out.section, squads);

  const auto& squad = squads.at(static_cast<std::size_t>(task));
  std::vector<int> selected_global;
  for (int local : out.section.local_indices)
    selected_global.push_back(squad.at(static_cast<std::size_t>(local)));

  std::vector<StageNode> targets;
  for (int id : selected_global) {
    const auto& spec = view.learner(id).spec;
    for (int s = 0; s < spec.stage_count(); ++s) targets.push_back({id, s});
  }
  std::vector<StageNode> order = activation_closure(view, targets);

  // Incoming active edges per node, ascending by edge id (edge list order).
  std::map<StageNode, std::vector<ProjectionEdge*>> incoming;
  std::set<StageNode> in_closure(order.begin(), order.end());
  for (auto& e : *view.edges) {
    if (!e.active) continue;
    StageNode dst{e.dst_learner, e.dst_stage};
    if (in_closure.count(dst)) incoming[dst].push_back(&e);
  }

  std::map<StageNode, int> exported;  // feature node per executed stage
  std::map<StageNode, int> stage_out;
  std::map<int, std::pair<int, int>> latent_nodes;  // learner -> (mu, logvar)

  for (const StageNode& node : order) {
    ExecView::Unit unit = view.units.at(node.learner);
    if (node.stage > unit.max_stage)
      throw config_error("routed forward: closure needs stage " + std::to_string(node.stage) +
                         " of learner " + std::to_string(node.learner) + " beyond the model fragment");
    Learner& l = *unit.learner;
    int input = node.stage == 0 ? x_node : stage_out.at({node.learner, node.stage - 1});
    auto inc = incoming.find(node);
    if (inc != incoming.end())
      for (ProjectionEdge* e : inc->second) {
        int feat = exported.at({e->src_learner, e->src_stage});
        input = tape.add(input, tape.matvec(tape.leaf(e->W), feat));
        out.trace.edge_hits.push_back(e->id);
      }
    StageNodes sn = learner_stage_nodes(tape, l, node.stage, input, mode, rng);
    stage_out[node] = sn.out;
    exported[node] = sn.exported;
    if (node.stage == l.spec.stage_of_latent) latent_nodes[node.learner] = {sn.mu, sn.logvar};
  }

  // Mixture in section order (squad-local ascending), matching weights.
  std::vector<int> xhat_nodes;
  std::vector<int> kl_nodes;
  for (int local : out.section.local_indices) {
    int id = squad.at(static_cast<std::size_t>(local));
    const auto& spec = view.learner(id).spec;
    xhat_nodes.push_back(stage_out.at({id, spec.stage_count() - 1}));
    auto [mu, logvar] = latent_nodes.at(id);
    kl_nodes.push_back(tape.kl_sum(mu, logvar));
  }
  out.y = tape.mix(out.weights, xhat_nodes);
  out.mix_kl = tape.mix(out.weights, kl_nodes);

  out.trace.executed = std::move(order);
  std::sort(out.trace.edge_hits.begin(), out.trace.edge_hits.end());
  return out;
}

struct ForwardResult {
  Tensor y;
  int task = 0;
  Tensor task_probs;
  ActivationTrace trace;
};

// Full-model forward: TSGate picks the squad (or honors the override),
// then the squad's LSGate routes and executes.
inline ForwardResult baim_forward(BaimGraph& g, const Tensor& x, Mode mode,
                                  std::optional<int> task_override = std::nullopt,
                                  RngStream* rng = nullptr) {
  auto [task, probs] = tsgate_route(g.tsgate, x, task_override);
  ExecView view = ExecView::of_graph(g);
  Tape tape;
  RoutedNodes nodes = routed_forward_nodes(tape, view, g.lsgates[static_cast<std::size_t>(task)],
                                           task, g.squads, x, mode, rng);
  ForwardResult r;
  r.y = tape.value(nodes.y);
  r.task = task;
  r.task_probs = std::move(probs);
  r.trace = std::move(nodes.trace);
  return r;
}

// Training/eval objective pieces for one sample on one tape.
struct SampleLossNodes {
  int elbo = -1;     // bce(x, y_mix) + beta * sum_k w_k KL_k
  int ce = -1;       // TSGate cross-entropy against the task label
  int balance = -1;  // squad-softmax concentration penalty (optional)
  ActivationTrace trace;
};

inline SampleLossNodes sample_loss_nodes(Tape& tape, BaimGraph& g, const Tensor& x, int task_label,
                                         real beta, bool with_balance, Mode mode, RngStream* rng) {
  if (task_label < 0 || task_label >= g.task_count())
    throw config_error("sample loss: task label out of range");
  SampleLossNodes out;

  ExecView view = ExecView::of_graph(g);
  RoutedNodes routed = routed_forward_nodes(
      tape, view, g.lsgates[static_cast<std::size_t>(task_label)], task_label, g.squads, x, mode, rng);

  int bce = tape.bce_sum(x, routed.y);
  out.elbo = beta == real(0) ? bce : tape.add(bce, tape.scale(routed.mix_kl, beta));

  int ts_logits = tape.linear(tape.leaf(g.tsgate.W), tape.leaf(g.tsgate.b), tape.constant(x));
  out.ce = tape.softmax_ce(ts_logits, task_label);

  if (with_balance) {
    LsGate& gate = g.lsgates[static_cast<std::size_t>(task_label)];
    int logits = tape.linear(tape.leaf(gate.W), tape.leaf(gate.b), tape.constant(x));
    std::vector<int> all(static_cast<std::size_t>(gate.squad_size()));
    for (int i = 0; i < gate.squad_size(); ++i) all[static_cast<std::size_t>(i)] = i;
    int probs = tape.subset_softmax(logits, all);
    out.balance = tape.scale(tape.sum(tape.mul(probs, probs)), static_cast<real>(gate.squad_size()));
  }
  out.trace = std::move(routed.trace);
  return out;
}

}  // namespace baim

#endif  // BAIM_FORWARD_HPP
