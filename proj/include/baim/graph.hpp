#ifndef BAIM_GRAPH_HPP
#define BAIM_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "baim/gating.hpp"
#include "baim/learner.hpp"
#include "baim/parameter.hpp"
#include "baim/rng.hpp"
#include "baim/types.hpp"

namespace baim {

// Trainable linear map from learner a's stage-i features into the input
// of learner b's stage j. Direction rules keep the stage graph acyclic:
// 0 <= j - i <= h, and same-depth edges only run from lower to higher
// learner id. Latent stages accept no incoming edges.
struct ProjectionEdge {
  int id = -1;
  int src_learner = -1;
  int src_stage = -1;
  int dst_learner = -1;
  int dst_stage = -1;
  Parameter W;  // [dst stage input dim x src stage output dim]
  bool active = true;
  real score = real(0);
};

inline bool edge_allowed(const LearnerSpec& src, int i, const LearnerSpec& dst, int j, int height) {
  if (src.learner_id == dst.learner_id) return false;
  if (i < 0 || i >= src.stage_count() || j < 0 || j >= dst.stage_count()) return false;
  if (j - i < 0 || j - i > height) return false;
  if (j == dst.stage_of_latent) return false;
  if (i == j && src.learner_id >= dst.learner_id) return false;
  if (src.input_dim != dst.input_dim) return false;  // cross-space projections rejected
  return true;
}

// (learner, stage) node used by closure and ordering computations.
// Execution order is lexicographic by (stage, learner), which the edge
// rules make a valid topological order.
struct StageNode {
  int learner = -1;
  int stage = -1;
  auto operator<=>(const StageNode&) const = default;
};

inline bool exec_before(const StageNode& a, const StageNode& b) {
  return std::pair(a.stage, a.learner) < std::pair(b.stage, b.learner);
}

// The composed bottom-up model: N learners in M squads under a
// hierarchical gate, plus the masked projection edge set.
struct BaimGraph {
  std::vector<Learner> learners;  // index == learner_id
  std::vector<std::vector<int>> squads;
  TsGate tsgate;
  std::vector<LsGate> lsgates;
  std::vector<ProjectionEdge> edges;  // append-only; id == index
  int height = 0;
  int default_top_k = 1;
  std::vector<StageNode> topo_order;  // stored by validate_acyclic
  std::map<std::string, std::string> meta;

  int learner_count() const { return static_cast<int>(learners.size()); }
  int task_count() const { return static_cast<int>(squads.size()); }
  int input_dim() const { return learners.at(0).spec.input_dim; }

  int task_of(int learner_id) const { return learners.at(static_cast<std::size_t>(learner_id)).spec.task_id; }

  int active_edge_count() const {
    int n = 0;
    for (const auto& e : edges) n += e.active ? 1 : 0;
    return n;
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (auto& l : learners) l.for_each_param(fn);
    fn(tsgate.W);
    fn(tsgate.b);
    for (auto& g : lsgates) {
      fn(g.W);
      fn(g.b);
    }
    for (auto& e : edges) fn(e.W);
  }

  long parameter_count() {
    long n = 0;
    for_each_param([&](Parameter& p) { n += p.size(); });
    return n;
  }
};

namespace detail {

inline void append_candidate_edges(BaimGraph& g, int new_learner) {
  auto add_edges = [&](int a, int b) {
    const auto& sa = g.learners[static_cast<std::size_t>(a)].spec;
    const auto& sb = g.learners[static_cast<std::size_t>(b)].spec;
    for (int i = 0; i < sa.stage_count(); ++i)
      for (int j = 0; j < sb.stage_count(); ++j) {
        if (!edge_allowed(sa, i, sb, j, g.height)) continue;
        ProjectionEdge e;
        e.id = static_cast<int>(g.edges.size());
        e.src_learner = a;
        e.src_stage = i;
        e.dst_learner = b;
        e.dst_stage = j;
        // Zero init: composition starts exactly at the uploaded-model function.
        e.W = make_zero_param("edge" + std::to_string(e.id) + "/W",
                              {static_cast<long>(sb.stage_in_dim(j)), static_cast<long>(sa.stage_out_dim(i))});
        g.edges.push_back(std::move(e));
      }
  };
  for (int other = 0; other < g.learner_count(); ++other) {
    if (other == new_learner) continue;
    add_edges(other, new_learner);
    add_edges(new_learner, other);
  }
}

}  // namespace detail

struct CycleReport {
  bool ok = true;
  std::vector<StageNode> cycle;  // one offending cycle when !ok

  std::string to_string() const {
    if (ok) return "acyclic";
    std::string s = "cycle:";
    for (const auto& n : cycle)
      s += " (L" + std::to_string(n.learner) + ",s" + std::to_string(n.stage) + ")";
    return s;
  }
};

// Defense-in-depth Kahn check over (learner, stage) nodes with chain and
// active projection dependencies; stores the canonical execution order.
// The edge rules make cycles impossible, so a failure means hand-built or
// corrupted edges.
inline CycleReport validate_acyclic(BaimGraph& g) {
  std::vector<StageNode> nodes;
  std::map<StageNode, int> index;
  for (const auto& l : g.learners)
    for (int s = 0; s < l.spec.stage_count(); ++s) {
      index[{l.spec.learner_id, s}] = static_cast<int>(nodes.size());
      nodes.push_back({l.spec.learner_id, s});
    }
  std::vector<std::vector<int>> out(nodes.size());
  std::vector<int> indeg(nodes.size(), 0);
  auto link = [&](StageNode a, StageNode b) {
    out[static_cast<std::size_t>(index.at(a))].push_back(index.at(b));
    indeg[static_cast<std::size_t>(index.at(b))] += 1;
  };
  for (const auto& l : g.learners)
    for (int s = 1; s < l.spec.stage_count(); ++s)
      link({l.spec.learner_id, s - 1}, {l.spec.learner_id, s});
  for (const auto& e : g.edges)
    if (e.active) link({e.src_learner, e.src_stage}, {e.dst_learner, e.dst_stage});

  auto key = [&](int i) {
    return std::pair(nodes[static_cast<std::size_t>(i)].stage, nodes[static_cast<std::size_t>(i)].learner);
  };
  auto cmp = [&](int a, int b) { return key(a) > key(b); };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));

  std::vector<StageNode> order;
  while (!ready.empty()) {
    int i = ready.top();
    ready.pop();
    order.push_back(nodes[static_cast<std::size_t>(i)]);
    for (int j : out[static_cast<std::size_t>(i)])
      if (--indeg[static_cast<std::size_t>(j)] == 0) ready.push(j);
  }

  CycleReport report;
  if (order.size() != nodes.size()) {
    report.ok = false;
    // Strip nodes that are merely blocked downstream of a cycle, then
    // walk the residue (every node there has a successor in it).
    std::set<int> left;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (indeg[i] > 0) left.insert(static_cast<int>(i));
    bool stripped = true;
    while (stripped) {
      stripped = false;
      for (auto it = left.begin(); it != left.end();) {
        bool has_successor = false;
        for (int j : out[static_cast<std::size_t>(*it)])
          if (left.count(j)) has_successor = true;
        if (!has_successor) {
          it = left.erase(it);
          stripped = true;
        } else {
          ++it;
        }
      }
    }
    std::vector<int> path;
    std::map<int, int> seen_at;
    int cur = *left.begin();
    while (seen_at.find(cur) == seen_at.end()) {
      seen_at[cur] = static_cast<int>(path.size());
      path.push_back(cur);
      for (int j : out[static_cast<std::size_t>(cur)])
        if (left.count(j)) {
          cur = j;
          break;
        }
    }
    for (std::size_t k = static_cast<std::size_t>(seen_at[cur]); k < path.size(); ++k)
      report.cycle.push_back(nodes[static_cast<std::size_t>(path[k])]);
    return report;
  }
  g.topo_order = std::move(order);
  return report;
}

// Builds the graph from uploaded learners: squads, gates, and every
// candidate projection edge under the height rule (all zero-initialized,
// all active).
inline BaimGraph compose(std::vector<Learner> learners, std::vector<std::vector<int>> squads,
                         int height, int top_k, const RngStream& rng) {
  if (learners.empty()) throw config_error("compose: no learners");
  if (height < 0) throw config_error("compose: height must be >= 0");
  const int n = static_cast<int>(learners.size());
  for (int i = 0; i < n; ++i) {
    learners[static_cast<std::size_t>(i)].spec.validate();
    if (learners[static_cast<std::size_t>(i)].spec.learner_id != i)
      throw config_error("compose: learners must be listed in learner_id order");
  }
  if (squads.empty()) throw config_error("compose: no squads");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (std::size_t t = 0; t < squads.size(); ++t) {
    if (squads[t].empty()) throw config_error("compose: squad " + std::to_string(t) + " is empty");
    for (int id : squads[t]) {
      if (id < 0 || id >= n || seen[static_cast<std::size_t>(id)]++)
        throw config_error("compose: squads must partition the learner set");
      if (learners[static_cast<std::size_t>(id)].spec.task_id != static_cast<int>(t))
        throw config_error("compose: learner " + std::to_string(id) + " task_id does not match its squad");
    }
  }
  for (int c : seen)
    if (!c) throw config_error("compose: squads must cover every learner");

  BaimGraph g;
  g.learners = std::move(learners);
  g.squads = std::move(squads);
  g.height = height;
  g.default_top_k = top_k;

  RngStream gate_rng = rng.fork(0x6A7E);
  g.tsgate = make_tsgate(g.task_count(), g.input_dim(), gate_rng);
  for (int t = 0; t < g.task_count(); ++t) {
    const int size = static_cast<int>(g.squads[static_cast<std::size_t>(t)].size());
    RngStream ls_rng = rng.fork(0x6A7E00 + static_cast<std::uint64_t>(t));
    g.lsgates.push_back(make_lsgate(t, size, g.input_dim(), std::min(top_k, size), ls_rng));
  }

  for (int b = 0; b < g.learner_count(); ++b) {
    const auto& sb = g.learners[static_cast<std::size_t>(b)].spec;
    for (int a = 0; a < g.learner_count(); ++a) {
      const auto& sa = g.learners[static_cast<std::size_t>(a)].spec;
      for (int i = 0; i < sa.stage_count(); ++i)
        for (int j = 0; j < sb.stage_count(); ++j) {
          if (!edge_allowed(sa, i, sb, j, height)) continue;
          ProjectionEdge e;
          e.id = static_cast<int>(g.edges.size());
          e.src_learner = a;
          e.src_stage = i;
          e.dst_learner = b;
          e.dst_stage = j;
          e.W = make_zero_param("edge" + std::to_string(e.id) + "/W",
                                {static_cast<long>(sb.stage_in_dim(j)), static_cast<long>(sa.stage_out_dim(i))});
          g.edges.push_back(std::move(e));
        }
    }
  }

  CycleReport cycles = validate_acyclic(g);
  if (!cycles.ok) throw config_error("compose: produced a cyclic graph: " + cycles.to_string());
  return g;
}

inline real edge_score(const ProjectionEdge& e) {
  real sq = 0;
  for (long i = 0; i < e.W.value.size(); ++i) sq += e.W.value[i] * e.W.value[i];
  return std::sqrt(sq) / std::sqrt(static_cast<real>(e.W.value.size()));
}

// Deactivates the ceil(f * active) lowest-scoring active edges by
// size-normalized Frobenius norm; lowest edge id wins ties. The
// top-scoring edge always survives (any f < 1 keeps at least one edge).
// Returns the number deactivated (0 with no active edges: a no-op).
inline int prune_step(BaimGraph& g, real fraction) {
  if (!(fraction > real(0) && fraction < real(1)))
    throw config_error("prune_step: fraction must lie in (0,1)");
  std::vector<int> active;
  for (auto& e : g.edges)
    if (e.active) {
      e.score = edge_score(e);
      active.push_back(e.id);
    }
  if (active.empty()) return 0;  // caller may warn
  std::sort(active.begin(), active.end(), [&](int a, int b) {
    const auto& ea = g.edges[static_cast<std::size_t>(a)];
    const auto& eb = g.edges[static_cast<std::size_t>(b)];
    if (ea.score != eb.score) return ea.score < eb.score;
    return ea.id < eb.id;
  });
  const int kill = std::min(static_cast<int>(std::ceil(fraction * static_cast<real>(active.size()))),
                            static_cast<int>(active.size()) - 1);
  for (int k = 0; k < kill; ++k) g.edges[static_cast<std::size_t>(active[static_cast<std::size_t>(k)])].active = false;
  return kill;
}

// Appends a learner to an existing squad, or creates squad `task_id` when
// task_id == task_count(). New candidate edges are zero-initialized and
// gate rows are extended in place; every pre-existing parameter value is
// left bit-identical.
inline void add_learner(BaimGraph& g, Learner learner, int task_id, const RngStream& rng) {
  const int new_id = learner.spec.learner_id;
  for (const auto& l : g.learners)
    if (l.spec.learner_id == new_id)
      throw config_error("add_learner: duplicate learner id " + std::to_string(new_id));
  if (new_id != g.learner_count())
    throw config_error("add_learner: learner_id must be the next free id " +
                       std::to_string(g.learner_count()));
  if (task_id < 0 || task_id > g.task_count())
    throw config_error("add_learner: task_id out of range");
  if (learner.spec.input_dim != g.input_dim())
    throw config_error("add_learner: input space does not match the graph");
  learner.spec.task_id = task_id;
  learner.spec.validate();

  const bool new_task = task_id == g.task_count();
  g.learners.push_back(std::move(learner));

  auto extend_rows = [](Parameter& p, const Tensor& row, const char* what) {
    const long r = p.value.rows();
    const long c = p.value.cols();
    if (row.size() != (p.value.rank() == 2 ? c : 1))
      throw config_error(std::string("add_learner: bad gate row extension for ") + what);
    std::vector<long> shape = p.value.rank() == 2 ? std::vector<long>{r + 1, c} : std::vector<long>{r + 1};
    Tensor next(shape);
    for (long i = 0; i < p.value.size(); ++i) next[i] = p.value[i];
    for (long i = 0; i < row.size(); ++i) next[p.value.size() + i] = row[i];
    p.value = std::move(next);
    p.grad = Tensor(shape);
  };

  RngStream grow_rng = rng.fork(0xADD0 + static_cast<std::uint64_t>(new_id));
  if (new_task) {
    Tensor w_row({static_cast<long>(g.input_dim())});
    init_uniform_fan(w_row, grow_rng);
    extend_rows(g.tsgate.W, w_row, "tsgate/W");
    Tensor b_row({1});
    init_uniform_fan(b_row, grow_rng);
    extend_rows(g.tsgate.b, b_row, "tsgate/b");
    g.squads.push_back({new_id});
    RngStream ls_rng = rng.fork(0x6A7E00 + static_cast<std::uint64_t>(task_id));
    g.lsgates.push_back(make_lsgate(task_id, 1, g.input_dim(), 1, ls_rng));
  } else {
    LsGate& gate = g.lsgates[static_cast<std::size_t>(task_id)];
    Tensor w_row({static_cast<long>(g.input_dim())});
    init_uniform_fan(w_row, grow_rng);
    extend_rows(gate.W, w_row, "lsgate/W");
    Tensor b_row({1});
    init_uniform_fan(b_row, grow_rng);
    extend_rows(gate.b, b_row, "lsgate/b");
    g.squads[static_cast<std::size_t>(task_id)].push_back(new_id);
  }

  detail::append_candidate_edges(g, new_id);
  CycleReport cycles = validate_acyclic(g);
  if (!cycles.ok) throw config_error("add_learner: produced a cyclic graph: " + cycles.to_string());
}

}  // namespace baim

#endif  // BAIM_GRAPH_HPP
