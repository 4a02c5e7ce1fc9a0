#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "baim/forward.hpp"
#include "baim/graph.hpp"
#include "oracles.hpp"

using namespace baim;

namespace {

LearnerSpec spec_of(int id, int task, int input_dim, std::vector<int> widths, int latent_stage) {
  LearnerSpec s;
  s.learner_id = id;
  s.task_id = task;
  s.input_dim = input_dim;
  s.stage_widths = std::move(widths);
  s.stage_of_latent = latent_stage;
  s.latent_dim = s.stage_widths[static_cast<std::size_t>(latent_stage)];
  return s;
}

std::vector<Learner> build_all(const std::vector<LearnerSpec>& specs, std::uint64_t seed) {
  std::vector<Learner> out;
  for (const auto& s : specs) out.push_back(build_learner(s, RngStream(seed)));
  return out;
}

std::set<oracles::EdgeTuple> edge_set(const BaimGraph& g) {
  std::set<oracles::EdgeTuple> out;
  for (const auto& e : g.edges) out.insert({e.src_learner, e.src_stage, e.dst_learner, e.dst_stage});
  return out;
}

std::vector<oracles::ClosureEdge> closure_edges(const BaimGraph& g) {
  std::vector<oracles::ClosureEdge> out;
  for (const auto& e : g.edges)
    out.push_back({e.src_learner, e.src_stage, e.dst_learner, e.dst_stage, e.active});
  return out;
}

}  // namespace

TEST(Compose, TwoLearnerEnumerationExample) {
  // S=4, latent at stage 2, h=2: 6 forward edges and 3 reverse edges.
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2)};
  BaimGraph g = compose(build_all(specs, 1), {{0, 1}}, 2, 2, RngStream(2));
  EXPECT_EQ(g.edges.size(), 9u);
  EXPECT_EQ(edge_set(g), oracles::enumerate_candidate_edges(specs, 2));
  for (const auto& e : g.edges) {
    EXPECT_TRUE(e.active);
    for (long i = 0; i < e.W.value.size(); ++i) EXPECT_EQ(e.W.value[i], 0);
  }
}

TEST(Compose, HeightZeroOnlySameDepthForward) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2)};
  BaimGraph g = compose(build_all(specs, 1), {{0, 1}}, 0, 2, RngStream(2));
  EXPECT_EQ(edge_set(g), oracles::enumerate_candidate_edges(specs, 0));
  // Same-depth edges exist only from learner 0 to learner 1.
  for (const auto& e : g.edges) {
    EXPECT_EQ(e.src_stage, e.dst_stage);
    EXPECT_EQ(e.src_learner, 0);
    EXPECT_EQ(e.dst_learner, 1);
  }
}

TEST(Compose, SingleLearnerNoEdges) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2)};
  BaimGraph g = compose(build_all(specs, 1), {{0}}, 2, 1, RngStream(2));
  EXPECT_TRUE(g.edges.empty());
}

TEST(Compose, GridMatchesEnumerationOracle) {
  // Mixed stage counts and latent positions over N<=5, S<=6, h<=3.
  RngStream rng(404);
  for (int n = 1; n <= 5; ++n)
    for (int h = 0; h <= 3; ++h) {
      std::vector<LearnerSpec> specs;
      for (int id = 0; id < n; ++id) {
        const int s = 3 + static_cast<int>(rng.uniform_index(4));  // S in [3,6]
        std::vector<int> widths;
        for (int k = 0; k < s - 1; ++k) widths.push_back(3 + static_cast<int>(rng.uniform_index(4)));
        const int latent = 1 + static_cast<int>(rng.uniform_index(s - 2));
        specs.push_back(spec_of(id, 0, 7, widths, latent));
      }
      std::vector<std::vector<int>> squads{std::vector<int>(static_cast<std::size_t>(n))};
      for (int id = 0; id < n; ++id) squads[0][static_cast<std::size_t>(id)] = id;
      BaimGraph g = compose(build_all(specs, 11), squads, h, 1, RngStream(12));
      EXPECT_EQ(edge_set(g), oracles::enumerate_candidate_edges(specs, h))
          << "n=" << n << " h=" << h;
      EXPECT_TRUE(validate_acyclic(g).ok);
    }
}

TEST(Compose, ConfigErrors) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2)};
  EXPECT_THROW(compose(build_all(specs, 1), {{0, 1}, {}}, 2, 1, RngStream(2)), config_error);
  EXPECT_THROW(compose(build_all(specs, 1), {{0}}, 2, 1, RngStream(2)), config_error);
  EXPECT_THROW(compose(build_all(specs, 1), {{0, 0}}, 2, 1, RngStream(2)), config_error);
  EXPECT_THROW(compose({}, {{0}}, 2, 1, RngStream(2)), config_error);
}

TEST(ValidateAcyclic, ComposeOutputIsAcyclic) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2),
                                 spec_of(2, 1, 8, {4, 4, 5}, 1)};
  BaimGraph g = compose(build_all(specs, 3), {{0, 1}, {2}}, 3, 2, RngStream(4));
  CycleReport r = validate_acyclic(g);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(g.topo_order.size(), 12u);  // 3 learners x 4 stages
  // Stored order is the canonical (stage, learner) order.
  for (std::size_t i = 1; i < g.topo_order.size(); ++i)
    EXPECT_TRUE(exec_before(g.topo_order[i - 1], g.topo_order[i]));
}

TEST(ValidateAcyclic, HandBuiltCycleReported) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2)};
  BaimGraph g = compose(build_all(specs, 3), {{0, 1}}, 0, 1, RngStream(4));
  // (A,1)->(B,1) exists from compose with h=0; force the reverse too.
  ProjectionEdge bad;
  bad.id = static_cast<int>(g.edges.size());
  bad.src_learner = 1;
  bad.src_stage = 1;
  bad.dst_learner = 0;
  bad.dst_stage = 1;
  bad.W = make_zero_param("edge_bad/W", {6, 5});
  bad.active = true;
  g.edges.push_back(std::move(bad));
  CycleReport r = validate_acyclic(g);
  EXPECT_FALSE(r.ok);
  EXPECT_GE(r.cycle.size(), 2u);
  EXPECT_NE(r.to_string().find("cycle"), std::string::npos);
}

TEST(ValidateAcyclic, ChainRespectsOrder) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2),
                                 spec_of(2, 0, 8, {4, 4, 5}, 1)};
  BaimGraph g = compose(build_all(specs, 3), {{0, 1, 2}}, 1, 1, RngStream(4));
  ASSERT_TRUE(validate_acyclic(g).ok);
  auto pos = [&](int l, int s) {
    for (std::size_t i = 0; i < g.topo_order.size(); ++i)
      if (g.topo_order[i].learner == l && g.topo_order[i].stage == s) return i;
    return g.topo_order.size();
  };
  // Chain (A,0)->(B,1), (B,1)->(C,2) must appear in that order.
  EXPECT_LT(pos(0, 0), pos(1, 1));
  EXPECT_LT(pos(1, 1), pos(2, 2));
}

TEST(BaimForward, SingleLearnerReduction) {
  // All edges deactivated, K=1: output equals that learner's own forward.
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1), spec_of(1, 0, 8, {5, 4, 4}, 1)};
  std::vector<Learner> learners = build_all(specs, 5);
  Learner standalone = learners[0];
  BaimGraph g = compose(std::move(learners), {{0, 1}}, 2, 1, RngStream(6));
  for (auto& e : g.edges) e.active = false;
  // Force selection of learner 0 via the gate bias.
  g.lsgates[0].W.value.fill(0);
  g.lsgates[0].b.value = Tensor({2}, {1.0, 0.0});

  Tensor x({8});
  RngStream rng(7);
  rng.fill_uniform(x, 0, 1);
  ForwardResult r = baim_forward(g, x, Mode::kEval);
  VaeForward ref = vae_forward(standalone, x, Mode::kEval);
  ASSERT_EQ(r.y.size(), ref.x_hat.size());
  for (long i = 0; i < r.y.size(); ++i) EXPECT_EQ(r.y[i], ref.x_hat[i]);
  // Only learner 0's stages executed.
  for (const auto& node : r.trace.executed) EXPECT_EQ(node.learner, 0);
}

TEST(BaimForward, ZeroProjectionsGiveWeightedMixture) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1), spec_of(1, 0, 8, {5, 4, 4}, 1),
                                 spec_of(2, 0, 8, {4, 3, 4}, 1)};
  std::vector<Learner> standalone = build_all(specs, 8);
  BaimGraph g = compose(build_all(specs, 8), {{0, 1, 2}}, 2, 2, RngStream(9));

  Tensor x({8});
  RngStream rng(10);
  rng.fill_uniform(x, 0, 1);
  ForwardResult r = baim_forward(g, x, Mode::kEval);

  RouteSection sec = lsgate_select(g.lsgates[0], x);
  Tensor expect({8});
  for (std::size_t k = 0; k < sec.local_indices.size(); ++k) {
    VaeForward f = vae_forward(standalone[static_cast<std::size_t>(sec.local_indices[k])], x, Mode::kEval);
    for (long i = 0; i < 8; ++i) expect[i] += sec.weights[static_cast<long>(k)] * f.x_hat[i];
  }
  for (long i = 0; i < 8; ++i) EXPECT_EQ(r.y[i], expect[i]);
}

TEST(BaimForward, TraceMatchesBruteForceClosure) {
  // Fig. 4 shape: three squads, K=2, some edges pruned away.
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1),  spec_of(1, 0, 8, {5, 4, 4}, 1),
                                 spec_of(2, 1, 8, {4, 3, 4}, 1),  spec_of(3, 1, 8, {6, 3, 5}, 1),
                                 spec_of(4, 2, 8, {5, 5, 4, 4}, 2), spec_of(5, 2, 8, {4, 4, 4}, 1)};
  BaimGraph g = compose(build_all(specs, 11), {{0, 1}, {2, 3}, {4, 5}}, 2, 2, RngStream(12));
  RngStream kill(13);
  for (auto& e : g.edges) e.active = kill.uniform() < 0.55;

  Tensor x({8});
  RngStream rng(14);
  rng.fill_uniform(x, 0, 1);

  for (int task = 0; task < 3; ++task) {
    ForwardResult r = baim_forward(g, x, Mode::kEval, task);
    std::vector<std::pair<int, int>> targets;
    for (const auto& [id, w] : r.trace.route.selected)
      for (int s = 0; s < g.learners[static_cast<std::size_t>(id)].spec.stage_count(); ++s)
        targets.push_back({id, s});
    std::set<std::pair<int, int>> expect = oracles::brute_force_closure(closure_edges(g), targets);
    std::set<std::pair<int, int>> got;
    for (const auto& node : r.trace.executed) got.insert({node.learner, node.stage});
    EXPECT_EQ(got, expect) << "task " << task;

    // Edge hits are exactly the active edges into the executed set.
    std::vector<int> expect_hits;
    for (const auto& e : g.edges)
      if (e.active && got.count({e.dst_learner, e.dst_stage})) expect_hits.push_back(e.id);
    EXPECT_EQ(r.trace.edge_hits, expect_hits);
  }
}

TEST(BaimForward, NoEdgesExecutesOnlySelected) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1), spec_of(1, 0, 8, {5, 4, 4}, 1),
                                 spec_of(2, 1, 8, {4, 3, 4}, 1), spec_of(3, 1, 8, {6, 3, 5}, 1)};
  BaimGraph g = compose(build_all(specs, 15), {{0, 1}, {2, 3}}, 2, 2, RngStream(16));
  for (auto& e : g.edges) e.active = false;
  Tensor x({8});
  RngStream rng(17);
  rng.fill_uniform(x, 0, 1);
  ForwardResult r = baim_forward(g, x, Mode::kEval, 1);
  for (const auto& node : r.trace.executed) EXPECT_GE(node.learner, 2);
  EXPECT_TRUE(r.trace.edge_hits.empty());
}

TEST(PruneStep, CountArithmetic) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2),
                                 spec_of(2, 0, 8, {4, 4, 5}, 2)};
  BaimGraph g = compose(build_all(specs, 18), {{0, 1, 2}}, 1, 2, RngStream(19));
  // Bring the active count to exactly 14 with distinct random scores.
  ASSERT_GE(g.edges.size(), 14u);
  RngStream rng(20);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    g.edges[i].active = i < 14;
    rng.fill_uniform(g.edges[i].W.value, -0.5, 0.5);
  }
  EXPECT_EQ(prune_step(g, 0.5), 7);
  EXPECT_EQ(g.active_edge_count(), 7);
  EXPECT_EQ(prune_step(g, 0.5), 4);  // ceil(3.5)
  EXPECT_EQ(g.active_edge_count(), 3);
  EXPECT_EQ(oracles::predicted_active_after(14, {0.5, 0.5}), 3);
}

TEST(PruneStep, MaxScoreSurvivesAnyFraction) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2)};
  BaimGraph g = compose(build_all(specs, 21), {{0, 1}}, 2, 2, RngStream(22));
  g.edges[3].W.value.fill(0.25);  // only nonzero edge
  prune_step(g, 0.99);
  EXPECT_EQ(g.active_edge_count(), 1);
  EXPECT_TRUE(g.edges[3].active);
}

TEST(PruneStep, InactiveNeverRepruned) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2)};
  BaimGraph g = compose(build_all(specs, 23), {{0, 1}}, 2, 2, RngStream(24));
  const int total = static_cast<int>(g.edges.size());
  int active = total;
  for (int round = 0; round < 4; ++round) {
    int killed = prune_step(g, 0.5);
    active -= killed;
    EXPECT_EQ(g.active_edge_count(), active);
    EXPECT_GE(active, 1);
  }
  EXPECT_THROW(prune_step(g, 0.0), config_error);
  EXPECT_THROW(prune_step(g, 1.0), config_error);
}

TEST(PruneStep, NoActiveEdgesIsNoop) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 5, 4}, 2), spec_of(1, 0, 8, {5, 4, 4}, 2)};
  BaimGraph g = compose(build_all(specs, 25), {{0, 1}}, 2, 2, RngStream(26));
  for (auto& e : g.edges) e.active = false;
  EXPECT_EQ(prune_step(g, 0.5), 0);
}

TEST(AddLearner, NewTaskLeavesOldOutputsBitIdentical) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1), spec_of(1, 0, 8, {5, 4, 4}, 1),
                                 spec_of(2, 0, 8, {4, 3, 4}, 1)};
  BaimGraph g = compose(build_all(specs, 27), {{0, 1, 2}}, 2, 2, RngStream(28));
  RngStream perturb(29);
  for (auto& e : g.edges) perturb.fill_uniform(e.W.value, -0.2, 0.2);

  std::vector<Tensor> inputs;
  RngStream rng(30);
  for (int i = 0; i < 8; ++i) {
    Tensor x({8});
    rng.fill_uniform(x, 0, 1);
    inputs.push_back(std::move(x));
  }
  std::vector<Tensor> before;
  for (const auto& x : inputs) before.push_back(baim_forward(g, x, Mode::kEval, 0).y);

  Learner extra = build_learner(spec_of(3, 1, 8, {5, 3, 5}, 1), RngStream(31));
  add_learner(g, std::move(extra), 1, RngStream(32));
  EXPECT_EQ(g.learner_count(), 4);
  EXPECT_EQ(g.task_count(), 2);
  EXPECT_EQ(g.tsgate.tasks(), 2);

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ForwardResult after = baim_forward(g, inputs[i], Mode::kEval, 0);
    EXPECT_EQ(after.trace.route.total_learners, 4);  // route vector grew
    for (long j = 0; j < before[i].size(); ++j) EXPECT_EQ(after.y[j], before[i][j]);
  }
}

TEST(AddLearner, CandidateDeltaMatchesOracle) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1), spec_of(1, 0, 8, {5, 4, 4}, 1)};
  BaimGraph g = compose(build_all(specs, 33), {{0, 1}}, 2, 2, RngStream(34));
  const std::size_t before = g.edges.size();

  LearnerSpec extra = spec_of(2, 0, 8, {5, 3, 5}, 1);
  add_learner(g, build_learner(extra, RngStream(35)), 0, RngStream(36));

  std::vector<LearnerSpec> all = specs;
  all.push_back(extra);
  const std::size_t expect_total = oracles::enumerate_candidate_edges(all, 2).size();
  EXPECT_EQ(g.edges.size(), expect_total);
  EXPECT_GT(g.edges.size(), before);
  EXPECT_EQ(edge_set(g), oracles::enumerate_candidate_edges(all, 2));
  // Squad and gate grew with it.
  EXPECT_EQ(g.squads[0].size(), 3u);
  EXPECT_EQ(g.lsgates[0].squad_size(), 3);
}

TEST(AddLearner, PreExistingParametersUntouched) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1), spec_of(1, 0, 8, {5, 4, 4}, 1)};
  BaimGraph g = compose(build_all(specs, 37), {{0, 1}}, 2, 2, RngStream(38));
  std::map<std::string, Tensor> snapshot;
  g.for_each_param([&](Parameter& p) { snapshot[p.id] = p.value; });

  add_learner(g, build_learner(spec_of(2, 1, 8, {5, 3, 5}, 1), RngStream(39)), 1, RngStream(40));

  g.for_each_param([&](Parameter& p) {
    auto it = snapshot.find(p.id);
    if (it == snapshot.end()) return;  // new parameter
    if (p.id == "tsgate/W" || p.id == "tsgate/b") {
      // Extended: old rows must be bit-identical.
      for (long i = 0; i < it->second.size(); ++i) EXPECT_EQ(p.value[i], it->second[i]);
    } else {
      ASSERT_TRUE(p.value.same_shape(it->second));
      for (long i = 0; i < it->second.size(); ++i) EXPECT_EQ(p.value[i], it->second[i]);
    }
  });
}

TEST(AddLearner, DuplicateIdRejected) {
  std::vector<LearnerSpec> specs{spec_of(0, 0, 8, {6, 4, 5}, 1), spec_of(1, 0, 8, {5, 4, 4}, 1)};
  BaimGraph g = compose(build_all(specs, 41), {{0, 1}}, 2, 2, RngStream(42));
  EXPECT_THROW(add_learner(g, build_learner(spec_of(1, 0, 8, {5, 3, 5}, 1), RngStream(43)), 0,
                           RngStream(44)),
               config_error);
  EXPECT_THROW(add_learner(g, build_learner(spec_of(5, 0, 8, {5, 3, 5}, 1), RngStream(43)), 0,
                           RngStream(44)),
               config_error);
  EXPECT_THROW(add_learner(g, build_learner(spec_of(2, 0, 8, {5, 3, 5}, 1), RngStream(43)), 7,
                           RngStream(44)),
               config_error);
}
