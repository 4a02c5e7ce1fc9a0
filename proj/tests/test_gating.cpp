#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "baim/gating.hpp"

using namespace baim;

// Gate with zero W: logits equal the bias, so tests can pin them exactly.
static TsGate ts_with_logits(std::vector<real> logits, int input_dim = 4) {
  TsGate g;
  const long m = static_cast<long>(logits.size());
  g.W = make_zero_param("tsgate/W", {m, input_dim});
  g.b = Parameter("tsgate/b", Tensor({m}, std::move(logits)));
  return g;
}

static LsGate ls_with_logits(std::vector<real> logits, int k, int input_dim = 4) {
  LsGate g;
  const long n = static_cast<long>(logits.size());
  g.squad_id = 0;
  g.W = make_zero_param("lsgate0/W", {n, input_dim});
  g.b = Parameter("lsgate0/b", Tensor({n}, std::move(logits)));
  g.top_k = k;
  return g;
}

static const Tensor kX = Tensor({4}, {0.1, 0.2, 0.3, 0.4});

TEST(TsGate, SingleTask) {
  TsGate g = ts_with_logits({0.7});
  auto [task, probs] = tsgate_route(g, kX);
  EXPECT_EQ(task, 0);
  EXPECT_DOUBLE_EQ(probs[0], 1.0);
}

TEST(TsGate, TieBreaksToLowestIndex) {
  TsGate g = ts_with_logits({1.0, 1.0, 1.0});
  auto [task, probs] = tsgate_route(g, kX);
  EXPECT_EQ(task, 0);
  EXPECT_NEAR(probs[0], 1.0 / 3, 1e-12);
}

TEST(TsGate, ArgmaxByInspection) {
  TsGate g = ts_with_logits({0.1, 2.3, -1.0});
  auto [task, probs] = tsgate_route(g, kX);
  EXPECT_EQ(task, 1);
  EXPECT_GT(probs[1], probs[0]);
}

TEST(TsGate, OverrideForcesTask) {
  TsGate g = ts_with_logits({0.1, 2.3, -1.0});
  auto [task, probs] = tsgate_route(g, kX, 2);
  EXPECT_EQ(task, 2);
  EXPECT_THROW(tsgate_route(g, kX, 3), config_error);
  EXPECT_THROW(tsgate_route(g, kX, -1), config_error);
}

TEST(LsGate, RenormalizedSoftmaxByHand) {
  LsGate g = ls_with_logits({2.0, 1.0, 0.5}, 2);
  RouteSection sec = lsgate_select(g, kX);
  ASSERT_EQ(sec.local_indices.size(), 2u);
  EXPECT_EQ(sec.local_indices[0], 0);
  EXPECT_EQ(sec.local_indices[1], 1);
  const double e2 = std::exp(2.0), e1 = std::exp(1.0);
  EXPECT_NEAR(sec.weights[0], e2 / (e2 + e1), 1e-10);
  EXPECT_NEAR(sec.weights[1], e1 / (e2 + e1), 1e-10);
  EXPECT_NEAR(sec.weights[0], 0.7311, 5e-5);
  EXPECT_NEAR(sec.weights[1], 0.2689, 5e-5);
}

TEST(LsGate, EqualLogitsTieBreak) {
  LsGate g = ls_with_logits({0.3, 0.3, 0.3}, 2);
  RouteSection sec = lsgate_select(g, kX);
  EXPECT_EQ(sec.local_indices[0], 0);
  EXPECT_EQ(sec.local_indices[1], 1);
  EXPECT_DOUBLE_EQ(sec.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(sec.weights[1], 0.5);
}

TEST(LsGate, FullKIsDenseSoftmax) {
  LsGate g = ls_with_logits({1.0, -0.5, 0.25}, 3);
  RouteSection sec = lsgate_select(g, kX);
  Tensor dense = Tape::softmax_value(Tensor({3}, {1.0, -0.5, 0.25}));
  for (long i = 0; i < 3; ++i) EXPECT_NEAR(sec.weights[i], dense[i], 1e-12);
}

TEST(LsGate, KAboveSquadSizeRejected) {
  EXPECT_THROW(
      {
        RngStream rng(1);
        make_lsgate(0, 3, 4, 4, rng);
      },
      config_error);
  LsGate g = ls_with_logits({1.0, 2.0}, 2);
  g.top_k = 3;
  EXPECT_THROW(lsgate_select(g, kX), config_error);
}

TEST(AssembleRoute, OffsetArithmetic) {
  // Squads of sizes [3,4,3]; task 1 selecting squad-local {0,2}.
  std::vector<std::vector<int>> squads{{0, 1, 2}, {3, 4, 5, 6}, {7, 8, 9}};
  RouteSection sec;
  sec.local_indices = {0, 2};
  sec.weights = Tensor({2}, {0.6, 0.4});
  SparseRoute route = assemble_route(1, sec, squads);
  EXPECT_EQ(route.total_learners, 10);
  ASSERT_EQ(route.selected.size(), 2u);
  EXPECT_EQ(route.selected[0].first, 3);
  EXPECT_EQ(route.selected[1].first, 5);
  std::vector<real> dense = route.dense();
  EXPECT_DOUBLE_EQ(dense[3], 0.6);
  EXPECT_DOUBLE_EQ(dense[5], 0.4);
  double sum = std::accumulate(dense.begin(), dense.end(), 0.0);
  EXPECT_NEAR(sum, 1.0, 1e-12);
  int nonzeros = 0;
  for (real v : dense) nonzeros += v != 0 ? 1 : 0;
  EXPECT_EQ(nonzeros, 2);
}

TEST(AssembleRoute, SingleSelectionIsOneHot) {
  std::vector<std::vector<int>> squads{{0, 1}};
  RouteSection sec;
  sec.local_indices = {1};
  sec.weights = Tensor({1}, {1.0});
  SparseRoute route = assemble_route(0, sec, squads);
  std::vector<real> dense = route.dense();
  EXPECT_DOUBLE_EQ(dense[1], 1.0);
  EXPECT_DOUBLE_EQ(dense[0], 0.0);
}

TEST(Gating, SelectionShiftInvariance) {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(6));
    const int k = 1 + static_cast<int>(rng.uniform_index(n));
    std::vector<real> logits(static_cast<std::size_t>(n));
    for (auto& v : logits) v = rng.uniform(-2, 2);
    const real shift = rng.uniform(-5, 5);
    std::vector<real> shifted = logits;
    for (auto& v : shifted) v += shift;
    Tensor a({n}, std::vector<real>(logits));
    Tensor b({n}, std::vector<real>(shifted));
    EXPECT_EQ(top_k_indices(a, k), top_k_indices(b, k));
  }
}

TEST(Gating, RouteInvariantsFuzz) {
  RngStream rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int tasks = 1 + static_cast<int>(rng.uniform_index(4));
    std::vector<std::vector<int>> squads(static_cast<std::size_t>(tasks));
    int next_id = 0;
    for (auto& squad : squads) {
      const int size = 1 + static_cast<int>(rng.uniform_index(5));
      for (int i = 0; i < size; ++i) squad.push_back(next_id++);
    }
    const int task = static_cast<int>(rng.uniform_index(tasks));
    const int n = static_cast<int>(squads[static_cast<std::size_t>(task)].size());
    const int k = 1 + static_cast<int>(rng.uniform_index(n));
    LsGate gate;
    gate.squad_id = task;
    RngStream grng(rng.next_u64());
    gate.W = make_param("lsgate/W", {n, 4}, grng);
    gate.b = make_param("lsgate/b", {n}, grng);
    gate.top_k = k;
    Tensor x({4});
    rng.fill_uniform(x, 0, 1);
    SparseRoute route = assemble_route(task, lsgate_select(gate, x), squads);

    ASSERT_EQ(static_cast<int>(route.selected.size()), k);
    real sum = 0;
    for (const auto& [id, w] : route.selected) {
      EXPECT_GT(w, 0);
      sum += w;
      const auto& squad = squads[static_cast<std::size_t>(task)];
      EXPECT_NE(std::find(squad.begin(), squad.end(), id), squad.end());
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
    int nonzeros = 0;
    for (real v : route.dense()) nonzeros += v != 0 ? 1 : 0;
    EXPECT_EQ(nonzeros, k);
  }
}
