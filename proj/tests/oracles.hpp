// Independent brute-force oracles for the test suites. These re-derive
// expected values from first principles and deliberately avoid calling
// the library paths they are used to check.
#ifndef BAIM_TESTS_ORACLES_HPP
#define BAIM_TESTS_ORACLES_HPP

#include <cmath>
#include <set>
#include <tuple>
#include <vector>

#include "baim/learner.hpp"
#include "baim/types.hpp"

namespace oracles {

// (src learner, src stage, dst learner, dst stage)
using EdgeTuple = std::tuple<int, int, int, int>;

// Candidate-edge enumeration straight from the connection rule: stages i
// of learner a may project into stage j of learner b != a whenever
// 0 <= j-i <= h, j is not b's latent stage, same-depth pairs only run
// lower id -> higher id, and input spaces match.
inline std::set<EdgeTuple> enumerate_candidate_edges(const std::vector<baim::LearnerSpec>& specs,
                                                     int height) {
  std::set<EdgeTuple> out;
  for (const auto& sa : specs)
    for (const auto& sb : specs) {
      if (sa.learner_id == sb.learner_id) continue;
      if (sa.input_dim != sb.input_dim) continue;
      for (int i = 0; i < sa.stage_count(); ++i)
        for (int j = 0; j < sb.stage_count(); ++j) {
          if (j - i < 0 || j - i > height) continue;
          if (j == sb.stage_of_latent) continue;
          if (i == j && sa.learner_id > sb.learner_id) continue;
          out.insert({sa.learner_id, i, sb.learner_id, j});
        }
    }
  return out;
}

// Naive fixpoint reachability over (learner, stage) nodes: a target needs
// its same-learner predecessor and the source of every active edge into
// it. Iterates the whole edge list until nothing changes.
struct ClosureEdge {
  int src_learner, src_stage, dst_learner, dst_stage;
  bool active;
};

inline std::set<std::pair<int, int>> brute_force_closure(
    const std::vector<ClosureEdge>& edges, const std::vector<std::pair<int, int>>& targets) {
  std::set<std::pair<int, int>> need(targets.begin(), targets.end());
  bool changed = true;
  while (changed) {
    changed = false;
    std::set<std::pair<int, int>> next = need;
    for (const auto& [l, s] : need) {
      if (s > 0) next.insert({l, s - 1});
      for (const auto& e : edges)
        if (e.active && e.dst_learner == l && e.dst_stage == s)
          next.insert({e.src_learner, e.src_stage});
    }
    if (next.size() != need.size()) {
      need = std::move(next);
      changed = true;
    }
  }
  return need;
}

// Closed-form first Adam step from zero moments.
inline double adam_first_step_delta(double grad, double lr, double beta1 = 0.9,
                                    double beta2 = 0.999, double eps = 1e-8) {
  const double m = (1 - beta1) * grad;
  const double v = (1 - beta2) * grad * grad;
  const double mhat = m / (1 - beta1);
  const double vhat = v / (1 - beta2);
  return -lr * mhat / (std::sqrt(vhat) + eps);
}

// Iterated prune-count arithmetic for a schedule of fractions.
inline int predicted_active_after(int active, const std::vector<double>& fractions) {
  for (double f : fractions) {
    if (active == 0) break;
    active -= static_cast<int>(std::ceil(f * active));
  }
  return active;
}

}  // namespace oracles

#endif  // BAIM_TESTS_ORACLES_HPP
