#ifndef BAIM_VERIFICATION_HPP
#define BAIM_VERIFICATION_HPP

#include <string>
#include <vector>

#include "baim/forward.hpp"
#include "baim/gradcheck.hpp"
#include "baim/graph.hpp"
#include "baim/training.hpp"
#include "baim/types.hpp"

namespace baim {

// Composed graph used for end-to-end gradient verification: 3
// heterogeneous learners in one squad, 4 stages, h=2, K=2, with edge
// weights perturbed into a mid-training state so gradients flow across
// projections.
inline BaimGraph gradcheck_graph(std::uint64_t seed) {
  const int input_dim = 20;
  std::vector<LearnerSpec> specs(3);
  specs[0] = {0, 0, input_dim, {12, 5, 10}, 5, 1};
  specs[1] = {1, 0, input_dim, {10, 4, 8}, 4, 1};
  specs[2] = {2, 0, input_dim, {14, 6, 11}, 6, 1};
  std::vector<Learner> learners;
  for (const auto& s : specs) learners.push_back(build_learner(s, RngStream(seed)));
  BaimGraph g = compose(std::move(learners), {{0, 1, 2}}, 2, 2, RngStream(seed));
  RngStream perturb = RngStream(seed).fork(0x9AD);
  for (auto& e : g.edges) perturb.fill_uniform(e.W.value, -0.15, 0.15);
  return g;
}

struct GradCheckReport {
  int checked = 0;
  real max_rel_err = real(0);
  real tolerance = real(1e-4);
  bool pass = false;
};

// Compares reverse-mode gradients of the full training objective (routed
// ELBO + TSGate CE + balance term, train mode with replayed noise)
// against central finite differences on randomly sampled parameter
// entries. eps = 1e-5, rel-err tolerance 1e-4, intended for fp64 builds.
inline GradCheckReport composed_gradcheck(std::uint64_t seed, int sample_count = 120,
                                          real eps = real(1e-5), real tolerance = real(1e-4)) {
  BaimGraph g = gradcheck_graph(seed);
  RngStream data_rng = RngStream(seed).fork(0xDA7A);
  Tensor x({static_cast<long>(g.input_dim())});
  data_rng.fill_uniform(x, 0.02, 0.98);
  const std::uint64_t noise_seed = data_rng.next_u64();

  // Deterministic under repeated evaluation: the noise stream is rebuilt
  // per call, so the reparameterization draws replay exactly.
  auto loss_value = [&]() -> real {
    RngStream noise(noise_seed);
    Tape tape;
    SampleLossNodes nodes = sample_loss_nodes(tape, g, x, 0, real(1), true, Mode::kTrain, &noise);
    int total = tape.add(tape.add(nodes.elbo, nodes.ce), tape.scale(nodes.balance, real(0.1)));
    return tape.scalar_value(total);
  };

  // One reverse pass accumulates every analytic gradient.
  g.for_each_param([](Parameter& p) {
    p.trainable = true;
    p.zero_grad();
  });
  {
    RngStream noise(noise_seed);
    Tape tape;
    SampleLossNodes nodes = sample_loss_nodes(tape, g, x, 0, real(1), true, Mode::kTrain, &noise);
    int total = tape.add(tape.add(nodes.elbo, nodes.ce), tape.scale(nodes.balance, real(0.1)));
    tape.backward(total);
  }

  std::vector<Parameter*> params;
  g.for_each_param([&](Parameter& p) { params.push_back(&p); });

  GradCheckReport report;
  report.tolerance = tolerance;
  RngStream pick = RngStream(seed).fork(0x71CC);
  for (int k = 0; k < sample_count; ++k) {
    Parameter& p = *params[static_cast<std::size_t>(pick.uniform_index(static_cast<long>(params.size())))];
    const long i = pick.uniform_index(p.value.size());
    const Tensor fd = finite_diff_grad(loss_value, p, {i}, eps);
    const real err = grad_rel_err(p.grad[i], fd[0]);
    report.max_rel_err = std::max(report.max_rel_err, err);
    report.checked += 1;
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace baim

#endif  // BAIM_VERIFICATION_HPP
