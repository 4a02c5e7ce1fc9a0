#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "baim/gradcheck.hpp"
#include "baim/linalg.hpp"
#include "baim/rng.hpp"
#include "baim/tape.hpp"

using namespace baim;

static_assert(sizeof(real) == 8, "numcore verification tests require the fp64 build");

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6);
  EXPECT_EQ(t.rows(), 2);
  EXPECT_EQ(t.cols(), 3);
  t.at(1, 2) = 5;
  EXPECT_EQ(t[5], 5);
  EXPECT_THROW(Tensor({2}, {1, 2, 3}), dim_error);
}

TEST(ApplyLinear, IdentityCase) {
  Tensor W({2, 2}, {1, 0, 0, 1});
  Tensor b({2}, {0, 0});
  Tensor x({2}, {3, 4});
  Tensor y = apply_linear_value(W, b, x);
  EXPECT_EQ(y[0], 3);
  EXPECT_EQ(y[1], 4);
}

TEST(ApplyLinear, HandComputedProduct) {
  Tensor W({2, 2}, {1, 1, 0, 2});
  Tensor b({2}, {1, 0});
  Tensor x({2}, {1, 1});
  Tensor y = apply_linear_value(W, b, x);
  EXPECT_DOUBLE_EQ(y[0], 3);
  EXPECT_DOUBLE_EQ(y[1], 2);
}

TEST(ApplyLinear, NanWeightIsError) {
  Tensor W({2, 2}, {1, std::nan(""), 0, 2});
  Tensor b({2}, {0, 0});
  Tensor x({2}, {1, 1});
  EXPECT_THROW(apply_linear_value(W, b, x), numeric_error);
}

TEST(ApplyLinear, ShapeMismatch) {
  Tensor W({2, 3});
  Tensor b({2});
  Tensor x({2});
  EXPECT_THROW(apply_linear_value(W, b, x), dim_error);
}

TEST(Backward, SumGivesOnes) {
  Parameter p("p", Tensor({3}, {1, 2, 3}));
  Tape tape;
  int loss = tape.sum(tape.leaf(p));
  tape.backward(loss);
  EXPECT_EQ(p.grad[0], 1);
  EXPECT_EQ(p.grad[1], 1);
  EXPECT_EQ(p.grad[2], 1);
}

TEST(Backward, QuadraticClosedForm) {
  Parameter p("p", Tensor({2}, {1, 2}));
  Tape tape;
  int x = tape.leaf(p);
  int loss = tape.sum(tape.mul(x, x));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(p.grad[0], 2);
  EXPECT_DOUBLE_EQ(p.grad[1], 4);
}

TEST(Backward, FrozenParameterUntouched) {
  Parameter p("p", Tensor({2}, {1, 2}));
  p.trainable = false;
  p.grad[0] = 42;  // sentinel: backward must not touch it
  Tape tape;
  int loss = tape.sum(tape.leaf(p));
  tape.backward(loss);
  EXPECT_EQ(p.grad[0], 42);
  EXPECT_EQ(p.grad[1], 0);
}

TEST(Backward, StaleTapeError) {
  Parameter p("p", Tensor({2}, {1, 2}));
  Tape tape;
  int loss = tape.sum(tape.leaf(p));
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), tape_error);
  tape.reset();
  int loss2 = tape.sum(tape.leaf(p));
  EXPECT_NO_THROW(tape.backward(loss2));
}

TEST(Backward, NonScalarLossRejected) {
  Parameter p("p", Tensor({2}, {1, 2}));
  Tape tape;
  int x = tape.leaf(p);
  EXPECT_THROW(tape.backward(x), tape_error);
}

TEST(FiniteDiff, SquareClosedForm) {
  Parameter p("p", Tensor({1}, {3}));
  auto f = [&]() { return p.value[0] * p.value[0]; };
  Tensor g = finite_diff_grad(f, p, {0}, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, ConstantIsZero) {
  Parameter p("p", Tensor({1}, {3}));
  auto f = [&]() { return real(7); };
  Tensor g = finite_diff_grad(f, p, {0}, 1e-5);
  EXPECT_EQ(g[0], 0);
}

TEST(FiniteDiff, NonDeterministicFlagged) {
  Parameter p("p", Tensor({1}, {3}));
  int calls = 0;
  auto f = [&]() { return static_cast<real>(++calls); };
  EXPECT_THROW(finite_diff_grad(f, p, {0}, 1e-5), numeric_error);
}

TEST(FiniteDiff, BadEpsRejected) {
  Parameter p("p", Tensor({1}, {3}));
  auto f = [&]() { return p.value[0]; };
  EXPECT_THROW(finite_diff_grad(f, p, {0}, 0), config_error);
}

// The central oracle: reverse-mode gradients of a randomly composed op
// graph match central finite differences to 1e-4 relative error.
TEST(GradCheck, RandomComposedGraph) {
  for (std::uint64_t seed : {11u, 23u, 51u}) {
    RngStream rng(seed);
    Parameter W = make_param("W", {4, 5}, rng);
    Parameter b = make_param("b", {4}, rng);
    Parameter mu_w = make_param("mw", {3, 4}, rng);
    Parameter mu_b = make_param("mb", {3}, rng);
    Parameter lv_w = make_param("lw", {3, 4}, rng);
    Parameter lv_b = make_param("lb", {3}, rng);
    Tensor x({5});
    rng.fill_uniform(x, 0.05, 0.95);
    Tensor target({4});
    rng.fill_uniform(target, 0.1, 0.9);
    Tensor eps_draw({3});
    rng.fill_normal(eps_draw);

    auto build = [&](Tape& tape) {
      int h = tape.relu(tape.linear(tape.leaf(W), tape.leaf(b), tape.constant(x)));
      int mu = tape.linear(tape.leaf(mu_w), tape.leaf(mu_b), h);
      int lv = tape.linear(tape.leaf(lv_w), tape.leaf(lv_b), h);
      int z = tape.add(mu, tape.mul(tape.exp(tape.scale(lv, 0.5)), tape.constant(eps_draw)));
      int probs = tape.subset_softmax(z, {0, 1, 2});
      int mixed = tape.mix(probs, {mu, lv, z});
      int sig = tape.sigmoid(tape.linear(tape.leaf(W), tape.leaf(b), tape.constant(x)));
      int loss = tape.bce_sum(target, sig);
      loss = tape.add(loss, tape.kl_sum(mu, lv));
      loss = tape.add(loss, tape.softmax_ce(mixed, 1));
      loss = tape.add(loss, tape.scale(tape.sum(tape.mul(mixed, mixed)), 0.5));
      return loss;
    };

    auto loss_value = [&]() {
      Tape tape;
      return tape.scalar_value(build(tape));
    };

    std::vector<Parameter*> params{&W, &b, &mu_w, &mu_b, &lv_w, &lv_b};
    for (Parameter* p : params) p->zero_grad();
    {
      Tape tape;
      tape.backward(build(tape));
    }
    RngStream pick(seed ^ 0xF00);
    for (int k = 0; k < 40; ++k) {
      Parameter& p = *params[static_cast<std::size_t>(pick.uniform_index(6))];
      long i = pick.uniform_index(p.value.size());
      Tensor fd = finite_diff_grad(loss_value, p, {i}, 1e-5);
      EXPECT_LE(grad_rel_err(p.grad[i], fd[0]), 1e-4)
          << "seed " << seed << " param " << p.id << " index " << i;
    }
  }
}

TEST(PsdSqrt, Identity) {
  Tensor I({2, 2}, {1, 0, 0, 1});
  Tensor R = psd_sqrt(I);
  EXPECT_NEAR(R.at(0, 0), 1, 1e-12);
  EXPECT_NEAR(R.at(1, 1), 1, 1e-12);
  EXPECT_NEAR(R.at(0, 1), 0, 1e-12);
}

TEST(PsdSqrt, Diagonal) {
  Tensor D({2, 2}, {4, 0, 0, 9});
  Tensor R = psd_sqrt(D);
  EXPECT_NEAR(R.at(0, 0), 2, 1e-10);
  EXPECT_NEAR(R.at(1, 1), 3, 1e-10);
}

TEST(PsdSqrt, ReconstructionOracle) {
  RngStream rng(7);
  const long d = 6;
  Tensor A({d, d});
  rng.fill_normal(A);
  Tensor S({d, d});
  mat_view(S) = mat_view(A).transpose() * mat_view(A);
  Tensor R = psd_sqrt(S);
  Tensor RR({d, d});
  mat_view(RR) = mat_view(R) * mat_view(R);
  for (long i = 0; i < d * d; ++i) EXPECT_NEAR(RR[i], S[i], 1e-6);
}

TEST(PsdSqrt, AsymmetricRejected) {
  Tensor S({2, 2}, {1, 0.5, 0, 1});
  EXPECT_THROW(psd_sqrt(S), numeric_error);
}

TEST(PsdSqrt, IndefiniteRejected) {
  Tensor S({2, 2}, {1, 0, 0, -1});
  EXPECT_THROW(psd_sqrt(S), numeric_error);
}

TEST(Rng, GoldenSequence) {
  // SplitMix64 with seed 42; frozen to pin cross-platform behavior.
  RngStream rng(42);
  const std::uint64_t a = rng.next_u64();
  const std::uint64_t b = rng.next_u64();
  RngStream again(42);
  EXPECT_EQ(again.next_u64(), a);
  EXPECT_EQ(again.next_u64(), b);
  EXPECT_NE(a, b);
  // Counter state fully determines the draw.
  RngStream jump(42);
  jump.counter = 1;
  EXPECT_EQ(jump.next_u64(), b);
}

TEST(Rng, UniformRangeAndDeterminism) {
  RngStream r1(9), r2(9);
  for (int i = 0; i < 1000; ++i) {
    double u = r1.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_EQ(u, r2.uniform());
  }
}

TEST(Rng, ForkIndependence) {
  RngStream base(5);
  RngStream f1 = base.fork(1);
  RngStream f2 = base.fork(2);
  EXPECT_NE(f1.next_u64(), f2.next_u64());
  RngStream f1b = base.fork(1);
  f1 = base.fork(1);
  EXPECT_EQ(f1.next_u64(), f1b.next_u64());
}

TEST(Rng, NormalMoments) {
  RngStream rng(123);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Tape, BitwiseDeterminism) {
  auto run = [] {
    RngStream rng(77);
    Parameter W = make_param("W", {8, 8}, rng);
    Parameter b = make_param("b", {8}, rng);
    Tensor x({8});
    rng.fill_uniform(x, 0, 1);
    Tape tape;
    int y = tape.sigmoid(tape.linear(tape.leaf(W), tape.leaf(b), tape.constant(x)));
    return tape.value(y);
  };
  Tensor y1 = run();
  Tensor y2 = run();
  for (long i = 0; i < y1.size(); ++i) EXPECT_EQ(y1[i], y2[i]);
}
