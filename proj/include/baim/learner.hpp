#ifndef BAIM_LEARNER_HPP
#define BAIM_LEARNER_HPP

#include <map>
#include <string>
#include <vector>

#include "baim/parameter.hpp"
#include "baim/rng.hpp"
#include "baim/tape.hpp"
#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

enum class Mode { kTrain, kEval };

// Architecture of one edge learner: a chain of S stages over flattened
// images. Stage stage_of_latent holds the reparameterized bottleneck;
// stage S-1 reconstructs back to input_dim through a sigmoid. Widths and
// latent size are where edge heterogeneity lives.
struct LearnerSpec {
  int learner_id = 0;
  int task_id = 0;
  int input_dim = 0;
  std::vector<int> stage_widths;  // S-1 entries; the latent slot equals latent_dim
  int latent_dim = 0;
  int stage_of_latent = 0;

  int stage_count() const { return static_cast<int>(stage_widths.size()) + 1; }

  void validate() const {
    if (learner_id < 0) throw config_error("learner spec: negative learner_id");
    if (task_id < 0) throw config_error("learner spec: negative task_id");
    if (input_dim <= 0) throw config_error("learner spec: input_dim must be positive");
    if (stage_count() < 3) throw config_error("learner spec: needs at least 3 stages");
    for (int w : stage_widths)
      if (w <= 0) throw config_error("learner spec: stage widths must be positive");
    if (latent_dim <= 0) throw config_error("learner spec: latent_dim must be positive");
    if (stage_of_latent <= 0 || stage_of_latent >= stage_count() - 1)
      throw config_error("learner spec: stage_of_latent must be strictly inside (0, S-1)");
    if (stage_widths[static_cast<std::size_t>(stage_of_latent)] != latent_dim)
      throw config_error("learner spec: stage_widths at the latent slot must equal latent_dim");
  }

  // Output dimension of stage s.
  int stage_out_dim(int s) const {
    if (s == stage_count() - 1) return input_dim;
    if (s == stage_of_latent) return latent_dim;
    return stage_widths[static_cast<std::size_t>(s)];
  }

  // Dimension of the input fed to stage s (before any injections).
  int stage_in_dim(int s) const { return s == 0 ? input_dim : stage_out_dim(s - 1); }

  bool operator==(const LearnerSpec&) const = default;
};

// One edge-trained expert. Parameter ids are prefixed with the learner id
// so they stay unique when learners are composed into one graph.
struct Learner {
  LearnerSpec spec;
  std::vector<Parameter> stage_w;  // empty tensors at the latent slot
  std::vector<Parameter> stage_b;
  Parameter mu_w, mu_b, logvar_w, logvar_b;
  std::map<std::string, std::string> meta;  // provenance (seeds etc.), round-tripped

  std::string prefix() const { return "learner" + std::to_string(spec.learner_id); }

  // All parameters in canonical (serialization) order.
  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (int s = 0; s < spec.stage_count(); ++s) {
      if (s == spec.stage_of_latent) {
        fn(mu_w);
        fn(mu_b);
        fn(logvar_w);
        fn(logvar_b);
      } else {
        fn(stage_w[static_cast<std::size_t>(s)]);
        fn(stage_b[static_cast<std::size_t>(s)]);
      }
    }
  }
};

inline Learner build_learner(const LearnerSpec& spec, const RngStream& rng) {
  spec.validate();
  Learner l;
  l.spec = spec;
  // The learner id salts the stream: same seed, different ids, different weights.
  RngStream local = rng.fork(0x10000 + static_cast<std::uint64_t>(spec.learner_id));
  const std::string p = l.prefix();
  const int S = spec.stage_count();
  l.stage_w.resize(static_cast<std::size_t>(S));
  l.stage_b.resize(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    const long in = spec.stage_in_dim(s);
    const long out = spec.stage_out_dim(s);
    if (s == spec.stage_of_latent) {
      l.mu_w = make_param(p + "/latent/mu_W", {out, in}, local);
      l.mu_b = make_param(p + "/latent/mu_b", {out}, local);
      l.logvar_w = make_param(p + "/latent/logvar_W", {out, in}, local);
      l.logvar_b = make_param(p + "/latent/logvar_b", {out}, local);
    } else {
      l.stage_w[static_cast<std::size_t>(s)] =
          make_param(p + "/stage" + std::to_string(s) + "/W", {out, in}, local);
      l.stage_b[static_cast<std::size_t>(s)] =
          make_param(p + "/stage" + std::to_string(s) + "/b", {out}, local);
    }
  }
  return l;
}

// Tape handles produced by one stage evaluation.
struct StageNodes {
  int out = -1;       // what the next stage consumes (z for the latent stage)
  int exported = -1;  // what projection edges read (mu for the latent stage)
  int mu = -1;
  int logvar = -1;
};

// activation(W_s (input + injections) + b_s); ReLU on hidden stages,
// sigmoid on the output stage, reparameterization at the latent stage.
// `input` must already include any injections (summed by the caller).
inline StageNodes learner_stage_nodes(Tape& tape, Learner& l, int s, int input, Mode mode,
                                      RngStream* rng) {
  StageNodes r;
  const auto& spec = l.spec;
  if (s == spec.stage_of_latent) {
    r.mu = tape.linear(tape.leaf(l.mu_w), tape.leaf(l.mu_b), input);
    r.logvar = tape.linear(tape.leaf(l.logvar_w), tape.leaf(l.logvar_b), input);
    if (mode == Mode::kTrain) {
      if (rng == nullptr) throw config_error("train-mode forward needs an rng stream");
      int eps = tape.constant(rng->normal_vec(spec.latent_dim));
      int sigma = tape.exp(tape.scale(r.logvar, real(0.5)));
      r.out = tape.add(r.mu, tape.mul(sigma, eps));
    } else {
      r.out = r.mu;
    }
    r.exported = r.mu;  // sampling noise stays local to the learner
  } else {
    int a = tape.linear(tape.leaf(l.stage_w[static_cast<std::size_t>(s)]),
                        tape.leaf(l.stage_b[static_cast<std::size_t>(s)]), input);
    r.out = (s == spec.stage_count() - 1) ? tape.sigmoid(a) : tape.relu(a);
    r.exported = r.out;
  }
  return r;
}

// Single-stage evaluation with an optional additive injection.
inline Tensor stage_forward(Learner& l, int s, const Tensor& stage_input, const Tensor& injected,
                            Mode mode = Mode::kEval, RngStream* rng = nullptr) {
  if (s < 0 || s >= l.spec.stage_count()) throw config_error("stage_forward: stage out of range");
  if (stage_input.size() != l.spec.stage_in_dim(s))
    throw dim_error("stage_forward: input dim " + stage_input.shape_str() + " does not match stage " +
                    std::to_string(s));
  Tape tape;
  int in = tape.constant(stage_input);
  if (!injected.empty()) {
    require_same_shape(stage_input, injected, "stage_forward injection");
    in = tape.add(in, tape.constant(injected));
  }
  StageNodes n = learner_stage_nodes(tape, l, s, in, mode, rng);
  return tape.value(n.out);
}

struct VaeForward {
  Tensor x_hat;
  Tensor mu;
  Tensor logvar;
  Tensor z;
  std::map<int, Tensor> stage_features;  // exported feature per executed stage
};

struct VaeForwardNodes {
  int x_hat = -1;
  int mu = -1;
  int logvar = -1;
  int z = -1;
  std::vector<int> exported;  // per stage
};

inline VaeForwardNodes vae_forward_nodes(Tape& tape, Learner& l, int x, Mode mode, RngStream* rng) {
  VaeForwardNodes out;
  int cur = x;
  for (int s = 0; s < l.spec.stage_count(); ++s) {
    StageNodes n = learner_stage_nodes(tape, l, s, cur, mode, rng);
    out.exported.push_back(n.exported);
    if (s == l.spec.stage_of_latent) {
      out.mu = n.mu;
      out.logvar = n.logvar;
      out.z = n.out;
    }
    cur = n.out;
  }
  out.x_hat = cur;
  return out;
}

inline void require_unit_range(const Tensor& x, const char* what) {
  for (long i = 0; i < x.size(); ++i)
    if (!(x[i] >= real(0) && x[i] <= real(1)))
      throw numeric_error(std::string(what) + ": input values must lie in [0,1]");
}

inline VaeForward vae_forward(Learner& l, const Tensor& x, Mode mode, RngStream* rng = nullptr) {
  if (x.size() != l.spec.input_dim)
    throw dim_error("vae_forward: input size does not match learner input_dim");
  require_unit_range(x, "vae_forward");
  Tape tape;
  VaeForwardNodes n = vae_forward_nodes(tape, l, tape.constant(x), mode, rng);
  VaeForward f;
  f.x_hat = tape.value(n.x_hat);
  f.mu = tape.value(n.mu);
  f.logvar = tape.value(n.logvar);
  f.z = tape.value(n.z);
  for (int s = 0; s < l.spec.stage_count(); ++s)
    f.stage_features[s] = tape.value(n.exported[static_cast<std::size_t>(s)]);
  return f;
}

// beta-ELBO: pixel-summed BCE plus beta * KL(q(z|x) || N(0,I)).
inline int elbo_loss_nodes(Tape& tape, const Tensor& x, int x_hat, int mu, int logvar, real beta) {
  int bce = tape.bce_sum(x, x_hat);
  if (beta == real(0)) return bce;
  return tape.add(bce, tape.scale(tape.kl_sum(mu, logvar), beta));
}

inline real elbo_loss(const Tensor& x, const VaeForward& fwd, real beta) {
  if (beta < real(0)) throw config_error("elbo_loss: beta must be non-negative");
  Tape tape;
  int x_hat = tape.constant(fwd.x_hat);
  int mu = tape.constant(fwd.mu);
  int logvar = tape.constant(fwd.logvar);
  return tape.scalar_value(elbo_loss_nodes(tape, x, x_hat, mu, logvar, beta));
}

}  // namespace baim

#endif  // BAIM_LEARNER_HPP
