#ifndef BAIM_TRAINING_HPP
#define BAIM_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "baim/forward.hpp"
#include "baim/graph.hpp"
#include "baim/rng.hpp"
#include "baim/types.hpp"

namespace baim {

enum class Strategy { kFinetune, kFreeze, kScratch };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kFinetune: return "finetune";
    case Strategy::kFreeze: return "freeze";
    case Strategy::kScratch: return "scratch";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "finetune") return Strategy::kFinetune;
  if (name == "freeze") return Strategy::kFreeze;
  if (name == "scratch") return Strategy::kScratch;
  throw config_error("unknown strategy '" + name + "' (finetune|freeze|scratch)");
}

struct TrainConfig {
  Strategy strategy = Strategy::kFinetune;
  int epochs = 1;
  int batch_size = 32;
  real learning_rate = real(1e-3);
  real beta = real(1);
  std::vector<std::pair<int, real>> prune_schedule;  // (epoch, fraction), fired after that epoch
  real balance_coeff = real(0);
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw config_error("train config: epochs must be >= 1");
    if (batch_size < 1) throw config_error("train config: batch_size must be >= 1");
    if (!(learning_rate > real(0))) throw config_error("train config: learning_rate must be positive");
    if (beta < real(0)) throw config_error("train config: beta must be non-negative");
    int prev = 0;
    for (const auto& [epoch, fraction] : prune_schedule) {
      if (epoch < 1 || epoch >= epochs)
        throw config_error("train config: prune epochs must lie in [1, epochs)");
      if (epoch <= prev && prev != 0)
        throw config_error("train config: prune epochs must be strictly increasing");
      if (!(fraction > real(0) && fraction < real(1)))
        throw config_error("train config: prune fractions must lie in (0,1)");
      prev = epoch;
    }
  }
};

// Two rounds of 50% pruning at 40% and 70% of the run: keep-ratio 1/4.
inline std::vector<std::pair<int, real>> default_prune_schedule(int epochs) {
  int first = std::max(1, static_cast<int>(std::floor(0.4 * epochs)));
  int second = std::max(first + 1, static_cast<int>(std::floor(0.7 * epochs)));
  if (second >= epochs) return {};
  return {{first, real(0.5)}, {second, real(0.5)}};
}

// Row 0 is the pre-training state; test_loss is the mean routed ELBO on
// the common test split (teacher-forced, eval mode).
struct EpochMetrics {
  int epoch = 0;
  real train_loss = real(0);
  real test_loss = real(0);
  int active_edges = 0;
  real routing_accuracy = real(0);
};

struct Sample {
  Tensor x;
  int task = 0;
};
using Dataset = std::vector<Sample>;

// Parameter ids updated under each strategy. Scratch also re-randomizes
// every parameter from the seeded stream before returning the full set.
inline std::set<std::string> trainable_set(BaimGraph& g, Strategy strategy, const RngStream& rng) {
  std::set<std::string> inactive_edges;
  for (const auto& e : g.edges)
    if (!e.active) inactive_edges.insert(e.W.id);

  std::set<std::string> ids;
  switch (strategy) {
    case Strategy::kFinetune:
      g.for_each_param([&](Parameter& p) { ids.insert(p.id); });
      break;
    case Strategy::kFreeze:
      ids.insert(g.tsgate.W.id);
      ids.insert(g.tsgate.b.id);
      for (const auto& gate : g.lsgates) {
        ids.insert(gate.W.id);
        ids.insert(gate.b.id);
      }
      for (const auto& e : g.edges) ids.insert(e.W.id);
      break;
    case Strategy::kScratch: {
      RngStream reinit = rng.fork(0x5C4A7C8);
      g.for_each_param([&](Parameter& p) {
        init_uniform_fan(p.value, reinit);
        ids.insert(p.id);
      });
      break;
    }
  }
  for (const auto& id : inactive_edges) ids.erase(id);
  return ids;
}

inline void set_trainable_flags(BaimGraph& g, const std::set<std::string>& ids) {
  g.for_each_param([&](Parameter& p) { p.trainable = ids.count(p.id) > 0; });
}

// Adam with bias correction; per-parameter-id moment slots.
struct AdamState {
  struct Slot {
    Tensor m, v;
  };
  std::map<std::string, Slot> slots;
  long step_count = 0;
  real beta1 = real(0.9), beta2 = real(0.999), eps = real(1e-8);
};

inline void optimizer_step(const std::vector<Parameter*>& params, AdamState& state, real lr) {
  state.step_count += 1;
  const real t = static_cast<real>(state.step_count);
  const real c1 = real(1) - std::pow(state.beta1, t);
  const real c2 = real(1) - std::pow(state.beta2, t);
  for (Parameter* p : params) {
    auto& slot = state.slots[p->id];
    if (slot.m.empty()) {
      slot.m = Tensor(p->value.shape());
      slot.v = Tensor(p->value.shape());
    }
    for (long i = 0; i < p->value.size(); ++i) {
      const real g = p->grad[i];
      slot.m[i] = state.beta1 * slot.m[i] + (real(1) - state.beta1) * g;
      slot.v[i] = state.beta2 * slot.v[i] + (real(1) - state.beta2) * g * g;
      const real mhat = slot.m[i] / c1;
      const real vhat = slot.v[i] / c2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

struct EvalResult {
  real loss = real(0);              // mean routed ELBO, teacher forced
  real routing_accuracy = real(0);  // TSGate argmax vs labels
};

inline EvalResult evaluate_graph(BaimGraph& g, const Dataset& data, real beta) {
  if (data.empty()) throw config_error("evaluate: empty dataset");
  EvalResult r;
  int hits = 0;
  for (const auto& sample : data) {
    Tape tape;
    SampleLossNodes nodes =
        sample_loss_nodes(tape, g, sample.x, sample.task, beta, false, Mode::kEval, nullptr);
    r.loss += tape.scalar_value(nodes.elbo);
    auto [task, probs] = tsgate_route(g.tsgate, sample.x);
    hits += task == sample.task ? 1 : 0;
  }
  r.loss /= static_cast<real>(data.size());
  r.routing_accuracy = static_cast<real>(hits) / static_cast<real>(data.size());
  return r;
}

// Shared mini-batch loop. Per batch, the objective is
//   sum_t mean_{samples of t} elbo + mean ce + balance_coeff * mean balance,
// teacher-forced on task labels; only parameters in `trainable` step.
inline std::vector<EpochMetrics> train_loop(BaimGraph& g, const Dataset& train, const Dataset& test,
                                            const TrainConfig& cfg,
                                            const std::set<std::string>& trainable) {
  cfg.validate();
  if (train.empty() || test.empty()) throw config_error("train: datasets must be non-empty");
  set_trainable_flags(g, trainable);

  std::vector<Parameter*> step_params;
  g.for_each_param([&](Parameter& p) {
    if (p.trainable) step_params.push_back(&p);
  });

  AdamState adam;
  RngStream run_rng = RngStream(cfg.seed).fork(0x7EA1);
  RngStream noise_rng = run_rng.fork(1);

  std::vector<EpochMetrics> metrics;
  auto record = [&](int epoch, real train_loss) {
    EvalResult ev = evaluate_graph(g, test, cfg.beta);
    metrics.push_back({epoch, train_loss, ev.loss, g.active_edge_count(), ev.routing_accuracy});
  };
  record(0, evaluate_graph(g, train, cfg.beta).loss);

  std::vector<std::size_t> idx(train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream shuffle_rng = run_rng.fork(0x100 + static_cast<std::uint64_t>(epoch));
    shuffle(idx, shuffle_rng);

    real epoch_loss = 0;
    int batches = 0;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const real inv_batch = real(1) / static_cast<real>(end - start);
      std::map<int, int> task_counts;
      for (std::size_t k = start; k < end; ++k) task_counts[train[idx[k]].task] += 1;

      g.for_each_param([](Parameter& p) { p.zero_grad(); });
      real batch_loss = 0;
      for (std::size_t k = start; k < end; ++k) {
        const Sample& sample = train[idx[k]];
        Tape tape;
        SampleLossNodes nodes;
        try {
          nodes = sample_loss_nodes(tape, g, sample.x, sample.task, cfg.beta,
                                    cfg.balance_coeff != real(0), Mode::kTrain, &noise_rng);
        } catch (const numeric_error& e) {
          throw numeric_error(std::string("training diverged (") + e.what() +
                              "); learning rate likely too high");
        }
        int total = tape.add(
            tape.scale(nodes.elbo, real(1) / static_cast<real>(task_counts[sample.task])),
            tape.scale(nodes.ce, inv_batch));
        if (nodes.balance >= 0)
          total = tape.add(total, tape.scale(nodes.balance, cfg.balance_coeff * inv_batch));
        batch_loss += tape.scalar_value(total);
        tape.backward(total);
      }
      if (!std::isfinite(batch_loss))
        throw numeric_error("training diverged (NaN loss); learning rate likely too high");
      optimizer_step(step_params, adam, cfg.learning_rate);
      epoch_loss += batch_loss;
      batches += 1;
    }

    for (const auto& [prune_epoch, fraction] : cfg.prune_schedule)
      if (prune_epoch == epoch) prune_step(g, fraction);

    record(epoch, epoch_loss / static_cast<real>(batches));
  }
  return metrics;
}

// Cloud-side training under one of the three strategies.
inline std::vector<EpochMetrics> train_baim(BaimGraph& g, const Dataset& train, const Dataset& test,
                                            const TrainConfig& cfg) {
  cfg.validate();
  std::set<int> tasks_seen;
  for (const auto& s : train) tasks_seen.insert(s.task);
  for (int t = 0; t < g.task_count(); ++t)
    if (!tasks_seen.count(t))
      throw config_error("train_baim: training data does not span task " + std::to_string(t));
  std::set<std::string> trainable = trainable_set(g, cfg.strategy, RngStream(cfg.seed));
  return train_loop(g, train, test, cfg, trainable);
}

// Continual-learning step: after add_learner, fit only the gate network
// (TSGate plus the new squad's LSGate) so pre-existing task outputs stay
// bit-identical under override routing.
inline std::vector<EpochMetrics> gate_finetune(BaimGraph& g, int new_task, const Dataset& train,
                                               const Dataset& test, const TrainConfig& cfg) {
  if (new_task < 0 || new_task >= g.task_count())
    throw config_error("gate_finetune: task out of range");
  std::set<std::string> ids{g.tsgate.W.id, g.tsgate.b.id};
  ids.insert(g.lsgates[static_cast<std::size_t>(new_task)].W.id);
  ids.insert(g.lsgates[static_cast<std::size_t>(new_task)].b.id);
  return train_loop(g, train, test, cfg, ids);
}

// CSV lines for per-epoch metrics, header included.
inline std::string metrics_csv(Strategy strategy, const std::vector<EpochMetrics>& rows,
                               bool header = true) {
  std::string out;
  if (header) out += "epoch,strategy,train_loss,test_loss,active_edges,routing_accuracy\n";
  char line[256];
  for (const auto& m : rows) {
    std::snprintf(line, sizeof line, "%d,%s,%.10g,%.10g,%d,%.10g\n", m.epoch,
                  strategy_name(strategy), static_cast<double>(m.train_loss),
                  static_cast<double>(m.test_loss), m.active_edges,
                  static_cast<double>(m.routing_accuracy));
    out += line;
  }
  return out;
}

}  // namespace baim

#endif  // BAIM_TRAINING_HPP
