#ifndef BAIM_WORKFLOW_HPP
#define BAIM_WORKFLOW_HPP

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "baim/container.hpp"
#include "baim/dataset.hpp"
#include "baim/forward.hpp"
#include "baim/frechet.hpp"
#include "baim/graph.hpp"
#include "baim/learner.hpp"
#include "baim/taskmodel.hpp"
#include "baim/training.hpp"
#include "baim/types.hpp"

namespace baim {

// Desk-scale rendition of the edge-cloud lifecycle: local training,
// model upload, cloud composition and training, task-oriented extraction,
// download into edge toolboxes, personalization, quality evaluation.
struct WorkflowConfig {
  std::uint64_t seed = 1;
  int nodes = 10;
  int tasks = 1;
  std::vector<int> node_tasks;  // empty: contiguous blocks
  int image_side = 16;
  int train_per_node = 2000;
  int test_per_node = 500;
  double common_fraction = 0.25;  // common-pool size relative to edge data
  int common_test_cap = 300;      // 0 disables the cap

  std::vector<int> hidden_base{96, 48, 48};
  int latent_base = 8;

  int edge_epochs = 20;
  int edge_batch = 32;
  real edge_lr = real(1e-3);

  int cloud_epochs = 30;
  int cloud_batch = 32;
  real cloud_lr = real(1e-3);
  real beta = real(1);
  real balance_coeff = real(0);
  bool default_prune = true;
  std::vector<std::pair<int, real>> prune_schedule;  // used when !default_prune

  int top_k = 2;
  int height = 2;
  std::vector<Strategy> strategies{Strategy::kFinetune, Strategy::kFreeze, Strategy::kScratch};
  Strategy deploy_strategy = Strategy::kFinetune;

  int personalize_epochs = 5;
  int personalize_batch = 32;
  real personalize_lr = real(5e-4);

  int frechet_dim = kDefaultFrechetDim;

  std::vector<int> resolved_node_tasks() const {
    if (!node_tasks.empty()) return node_tasks;
    std::vector<int> out(static_cast<std::size_t>(nodes));
    for (int n = 0; n < nodes; ++n)
      out[static_cast<std::size_t>(n)] = std::min(tasks - 1, n * tasks / nodes);
    return out;
  }

  void validate() const {
    if (nodes < 1) throw config_error("workflow: nodes must be >= 1");
    if (tasks < 1 || tasks > nodes) throw config_error("workflow: tasks must lie in [1, nodes]");
    if (!node_tasks.empty()) {
      if (static_cast<int>(node_tasks.size()) != nodes)
        throw config_error("workflow: node_tasks must list one task per node");
      std::vector<int> seen(static_cast<std::size_t>(tasks), 0);
      for (int t : node_tasks) {
        if (t < 0 || t >= tasks) throw config_error("workflow: node task out of range");
        seen[static_cast<std::size_t>(t)] += 1;
      }
      for (int c : seen)
        if (c == 0) throw config_error("workflow: every task needs at least one node");
    }
    if (train_per_node < 1 || test_per_node < 1) throw config_error("workflow: dataset sizes must be >= 1");
    if (!(common_fraction > 0 && common_fraction <= 1))
      throw config_error("workflow: common_fraction must lie in (0,1]");
    if (hidden_base.size() < 2) throw config_error("workflow: hidden_base needs at least two widths");
    for (int w : hidden_base)
      if (w < 1) throw config_error("workflow: hidden widths must be positive");
    if (latent_base < 2) throw config_error("workflow: latent_base must be >= 2");
    if (edge_epochs < 0 || personalize_epochs < 0) throw config_error("workflow: epochs must be >= 0");
    if (cloud_epochs < 1) throw config_error("workflow: cloud_epochs must be >= 1");
    if (top_k < 1) throw config_error("workflow: top_k must be >= 1");
    if (height < 0) throw config_error("workflow: height must be >= 0");
    if (strategies.empty()) throw config_error("workflow: at least one strategy");
    if (frechet_dim < 1) throw config_error("workflow: frechet_dim must be >= 1");
  }
};

inline Family task_family(int task_id) {
  switch (task_id % 3) {
    case 0: return Family::kBlobs;
    case 1: return Family::kStripes;
    default: return Family::kRectangles;
  }
}

inline SyntheticTaskSpec workflow_task_spec(const WorkflowConfig& cfg, int task_id) {
  SyntheticTaskSpec spec;
  spec.task_id = task_id;
  spec.family = task_family(task_id);
  spec.image_side = cfg.image_side;
  spec.ranges = default_ranges(spec.family);
  return spec;
}

// Heterogeneous per-node architecture: widths scaled by a node-cycled
// multiplier, latent size stepped around the base.
inline LearnerSpec node_learner_spec(const WorkflowConfig& cfg, int node_id, int task_id) {
  static constexpr double kScales[3] = {0.75, 1.0, 1.25};
  const double scale = kScales[node_id % 3];
  const int latent = std::max(2, cfg.latent_base + 2 * ((node_id + 1) % 3 - 1));
  LearnerSpec spec;
  spec.learner_id = node_id;
  spec.task_id = task_id;
  spec.input_dim = cfg.image_side * cfg.image_side;
  spec.latent_dim = latent;
  const std::size_t split = (cfg.hidden_base.size() + 1) / 2;
  for (std::size_t i = 0; i < split; ++i)
    spec.stage_widths.push_back(
        std::max(2, static_cast<int>(std::lround(cfg.hidden_base[i] * scale))));
  spec.stage_of_latent = static_cast<int>(split);
  spec.stage_widths.push_back(latent);
  for (std::size_t i = split; i < cfg.hidden_base.size(); ++i)
    spec.stage_widths.push_back(
        std::max(2, static_cast<int>(std::lround(cfg.hidden_base[i] * scale))));
  return spec;
}

struct EdgeNode {
  int node_id = 0;
  int task_id = 0;
  std::vector<Tensor> local_train;
  std::vector<Tensor> local_test;
  Learner learner;
  Toolbox toolbox;
  std::uint64_t seed = 0;
};

inline real eval_learner(Learner& l, const std::vector<Tensor>& images, real beta) {
  if (images.empty()) throw config_error("eval_learner: empty dataset");
  real total = 0;
  for (const auto& x : images) {
    Tape tape;
    VaeForwardNodes f = vae_forward_nodes(tape, l, tape.constant(x), Mode::kEval, nullptr);
    total += tape.scalar_value(elbo_loss_nodes(tape, x, f.x_hat, f.mu, f.logvar, beta));
  }
  return total / static_cast<real>(images.size());
}

// Local ELBO training of one edge learner. The returned curve holds the
// local test loss before training and after each epoch.
inline std::vector<real> edge_train(EdgeNode& node, int epochs, real lr, int batch_size, real beta) {
  if (epochs < 0 || batch_size < 1 || !(lr > real(0)))
    throw config_error("edge_train: bad hyperparameters");
  std::vector<real> curve{eval_learner(node.learner, node.local_test, beta)};
  if (epochs == 0) return curve;

  std::vector<Parameter*> params;
  node.learner.for_each_param([&](Parameter& p) {
    p.trainable = true;
    params.push_back(&p);
  });
  AdamState adam;
  RngStream run_rng = RngStream(node.seed).fork(0xED6E);
  RngStream noise_rng = run_rng.fork(1);
  std::vector<std::size_t> idx(node.local_train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    RngStream shuffle_rng = run_rng.fork(0x100 + static_cast<std::uint64_t>(epoch));
    shuffle(idx, shuffle_rng);
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
      const real inv = real(1) / static_cast<real>(end - start);
      for (Parameter* p : params) p->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const Tensor& x = node.local_train[idx[k]];
        Tape tape;
        VaeForwardNodes f = vae_forward_nodes(tape, node.learner, tape.constant(x), Mode::kTrain,
                                              &noise_rng);
        int loss = tape.scale(elbo_loss_nodes(tape, x, f.x_hat, f.mu, f.logvar, beta), inv);
        if (!std::isfinite(tape.scalar_value(loss)))
          throw numeric_error("edge training diverged (NaN loss); learning rate likely too high");
        tape.backward(loss);
      }
      optimizer_step(params, adam, lr);
    }
    curve.push_back(eval_learner(node.learner, node.local_test, beta));
  }
  return curve;
}

inline int taskmodel_loss_nodes(Tape& tape, TaskModel& tm, const Tensor& x, real beta, Mode mode,
                                RngStream* rng) {
  std::vector<std::vector<int>> squads(static_cast<std::size_t>(tm.task_id) + 1);
  squads[static_cast<std::size_t>(tm.task_id)] = tm.own_learners;
  ExecView view = task_model_view(tm);
  RoutedNodes routed = routed_forward_nodes(tape, view, tm.lsgate, tm.task_id, squads, x, mode, rng);
  int bce = tape.bce_sum(x, routed.y);
  return beta == real(0) ? bce : tape.add(bce, tape.scale(routed.mix_kl, beta));
}

inline real eval_task_model(TaskModel& tm, const std::vector<Tensor>& images, real beta) {
  if (images.empty()) throw config_error("eval_task_model: empty dataset");
  real total = 0;
  for (const auto& x : images) {
    Tape tape;
    total += tape.scalar_value(taskmodel_loss_nodes(tape, tm, x, beta, Mode::kEval, nullptr));
  }
  return total / static_cast<real>(images.size());
}

// Edge-side fine-tuning of a downloaded task model on node-local data.
// All task-model parameters update. Returns the local test loss curve
// (index 0 = before).
inline std::vector<real> personalize(EdgeNode& node, TaskModel& tm, int epochs, real lr,
                                     int batch_size, real beta) {
  if (tm.task_id != node.task_id)
    throw config_error("personalize: task model task " + std::to_string(tm.task_id) +
                       " does not match node task " + std::to_string(node.task_id));
  if (epochs < 0 || batch_size < 1 || !(lr > real(0)))
    throw config_error("personalize: bad hyperparameters");

  std::vector<real> curve{eval_task_model(tm, node.local_test, beta)};
  if (epochs == 0) return curve;

  std::vector<Parameter*> params;
  tm.for_each_param([&](Parameter& p) {
    p.trainable = true;
    params.push_back(&p);
  });
  AdamState adam;
  RngStream run_rng = RngStream(node.seed).fork(0x9E25);
  RngStream noise_rng = run_rng.fork(1);
  std::vector<std::size_t> idx(node.local_train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    RngStream shuffle_rng = run_rng.fork(0x100 + static_cast<std::uint64_t>(epoch));
    shuffle(idx, shuffle_rng);
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
      const real inv = real(1) / static_cast<real>(end - start);
      for (Parameter* p : params) p->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        int loss = tape.scale(
            taskmodel_loss_nodes(tape, tm, node.local_train[idx[k]], beta, Mode::kTrain, &noise_rng),
            inv);
        if (!std::isfinite(tape.scalar_value(loss)))
          throw numeric_error("personalization diverged (NaN loss); learning rate likely too high");
        tape.backward(loss);
      }
      optimizer_step(params, adam, lr);
    }
    curve.push_back(eval_task_model(tm, node.local_test, beta));
  }
  return curve;
}

struct WorkflowReport {
  std::vector<std::vector<real>> edge_loss_curves;             // per node
  std::uint64_t bytes_uploaded = 0;
  std::vector<std::uint64_t> upload_sizes;                     // per node container size
  std::map<std::string, std::vector<EpochMetrics>> cloud;      // per strategy
  std::vector<std::uint64_t> task_model_sizes;                 // per task container size
  std::uint64_t bytes_downloaded = 0;
  std::vector<std::vector<real>> personalize_curves;           // per node
  std::vector<real> frechet_before;                            // per node
  std::vector<real> frechet_after;                             // per node

  Json to_json() const {
    Json j;
    j["edge"] = Json{{"loss_curves", edge_loss_curves}};
    j["upload"] = Json{{"bytes", bytes_uploaded}, {"container_sizes", upload_sizes}};
    Json cloud_j;
    for (const auto& [name, rows] : cloud) {
      Json arr = Json::array();
      for (const auto& m : rows)
        arr.push_back(Json{{"epoch", m.epoch},
                           {"train_loss", m.train_loss},
                           {"test_loss", m.test_loss},
                           {"active_edges", m.active_edges},
                           {"routing_accuracy", m.routing_accuracy}});
      cloud_j[name] = std::move(arr);
    }
    j["cloud"] = std::move(cloud_j);
    j["download"] = Json{{"bytes", bytes_downloaded}, {"task_model_sizes", task_model_sizes}};
    j["personalize"] = Json{{"loss_curves", personalize_curves}};
    j["frechet"] = Json{{"before", frechet_before}, {"after", frechet_after}};
    return j;
  }

  std::string to_text() const { return to_json().dump(2) + "\n"; }
};

// The Fig.-3 lifecycle as an explicit state machine; phases must run in
// order, and extraction cannot precede composition nor personalization
// precede extraction.
class WorkflowRun {
 public:
  enum class Phase {
    kInit,
    kEdgeTrained,
    kUploaded,
    kComposed,
    kCloudTrained,
    kExtracted,
    kPersonalized,
    kEvaluated
  };

  explicit WorkflowRun(WorkflowConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const std::vector<int> node_tasks = cfg_.resolved_node_tasks();
    for (int n = 0; n < cfg_.nodes; ++n) {
      EdgeNode node;
      node.node_id = n;
      node.task_id = node_tasks[static_cast<std::size_t>(n)];
      node.seed = RngStream(cfg_.seed).fork(0xE06E + static_cast<std::uint64_t>(n)).seed;
      SyntheticTaskSpec tspec = workflow_task_spec(cfg_, node.task_id);
      node.local_train = gen_dataset(tspec, n, cfg_.train_per_node, node.seed);
      node.local_test = gen_dataset(tspec, n, cfg_.test_per_node, RngStream(node.seed).fork(0x7E57).seed);
      node.learner = build_learner(node_learner_spec(cfg_, n, node.task_id), RngStream(node.seed));
      node.learner.meta["seed"] = std::to_string(node.seed);
      node.learner.meta["node"] = std::to_string(n);
      nodes_.push_back(std::move(node));
    }
  }

  void run_edge_phase() {
    require_phase(Phase::kInit, "edge training");
    for (auto& node : nodes_)
      report_.edge_loss_curves.push_back(
          edge_train(node, cfg_.edge_epochs, cfg_.edge_lr, cfg_.edge_batch, cfg_.beta));
    phase_ = Phase::kEdgeTrained;
  }

  void run_upload_phase() {
    require_phase(Phase::kEdgeTrained, "upload");
    for (auto& node : nodes_) {
      Bytes bytes = serialize(node.learner);
      report_.upload_sizes.push_back(bytes.size());
      report_.bytes_uploaded += bytes.size();
      uploaded_.push_back(deserialize_learner(bytes));
    }
    phase_ = Phase::kUploaded;
  }

  void run_compose_phase() {
    require_phase(Phase::kUploaded, "composition");
    std::vector<std::vector<int>> squads(static_cast<std::size_t>(cfg_.tasks));
    for (const auto& node : nodes_)
      squads[static_cast<std::size_t>(node.task_id)].push_back(node.node_id);
    graph_ = compose(std::move(uploaded_), std::move(squads), cfg_.height, cfg_.top_k,
                     RngStream(cfg_.seed).fork(0xC10D));
    uploaded_.clear();
    build_common_datasets();
    phase_ = Phase::kComposed;
  }

  void run_cloud_phase() {
    require_phase(Phase::kComposed, "cloud training");
    TrainConfig base;
    base.epochs = cfg_.cloud_epochs;
    base.batch_size = cfg_.cloud_batch;
    base.learning_rate = cfg_.cloud_lr;
    base.beta = cfg_.beta;
    base.balance_coeff = cfg_.balance_coeff;
    base.prune_schedule =
        cfg_.default_prune ? default_prune_schedule(cfg_.cloud_epochs) : cfg_.prune_schedule;
    base.seed = RngStream(cfg_.seed).fork(0xC77D).seed;

    bool deployed = false;
    for (Strategy strategy : cfg_.strategies) {
      BaimGraph candidate = *graph_;
      TrainConfig cfg = base;
      cfg.strategy = strategy;
      std::vector<EpochMetrics> rows = train_baim(candidate, common_train_, common_test_, cfg);
      report_.cloud[strategy_name(strategy)] = std::move(rows);
      if (strategy == cfg_.deploy_strategy) {
        trained_ = std::move(candidate);
        deployed = true;
      }
    }
    if (!deployed)
      throw config_error("workflow: deploy_strategy must be one of the trained strategies");
    phase_ = Phase::kCloudTrained;
  }

  void run_extract_phase() {
    require_phase(Phase::kCloudTrained, "extraction");
    for (int t = 0; t < cfg_.tasks; ++t) {
      TaskModel tm = extract_task_model(*trained_, t);
      tm.meta["task"] = std::to_string(t);
      task_model_bytes_.push_back(serialize(tm));
      report_.task_model_sizes.push_back(task_model_bytes_.back().size());
    }
    // Each node pulls its task's model through its toolbox; a miss is a
    // download whose bytes are counted, a hit serves locally.
    for (auto& node : nodes_) {
      if (node.toolbox.lookup(node.task_id) != nullptr) continue;
      const Bytes& bytes = task_model_bytes_[static_cast<std::size_t>(node.task_id)];
      report_.bytes_downloaded += bytes.size();
      node.toolbox.store(node.task_id, deserialize_task_model(bytes));
    }
    phase_ = Phase::kExtracted;
  }

  void run_personalize_phase() {
    require_phase(Phase::kExtracted, "personalization");
    for (auto& node : nodes_) {
      TaskModel* tm = node.toolbox.lookup(node.task_id);
      if (tm == nullptr) throw config_error("workflow: node toolbox missing its task model");
      report_.personalize_curves.push_back(
          personalize(node, *tm, cfg_.personalize_epochs, cfg_.personalize_lr,
                      cfg_.personalize_batch, cfg_.beta));
    }
    phase_ = Phase::kPersonalized;
  }

  void run_evaluate_phase() {
    require_phase(Phase::kPersonalized, "evaluation");
    for (auto& node : nodes_) {
      std::vector<Tensor> before_recon, after_recon;
      TaskModel* tm = node.toolbox.lookup(node.task_id);
      for (const auto& x : node.local_test) {
        Tape t1;
        VaeForwardNodes f = vae_forward_nodes(t1, node.learner, t1.constant(x), Mode::kEval, nullptr);
        before_recon.push_back(t1.value(f.x_hat));
        after_recon.push_back(taskmodel_forward(*tm, x, Mode::kEval).y);
      }
      report_.frechet_before.push_back(frechet_proxy(node.local_test, before_recon, cfg_.frechet_dim));
      report_.frechet_after.push_back(frechet_proxy(node.local_test, after_recon, cfg_.frechet_dim));
    }
    phase_ = Phase::kEvaluated;
  }

  const WorkflowReport& report() const { return report_; }
  const WorkflowConfig& config() const { return cfg_; }
  std::vector<EdgeNode>& nodes() { return nodes_; }
  BaimGraph& trained_graph() { return *trained_; }
  Phase phase() const { return phase_; }

 private:
  void require_phase(Phase expected, const char* step) const {
    if (phase_ != expected)
      throw config_error(std::string("workflow: phase ordering violation: cannot run ") + step +
                         " now");
  }

  void build_common_datasets() {
    const int n_train = std::max(1, static_cast<int>(std::lround(cfg_.train_per_node * cfg_.common_fraction)));
    const int n_test = std::max(1, static_cast<int>(std::lround(cfg_.test_per_node * cfg_.common_fraction)));
    for (const auto& node : nodes_) {
      SyntheticTaskSpec tspec = workflow_task_spec(cfg_, node.task_id);
      for (auto& img :
           gen_dataset(tspec, node.node_id, n_train, RngStream(node.seed).fork(0xC0307E57).seed))
        common_train_.push_back({std::move(img), node.task_id});
      for (auto& img :
           gen_dataset(tspec, node.node_id, n_test, RngStream(node.seed).fork(0xC03077).seed))
        common_test_.push_back({std::move(img), node.task_id});
    }
    if (cfg_.common_test_cap > 0 &&
        static_cast<int>(common_test_.size()) > cfg_.common_test_cap) {
      // Deterministic stride subsample keeps per-task coverage.
      Dataset capped;
      const double step = static_cast<double>(common_test_.size()) / cfg_.common_test_cap;
      for (int i = 0; i < cfg_.common_test_cap; ++i)
        capped.push_back(common_test_[static_cast<std::size_t>(i * step)]);
      common_test_ = std::move(capped);
    }
  }

  WorkflowConfig cfg_;
  std::vector<EdgeNode> nodes_;
  std::vector<Learner> uploaded_;
  std::optional<BaimGraph> graph_;
  std::optional<BaimGraph> trained_;
  Dataset common_train_;
  Dataset common_test_;
  std::vector<Bytes> task_model_bytes_;
  WorkflowReport report_;
  Phase phase_ = Phase::kInit;
};

inline WorkflowReport run_workflow(const WorkflowConfig& cfg) {
  WorkflowRun run(cfg);
  run.run_edge_phase();
  run.run_upload_phase();
  run.run_compose_phase();
  run.run_cloud_phase();
  run.run_extract_phase();
  run.run_personalize_phase();
  run.run_evaluate_phase();
  return run.report();
}

// ---- config file loading -------------------------------------------------

inline WorkflowConfig workflow_config_from_json(const Json& j) {
  WorkflowConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.nodes = j.value("nodes", cfg.nodes);
    cfg.tasks = j.value("tasks", cfg.tasks);
    cfg.node_tasks = j.value("node_tasks", cfg.node_tasks);
    cfg.image_side = j.value("image_side", cfg.image_side);
    cfg.train_per_node = j.value("train_per_node", cfg.train_per_node);
    cfg.test_per_node = j.value("test_per_node", cfg.test_per_node);
    cfg.common_fraction = j.value("common_fraction", cfg.common_fraction);
    cfg.common_test_cap = j.value("common_test_cap", cfg.common_test_cap);
    cfg.hidden_base = j.value("hidden_base", cfg.hidden_base);
    cfg.latent_base = j.value("latent_base", cfg.latent_base);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.top_k = j.value("top_k", cfg.top_k);
    cfg.height = j.value("height", cfg.height);
    cfg.frechet_dim = j.value("frechet_dim", cfg.frechet_dim);
    if (j.contains("edge")) {
      const Json& e = j.at("edge");
      cfg.edge_epochs = e.value("epochs", cfg.edge_epochs);
      cfg.edge_batch = e.value("batch_size", cfg.edge_batch);
      cfg.edge_lr = e.value("learning_rate", cfg.edge_lr);
    }
    if (j.contains("cloud")) {
      const Json& c = j.at("cloud");
      cfg.cloud_epochs = c.value("epochs", cfg.cloud_epochs);
      cfg.cloud_batch = c.value("batch_size", cfg.cloud_batch);
      cfg.cloud_lr = c.value("learning_rate", cfg.cloud_lr);
      cfg.balance_coeff = c.value("balance_coeff", cfg.balance_coeff);
      if (c.contains("prune_schedule")) {
        const Json& p = c.at("prune_schedule");
        if (p.is_string() && p.get<std::string>() == "default") {
          cfg.default_prune = true;
        } else if (p.is_string() && p.get<std::string>() == "none") {
          cfg.default_prune = false;
          cfg.prune_schedule.clear();
        } else {
          cfg.default_prune = false;
          cfg.prune_schedule.clear();
          for (const Json& entry : p)
            cfg.prune_schedule.emplace_back(entry.at(0).get<int>(), entry.at(1).get<real>());
        }
      }
    }
    if (j.contains("strategies")) {
      cfg.strategies.clear();
      for (const Json& s : j.at("strategies"))
        cfg.strategies.push_back(strategy_from_name(s.get<std::string>()));
    }
    if (j.contains("deploy_strategy"))
      cfg.deploy_strategy = strategy_from_name(j.at("deploy_strategy").get<std::string>());
    if (j.contains("personalize")) {
      const Json& p = j.at("personalize");
      cfg.personalize_epochs = p.value("epochs", cfg.personalize_epochs);
      cfg.personalize_batch = p.value("batch_size", cfg.personalize_batch);
      cfg.personalize_lr = p.value("learning_rate", cfg.personalize_lr);
    }
  } catch (const Json::exception& e) {
    throw config_error(std::string("bad workflow config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace baim

#endif  // BAIM_WORKFLOW_HPP
