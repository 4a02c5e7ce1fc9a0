#ifndef BAIM_TAPE_HPP
#define BAIM_TAPE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "baim/parameter.hpp"
#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

using EigenMat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenVec = Eigen::Matrix<real, Eigen::Dynamic, 1>;
using MatMap = Eigen::Map<EigenMat>;
using CMatMap = Eigen::Map<const EigenMat>;
using VecMap = Eigen::Map<EigenVec>;
using CVecMap = Eigen::Map<const EigenVec>;

inline CMatMap mat_view(const Tensor& t) { return CMatMap(t.data(), t.rows(), t.cols()); }
inline MatMap mat_view(Tensor& t) { return MatMap(t.data(), t.rows(), t.cols()); }
inline CVecMap vec_view(const Tensor& t) { return CVecMap(t.data(), t.size()); }
inline VecMap vec_view(Tensor& t) { return VecMap(t.data(), t.size()); }

inline constexpr real kProbClamp = real(1e-7);

// W·x + b with shape and finiteness validation. The tape op wraps this
// same kernel, so the recorded and the standalone paths agree bitwise.
inline Tensor apply_linear_value(const Tensor& W, const Tensor& b, const Tensor& x) {
  if (W.rank() != 2) throw dim_error("apply_linear: W must be a matrix, got " + W.shape_str());
  if (W.cols() != x.size())
    throw dim_error("apply_linear: W " + W.shape_str() + " does not accept x " + x.shape_str());
  if (!b.empty() && b.size() != W.rows())
    throw dim_error("apply_linear: b " + b.shape_str() + " does not match W rows");
  require_finite(W, "apply_linear: W");
  require_finite(x, "apply_linear: x");
  Tensor y({W.rows()});
  if (b.empty())
    vec_view(y) = mat_view(W) * vec_view(x);
  else {
    require_finite(b, "apply_linear: b");
    vec_view(y) = mat_view(W) * vec_view(x) + vec_view(b);
  }
  require_finite(y, "apply_linear: result");
  return y;
}

// Define-by-run reverse-mode tape. Rebuilt on every forward pass, so
// graph topology may change freely between passes (pruning, extraction).
// Node creation order is a topological order by construction; backward
// walks it in reverse exactly once.
class Tape {
 public:
  enum class Op {
    kConstant,
    kLeaf,
    kLinear,      // parents: W, b, x
    kMatVec,      // parents: W, x
    kAdd,         // parents: a, b (same shape)
    kScale,       // parents: a; aux scalar c
    kMul,         // parents: a, b (same shape)
    kExp,         // parents: a
    kRelu,        // parents: a
    kSigmoid,     // parents: a
    kSum,         // parents: a -> scalar
    kMix,         // parents: w, v_0..v_{K-1}; out = sum_k w[k]*v_k
    kBceSum,      // parents: xhat; aux: target
    kKlSum,       // parents: mu, logvar
    kSoftmaxCe,   // parents: logits; label
    kSubsetSoftmax  // parents: logits; idx list -> K-vector
  };

  int constant(Tensor v) {
    require_finite(v, "tape constant");
    return push(Op::kConstant, std::move(v), {});
  }

  // References the parameter storage instead of copying it; the parameter
  // must stay unmodified for the lifetime of the pass.
  int leaf(Parameter& p) {
    int id = push(Op::kLeaf, Tensor(), {});
    nodes_[static_cast<std::size_t>(id)].param = &p;
    nodes_[static_cast<std::size_t>(id)].ext = &p.value;
    return id;
  }

  int linear(int W, int b, int x) {
    Tensor y = apply_linear_value(value(W), value(b), value(x));
    return push(Op::kLinear, std::move(y), {W, b, x});
  }

  int matvec(int W, int x) {
    Tensor y = apply_linear_value(value(W), Tensor(), value(x));
    return push(Op::kMatVec, std::move(y), {W, x});
  }

  int add(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "tape add");
    Tensor y(ta.shape());
    vec_view(y) = vec_view(ta) + vec_view(tb);
    return push(Op::kAdd, std::move(y), {a, b});
  }

  int scale(int a, real c) {
    Tensor y(value(a).shape());
    vec_view(y) = vec_view(value(a)) * c;
    int id = push(Op::kScale, std::move(y), {a});
    nodes_[static_cast<std::size_t>(id)].c = c;
    return id;
  }

  int mul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "tape mul");
    Tensor y(ta.shape());
    vec_view(y) = vec_view(ta).cwiseProduct(vec_view(tb));
    return push(Op::kMul, std::move(y), {a, b});
  }

  int exp(int a) {
    Tensor y(value(a).shape());
    vec_view(y) = vec_view(value(a)).array().exp();
    return check_push(Op::kExp, std::move(y), {a});
  }

  int relu(int a) {
    const Tensor& ta = value(a);
    Tensor y(ta.shape());
    for (long i = 0; i < ta.size(); ++i) y[i] = ta[i] > real(0) ? ta[i] : real(0);
    return push(Op::kRelu, std::move(y), {a});
  }

  int sigmoid(int a) {
    const Tensor& ta = value(a);
    Tensor y(ta.shape());
    for (long i = 0; i < ta.size(); ++i) y[i] = real(1) / (real(1) + std::exp(-ta[i]));
    return push(Op::kSigmoid, std::move(y), {a});
  }

  int sum(int a) {
    return push(Op::kSum, Tensor::scalar(vec_view(value(a)).sum()), {a});
  }

  // out = sum_k w[k] * v_k; the gate-weighted mixture.
  int mix(int w, const std::vector<int>& vs) {
    const Tensor& tw = value(w);
    if (tw.size() != static_cast<long>(vs.size()))
      throw dim_error("tape mix: weight count does not match operand count");
    Tensor y(value(vs.at(0)).shape());
    for (std::size_t k = 0; k < vs.size(); ++k) {
      require_same_shape(y, value(vs[k]), "tape mix");
      vec_view(y) += tw[static_cast<long>(k)] * vec_view(value(vs[k]));
    }
    std::vector<int> parents;
    parents.reserve(vs.size() + 1);
    parents.push_back(w);
    parents.insert(parents.end(), vs.begin(), vs.end());
    return push(Op::kMix, std::move(y), std::move(parents));
  }

  // Pixel-summed binary cross-entropy against a fixed target; xhat is
  // clamped into [kProbClamp, 1-kProbClamp] before the logs.
  int bce_sum(Tensor target, int xhat) {
    const Tensor& th = value(xhat);
    require_same_shape(target, th, "tape bce");
    real total = 0;
    for (long i = 0; i < th.size(); ++i) {
      const real p = clamp_prob(th[i]);
      total -= target[i] * std::log(p) + (real(1) - target[i]) * std::log(real(1) - p);
    }
    int id = check_push(Op::kBceSum, Tensor::scalar(total), {xhat});
    nodes_[static_cast<std::size_t>(id)].aux = std::move(target);
    return id;
  }

  // KL(q(z|x) || N(0,I)) = -1/2 sum(1 + logvar - mu^2 - exp(logvar)).
  int kl_sum(int mu, int logvar) {
    const Tensor& tm = value(mu);
    const Tensor& tl = value(logvar);
    require_same_shape(tm, tl, "tape kl");
    real total = 0;
    for (long i = 0; i < tm.size(); ++i)
      total += real(-0.5) * (real(1) + tl[i] - tm[i] * tm[i] - std::exp(tl[i]));
    return check_push(Op::kKlSum, Tensor::scalar(total), {mu, logvar});
  }

  // Cross-entropy of softmax(logits) against a hard label.
  int softmax_ce(int logits, int label) {
    const Tensor& tl = value(logits);
    if (label < 0 || label >= tl.size()) throw config_error("softmax_ce: label out of range");
    Tensor p = softmax_value(tl);
    int id = check_push(Op::kSoftmaxCe, Tensor::scalar(-std::log(clamp_prob(p[label]))), {logits});
    auto& n = nodes_[static_cast<std::size_t>(id)];
    n.aux = std::move(p);
    n.label = label;
    return id;
  }

  // Softmax over the selected subset of logits; the top-K gate weights.
  int subset_softmax(int logits, std::vector<int> idx) {
    const Tensor& tl = value(logits);
    Tensor w({static_cast<long>(idx.size())});
    real mx = tl[idx.at(0)];
    for (int i : idx) mx = std::max(mx, tl[i]);
    real z = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      w[static_cast<long>(k)] = std::exp(tl[idx[k]] - mx);
      z += w[static_cast<long>(k)];
    }
    for (long k = 0; k < w.size(); ++k) w[k] /= z;
    int id = check_push(Op::kSubsetSoftmax, std::move(w), {logits});
    nodes_[static_cast<std::size_t>(id)].idx = std::move(idx);
    return id;
  }

  const Tensor& value(int node) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(node));
    return n.ext != nullptr ? *n.ext : n.value;
  }
  real scalar_value(int node) const { return value(node)[0]; }
  std::size_t node_count() const { return nodes_.size(); }

  // Accumulates seed * d(loss)/d(p) into p.grad for every trainable
  // parameter reachable from `loss`; frozen parameters are left alone.
  void backward(int loss, real seed = real(1)) {
    if (spent_) throw tape_error("backward called twice on the same tape (stale tape); rebuild or reset");
    const Tensor& lv = value(loss);
    if (lv.size() != 1) throw tape_error("backward requires a scalar loss node");
    spent_ = true;

    grads_.assign(nodes_.size(), Tensor());
    grads_[static_cast<std::size_t>(loss)] = Tensor::scalar(seed);

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      Tensor& g = grads_[static_cast<std::size_t>(i)];
      if (g.empty()) continue;  // node not on any path to the loss
      switch (n.kind) {
        case Op::kConstant:
          break;
        case Op::kLeaf:
          if (n.param != nullptr && n.param->trainable)
            vec_view(n.param->grad) += vec_view(g);
          break;
        case Op::kLinear: {
          const Tensor& W = value(n.parents[0]);
          const Tensor& x = value(n.parents[2]);
          mat_view(grad_of(n.parents[0], W.shape())) += vec_view(g) * vec_view(x).transpose();
          vec_view(grad_of(n.parents[1], {W.rows()})) += vec_view(g);
          vec_view(grad_of(n.parents[2], x.shape())) += mat_view(W).transpose() * vec_view(g);
          break;
        }
        case Op::kMatVec: {
          const Tensor& W = value(n.parents[0]);
          const Tensor& x = value(n.parents[1]);
          mat_view(grad_of(n.parents[0], W.shape())) += vec_view(g) * vec_view(x).transpose();
          vec_view(grad_of(n.parents[1], x.shape())) += mat_view(W).transpose() * vec_view(g);
          break;
        }
        case Op::kAdd:
          vec_view(grad_of(n.parents[0], g.shape())) += vec_view(g);
          vec_view(grad_of(n.parents[1], g.shape())) += vec_view(g);
          break;
        case Op::kScale:
          vec_view(grad_of(n.parents[0], g.shape())) += n.c * vec_view(g);
          break;
        case Op::kMul: {
          const Tensor& a = value(n.parents[0]);
          const Tensor& b = value(n.parents[1]);
          vec_view(grad_of(n.parents[0], g.shape())) += vec_view(g).cwiseProduct(vec_view(b));
          vec_view(grad_of(n.parents[1], g.shape())) += vec_view(g).cwiseProduct(vec_view(a));
          break;
        }
        case Op::kExp:
          vec_view(grad_of(n.parents[0], g.shape())) += vec_view(g).cwiseProduct(vec_view(n.value));
          break;
        case Op::kRelu: {
          const Tensor& a = value(n.parents[0]);
          Tensor& pg = grad_of(n.parents[0], g.shape());
          for (long k = 0; k < g.size(); ++k)
            if (a[k] > real(0)) pg[k] += g[k];
          break;
        }
        case Op::kSigmoid: {
          Tensor& pg = grad_of(n.parents[0], g.shape());
          for (long k = 0; k < g.size(); ++k) pg[k] += g[k] * n.value[k] * (real(1) - n.value[k]);
          break;
        }
        case Op::kSum:
          vec_view(grad_of(n.parents[0], value(n.parents[0]).shape())).array() += g[0];
          break;
        case Op::kMix: {
          const Tensor& w = value(n.parents[0]);
          Tensor& wg = grad_of(n.parents[0], w.shape());
          for (long k = 0; k < w.size(); ++k) {
            const Tensor& vk = value(n.parents[static_cast<std::size_t>(k) + 1]);
            wg[k] += vec_view(g).dot(vec_view(vk));
            vec_view(grad_of(n.parents[static_cast<std::size_t>(k) + 1], g.shape())) +=
                w[k] * vec_view(g);
          }
          break;
        }
        case Op::kBceSum: {
          const Tensor& h = value(n.parents[0]);
          Tensor& pg = grad_of(n.parents[0], h.shape());
          for (long k = 0; k < h.size(); ++k) {
            if (h[k] <= kProbClamp || h[k] >= real(1) - kProbClamp) continue;  // clamped: flat
            pg[k] += g[0] * (h[k] - n.aux[k]) / (h[k] * (real(1) - h[k]));
          }
          break;
        }
        case Op::kKlSum: {
          const Tensor& mu = value(n.parents[0]);
          const Tensor& lv2 = value(n.parents[1]);
          Tensor& mg = grad_of(n.parents[0], mu.shape());
          Tensor& lg = grad_of(n.parents[1], lv2.shape());
          for (long k = 0; k < mu.size(); ++k) {
            mg[k] += g[0] * mu[k];
            lg[k] += g[0] * real(0.5) * (std::exp(lv2[k]) - real(1));
          }
          break;
        }
        case Op::kSoftmaxCe: {
          Tensor& pg = grad_of(n.parents[0], n.aux.shape());
          for (long k = 0; k < n.aux.size(); ++k)
            pg[k] += g[0] * (n.aux[k] - (k == n.label ? real(1) : real(0)));
          break;
        }
        case Op::kSubsetSoftmax: {
          const Tensor& w = n.value;
          Tensor& pg = grad_of(n.parents[0], value(n.parents[0]).shape());
          real dot = 0;
          for (long k = 0; k < w.size(); ++k) dot += g[k] * w[k];
          for (long k = 0; k < w.size(); ++k)
            pg[static_cast<long>(n.idx[static_cast<std::size_t>(k)])] += w[k] * (g[k] - dot);
          break;
        }
      }
    }
  }

  void reset() {
    nodes_.clear();
    grads_.clear();
    spent_ = false;
  }

  static Tensor softmax_value(const Tensor& logits) {
    Tensor p(logits.shape());
    real mx = logits[0];
    for (long i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    real z = 0;
    for (long i = 0; i < logits.size(); ++i) {
      p[i] = std::exp(logits[i] - mx);
      z += p[i];
    }
    for (long i = 0; i < p.size(); ++i) p[i] /= z;
    return p;
  }

 private:
  struct Node {
    Op kind;
    Tensor value;
    const Tensor* ext = nullptr;  // leaf storage lives in the Parameter
    std::vector<int> parents;
    Parameter* param = nullptr;
    Tensor aux;             // bce target / softmax probs
    std::vector<int> idx;   // subset indices
    int label = -1;
    real c = real(0);
  };

  static real clamp_prob(real p) {
    return std::min(real(1) - kProbClamp, std::max(kProbClamp, p));
  }

  int push(Op kind, Tensor value, std::vector<int> parents) {
    if (spent_) throw tape_error("recording on a spent tape; reset first");
    Node n;
    n.kind = kind;
    n.value = std::move(value);
    n.parents = std::move(parents);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  // For ops that can overflow (exp, log-based losses).
  int check_push(Op kind, Tensor value, std::vector<int> parents) {
    require_finite(value, "tape op result");
    return push(kind, std::move(value), std::move(parents));
  }

  Tensor& grad_of(int node, const std::vector<long>& shape) {
    Tensor& g = grads_[static_cast<std::size_t>(node)];
    if (g.empty()) g = Tensor(shape);
    return g;
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool spent_ = false;
};

}  // namespace baim

#endif  // BAIM_TAPE_HPP
