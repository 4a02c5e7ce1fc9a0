#ifndef BAIM_PARAMETER_HPP
#define BAIM_PARAMETER_HPP

#include <cmath>
#include <string>
#include <utility>

#include "baim/rng.hpp"
#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

// Trainable (or frozen) tensor with a stable id. grad always mirrors
// value's shape and is accumulated by Tape::backward.
struct Parameter {
  std::string id;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string pid, Tensor v)
      : id(std::move(pid)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(real(0)); }

  long size() const { return value.size(); }
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)). Matrices use
// (cols, rows) as fans; vectors use their own length for both.
inline void init_uniform_fan(Tensor& t, RngStream& rng) {
  double fan_in, fan_out;
  if (t.rank() == 2) {
    fan_out = static_cast<double>(t.dim(0));
    fan_in = static_cast<double>(t.dim(1));
  } else {
    fan_in = fan_out = static_cast<double>(t.size());
  }
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  rng.fill_uniform(t, -a, a);
}

inline Parameter make_param(std::string id, std::vector<long> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  init_uniform_fan(t, rng);
  return Parameter(std::move(id), std::move(t));
}

inline Parameter make_zero_param(std::string id, std::vector<long> shape) {
  return Parameter(std::move(id), Tensor(std::move(shape)));
}

}  // namespace baim

#endif  // BAIM_PARAMETER_HPP
