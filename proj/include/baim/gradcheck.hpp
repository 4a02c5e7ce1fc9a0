#ifndef BAIM_GRADCHECK_HPP
#define BAIM_GRADCHECK_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "baim/parameter.hpp"
#include "baim/types.hpp"

namespace baim {

// Central finite differences of a scalar function with respect to the
// selected entries of p. f must be deterministic under fixed seeds; a
// repeat evaluation at the base point guards against hidden state.
inline Tensor finite_diff_grad(const std::function<real()>& f, Parameter& p,
                               const std::vector<long>& indices, real eps) {
  if (!(eps > real(0))) throw config_error("finite_diff_grad: eps must be positive");
  const real base = f();
  if (f() != base)
    throw numeric_error("finite_diff_grad: f is not deterministic (repeat evaluation mismatch)");
  Tensor out({static_cast<long>(indices.size())});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const long i = indices[k];
    const real saved = p.value[i];
    p.value[i] = saved + eps;
    const real hi = f();
    p.value[i] = saved - eps;
    const real lo = f();
    p.value[i] = saved;
    out[static_cast<long>(k)] = (hi - lo) / (real(2) * eps);
  }
  return out;
}

// |a-b| / max(|a|, |b|, floor); the floor keeps near-zero gradients from
// amplifying finite-difference noise into spurious failures.
inline real grad_rel_err(real analytic, real numeric, real floor_ = real(1e-6)) {
  const real denom = std::max({std::abs(analytic), std::abs(numeric), floor_});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace baim

#endif  // BAIM_GRADCHECK_HPP
