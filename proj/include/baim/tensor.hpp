#ifndef BAIM_TENSOR_HPP
#define BAIM_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "baim/types.hpp"

namespace baim {

// Dense row-major tensor, rank 1 or 2. Carrier for all features and
// parameters; values must stay finite (NaN/Inf is an error state checked
// at op boundaries).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count(shape_)), real(0));
  }

  Tensor(std::vector<long> shape, std::vector<real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != static_cast<long>(data_.size()))
      throw dim_error("tensor data length does not match shape");
  }

  static Tensor vec(std::vector<real> values) {
    const long n = static_cast<long>(values.size());
    return Tensor({n}, std::move(values));
  }

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<long> shape, real v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(real v) { return Tensor({1}, {v}); }

  bool empty() const { return data_.empty(); }
  long size() const { return static_cast<long>(data_.size()); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<long>& shape() const { return shape_; }

  long dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  long rows() const { return rank() == 2 ? shape_[0] : size(); }
  long cols() const { return rank() == 2 ? shape_[1] : 1; }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }

  real& operator[](long i) { return data_[static_cast<std::size_t>(i)]; }
  real operator[](long i) const { return data_[static_cast<std::size_t>(i)]; }

  real& at(long r, long c) { return data_[static_cast<std::size_t>(r * cols() + c)]; }
  real at(long r, long c) const { return data_[static_cast<std::size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (real v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(real v) {
    for (auto& x : data_) x = v;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
  }

  static long count(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<long> shape_;
  std::vector<real> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw dim_error(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

inline void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw numeric_error(std::string(what) + ": non-finite value");
}

}  // namespace baim

#endif  // BAIM_TENSOR_HPP
