#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace autr {

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// shape/dimension mismatch, names both shapes in the message
struct ShapeError : TensorError {
  using TensorError::TensorError;
};
// out-of-range row/element id, names the offending id
struct IndexError : TensorError {
  using TensorError::TensorError;
};
// softmax with every position masked
struct MaskError : TensorError {
  using TensorError::TensorError;
};
// API contract violation (e.g. backward on a non-scalar)
struct ContractError : TensorError {
  using TensorError::TensorError;
};

inline std::string shape_str(const std::vector<int>& sh) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < sh.size(); ++i) os << (i ? "x" : "") << sh[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. Real is float in production, double in
// gradient-check mode.
template <class Real>
struct TensorT {
  std::vector<int> shape;
  std::vector<Real> data;

  TensorT() = default;
  TensorT(std::vector<int> sh, std::vector<Real> d)
      : shape(std::move(sh)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != count(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static int64_t count(const std::vector<int>& sh) {
    int64_t n = 1;
    for (int d : sh) {
      if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(sh));
      n *= d;
    }
    return n;
  }

  static TensorT zeros(std::vector<int> sh) {
    int64_t n = count(sh);
    return TensorT(std::move(sh), std::vector<Real>(static_cast<size_t>(n), Real(0)));
  }
  static TensorT full(std::vector<int> sh, Real v) {
    int64_t n = count(sh);
    return TensorT(std::move(sh), std::vector<Real>(static_cast<size_t>(n), v));
  }
  static TensorT scalar(Real v) { return full({1}, v); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  Real& at(int i) { return data[static_cast<size_t>(i)]; }
  Real at(int i) const { return data[static_cast<size_t>(i)]; }
  Real& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  Real at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (Real v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <class Other>
  TensorT<Other> cast() const {
    TensorT<Other> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

}  // namespace autr
