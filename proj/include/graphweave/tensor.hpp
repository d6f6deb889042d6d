#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "graphweave/errors.hpp"

namespace gw {

inline std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t p = 1;
  for (const int d : shape) p *= d;
  return p;
}

inline std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// Dense row-major float32 array with shape. The grad buffer is empty until
// ensure_grad(); when present it always has the same length as data.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape_in, float fill = 0.0f) : shape(std::move(shape_in)) {
    for (const int d : shape)
      if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    data.assign(static_cast<std::size_t>(shape_product(shape)), fill);
  }

  static Tensor from_values(std::vector<int> shape_in, std::vector<float> values) {
    Tensor t(std::move(shape_in));
    if (values.size() != t.data.size())
      throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                       shape_string(t.shape));
    t.data = std::move(values);
    return t;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // 2-D accessors (row, col).
  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0f);
  }
};

}  // namespace gw
