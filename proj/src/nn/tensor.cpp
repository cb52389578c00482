#include "ngd/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ngd/core/error.hpp"

namespace ngd::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_))
    throw ShapeMismatch("tensor: " + std::to_string(values_.size()) +
                        " values for shape " + shape_string(shape_));
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t cols = size() / shape_[0];
  return {values_.data() + r * cols, cols};
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t cols = size() / shape_[0];
  return {values_.data() + r * cols, cols};
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != values_.size())
    throw ShapeMismatch("reshape " + shape_string(shape_) + " -> " +
                        shape_string(shape));
  shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void zero_grads(std::span<Param* const> params) {
  for (Param* p : params) p->zero_grad();
}

void expect_shape(const Tensor& t, const Shape& shape, const char* what) {
  if (t.shape() != shape)
    throw ShapeMismatch(std::string(what) + ": expected " +
                        shape_string(shape) + ", got " +
                        shape_string(t.shape()));
}

}  // namespace ngd::nn
