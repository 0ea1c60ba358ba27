#include "deepvar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deepvar/errors.hpp"

namespace deepvar {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(shape_size(shape_), 0.0) {
  for (std::size_t d : shape_) {
    check_numeric(d > 0, "tensor dimensions must be positive, got " + shape_str());
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_numeric(values_.size() == shape_size(shape_),
                "tensor value count " + std::to_string(values_.size()) +
                    " does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

double Tensor::scalar_value() const {
  check_numeric(is_scalar(), "expected scalar, got shape " + shape_str());
  return values_[0];
}

std::size_t Tensor::rows() const {
  check_numeric(rank() == 2, "expected rank-2 tensor, got shape " + shape_str());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  check_numeric(rank() == 2, "expected rank-2 tensor, got shape " + shape_str());
  return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return values_[r * shape_[1] + c];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  return values_[r * shape_[1] + c];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  s += ")";
  return s;
}

double log_sum_exp(std::span<const double> xs) {
  check_numeric(!xs.empty(), "log_sum_exp of empty input");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;  // all -inf stays -inf; +inf propagates
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace deepvar
