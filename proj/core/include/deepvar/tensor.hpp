#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace deepvar {

std::size_t shape_size(const std::vector<std::size_t>& shape);

// Dense row-major tensor of doubles. Rank 0 is a scalar with one element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool is_scalar() const { return shape_.empty(); }

  double scalar_value() const;
  std::size_t rows() const;
  std::size_t cols() const;

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t r, std::size_t c) const;
  double& at(std::size_t r, std::size_t c);

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double v);
  void zero() { fill(0.0); }

  std::string shape_str() const;  // "(3, 6)"

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

// Numerically stable log(sum(exp(x))) over a non-empty range.
double log_sum_exp(std::span<const double> xs);

}  // namespace deepvar
