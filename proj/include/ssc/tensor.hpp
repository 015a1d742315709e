#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "ssc/core.hpp"

namespace ssc {

/// Dense n-dimensional real array, row-major, 64-bit values. Carrier for
/// images, feature maps, parameters and gradients. Value semantics.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size())
      fail("tensor: shape/data mismatch: shape holds ", checked_numel(shape_),
           " elements, data holds ", data_.size());
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  double& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  /// Same data, new shape; element count must match.
  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (checked_numel(shape) != numel())
      fail("tensor: reshape from ", shape_string(shape_), " to ", shape_string(shape),
           " changes element count");
    return Tensor(std::move(shape), data_);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& o) {
    require(same_shape(o), "tensor: += shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  static std::string shape_string(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += "x";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }
  std::string shape_string() const { return shape_string(shape_); }

 private:
  static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Feature-map batch [N, ...] viewed as a column-per-sample matrix (D x N).
inline Eigen::MatrixXd to_feature_matrix(const Tensor& t) {
  require(t.rank() >= 2, "to_feature_matrix: need batched tensor");
  const std::size_t n = t.dim(0);
  const std::size_t d = t.numel() / std::max<std::size_t>(n, 1);
  Eigen::MatrixXd Z(d, n);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i) Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = t[s * d + i];
  return Z;
}

/// Inverse of to_feature_matrix for a batch tensor with the given shape.
inline Tensor from_feature_matrix(const Eigen::MatrixXd& Z, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  const std::size_t n = t.dim(0);
  const std::size_t d = t.numel() / std::max<std::size_t>(n, 1);
  require(static_cast<std::size_t>(Z.rows()) == d && static_cast<std::size_t>(Z.cols()) == n,
          "from_feature_matrix: matrix/shape mismatch");
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < d; ++i) t[s * d + i] = Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
  return t;
}

}  // namespace ssc
