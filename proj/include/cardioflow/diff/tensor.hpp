#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cardioflow::diff {

/// Dense real-valued array, row-major. A 2-D tensor of shape B x D holds one
/// sample per row, which is the same memory layout as a column-major D x B
/// Eigen matrix; `columns()` exposes that view without copying.
class Tensor {
 public:
  Tensor() = default;
  /// Throws ShapeError if the extents do not match the data length and
  /// NonFiniteError if any value is NaN or infinite.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  /// Builds a B x D tensor from a D x B matrix (one sample per column).
  static Tensor from_columns(const Eigen::MatrixXd& columns);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double operator()(std::size_t row, std::size_t col) const;
  double& operator()(std::size_t row, std::size_t col);

  /// D x B view of a rank-2 tensor.
  Eigen::Map<const Eigen::MatrixXd> columns() const;

  std::string shape_string() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(std::span<const std::size_t> shape);

}  // namespace cardioflow::diff
