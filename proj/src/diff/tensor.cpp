#include "cardioflow/diff/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "cardioflow/error.hpp"

namespace cardioflow::diff {

std::string shape_string(std::span<const std::size_t> shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                               std::multiplies<>());
  if (expected != data_.size()) {
    throw ShapeError("tensor shape " + diff::shape_string(shape_) + " needs " + std::to_string(expected) +
                     " values, got " + std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NonFiniteError("tensor value at flat index " + std::to_string(i) + " is not finite");
    }
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        std::multiplies<>());
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::from_columns(const Eigen::MatrixXd& columns) {
  std::vector<double> data(columns.data(), columns.data() + columns.size());
  return Tensor({static_cast<std::size_t>(columns.cols()), static_cast<std::size_t>(columns.rows())},
                std::move(data));
}

double Tensor::operator()(std::size_t row, std::size_t col) const {
  return data_[row * shape_[1] + col];
}

double& Tensor::operator()(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }

Eigen::Map<const Eigen::MatrixXd> Tensor::columns() const {
  if (shape_.size() != 2) {
    throw ShapeError("expected a rank-2 tensor, got " + diff::shape_string(shape_));
  }
  return {data_.data(), static_cast<Eigen::Index>(shape_[1]), static_cast<Eigen::Index>(shape_[0])};
}

std::string Tensor::shape_string() const { return diff::shape_string(shape_); }

}  // namespace cardioflow::diff
