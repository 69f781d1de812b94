#include "cardioflow/models/code_table.hpp"

#include <algorithm>

#include "cardioflow/error.hpp"

namespace cardioflow::models {

CodeTable::CodeTable(int shape_dim, int motion_dim) : shape_dim_(shape_dim), motion_dim_(motion_dim) {
  if (shape_dim < 0 || motion_dim < 0) throw ShapeError("code dimensions must be non-negative");
}

int CodeTable::find(const std::string& subject) const {
  const auto it = std::find(subjects_.begin(), subjects_.end(), subject);
  return it == subjects_.end() ? -1 : static_cast<int>(it - subjects_.begin());
}

int CodeTable::index(const std::string& subject) const {
  const int i = find(subject);
  if (i < 0) throw ShapeError("no codes for subject '" + subject + "'");
  return i;
}

int CodeTable::add_subject(const std::string& subject, const Eigen::VectorXd& shape_code, int phases) {
  if (find(subject) >= 0) throw ShapeError("subject '" + subject + "' already has a shape code");
  if (shape_code.size() != shape_dim_) {
    throw ShapeError("shape code of length " + std::to_string(shape_code.size()) + ", expected " +
                     std::to_string(shape_dim_));
  }
  if (phases < 1) throw ShapeError("subject '" + subject + "' needs at least one phase");
  subjects_.push_back(subject);
  shape_.push_back(shape_code);
  motion_.push_back(Eigen::MatrixXd::Zero(motion_dim_, phases));
  return static_cast<int>(subjects_.size()) - 1;
}

int CodeTable::add_random_subject(const std::string& subject, int phases, Rng& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::VectorXd shape(shape_dim_);
  for (auto& v : shape) v = normal(rng);
  const int i = add_subject(subject, shape, phases);
  for (Eigen::Index p = 0; p < motion_[i].cols(); ++p)
    for (Eigen::Index r = 0; r < motion_[i].rows(); ++r) motion_[i](r, p) = normal(rng);
  return i;
}

void CodeTable::check_subject(int subject) const {
  if (subject < 0 || subject >= static_cast<int>(subjects_.size())) {
    throw ShapeError("subject index " + std::to_string(subject) + " out of range");
  }
}

Eigen::MatrixXd::ColXpr CodeTable::motion_code(int subject, int phase) {
  check_subject(subject);
  if (phase < 0 || phase >= motion_[subject].cols()) throw ShapeError("phase index out of range");
  return motion_[subject].col(phase);
}

Eigen::MatrixXd::ConstColXpr CodeTable::motion_code(int subject, int phase) const {
  check_subject(subject);
  if (phase < 0 || phase >= motion_[subject].cols()) throw ShapeError("phase index out of range");
  return motion_[subject].col(phase);
}

void CodeTable::set_shape_code(int subject, const Eigen::VectorXd& code) {
  check_subject(subject);
  if (code.size() != shape_dim_) throw ShapeError("shape code length mismatch");
  shape_[subject] = code;
}

void CodeTable::set_motion_codes(int subject, const Eigen::MatrixXd& codes) {
  check_subject(subject);
  if (codes.rows() != motion_dim_ || codes.cols() != motion_[subject].cols()) {
    throw ShapeError("motion codes must be " + std::to_string(motion_dim_) + " x " +
                     std::to_string(motion_[subject].cols()));
  }
  motion_[subject] = codes;
}

}  // namespace cardioflow::models
