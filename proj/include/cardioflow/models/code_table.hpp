#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "cardioflow/random.hpp"

namespace cardioflow::models {

/// Latent codes of a set of sequences: one shape code per subject and one
/// motion code per phase of that subject.
class CodeTable {
 public:
  CodeTable() = default;
  CodeTable(int shape_dim, int motion_dim);

  int shape_dim() const { return shape_dim_; }
  int motion_dim() const { return motion_dim_; }
  std::size_t size() const { return subjects_.size(); }
  const std::vector<std::string>& subjects() const { return subjects_; }

  /// Index of `subject`, or -1.
  int find(const std::string& subject) const;
  int index(const std::string& subject) const;  // throws ShapeError when absent

  /// Registers a subject with its shared shape code and `phases` motion codes
  /// initialized to zero. A second insertion of the same subject throws.
  int add_subject(const std::string& subject, const Eigen::VectorXd& shape_code, int phases);
  /// Same with every code drawn from N(0, stddev^2).
  int add_random_subject(const std::string& subject, int phases, Rng& rng, double stddev = 0.01);

  int phases(int subject) const { return static_cast<int>(motion_[subject].cols()); }

  Eigen::Ref<Eigen::VectorXd> shape_code(int subject) { return shape_[subject]; }
  Eigen::Ref<const Eigen::VectorXd> shape_code(int subject) const { return shape_[subject]; }
  Eigen::MatrixXd::ColXpr motion_code(int subject, int phase);
  Eigen::MatrixXd::ConstColXpr motion_code(int subject, int phase) const;
  /// Motion codes of a subject, one column per phase.
  Eigen::MatrixXd& motion_codes(int subject) { return motion_[subject]; }
  const Eigen::MatrixXd& motion_codes(int subject) const { return motion_[subject]; }

  void set_shape_code(int subject, const Eigen::VectorXd& code);
  void set_motion_codes(int subject, const Eigen::MatrixXd& codes);

 private:
  void check_subject(int subject) const;

  int shape_dim_ = 0;
  int motion_dim_ = 0;
  std::vector<std::string> subjects_;
  std::vector<Eigen::VectorXd> shape_;
  std::vector<Eigen::MatrixXd> motion_;
};

}  // namespace cardioflow::models
