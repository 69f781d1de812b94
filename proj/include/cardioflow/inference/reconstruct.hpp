#pragma once

#include <Eigen/Core>

#include <functional>

#include "cardioflow/geom/marching_cubes.hpp"
#include "cardioflow/models/networks.hpp"

namespace cardioflow::inference {

struct ExtractionOptions {
  int grid_res = 64;    // samples per axis of the final grid over [-1, 1]^3
  int coarse_res = 16;  // first level of the coarse-to-fine evaluation
  /// Samples whose interpolated value lies within band_factor coarse cell
  /// diagonals of zero are evaluated exactly at the next level.
  double band_factor = 1.5;
  int batch = 4096;
};

/// Batched field evaluation over columns of a 3 x n matrix.
using FieldFunction = std::function<Eigen::RowVectorXd(const Eigen::MatrixXd&)>;

/// Samples a field on a grid_res^3 grid over [-1, 1]^3. Levels are refined
/// by doubling the resolution; away from the zero set values are carried
/// over by trilinear interpolation from the previous level.
geom::ScalarGrid sample_field(const FieldFunction& field, const ExtractionOptions& options);

/// Zero level set of the composed field at one phase. `empty` reports a
/// field without sign change.
geom::TriMesh reconstruct_phase(const models::MotionNet& motion, const models::ShapeNet& shape,
                                const Eigen::VectorXd& motion_code, const Eigen::VectorXd& shape_code, double tau,
                                const ExtractionOptions& options, bool* empty = nullptr);

/// Zero level set of the shape network alone.
geom::TriMesh reconstruct_shape(const models::ShapeNet& shape, const Eigen::VectorXd& shape_code,
                                const ExtractionOptions& options, bool* empty = nullptr);

}  // namespace cardioflow::inference
