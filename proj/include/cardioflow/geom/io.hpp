#pragma once

#include <filesystem>
#include <iosfwd>

#include "cardioflow/geom/mesh.hpp"

namespace cardioflow::geom {

/// Wavefront OBJ: `v` and `f` records only. Polygon faces are fan
/// triangulated; texture/normal indices and negative indices are accepted.
TriMesh read_obj(std::istream& in);
TriMesh read_obj(const std::filesystem::path& path);
void write_obj(std::ostream& out, const TriMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

/// ASCII PLY with x, y, z and optional int `phase` and `slice` properties.
PointCloud read_ply(std::istream& in);
void write_ply(std::ostream& out, const PointCloud& pc);

/// One point per line: `x y z [phase] [slice_id]`. Blank lines and lines
/// starting with '#' are skipped. Every line must have the same arity.
PointCloud read_points_text(std::istream& in);
void write_points_text(std::ostream& out, const PointCloud& pc);

/// Dispatches on extension: .ply, otherwise the text format.
PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& pc);

}  // namespace cardioflow::geom
