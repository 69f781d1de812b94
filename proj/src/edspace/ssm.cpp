#include "cardioflow/edspace/ssm.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "cardioflow/error.hpp"
#include "cardioflow/file_util.hpp"
#include "cardioflow/geom/io.hpp"
#include "cardioflow/random.hpp"

namespace cardioflow::edspace {

using geom::TriMesh;
using geom::Vec3;

void Atlas::validate() const {
  if (shapes.size() < 2) {
    throw AtlasError("an atlas needs at least two shapes, got " + std::to_string(shapes.size()));
  }
  const auto& ref = shapes.front();
  for (std::size_t i = 1; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    if (s.vertices.size() != ref.vertices.size()) {
      throw AtlasError("shape " + std::to_string(i) + " has " + std::to_string(s.vertices.size()) +
                       " vertices, shape 0 has " + std::to_string(ref.vertices.size()));
    }
    if (s.faces != ref.faces) {
      throw AtlasError("shape " + std::to_string(i) + " does not share the face array of shape 0");
    }
  }
}

Eigen::VectorXd flatten(const TriMesh& mesh) {
  Eigen::VectorXd v(3 * static_cast<Eigen::Index>(mesh.vertices.size()));
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) v.segment<3>(3 * i) = mesh.vertices[i];
  return v;
}

std::vector<Vec3> unflatten(const Eigen::VectorXd& v) {
  std::vector<Vec3> out(static_cast<std::size_t>(v.size() / 3));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.segment<3>(3 * i);
  return out;
}

TriMesh Ssm::mean_shape() const {
  TriMesh m;
  m.vertices = unflatten(pca.mean);
  m.faces = faces;
  return m;
}

Ssm build_ssm(const Atlas& atlas, int k_alpha) {
  atlas.validate();
  const int n = static_cast<int>(atlas.shapes.size());
  if (k_alpha < 0) k_alpha = std::min(n - 1, 32);
  if (k_alpha > n - 1) {
    throw AtlasError("k_alpha = " + std::to_string(k_alpha) + " exceeds shapes - 1 = " + std::to_string(n - 1));
  }
  Eigen::MatrixXd data(3 * static_cast<Eigen::Index>(atlas.shapes.front().vertices.size()), n);
  for (int i = 0; i < n; ++i) data.col(i) = flatten(atlas.shapes[i]);
  Ssm ssm;
  ssm.pca = fit_pca(data, k_alpha);
  ssm.faces = atlas.shapes.front().faces;
  return ssm;
}

TriMesh sample_shape(const Ssm& ssm, const Eigen::VectorXd& alpha) {
  TriMesh m;
  m.vertices = unflatten(ssm.pca.reconstruct(alpha));
  m.faces = ssm.faces;
  return m;
}

Eigen::VectorXd project_shape(const Ssm& ssm, const TriMesh& mesh) {
  if (mesh.faces != ssm.faces) throw AtlasError("mesh topology differs from the shape model");
  return ssm.pca.project(flatten(mesh));
}

std::vector<AugmentedSample> augment_labeled(const Ssm& ssm, int count, double spread, std::uint64_t seed) {
  if (spread < 0.0) throw ConfigError("augmentation spread must be non-negative");
  Rng rng = make_rng(seed, "augmentation");
  const Eigen::Index samples = ssm.pca.samples();
  std::uniform_int_distribution<Eigen::Index> pick(0, samples - 1);
  std::normal_distribution<double> gauss;
  const Eigen::VectorXd stddev =
      spread * ssm.pca.singular_values() / std::sqrt(static_cast<double>(samples));
  std::vector<AugmentedSample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int c = 0; c < count; ++c) {
    AugmentedSample s;
    s.source = pick(rng);
    s.alpha = ssm.pca.coefficients.col(s.source);
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i) s.alpha[i] += stddev[i] * gauss(rng);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Eigen::VectorXd> augment(const Ssm& ssm, int count, double spread, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> out;
  for (auto& s : augment_labeled(ssm, count, spread, seed)) out.push_back(std::move(s.alpha));
  return out;
}

NormalizationSpec make_normalization(const Ssm& ssm, double radius) {
  const auto verts = unflatten(ssm.pca.mean);
  NormalizationSpec spec;
  spec.center = geom::centroid(verts);
  double far = 0.0;
  for (const auto& v : verts) far = std::max(far, (v - spec.center).norm());
  if (far <= 0.0) throw AtlasError("mean shape is a single point");
  spec.scale = far / radius;
  return spec;
}

TriMesh normalize(const TriMesh& mesh, const NormalizationSpec& spec) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = spec.apply(v);
  return out;
}

geom::PointCloud normalize(const geom::PointCloud& pc, const NormalizationSpec& spec) {
  geom::PointCloud out = pc;
  for (auto& v : out.points) v = spec.apply(v);
  return out;
}

TriMesh denormalize(const TriMesh& mesh, const NormalizationSpec& spec) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = spec.invert(v);
  return out;
}

geom::PointCloud denormalize(const geom::PointCloud& pc, const NormalizationSpec& spec) {
  geom::PointCloud out = pc;
  for (auto& v : out.points) v = spec.invert(v);
  return out;
}

Atlas load_atlas(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "atlas.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw AtlasError(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("shapes") || !manifest["shapes"].is_array()) {
    throw AtlasError(manifest_path.string() + ": expected a \"shapes\" array");
  }
  Atlas atlas;
  for (const auto& name : manifest["shapes"]) atlas.shapes.push_back(geom::read_obj(dir / name.get<std::string>()));
  atlas.validate();
  return atlas;
}

void save_atlas(const std::filesystem::path& dir, const Atlas& atlas) {
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t i = 0; i < atlas.shapes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "shape_%03zu.obj", i);
    geom::write_obj(dir / name, atlas.shapes[i]);
    names.push_back(name);
  }
  atomic_write(dir / "atlas.json", nlohmann::json{{"shapes", names}}.dump(2) + "\n");
}

}  // namespace cardioflow::edspace
