#include "cardioflow/synth/generator.hpp"

#include <cmath>
#include <numbers>

#include "cardioflow/error.hpp"
#include "cardioflow/geom/slicing.hpp"

namespace cardioflow::synth {

namespace {

double inner_limit(const SubjectParams& p) { return p.semi_axes.z() - p.apex_thickness; }

}  // namespace

void SubjectParams::validate() const {
  auto fail = [](const std::string& m) { throw DatasetError("invalid subject parameters: " + m); };
  if ((semi_axes.array() <= 0.0).any()) fail("semi-axes must be positive");
  if (base_thickness <= 0.0 || apex_thickness <= 0.0) fail("wall thickness must be positive");
  if (base_thickness >= 0.8 * std::min(semi_axes.x(), semi_axes.y())) fail("base wall thicker than the cavity allows");
  if (apex_thickness >= 0.5 * semi_axes.z()) fail("apex wall too thick");
  if (base_height <= -inner_limit(*this) || base_height >= 0.9 * inner_limit(*this)) {
    fail("base plane must cut both surfaces below their equators' far end");
  }
  if (contraction < 0.0 || contraction > 0.5) fail("contraction must lie in [0, 0.5]");
  if (std::abs(twist) > 0.5) fail("twist must not exceed 0.5 rad");
  if (phases < 2) fail("need at least two phases");
  if (rings < 3 || sectors < 8) fail("mesh resolution too low");
  // The inner ellipsoid must stay inside the outer one along the whole
  // rim: compare in-plane radii at the base plane.
  const double zo = base_height / semi_axes.z();
  const double zi = base_height / inner_limit(*this);
  if (zo * zo >= 1.0 || zi * zi >= 1.0) fail("base plane outside the ellipsoids");
}

SubjectParams sample_params(Rng& rng, const ParamRanges& r) {
  auto u = [&](const double range[2]) { return std::uniform_real_distribution<double>(range[0], range[1])(rng); };
  SubjectParams p;
  p.semi_axes = Vec3(u(r.semi_x), u(r.semi_y), u(r.semi_z));
  p.base_thickness = u(r.base_thickness);
  p.apex_thickness = u(r.apex_thickness);
  p.base_height = u(r.base_fraction) * p.semi_axes.z();
  p.contraction = u(r.contraction);
  p.twist = u(r.twist);
  p.validate();
  return p;
}

int es_phase(int phases) { return static_cast<int>(std::lround(0.35 * phases)); }

double contraction_weight(double t, int phases) {
  const double es = es_phase(phases);
  if (t <= 0.0) return 0.0;
  if (t <= es) return 0.5 * (1.0 - std::cos(std::numbers::pi * t / es));
  if (t >= phases) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (t - es) / (phases - es)));
}

ContractionMap::ContractionMap(const SubjectParams& params) : params_(params) {}

double ContractionMap::angle(double z, double t) const {
  const double apex = -params_.semi_axes.z();
  const double height = params_.base_height - apex;
  return params_.twist * contraction_weight(t, params_.phases) * (z - apex) / height;
}

Vec3 ContractionMap::forward(const Vec3& x, double t) const {
  const double s = 1.0 - params_.contraction * contraction_weight(t, params_.phases);
  const double a = angle(x.z(), t);
  const double c = std::cos(a), sn = std::sin(a);
  return Vec3(s * (c * x.x() - sn * x.y()), s * (sn * x.x() + c * x.y()), x.z());
}

Vec3 ContractionMap::inverse(const Vec3& y, double t) const {
  const double s = 1.0 - params_.contraction * contraction_weight(t, params_.phases);
  const double a = angle(y.z(), t);
  const double c = std::cos(a), sn = std::sin(a);
  return Vec3((c * y.x() + sn * y.y()) / s, (-sn * y.x() + c * y.y()) / s, y.z());
}

TriMesh ed_mesh(const SubjectParams& p) {
  p.validate();
  TriMesh mesh;
  const int nu = p.rings, nt = p.sectors;

  // One surface: apex vertex followed by nu rings of nt vertices.
  auto add_surface = [&](const Vec3& axes, bool flip) {
    const int apex = static_cast<int>(mesh.vertices.size());
    const double u_max = std::acos(-p.base_height / axes.z());
    mesh.vertices.emplace_back(0.0, 0.0, -axes.z());
    for (int k = 1; k <= nu; ++k) {
      const double u = u_max * k / nu;
      for (int j = 0; j < nt; ++j) {
        const double th = 2.0 * std::numbers::pi * j / nt;
        const double z = k == nu ? p.base_height : -axes.z() * std::cos(u);
        mesh.vertices.emplace_back(axes.x() * std::sin(u) * std::cos(th), axes.y() * std::sin(u) * std::sin(th), z);
      }
    }
    auto ring = [&](int k, int j) { return k == 0 ? apex : apex + 1 + (k - 1) * nt + (j % nt); };
    auto add = [&](int a, int b, int c) {
      if (flip) {
        mesh.faces.emplace_back(a, c, b);
      } else {
        mesh.faces.emplace_back(a, b, c);
      }
    };
    for (int j = 0; j < nt; ++j) add(apex, ring(1, j + 1), ring(1, j));
    for (int k = 1; k < nu; ++k) {
      for (int j = 0; j < nt; ++j) {
        add(ring(k, j), ring(k, j + 1), ring(k + 1, j));
        add(ring(k, j + 1), ring(k + 1, j + 1), ring(k + 1, j));
      }
    }
    return apex + 1 + (nu - 1) * nt;  // first vertex of the top ring
  };

  const int outer_top = add_surface(p.semi_axes, false);
  const Vec3 inner_axes(p.semi_axes.x() - p.base_thickness, p.semi_axes.y() - p.base_thickness, inner_limit(p));
  const int inner_top = add_surface(inner_axes, true);
  for (int j = 0; j < nt; ++j) {
    const int o0 = outer_top + j, o1 = outer_top + (j + 1) % nt;
    const int i0 = inner_top + j, i1 = inner_top + (j + 1) % nt;
    mesh.faces.emplace_back(o0, o1, i0);
    mesh.faces.emplace_back(o1, i1, i0);
  }
  return mesh;
}

Subject generate_subject(const SubjectParams& params) {
  Subject s;
  s.params = params;
  const TriMesh ed = ed_mesh(params);
  const ContractionMap map(params);
  s.phases.reserve(static_cast<std::size_t>(params.phases));
  for (int t = 0; t < params.phases; ++t) {
    TriMesh m = ed;
    if (t > 0) {
      for (auto& v : m.vertices) v = map.forward(v, t);
    }
    s.phases.push_back(std::move(m));
  }
  return s;
}

edspace::Atlas make_atlas(int n, std::uint64_t seed, const ParamRanges& ranges) {
  Rng rng = make_rng(seed, "atlas");
  edspace::Atlas atlas;
  for (int i = 0; i < n; ++i) atlas.shapes.push_back(ed_mesh(sample_params(rng, ranges)));
  return atlas;
}

std::vector<geom::Plane> sax_planes(const SubjectParams& params, int count, double spacing, double offset) {
  std::vector<geom::Plane> planes;
  for (int s = 0; s < count; ++s) {
    planes.push_back({Vec3(0.0, 0.0, params.base_height - offset - s * spacing), Vec3::UnitZ()});
  }
  return planes;
}

namespace {

std::vector<geom::Plane> lax_planes(int count) {
  std::vector<geom::Plane> planes;
  for (int s = 0; s < count; ++s) {
    const double a = std::numbers::pi * s / count;
    planes.push_back({Vec3::Zero(), Vec3(std::cos(a), std::sin(a), 0.0)});
  }
  return planes;
}

geom::SliceObservation slice_phases(const Subject& subject, const std::vector<geom::Plane>& planes,
                                    const std::vector<int>& phases, const CmrOptions& options) {
  geom::SliceObservation obs;
  obs.sequence_length = subject.params.phases;
  Rng rng = make_rng(options.seed, "observation_noise");
  std::normal_distribution<double> noise(0.0, options.noise);
  for (int t : phases) {
    for (std::size_t s = 0; s < planes.size(); ++s) {
      for (const auto& contour : geom::intersect_plane(subject.phases[t], planes[s])) {
        const int count = std::max(8, static_cast<int>(std::ceil(contour.length() / options.point_spacing)));
        for (auto p : geom::resample(contour, count)) {
          if (options.noise > 0.0) p += Vec3(noise(rng), noise(rng), noise(rng));
          obs.points.points.push_back(p);
          obs.points.phase.push_back(t);
          obs.points.slice.push_back(static_cast<int>(s));
        }
      }
    }
  }
  obs.planes = planes;
  if (options.pose) {
    const auto& pose = *options.pose;
    obs.points = geom::apply_transform(pose, obs.points);
    const Eigen::Matrix3d r = pose.rotation();
    for (auto& pl : obs.planes) {
      pl.origin = pose.apply(pl.origin);
      pl.normal = r * pl.normal;
    }
  }
  return obs;
}

}  // namespace

geom::SliceObservation make_cmr_observations(const Subject& subject, const CmrOptions& options) {
  if (options.lax_slices < 0) throw DatasetError("negative long-axis slice count");
  auto planes = sax_planes(subject.params, options.sax_slices, options.sax_spacing, options.first_slice_offset);
  for (const auto& pl : lax_planes(options.lax_slices)) planes.push_back(pl);
  std::vector<int> phases(static_cast<std::size_t>(subject.params.phases));
  for (int t = 0; t < subject.params.phases; ++t) phases[t] = t;
  return slice_phases(subject, planes, phases, options);
}

geom::SliceObservation make_ct_observations(const Subject& subject, const CmrOptions& options) {
  const auto& p = subject.params;
  const double height = p.base_height + p.semi_axes.z();
  const int count = static_cast<int>(std::floor(height - options.first_slice_offset));
  const auto planes = sax_planes(p, count, 1.0, options.first_slice_offset);
  return slice_phases(subject, planes, {0, es_phase(p.phases)}, options);
}

}  // namespace cardioflow::synth
