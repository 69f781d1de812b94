#include "cardioflow/app/pipeline.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cardioflow/error.hpp"
#include "cardioflow/file_util.hpp"
#include "cardioflow/geom/io.hpp"
#include "cardioflow/geom/registration.hpp"
#include "cardioflow/inference/motion_pca.hpp"
#include "cardioflow/inference/reconstruct.hpp"
#include "cardioflow/inference/tracking.hpp"
#include "cardioflow/metrics/metrics.hpp"

namespace cardioflow::app {

using nlohmann::json;
using geom::Vec3;

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json transform_json(const geom::SimilarityTransform& t) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({t.matrix()(r, 0), t.matrix()(r, 1), t.matrix()(r, 2), t.matrix()(r, 3)});
  return rows;
}

geom::SimilarityTransform transform_from(const json& j) {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return geom::SimilarityTransform(m);
}

json params_json(const synth::SubjectParams& p) {
  return {{"semi_axes", {p.semi_axes.x(), p.semi_axes.y(), p.semi_axes.z()}},
          {"base_thickness", p.base_thickness},
          {"apex_thickness", p.apex_thickness},
          {"base_height", p.base_height},
          {"contraction", p.contraction},
          {"twist", p.twist},
          {"phases", p.phases},
          {"rings", p.rings},
          {"sectors", p.sectors}};
}

synth::SubjectParams params_from(const json& j) {
  synth::SubjectParams p;
  const auto a = j.at("semi_axes").get<std::vector<double>>();
  if (a.size() != 3) throw DatasetError("semi_axes needs three values");
  p.semi_axes = Vec3(a[0], a[1], a[2]);
  p.base_thickness = j.at("base_thickness").get<double>();
  p.apex_thickness = j.at("apex_thickness").get<double>();
  p.base_height = j.at("base_height").get<double>();
  p.contraction = j.at("contraction").get<double>();
  p.twist = j.at("twist").get<double>();
  p.phases = j.at("phases").get<int>();
  p.rings = j.at("rings").get<int>();
  p.sectors = j.at("sectors").get<int>();
  p.validate();
  return p;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

std::string mesh_text(const geom::TriMesh& mesh) {
  std::ostringstream os;
  geom::write_obj(os, mesh);
  return os.str();
}

geom::SimilarityTransform random_pose(Rng& rng, double angle, double translation) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> a(-angle, angle), t(-translation, translation);
  Vec3 axis(n(rng), n(rng), n(rng));
  axis.normalize();
  const double theta = angle > 0.0 ? a(rng) : 0.0;
  const Vec3 shift = translation > 0.0 ? Vec3(t(rng), t(rng), t(rng)) : Vec3::Zero();
  return geom::SimilarityTransform::from_parts(1.0, Eigen::AngleAxisd(theta, axis).toRotationMatrix(), shift);
}

void require_sections(const Checkpoint& ck, bool ssm, bool shape, bool motion) {
  if (ssm && (!ck.ssm || !ck.normalization)) throw CheckpointError("checkpoint has no shape model section (run build-edspace)");
  if (shape && !ck.shape) throw CheckpointError("checkpoint has no shape network (run pretrain)");
  if (motion && (!ck.motion || !ck.codes)) throw CheckpointError("checkpoint has no motion network (run train)");
}

}  // namespace

std::string phase_file(int phase) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phase_%02d.obj", phase);
  return buf;
}

Vec3 SubjectRecord::correspond(const Vec3& ed_point, int phase) const {
  const synth::ContractionMap map(params);
  if (!pose) return map.forward(ed_point, phase);
  return pose->apply(map.forward(pose->inverse().apply(ed_point), phase));
}

void save_observation(const fs::path& base, const geom::SliceObservation& obs) {
  std::ostringstream os;
  geom::write_points_text(os, obs.points);
  const fs::path txt = fs::path(base).replace_extension(".txt");
  atomic_write(txt, os.str());
  json planes = json::array();
  for (const auto& p : obs.planes) planes.push_back({p.origin.x(), p.origin.y(), p.origin.z(), p.normal.x(), p.normal.y(), p.normal.z()});
  write_json(fs::path(base).replace_extension(".json"),
             {{"sequence_length", obs.sequence_length}, {"points", txt.filename().string()}, {"planes", planes}});
}

geom::SliceObservation load_observation(const fs::path& json_path) {
  const json j = read_json(json_path);
  geom::SliceObservation obs;
  try {
    obs.sequence_length = j.at("sequence_length").get<int>();
    for (const auto& p : j.at("planes")) {
      const auto v = p.get<std::vector<double>>();
      if (v.size() != 6) throw DatasetError("plane needs origin and normal");
      obs.planes.push_back({Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]).normalized()});
    }
    obs.points = geom::read_point_cloud(json_path.parent_path() / j.at("points").get<std::string>());
  } catch (const json::exception& e) {
    throw DatasetError(json_path.string() + ": " + e.what());
  }
  obs.validate();
  return obs;
}

void save_phase_meshes(const fs::path& dir, const std::vector<geom::TriMesh>& meshes, const std::vector<int>& phases) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < meshes.size(); ++k) atomic_write(dir / phase_file(phases[k]), mesh_text(meshes[k]));
}

std::vector<geom::TriMesh> load_phase_meshes(const fs::path& dir, int phases) {
  std::vector<geom::TriMesh> out;
  for (int p = 0; p < phases; ++p) {
    const fs::path f = dir / phase_file(p);
    if (!fs::exists(f)) throw DatasetError("missing phase mesh " + f.string());
    out.push_back(geom::read_obj(f));
  }
  return out;
}

void run_synth(const PipelineConfig& config, const fs::path& out) {
  const auto& s = config.synth;
  fs::create_directories(out / "subjects");
  edspace::save_atlas(out / "atlas", synth::make_atlas(s.atlas_subjects, derive_seed(config.seed, "atlas")));

  Rng rng = make_rng(config.seed, "subjects");
  Dataset ds;
  ds.phases = s.phases;
  for (int i = 0; i < s.train_subjects + s.test_subjects; ++i) {
    char id[32];
    const bool train = i < s.train_subjects;
    std::snprintf(id, sizeof id, "%s_%02d", train ? "train" : "test", train ? i : i - s.train_subjects);
    (train ? ds.train : ds.test).push_back(id);

    synth::SubjectParams params = synth::sample_params(rng);
    params.phases = s.phases;
    std::optional<geom::SimilarityTransform> pose;
    if (s.pose_angle > 0.0 || s.pose_translation > 0.0) pose = random_pose(rng, s.pose_angle, s.pose_translation);
    const synth::Subject subject = synth::generate_subject(params);

    const fs::path dir = out / "subjects" / id;
    std::vector<geom::TriMesh> meshes;
    std::vector<int> phases;
    for (int p = 0; p < s.phases; ++p) {
      meshes.push_back(pose ? geom::apply_transform(*pose, subject.phases[static_cast<std::size_t>(p)])
                            : subject.phases[static_cast<std::size_t>(p)]);
      phases.push_back(p);
    }
    save_phase_meshes(dir, meshes, phases);

    synth::CmrOptions cmr;
    cmr.sax_slices = s.sax_slices;
    cmr.sax_spacing = s.sax_spacing;
    cmr.noise = s.noise;
    cmr.seed = derive_seed(config.seed, std::string("observations.") + id);
    cmr.pose = pose;
    save_observation(dir / "sax", synth::make_cmr_observations(subject, cmr));
    if (s.lax_slices > 0) {
      synth::CmrOptions both = cmr;
      both.lax_slices = s.lax_slices;
      save_observation(dir / "sax_lax", synth::make_cmr_observations(subject, both));
    }
    save_observation(dir / "ct", synth::make_ct_observations(subject, cmr));

    json meta = {{"id", id}, {"params", params_json(params)}, {"es_phase", synth::es_phase(s.phases)}};
    if (pose) meta["pose"] = transform_json(*pose);
    write_json(dir / "subject.json", meta);
  }
  write_json(out / "dataset.json", {{"phases", ds.phases}, {"train", ds.train}, {"test", ds.test}});
}

Dataset load_dataset(const fs::path& root) {
  const json j = read_json(root / "dataset.json");
  Dataset ds;
  ds.root = root;
  try {
    ds.phases = j.at("phases").get<int>();
    ds.train = j.at("train").get<std::vector<std::string>>();
    ds.test = j.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DatasetError((root / "dataset.json").string() + ": " + e.what());
  }
  return ds;
}

SubjectRecord load_subject(const Dataset& dataset, const std::string& id) {
  const fs::path f = dataset.subject_dir(id) / "subject.json";
  const json j = read_json(f);
  SubjectRecord r;
  r.id = id;
  try {
    r.params = params_from(j.at("params"));
    r.es_phase = j.at("es_phase").get<int>();
    if (j.contains("pose")) r.pose = transform_from(j.at("pose"));
  } catch (const json::exception& e) {
    throw DatasetError(f.string() + ": " + e.what());
  }
  return r;
}

Checkpoint build_edspace(const PipelineConfig& config, const edspace::Atlas& atlas) {
  Checkpoint ck;
  ck.ssm = edspace::build_ssm(atlas, config.edspace.modes);
  ck.normalization = edspace::make_normalization(*ck.ssm, config.edspace.radius);
  ck.config = config_to_json(config).dump();
  return ck;
}

std::vector<geom::TriMesh> pretraining_shapes(const PipelineConfig& config, const Checkpoint& ck) {
  require_sections(ck, true, false, false);
  std::vector<geom::TriMesh> shapes;
  for (const auto& alpha : edspace::augment(*ck.ssm, config.edspace.augmented, config.edspace.spread,
                                            derive_seed(config.seed, "augmentation"))) {
    shapes.push_back(edspace::normalize(edspace::sample_shape(*ck.ssm, alpha), *ck.normalization));
  }
  return shapes;
}

training::PretrainResult run_pretrain(const PipelineConfig& config, Checkpoint& ck,
                                      const training::PretrainProgress& progress) {
  const PipelineConfig rc = config.resolved();
  training::PretrainResult r = training::pretrain_shape(pretraining_shapes(rc, ck), rc.pretrain, progress);
  ck.shape = r.net;
  ck.pretrain_codes = r.codes;
  ck.config = config_to_json(config).dump();
  return r;
}

std::vector<training::TrainingSequence> training_sequences(const PipelineConfig& config, const Checkpoint& ck,
                                                           const Dataset& dataset) {
  require_sections(ck, true, false, false);
  const geom::TriMesh mean = ck.ssm->mean_shape();
  geom::RegistrationOptions opts;
  opts.rigid = config.edspace.rigid;
  std::vector<training::TrainingSequence> out;
  for (const auto& id : dataset.train) {
    std::vector<geom::TriMesh> meshes = load_phase_meshes(dataset.subject_dir(id), dataset.phases);
    const auto reg = geom::register_similarity(geom::to_point_cloud(meshes.front()), mean, opts);
    const inference::CanonicalFrame frame{reg.transform, *ck.normalization};
    training::TrainingSequence seq;
    seq.id = id;
    for (const auto& m : meshes) seq.phases.push_back(frame.to_canonical(m));
    out.push_back(std::move(seq));
  }
  return out;
}

training::JointResult run_train(const PipelineConfig& config, Checkpoint& ck,
                                const std::vector<training::TrainingSequence>& sequences,
                                const training::JointProgress& progress) {
  const PipelineConfig rc = config.resolved();
  models::ShapeNet shape;
  if (rc.train_from_scratch) {
    Rng rng = make_rng(rc.seed, "train.shape_init");
    shape = models::ShapeNet(rc.shape_net, rng);
  } else {
    require_sections(ck, false, true, false);
    shape = *ck.shape;
  }
  training::JointResult r = training::train_joint(sequences, shape, rc.train, progress);
  ck.motion = r.motion;
  ck.shape = r.shape;
  ck.codes = r.codes;
  ck.motion_pca.reset();
  if (r.codes.size() >= 2) {
    std::vector<Eigen::MatrixXd> seqs;
    for (std::size_t s = 0; s < r.codes.size(); ++s) seqs.push_back(r.codes.motion_codes(static_cast<int>(s)));
    const int max_k = static_cast<int>(seqs.size()) - 1;
    const int k = rc.motion_pca.components < 0 ? -1 : std::min(rc.motion_pca.components, max_k);
    ck.motion_pca = inference::build_motion_pca(seqs, k, rc.motion_pca.energy);
  }
  ck.config = config_to_json(config).dump();
  return r;
}

Inference run_infer(const PipelineConfig& config, const Checkpoint& ck, const geom::SliceObservation& obs,
                    const std::vector<int>& phases) {
  require_sections(ck, true, true, true);
  const PipelineConfig rc = config.resolved();
  Inference out;
  out.frame = inference::align_observation(obs, ck.ssm->mean_shape(), *ck.normalization, rc.edspace.rigid);
  inference::CanonicalObservation canon = inference::to_canonical(obs, out.frame);
  if (!phases.empty()) canon = inference::select_phases(canon, phases);
  out.codes = inference::infer_codes(canon, *ck.motion, *ck.shape, rc.inference);
  return out;
}

Inference complete_motion(const PipelineConfig& config, const Checkpoint& ck, const Inference& partial,
                          CompletionMode mode, int es_phase) {
  if (!ck.motion_pca) throw CheckpointError("checkpoint has no motion PCA (train on at least two subjects)");
  const inference::MotionPca& model = *ck.motion_pca;
  const auto& codes = partial.codes;
  inference::Interpolation interp;
  if (mode == CompletionMode::kKeyframes) {
    std::vector<inference::ObservedCode> observed;
    for (std::size_t k = 0; k < codes.phases.size(); ++k) {
      observed.push_back({static_cast<double>(codes.phases[k]) / codes.sequence_length, codes.motion.col(static_cast<Eigen::Index>(k))});
    }
    interp = inference::interpolate_motion(model, observed, config.motion_pca.centered);
  } else {
    if (es_phase < 0) {
      for (int p : codes.phases)
        if (p != 0) es_phase = p;
    }
    if (es_phase < 0) throw DatasetError("two-phase completion needs an end-systolic phase index");
    std::optional<Eigen::VectorXd> es;
    const auto it = std::find(codes.phases.begin(), codes.phases.end(), es_phase);
    if (it != codes.phases.end()) es = codes.motion.col(it - codes.phases.begin());
    interp = inference::interpolate_two_phase(model, codes.motion_code(0), es, es_phase, config.motion_pca.centered);
  }
  Inference out = partial;
  out.interpolated = true;
  out.rank_deficient = interp.rank_deficient;
  out.low_confidence = interp.low_confidence;
  const int length = codes.sequence_length;
  out.codes.motion = model.phases == length ? interp.codes : inference::resample_codes(interp.codes, length);
  // Observed phases keep their fitted codes.
  for (std::size_t k = 0; k < codes.phases.size(); ++k) out.codes.motion.col(codes.phases[k]) = codes.motion.col(static_cast<Eigen::Index>(k));
  out.codes.phases.clear();
  for (int p = 0; p < length; ++p) out.codes.phases.push_back(p);
  return out;
}

json inference_to_json(const Inference& inf) {
  const auto& c = inf.codes;
  json motion = json::array();
  for (Eigen::Index k = 0; k < c.motion.cols(); ++k) motion.push_back(vec_json(c.motion.col(k)));
  return {{"sequence_length", c.sequence_length},
          {"phases", c.phases},
          {"shape_code", vec_json(c.shape)},
          {"motion_codes", motion},
          {"registration", transform_json(inf.frame.registration)},
          {"normalization",
           {{"center", {inf.frame.normalization.center.x(), inf.frame.normalization.center.y(), inf.frame.normalization.center.z()}},
            {"scale", inf.frame.normalization.scale}}},
          {"final_loss", c.loss.empty() ? 0.0 : c.loss.back()},
          {"iterations", c.loss.size()},
          {"mean_abs_sdf", c.mean_abs_sdf},
          {"diverged", c.diverged},
          {"interpolated", inf.interpolated},
          {"rank_deficient", inf.rank_deficient},
          {"low_confidence", inf.low_confidence}};
}

Inference inference_from_json(const json& j) {
  Inference inf;
  try {
    auto& c = inf.codes;
    c.sequence_length = j.at("sequence_length").get<int>();
    c.phases = j.at("phases").get<std::vector<int>>();
    c.shape = vec_from(j.at("shape_code"));
    const auto& motion = j.at("motion_codes");
    if (motion.size() != c.phases.size()) throw DatasetError("motion code count differs from phase count");
    for (std::size_t k = 0; k < motion.size(); ++k) {
      const Eigen::VectorXd v = vec_from(motion[k]);
      if (k == 0) c.motion.resize(v.size(), static_cast<Eigen::Index>(motion.size()));
      if (v.size() != c.motion.rows()) throw DatasetError("ragged motion codes");
      c.motion.col(static_cast<Eigen::Index>(k)) = v;
    }
    c.mean_abs_sdf = j.value("mean_abs_sdf", 0.0);
    c.diverged = j.value("diverged", false);
    inf.frame.registration = transform_from(j.at("registration"));
    const auto center = j.at("normalization").at("center").get<std::vector<double>>();
    if (center.size() != 3) throw DatasetError("normalization center needs three values");
    inf.frame.normalization.center = Vec3(center[0], center[1], center[2]);
    inf.frame.normalization.scale = j.at("normalization").at("scale").get<double>();
    inf.interpolated = j.value("interpolated", false);
    inf.rank_deficient = j.value("rank_deficient", false);
    inf.low_confidence = j.value("low_confidence", false);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("inferred codes: ") + e.what());
  }
  return inf;
}

std::vector<geom::TriMesh> reconstruct_sequence(const PipelineConfig& config, const Checkpoint& ck, const Inference& inf) {
  require_sections(ck, false, true, true);
  std::vector<geom::TriMesh> out;
  const auto& c = inf.codes;
  for (std::size_t k = 0; k < c.phases.size(); ++k) {
    const double tau = static_cast<double>(c.phases[k]) / c.sequence_length;
    const geom::TriMesh mesh = inference::reconstruct_phase(*ck.motion, *ck.shape, c.motion.col(static_cast<Eigen::Index>(k)),
                                                            c.shape, tau, config.reconstruct);
    out.push_back(inf.frame.to_world(mesh));
  }
  return out;
}

std::vector<Eigen::MatrixXd> track_sequence(const PipelineConfig& config, const Checkpoint& ck, const Inference& inf,
                                            const std::vector<Vec3>& ed_points, bool* converged) {
  require_sections(ck, false, false, true);
  const auto& c = inf.codes;
  const Eigen::VectorXd from = c.motion_code(0);
  Eigen::MatrixXd y0(3, static_cast<Eigen::Index>(ed_points.size()));
  for (std::size_t i = 0; i < ed_points.size(); ++i) y0.col(static_cast<Eigen::Index>(i)) = inf.frame.to_canonical(ed_points[i]);
  if (converged) *converged = true;
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t k = 0; k < c.phases.size(); ++k) {
    const double tau = static_cast<double>(c.phases[k]) / c.sequence_length;
    const inference::TrackResult r =
        inference::track_points(*ck.motion, from, 0.0, c.motion.col(static_cast<Eigen::Index>(k)), tau, y0, config.track);
    if (converged && !r.all_converged()) *converged = false;
    Eigen::MatrixXd world(3, r.points.cols());
    for (Eigen::Index i = 0; i < r.points.cols(); ++i) world.col(i) = inf.frame.to_world(Vec3(r.points.col(i)));
    out.push_back(std::move(world));
  }
  return out;
}

double mesh_chamfer(const geom::TriMesh& a, const geom::TriMesh& b, int samples, double unit_scale, std::uint64_t seed) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  Rng ra(seed), rb(seed);
  return unit_scale * metrics::chamfer(geom::sample_surface(a, static_cast<std::size_t>(samples), ra),
                                       geom::sample_surface(b, static_cast<std::size_t>(samples), rb));
}

Evaluation evaluate(const PipelineConfig& config, const std::vector<geom::TriMesh>& pred,
                    const std::vector<geom::TriMesh>& truth, const std::vector<int>& phases,
                    const std::vector<geom::Plane>& planes, double unit_scale) {
  if (pred.size() != truth.size() || pred.size() != phases.size()) throw ShapeError("evaluation needs one mesh pair per phase");
  const auto& e = config.eval;
  const std::uint64_t surface_seed = derive_seed(config.seed, "eval.surface");
  Evaluation out;
  out.unit_scale = unit_scale;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    PhaseMetrics m;
    m.phase = phases[k];
    const geom::TriMesh &p = pred[k], &t = truth[k];
    if (p.empty()) {
      m.cd = m.emd = std::numeric_limits<double>::infinity();
    } else {
      Rng ra(surface_seed), rb(surface_seed);
      const auto sa = geom::sample_surface(p, static_cast<std::size_t>(e.surface_points), ra);
      const auto sb = geom::sample_surface(t, static_cast<std::size_t>(e.surface_points), rb);
      m.cd = unit_scale * metrics::chamfer(sa, sb);
      const std::size_t n_sub = std::min<std::size_t>(static_cast<std::size_t>(e.emd_points), sa.size());
      m.emd = unit_scale * metrics::emd(sa, sb, n_sub, derive_seed(config.seed, "eval.emd"));
    }
    double dice = 0.0, hd = 0.0;
    int used = 0;
    for (const auto& plane : planes) {
      double half = 0.0;
      for (const auto& v : t.vertices) {
        const Vec3 d = v - plane.origin;
        half = std::max(half, (d - d.dot(plane.normal) * plane.normal).norm());
      }
      const metrics::SliceMask frame = metrics::make_mask(plane.origin, plane.normal, 1.05 * half, e.mask_spacing);
      const metrics::SliceMask gt = metrics::rasterize(t, frame);
      if (gt.count() == 0) continue;
      const metrics::DiceHausdorff r = metrics::compare_masks(p.empty() ? frame : metrics::rasterize(p, frame), gt,
                                                              e.hausdorff_percentile);
      dice += r.dice;
      hd += r.hausdorff;
      ++used;
    }
    m.dice = used ? dice / used : std::numeric_limits<double>::quiet_NaN();
    m.hausdorff = used ? hd / used : std::numeric_limits<double>::quiet_NaN();
    m.volume_true = metrics::signed_volume(t);
    m.volume_pred = !p.empty() && geom::is_watertight(p) ? metrics::signed_volume(p) : std::numeric_limits<double>::quiet_NaN();
    out.phases.push_back(m);
  }
  return out;
}

PhaseMetrics Evaluation::mean() const {
  PhaseMetrics m;
  m.phase = -1;
  if (phases.empty()) return m;
  for (const auto& p : phases) {
    m.cd += p.cd;
    m.emd += p.emd;
    m.dice += p.dice;
    m.hausdorff += p.hausdorff;
    m.volume_pred += p.volume_pred;
    m.volume_true += p.volume_true;
  }
  const double n = static_cast<double>(phases.size());
  m.cd /= n;
  m.emd /= n;
  m.dice /= n;
  m.hausdorff /= n;
  m.volume_pred /= n;
  m.volume_true /= n;
  return m;
}

std::string Evaluation::csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "subject,phase,cd,emd,dice,hd_mm,volume_pred,volume_true\n";
  for (const auto& p : phases) {
    os << subject << ',' << p.phase << ',' << p.cd << ',' << p.emd << ',' << p.dice << ',' << p.hausdorff << ',' << p.volume_pred << ','
       << p.volume_true << '\n';
  }
  return os.str();
}

json Evaluation::json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : phases) {
    rows.push_back({{"phase", p.phase},
                    {"cd", num(p.cd)},
                    {"emd", num(p.emd)},
                    {"dice", num(p.dice)},
                    {"hausdorff_mm", num(p.hausdorff)},
                    {"volume_pred", num(p.volume_pred)},
                    {"volume_true", num(p.volume_true)}});
  }
  const PhaseMetrics m = mean();
  std::vector<double> vp, vt;
  for (const auto& p : phases) {
    vp.push_back(p.volume_pred);
    vt.push_back(p.volume_true);
  }
  nlohmann::json summary = {{"cd", num(m.cd)}, {"emd", num(m.emd)}, {"dice", num(m.dice)}, {"hausdorff_mm", num(m.hausdorff)}};
  if (!phases.empty()) {
    summary["ejection_fraction_true"] = metrics::ejection_fraction(vt);
    bool finite = true;
    for (double v : vp) finite = finite && std::isfinite(v);
    summary["ejection_fraction_pred"] = finite ? nlohmann::json(metrics::ejection_fraction(vp)) : nlohmann::json(nullptr);
  }
  return {{"subject", subject}, {"unit_scale", unit_scale}, {"phases", rows}, {"mean", summary}};
}

}  // namespace cardioflow::app
