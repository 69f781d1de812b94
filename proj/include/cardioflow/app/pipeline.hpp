#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cardioflow/app/checkpoint.hpp"
#include "cardioflow/app/config.hpp"
#include "cardioflow/geom/observation.hpp"
#include "cardioflow/inference/align.hpp"
#include "cardioflow/inference/infer.hpp"
#include "cardioflow/synth/generator.hpp"
#include "cardioflow/training/joint.hpp"
#include "cardioflow/training/pretrain.hpp"

namespace cardioflow::app {

namespace fs = std::filesystem;

// ---- dataset on disk -------------------------------------------------------
//
// root/dataset.json            {"phases", "train": [...], "test": [...]}
// root/atlas/                  atlas.json + OBJ shapes (subject frame)
// root/subjects/<id>/subject.json   generator parameters and scanner pose
// root/subjects/<id>/phase_XX.obj   ground-truth meshes (scanner frame)
// root/subjects/<id>/{sax,sax_lax,ct}.json + .txt   slice observations

struct Dataset {
  fs::path root;
  int phases = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;

  fs::path subject_dir(const std::string& id) const { return root / "subjects" / id; }
};

struct SubjectRecord {
  std::string id;
  synth::SubjectParams params;
  std::optional<geom::SimilarityTransform> pose;  // subject frame -> scanner
  int es_phase = 0;

  /// Ground-truth position at `phase` of an end-diastolic scanner-frame point.
  geom::Vec3 correspond(const geom::Vec3& ed_point, int phase) const;
};

std::string phase_file(int phase);  // "phase_07.obj"

void run_synth(const PipelineConfig& config, const fs::path& out);
Dataset load_dataset(const fs::path& root);
SubjectRecord load_subject(const Dataset& dataset, const std::string& id);
std::vector<geom::TriMesh> load_phase_meshes(const fs::path& dir, int phases);
void save_phase_meshes(const fs::path& dir, const std::vector<geom::TriMesh>& meshes,
                       const std::vector<int>& phases);

/// `base` without extension: points go to base.txt, planes and the sequence
/// length to base.json.
void save_observation(const fs::path& base, const geom::SliceObservation& obs);
geom::SliceObservation load_observation(const fs::path& json_path);

// ---- training stages -------------------------------------------------------

Checkpoint build_edspace(const PipelineConfig& config, const edspace::Atlas& atlas);
/// Augmented shells in canonical coordinates.
std::vector<geom::TriMesh> pretraining_shapes(const PipelineConfig& config, const Checkpoint& checkpoint);
training::PretrainResult run_pretrain(const PipelineConfig& config, Checkpoint& checkpoint,
                                      const training::PretrainProgress& progress = {});

/// Training subjects registered to the mean shape (on their end-diastolic
/// mesh) and normalized.
std::vector<training::TrainingSequence> training_sequences(const PipelineConfig& config, const Checkpoint& checkpoint,
                                                           const Dataset& dataset);
/// Joint training; fills the motion network, the fine-tuned shape network,
/// the code table and the motion-code PCA of the checkpoint.
training::JointResult run_train(const PipelineConfig& config, Checkpoint& checkpoint,
                                const std::vector<training::TrainingSequence>& sequences,
                                const training::JointProgress& progress = {});

// ---- test-time stages ------------------------------------------------------

struct Inference {
  inference::CanonicalFrame frame;
  inference::InferredCodes codes;
  bool interpolated = false;
  bool rank_deficient = false;
  bool low_confidence = false;
};

/// Registers, normalizes and fits codes. `phases` restricts the observed
/// phases used (empty: all).
Inference run_infer(const PipelineConfig& config, const Checkpoint& checkpoint, const geom::SliceObservation& obs,
                    const std::vector<int>& phases = {});

enum class CompletionMode { kKeyframes, kTwoPhase };
/// Motion codes for every phase of the cycle from the observed ones.
Inference complete_motion(const PipelineConfig& config, const Checkpoint& checkpoint, const Inference& partial,
                          CompletionMode mode, int es_phase = -1);

nlohmann::json inference_to_json(const Inference& inf);
Inference inference_from_json(const nlohmann::json& j);

/// World-frame meshes for every phase that has a motion code.
std::vector<geom::TriMesh> reconstruct_sequence(const PipelineConfig& config, const Checkpoint& checkpoint,
                                                const Inference& inf);

/// Trajectories of world-frame end-diastolic points: one 3 x n matrix per
/// phase that has a code. Sets `converged` to false if any inversion failed.
std::vector<Eigen::MatrixXd> track_sequence(const PipelineConfig& config, const Checkpoint& checkpoint,
                                            const Inference& inf, const std::vector<geom::Vec3>& ed_points,
                                            bool* converged = nullptr);

// ---- evaluation ------------------------------------------------------------

struct PhaseMetrics {
  int phase = 0;
  double cd = 0.0;          // unit_scale * world distance
  double emd = 0.0;
  double dice = 0.0;        // mean over planes that cut the ground truth
  double hausdorff = 0.0;   // mm
  double volume_pred = 0.0;
  double volume_true = 0.0;
};

struct Evaluation {
  std::string subject;
  std::vector<PhaseMetrics> phases;
  double unit_scale = 1.0;  // multiplier applied to world distances for cd / emd

  PhaseMetrics mean() const;
  std::string csv() const;
  nlohmann::json json() const;
};

/// `pred` and `truth` are scanner-frame meshes of the listed phases.
Evaluation evaluate(const PipelineConfig& config, const std::vector<geom::TriMesh>& pred,
                    const std::vector<geom::TriMesh>& truth, const std::vector<int>& phases,
                    const std::vector<geom::Plane>& planes, double unit_scale);

/// Chamfer distance in canonical units between two world meshes.
double mesh_chamfer(const geom::TriMesh& a, const geom::TriMesh& b, int samples, double unit_scale,
                    std::uint64_t seed);

}  // namespace cardioflow::app
