#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "cardioflow/inference/infer.hpp"
#include "cardioflow/inference/reconstruct.hpp"
#include "cardioflow/inference/tracking.hpp"
#include "cardioflow/models/grad_suite.hpp"
#include "cardioflow/models/networks.hpp"
#include "cardioflow/synth/generator.hpp"
#include "cardioflow/training/joint.hpp"
#include "cardioflow/training/pretrain.hpp"

namespace cardioflow::app {

struct SynthSettings {
  int atlas_subjects = 20;
  int train_subjects = 10;
  int test_subjects = 1;
  int phases = 25;
  int sax_slices = 9;
  double sax_spacing = 10.0;
  int lax_slices = 2;  // used by the SAX+LAX observation files
  double noise = 0.0;
  /// Random rigid scanner pose per subject: rotation angle bound (rad) and
  /// translation bound (mm).
  double pose_angle = 0.0;
  double pose_translation = 0.0;
};

struct EdspaceSettings {
  int modes = -1;  // -1: min(shapes - 1, 32)
  int augmented = 50;
  double spread = 1.0;
  double radius = 0.9;  // farthest mean-shape vertex in canonical units
  bool rigid = false;   // register subjects without scale
};

struct MotionPcaSettings {
  int components = -1;  // -1: energy rule
  double energy = 0.95;
  bool centered = true;
};

struct EvalSettings {
  int emd_points = 256;
  int surface_points = 2048;  // samples per mesh for CD and EMD
  double mask_spacing = 1.0;  // mm per pixel of the slice masks
  double hausdorff_percentile = 100.0;
};

/// Every tunable of the pipeline. Network shapes and the seed live at the
/// top level and are copied into the stage settings by `resolved()`.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  SynthSettings synth;
  EdspaceSettings edspace;
  models::ShapeNetConfig shape_net;
  models::MotionNetConfig motion_net;
  training::PretrainConfig pretrain;
  training::JointConfig train;
  bool train_from_scratch = false;  // fresh shape network instead of the pre-trained one
  inference::InferenceConfig inference;
  inference::ExtractionOptions reconstruct;
  inference::TrackOptions track;
  MotionPcaSettings motion_pca;
  EvalSettings eval;
  models::GradSuiteOptions gradcheck;

  PipelineConfig resolved() const;
};

/// Throws ConfigError naming the offending key for unknown keys, wrong
/// types and out-of-range values.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::string& path);

}  // namespace cardioflow::app
