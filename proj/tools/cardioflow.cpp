// Command-line entry point: one subcommand per pipeline stage.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "cardioflow/app/checkpoint.hpp"
#include "cardioflow/app/config.hpp"
#include "cardioflow/app/pipeline.hpp"
#include "cardioflow/error.hpp"
#include "cardioflow/file_util.hpp"
#include "cardioflow/geom/io.hpp"
#include "cardioflow/models/grad_suite.hpp"
#include "cardioflow/parallel.hpp"

namespace {

using namespace cardioflow;
using namespace cardioflow::app;
using nlohmann::json;

constexpr double kGradTolerance = 1e-5;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> grid_res;
  bool rigid = false;
  std::string out;
  std::string checkpoint;
  std::string data;
  std::string subject;
  std::string observation;
  std::string codes;
  std::string points;
  std::string pred;
  std::string mode = "keyframes";
  int es_phase = -1;
  std::vector<int> phases;
  bool inject_fault = false;
};

PipelineConfig effective_config(const Options& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.grid_res) c.reconstruct.grid_res = *o.grid_res;
  if (o.rigid) c.edspace.rigid = true;
  // Round trip through the validator so flag values get the same checks.
  return config_from_json(config_to_json(c));
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required option ") + flag);
}

fs::path out_dir(const Options& o) {
  need(o.out, "--out");
  fs::create_directories(o.out);
  return o.out;
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

// One JSON record per epoch on stdout.
void log_epoch(const char* stage, const training::EpochRecord& e) {
  const json j = {{"stage", stage},  {"epoch", e.epoch},         {"loss", e.loss}, {"sdf", e.sdf},
                  {"pointwise", e.pointwise}, {"pairwise", e.pairwise}, {"code", e.code}};
  std::cout << j.dump() << '\n';
}

json history_json(const std::vector<training::EpochRecord>& h) {
  json rows = json::array();
  for (const auto& e : h) {
    rows.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"sdf", e.sdf}, {"pointwise", e.pointwise},
                    {"pairwise", e.pairwise}, {"code", e.code}});
  }
  return rows;
}

int cmd_synth(const Options& o, const PipelineConfig& c) {
  const fs::path out = out_dir(o);
  run_synth(c, out);
  write_json(out / "config.json", config_to_json(c));
  return 0;
}

int cmd_build_edspace(const Options& o, const PipelineConfig& c) {
  need(o.data, "--data");
  const fs::path out = out_dir(o);
  const Checkpoint ck = build_edspace(c, edspace::load_atlas(fs::path(o.data) / "atlas"));
  save_checkpoint(out / "edspace.cflw", ck);
  const auto& pca = ck.ssm->pca;
  write_json(out / "edspace.json", {{"modes", pca.components()},
                                    {"samples", pca.samples()},
                                    {"truncation_rmse", pca.truncation_rmse()},
                                    {"normalization_scale", ck.normalization->scale}});
  return 0;
}

int cmd_pretrain(const Options& o, const PipelineConfig& c) {
  need(o.checkpoint, "--checkpoint");
  const fs::path out = out_dir(o);
  Checkpoint ck = load_checkpoint(o.checkpoint);
  const auto r = run_pretrain(c, ck, [](const training::EpochRecord& e) { log_epoch("pretrain", e); });
  save_checkpoint(out / "pretrain.cflw", ck);
  write_json(out / "pretrain_history.json", {{"epochs_completed", r.epochs_completed}, {"diverged", r.diverged},
                                             {"history", history_json(r.history)}});
  return r.diverged ? 3 : 0;
}

int cmd_train(const Options& o, const PipelineConfig& c) {
  need(o.checkpoint, "--checkpoint");
  need(o.data, "--data");
  const fs::path out = out_dir(o);
  Checkpoint ck = load_checkpoint(o.checkpoint);
  const auto sequences = training_sequences(c, ck, load_dataset(o.data));
  const auto r = run_train(c, ck, sequences,
                           [](const training::EpochRecord& e, const training::JointState&) { log_epoch("train", e); });
  save_checkpoint(out / "train.cflw", ck);
  write_json(out / "train_history.json", {{"epochs_completed", r.epochs_completed}, {"diverged", r.diverged},
                                          {"history", history_json(r.history)}});
  return r.diverged ? 3 : 0;
}

int cmd_infer(const Options& o, const PipelineConfig& c) {
  need(o.checkpoint, "--checkpoint");
  need(o.observation, "--observation");
  const fs::path out = out_dir(o);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Inference inf = run_infer(c, ck, load_observation(o.observation), o.phases);
  write_json(out / "inferred.json", inference_to_json(inf));
  return inf.codes.diverged ? 3 : 0;
}

Inference read_codes(const Options& o) {
  need(o.codes, "--codes");
  try {
    return inference_from_json(json::parse(read_file(o.codes)));
  } catch (const json::parse_error& e) {
    throw DatasetError(o.codes + ": " + e.what());
  }
}

int cmd_reconstruct(const Options& o, const PipelineConfig& c) {
  need(o.checkpoint, "--checkpoint");
  const fs::path out = out_dir(o);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Inference inf = read_codes(o);
  const auto meshes = reconstruct_sequence(c, ck, inf);
  save_phase_meshes(out, meshes, inf.codes.phases);
  json files = json::array();
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    files.push_back({{"phase", inf.codes.phases[k]}, {"file", phase_file(inf.codes.phases[k])},
                     {"vertices", meshes[k].vertices.size()}, {"faces", meshes[k].faces.size()},
                     {"empty", meshes[k].empty()}});
  }
  write_json(out / "manifest.json", {{"sequence_length", inf.codes.sequence_length},
                                     {"grid_res", c.reconstruct.grid_res},
                                     {"meshes", files}});
  return 0;
}

int cmd_track(const Options& o, const PipelineConfig& c) {
  need(o.checkpoint, "--checkpoint");
  need(o.points, "--points");
  const fs::path out = out_dir(o);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Inference inf = read_codes(o);
  const geom::PointCloud pc = geom::read_point_cloud(o.points);
  bool converged = true;
  const auto tracks = track_sequence(c, ck, inf, pc.points, &converged);
  std::ostringstream csv;
  csv.precision(17);
  csv << "point,phase,x,y,z\n";
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(pc.size()); ++i) {
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      csv << i << ',' << inf.codes.phases[k] << ',' << tracks[k](0, i) << ',' << tracks[k](1, i) << ','
          << tracks[k](2, i) << '\n';
    }
  }
  atomic_write(out / "tracks.csv", csv.str());
  if (!converged) std::fprintf(stderr, "warning: some inversions did not reach the tolerance\n");
  return 0;
}

int cmd_interpolate(const Options& o, const PipelineConfig& c) {
  need(o.checkpoint, "--checkpoint");
  const fs::path out = out_dir(o);
  CompletionMode mode;
  if (o.mode == "keyframes") {
    mode = CompletionMode::kKeyframes;
  } else if (o.mode == "two-phase") {
    mode = CompletionMode::kTwoPhase;
  } else {
    throw ConfigError("--mode must be keyframes or two-phase");
  }
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Inference full = complete_motion(c, ck, read_codes(o), mode, o.es_phase);
  write_json(out / "completed.json", inference_to_json(full));
  if (full.low_confidence) std::fprintf(stderr, "warning: completion is low-confidence\n");
  return 0;
}

int cmd_eval(const Options& o, const PipelineConfig& c) {
  need(o.pred, "--pred");
  need(o.data, "--data");
  need(o.subject, "--subject");
  const fs::path out = out_dir(o);
  const Dataset ds = load_dataset(o.data);
  const fs::path truth_dir = ds.subject_dir(o.subject);
  double unit = 1.0;
  if (!o.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    if (ck.normalization) unit = 1.0 / ck.normalization->scale;
  }
  std::vector<int> phases;
  std::vector<geom::TriMesh> pred, truth;
  for (int p = 0; p < ds.phases; ++p) {
    const fs::path f = fs::path(o.pred) / phase_file(p);
    if (!fs::exists(f)) continue;
    phases.push_back(p);
    pred.push_back(geom::read_obj(f));
    truth.push_back(geom::read_obj(truth_dir / phase_file(p)));
  }
  if (phases.empty()) throw DatasetError("no phase meshes found in " + o.pred);
  const auto planes = load_observation(truth_dir / "sax.json").planes;
  Evaluation ev = evaluate(c, pred, truth, phases, planes, unit);
  ev.subject = o.subject;
  atomic_write(out / "metrics.csv", ev.csv());
  write_json(out / "metrics.json", ev.json());
  return 0;
}

int cmd_gradcheck(const Options& o, const PipelineConfig& c) {
  models::GradSuiteOptions opts = c.resolved().gradcheck;
  opts.inject_fault = o.inject_fault;
  models::GradSuiteReport report;
  if (!o.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    if (!ck.shape || !ck.motion) throw CheckpointError("gradcheck on a checkpoint needs both networks");
    report = models::run_grad_suite(*ck.shape, *ck.motion, opts);
  } else {
    report = models::run_grad_suite(c.shape_net, c.motion_net, opts);
  }
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"target", e.target}, {"variables", e.variables}, {"max_relative_error", e.max_relative_error},
                       {"compared", e.compared}, {"kinks", e.kinks}});
  }
  const bool pass = report.max_relative_error < kGradTolerance;
  const json j = {{"pass", pass}, {"tolerance", kGradTolerance}, {"max_relative_error", report.max_relative_error},
                  {"seconds", report.seconds}, {"tuples", opts.tuples}, {"entries", entries}};
  std::cout << j.dump(2) << std::endl;
  if (!o.out.empty()) write_json(out_dir(o) / "gradcheck.json", j);
  return pass ? 0 : 1;
}

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardioflow: 4D myocardium reconstruction from sparse slice contours"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "JSON config file (unknown keys are rejected)");
  app.add_option("--seed", o.seed, "Override the config seed");
  app.add_option("--threads", o.threads, "Worker threads (1 gives bit-identical outputs)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--checkpoint", o.checkpoint, "Input CFLW checkpoint");
  app.add_option("--grid-res", o.grid_res, "Marching-cubes grid resolution");
  app.add_flag("--rigid", o.rigid, "Register without scale");

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Options&, const PipelineConfig&);
  };
  const Sub subs[] = {
      {"synth", "Generate the synthetic dataset into --out", cmd_synth},
      {"build-edspace", "Build the shape model from --data/atlas (writes edspace.cflw)", cmd_build_edspace},
      {"pretrain", "Pre-train the shape network (writes pretrain.cflw)", cmd_pretrain},
      {"train", "Joint motion and shape training on --data (writes train.cflw)", cmd_train},
      {"infer", "Fit latent codes to --observation (writes inferred.json)", cmd_infer},
      {"reconstruct", "Extract per-phase meshes for --codes (OBJ + manifest.json)", cmd_reconstruct},
      {"track", "Track --points through the cycle (tracks.csv)", cmd_track},
      {"interpolate", "Complete motion codes with the motion PCA (completed.json)", cmd_interpolate},
      {"eval", "Compare --pred meshes with --subject ground truth (metrics.csv, metrics.json)", cmd_eval},
      {"gradcheck", "Finite-difference check of all network gradients", cmd_gradcheck},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> commands;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->fallthrough();
    commands.emplace_back(sub, &s);
  }
  auto find = [&](const char* name) { return app.get_subcommand(name); };
  for (const char* n : {"build-edspace", "train", "eval"}) find(n)->add_option("--data", o.data, "Dataset root written by synth");
  find("eval")->add_option("--subject", o.subject, "Ground-truth subject id");
  find("eval")->add_option("--pred", o.pred, "Directory of predicted phase_XX.obj meshes");
  find("infer")->add_option("--observation", o.observation, "Observation JSON (sax.json, sax_lax.json, ct.json)");
  find("infer")->add_option("--phases", o.phases, "Observed phases to use, comma separated (default: all)")->delimiter(',');
  for (const char* n : {"reconstruct", "track", "interpolate"}) find(n)->add_option("--codes", o.codes, "Inferred codes JSON");
  find("track")->add_option("--points", o.points, "End-diastolic points (text or PLY)");
  find("interpolate")->add_option("--mode", o.mode, "keyframes or two-phase");
  find("interpolate")->add_option("--es-phase", o.es_phase, "End-systolic phase index for two-phase mode");
  find("gradcheck")->add_flag("--inject-fault", o.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage_error", e.what());
    return 64;
  }

  try {
    const PipelineConfig config = effective_config(o);
    set_thread_count(config.threads);
    for (const auto& [sub, s] : commands) {
      if (sub->parsed()) return s->run(o, config);
    }
    return 64;
  } catch (const Error& e) {
    report_error(e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    report_error("io_error", e.what());
  } catch (const std::exception& e) {
    report_error("internal_error", e.what());
  }
  return 2;
}
