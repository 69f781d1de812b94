#include "cardioflow/app/config.hpp"

#include <fstream>
#include <set>

#include "cardioflow/error.hpp"
#include "cardioflow/file_util.hpp"

namespace cardioflow::app {

using nlohmann::json;

namespace {

// Reads keys out of a JSON object, remembering which were consumed so that
// leftovers can be reported as unknown.
class ReadVisitor {
 public:
  ReadVisitor(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <typename T>
  void operator()(const char* name, T& value) {
    const auto it = j_.find(name);
    if (it == j_.end()) return;
    seen_.insert(name);
    try {
      if constexpr (std::is_same_v<T, models::ShapeInit>) {
        value = models::shape_init_from_string(it->template get<std::string>());
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected a boolean");
        value = it->template get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (it->is_number_unsigned()) {
            value = it->template get<T>();
          } else {
            throw ConfigError("expected a non-negative integer");
          }
        } else {
          value = it->template get<T>();
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
        value = it->template get<T>();
      } else {
        value = it->template get<T>();
      }
    } catch (const json::exception& e) {
      throw ConfigError(where() + name + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(where() + name + ": " + e.what());
    }
  }

  template <typename Fn>
  void object(const char* name, Fn&& fn) {
    const auto it = j_.find(name);
    if (it == j_.end()) return;
    seen_.insert(name);
    ReadVisitor sub(*it, path_ + name + ".");
    fn(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + path_ + key + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? std::string() : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class WriteVisitor {
 public:
  explicit WriteVisitor(json& j) : j_(j) { j_ = json::object(); }

  template <typename T>
  void operator()(const char* name, const T& value) {
    if constexpr (std::is_same_v<T, models::ShapeInit>) {
      j_[name] = models::to_string(value);
    } else {
      j_[name] = value;
    }
  }

  template <typename Fn>
  void object(const char* name, Fn&& fn) {
    WriteVisitor sub(j_[name]);
    fn(sub);
  }

 private:
  json& j_;
};

template <typename V, typename S>
void visit_sampling(V& v, S& s) {
  v("surface", s.surface);
  v("uniform", s.uniform);
  v("sigma_near", s.sigma_near);
}

template <typename V, typename W>
void visit_weights(V& v, W& w) {
  v("sdf", w.sdf);
  v("pointwise", w.pointwise);
  v("pairwise", w.pairwise);
  v("code", w.code);
}

template <typename V, typename P>
void visit_params(V& v, P& p) {
  v("clamp", p.clamp);
  v("huber", p.huber);
  v("distortion", p.distortion);
}

// C is PipelineConfig or const PipelineConfig.
template <typename V, typename C>
void visit(V& v, C& c) {
  v("seed", c.seed);
  v("threads", c.threads);
  v.object("synth", [&](auto& o) {
    o("atlas_subjects", c.synth.atlas_subjects);
    o("train_subjects", c.synth.train_subjects);
    o("test_subjects", c.synth.test_subjects);
    o("phases", c.synth.phases);
    o("sax_slices", c.synth.sax_slices);
    o("sax_spacing", c.synth.sax_spacing);
    o("lax_slices", c.synth.lax_slices);
    o("noise", c.synth.noise);
    o("pose_angle", c.synth.pose_angle);
    o("pose_translation", c.synth.pose_translation);
  });
  v.object("edspace", [&](auto& o) {
    o("modes", c.edspace.modes);
    o("augmented", c.edspace.augmented);
    o("spread", c.edspace.spread);
    o("radius", c.edspace.radius);
    o("rigid", c.edspace.rigid);
  });
  v.object("shape_net", [&](auto& o) {
    o("code_dim", c.shape_net.code_dim);
    o("hidden", c.shape_net.hidden);
    o("hidden_layers", c.shape_net.hidden_layers);
    o("skip_layer", c.shape_net.skip_layer);
    o("positional_frequencies", c.shape_net.positional_frequencies);
    o("init", c.shape_net.init);
    o("init_radius", c.shape_net.init_radius);
  });
  v.object("motion_net", [&](auto& o) {
    o("code_dim", c.motion_net.code_dim);
    o("hidden", c.motion_net.hidden);
    o("hidden_layers", c.motion_net.hidden_layers);
    o("positional_frequencies", c.motion_net.positional_frequencies);
  });
  v.object("pretrain", [&](auto& o) {
    auto& p = c.pretrain;
    o("epochs", p.epochs);
    o("shapes_per_batch", p.shapes_per_batch);
    o("points_per_shape", p.points_per_shape);
    o.object("pool", [&](auto& s) { visit_sampling(s, p.pool); });
    o("lr_weights", p.lr_weights);
    o("lr_codes", p.lr_codes);
    o("lr_decay_every", p.lr_decay_every);
    o("lr_decay_factor", p.lr_decay_factor);
    o("clamp", p.clamp);
    o("code_weight", p.code_weight);
    o("code_init_std", p.code_init_std);
  });
  v.object("train", [&](auto& o) {
    auto& t = c.train;
    o("epochs", t.epochs);
    o("groups_per_batch", t.groups_per_batch);
    o("points_per_group", t.points_per_group);
    o.object("pool", [&](auto& s) { visit_sampling(s, t.pool); });
    o("lr_motion", t.lr_motion);
    o("lr_shape", t.lr_shape);
    o("lr_codes", t.lr_codes);
    o("lr_decay_every", t.lr_decay_every);
    o("lr_decay_factor", t.lr_decay_factor);
    o.object("weights", [&](auto& s) { visit_weights(s, t.weights); });
    o.object("loss", [&](auto& s) { visit_params(s, t.params); });
    o("ed_identity_weight", t.ed_identity_weight);
    o("code_init_std", t.code_init_std);
    o("fine_tune_shape", t.fine_tune_shape);
    o("from_scratch", c.train_from_scratch);
  });
  v.object("inference", [&](auto& o) {
    auto& i = c.inference;
    o("iterations", i.iterations);
    o("lr", i.lr);
    o("lr_decay_every", i.lr_decay_every);
    o("lr_decay_factor", i.lr_decay_factor);
    o("points_per_phase", i.points_per_phase);
    o("regularize_motion", i.regularize_motion);
    o.object("weights", [&](auto& s) { visit_weights(s, i.weights); });
    o.object("loss", [&](auto& s) { visit_params(s, i.params); });
    o("code_init_std", i.code_init_std);
  });
  v.object("reconstruct", [&](auto& o) {
    o("grid_res", c.reconstruct.grid_res);
    o("coarse_res", c.reconstruct.coarse_res);
    o("band_factor", c.reconstruct.band_factor);
    o("batch", c.reconstruct.batch);
  });
  v.object("track", [&](auto& o) {
    o("tolerance", c.track.tolerance);
    o("max_iterations", c.track.max_iterations);
  });
  v.object("motion_pca", [&](auto& o) {
    o("components", c.motion_pca.components);
    o("energy", c.motion_pca.energy);
    o("centered", c.motion_pca.centered);
  });
  v.object("eval", [&](auto& o) {
    o("emd_points", c.eval.emd_points);
    o("surface_points", c.eval.surface_points);
    o("mask_spacing", c.eval.mask_spacing);
    o("hausdorff_percentile", c.eval.hausdorff_percentile);
  });
  v.object("gradcheck", [&](auto& o) {
    o("tuples", c.gradcheck.tuples);
    o("step", c.gradcheck.step);
    o("weights_per_block", c.gradcheck.weights_per_block);
  });
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate(const PipelineConfig& c) {
  require(c.threads >= 0, "threads must be >= 0");
  const auto& s = c.synth;
  require(s.atlas_subjects >= 2, "synth.atlas_subjects must be >= 2");
  require(s.train_subjects >= 1 && s.test_subjects >= 0, "synth subject counts must be positive");
  require(s.phases >= 2, "synth.phases must be >= 2");
  require(s.sax_slices >= 1 && s.sax_spacing > 0.0, "synth SAX settings must be positive");
  require(s.lax_slices == 0 || s.lax_slices == 2 || s.lax_slices == 3, "synth.lax_slices must be 0, 2 or 3");
  require(s.noise >= 0.0 && s.pose_angle >= 0.0 && s.pose_translation >= 0.0, "synth noise and pose bounds must be >= 0");
  require(c.edspace.augmented >= 1 && c.edspace.spread >= 0.0 && c.edspace.radius > 0.0, "bad edspace settings");
  require(c.shape_net.code_dim >= 1 && c.shape_net.hidden >= 1 && c.shape_net.hidden_layers >= 1, "bad shape_net sizes");
  require(c.motion_net.code_dim >= 1 && c.motion_net.hidden >= 1 && c.motion_net.hidden_layers >= 1, "bad motion_net sizes");
  require(c.pretrain.epochs >= 0 && c.pretrain.shapes_per_batch >= 1 && c.pretrain.points_per_shape >= 1,
          "bad pretrain schedule");
  require(c.train.epochs >= 0 && c.train.groups_per_batch >= 1 && c.train.points_per_group >= 2, "bad train schedule");
  require(c.inference.iterations >= 0 && c.inference.points_per_phase >= 2, "bad inference schedule");
  require(c.reconstruct.grid_res >= 2 && c.reconstruct.coarse_res >= 2 && c.reconstruct.batch >= 1,
          "bad reconstruct grid settings");
  require(c.track.tolerance > 0.0 && c.track.max_iterations >= 1, "bad track settings");
  require(c.motion_pca.energy > 0.0 && c.motion_pca.energy <= 1.0, "motion_pca.energy must be in (0, 1]");
  require(c.eval.emd_points >= 1 && c.eval.surface_points >= 1 && c.eval.mask_spacing > 0.0, "bad eval settings");
  require(c.eval.hausdorff_percentile > 0.0 && c.eval.hausdorff_percentile <= 100.0,
          "eval.hausdorff_percentile must be in (0, 100]");
  require(c.gradcheck.tuples >= 1 && c.gradcheck.step > 0.0 && c.gradcheck.weights_per_block >= 1, "bad gradcheck settings");
}

}  // namespace

PipelineConfig PipelineConfig::resolved() const {
  PipelineConfig c = *this;
  c.pretrain.network = c.shape_net;
  c.pretrain.seed = derive_seed(seed, "pretrain");
  c.train.motion = c.motion_net;
  c.train.seed = derive_seed(seed, "train");
  c.inference.seed = derive_seed(seed, "inference");
  c.gradcheck.seed = derive_seed(seed, "gradcheck");
  return c;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  ReadVisitor v(j, "");
  visit(v, c);
  v.finish();
  validate(c);
  return c;
}

json config_to_json(const PipelineConfig& config) {
  json j;
  WriteVisitor v(j);
  visit(v, config);
  return j;
}

PipelineConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace cardioflow::app
