#include "cadrepair/config.h"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "cadrepair/errors.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

using ojson = nlohmann::ordered_json;

// Reads fields out of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const ojson& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(Errc::Config, name_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw Error(Errc::Config, path(key) + " must be a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw Error(Errc::Config, path(key) + " must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (!it->is_number_unsigned()) throw Error(Errc::Config, path(key) + " must be non-negative");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw Error(Errc::Config, path(key) + " must be a number");
      } else {
        if (!it->is_string()) throw Error(Errc::Config, path(key) + " must be a string");
      }
      out = it->template get<T>();
    } catch (const ojson::exception& e) {
      throw Error(Errc::Config, path(key) + ": " + e.what());
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const ojson empty = ojson::object();
    return Section(it == j_.end() ? empty : *it, path(key));
  }

  const ojson* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw Error(Errc::Config, "unknown config key " + path(it.key().c_str()));
    }
  }

 private:
  std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  const ojson& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_training(Section s, TrainingParams& p, bool with_noise) {
  s.read("epochs", p.epochs);
  s.read("batch_size", p.batch_size);
  s.read("learning_rate", p.learning_rate);
  if (with_noise) s.read("input_noise", p.input_noise);
  s.finish();
}

ojson training_json(const TrainingParams& p, bool with_noise) {
  ojson j;
  j["epochs"] = p.epochs;
  j["batch_size"] = p.batch_size;
  j["learning_rate"] = p.learning_rate;
  if (with_noise) j["input_noise"] = p.input_noise;
  return j;
}

void check_training(const TrainingParams& p, const char* name) {
  if (p.epochs < 1) throw Error(Errc::Config, std::string(name) + ".epochs must be >= 1");
  if (p.batch_size < 1) throw Error(Errc::Config, std::string(name) + ".batch_size must be >= 1");
  if (!(p.learning_rate > 0.0)) throw Error(Errc::Config, std::string(name) + ".learning_rate must be > 0");
  if (!(p.input_noise >= 0.0)) throw Error(Errc::Config, std::string(name) + ".input_noise must be >= 0");
}

}  // namespace

void RunConfig::validate() const {
  if (n_conditions < 1) throw Error(Errc::Config, "n_conditions must be >= 1");
  if (generations < 1) throw Error(Errc::Config, "generations must be >= 1");
  if (steps < 2) throw Error(Errc::Config, "diffusion.steps must be >= 2");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw Error(Errc::Config, "diffusion betas must satisfy 0 < beta_start < beta_end < 1");
  }
  check_training(denoiser, "training.denoiser");
  check_training(classifier, "training.classifier");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(Errc::Config, "training.momentum must be in [0, 1)");
  if (!(split > 0.0 && split < 1.0)) throw Error(Errc::Config, "training.split must be in (0, 1)");
  if (!(ridge >= 0.0)) throw Error(Errc::Config, "training.ridge must be >= 0");
  if (!(s_clf >= 0.0) || !(s_reg >= 0.0)) throw Error(Errc::Config, "guidance scales must be >= 0");
  if (repair_iters < 1) throw Error(Errc::Config, "repair.max_iters must be >= 1");
  if (sigma_mode == SigmaMode::Fixed && !(sigma > 0.0)) throw Error(Errc::Config, "metrics.sigma must be > 0");
  if (cloud_size < 2) throw Error(Errc::Config, "metrics.cloud_size must be >= 2");
  if (output_dir.empty()) throw Error(Errc::Config, "output_dir must not be empty");
}

TrainConfig RunConfig::denoiser_train_config() const {
  TrainConfig c;
  c.epochs = denoiser.epochs;
  c.batch_size = denoiser.batch_size;
  c.learning_rate = denoiser.learning_rate;
  c.momentum = momentum;
  c.split = split;
  c.seed = derive_seed(seed, "train/denoiser");
  return c;
}

TrainConfig RunConfig::classifier_train_config() const {
  TrainConfig c;
  c.epochs = classifier.epochs;
  c.batch_size = classifier.batch_size;
  c.learning_rate = classifier.learning_rate;
  c.input_noise = classifier.input_noise;
  c.momentum = momentum;
  c.split = split;
  c.seed = derive_seed(seed, "train/classifier");
  return c;
}

MmdConfig RunConfig::mmd_config() const {
  MmdConfig m;
  m.mode = sigma_mode;
  m.sigma = sigma;
  m.cloud_size = cloud_size;
  return m;
}

GuidanceConfig RunConfig::dataset_guidance() const {
  GuidanceConfig g;
  g.use_classifier = dataset_use_classifier;
  g.use_regressor = dataset_use_regressor;
  g.s_clf = s_clf;
  g.s_reg = s_reg;
  g.stop_gradient_y = stop_gradient_y;
  return g;
}

RunConfig config_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw Error(Errc::Config, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section root(j, "");
  root.read("seed", cfg.seed);
  root.read("n_conditions", cfg.n_conditions);
  root.read("generations", cfg.generations);
  root.read("n_eval_conditions", cfg.n_eval_conditions);
  {
    Section d = root.child("diffusion");
    d.read("steps", cfg.steps);
    d.read("beta_start", cfg.beta_start);
    d.read("beta_end", cfg.beta_end);
    d.finish();
  }
  {
    Section t = root.child("training");
    read_training(t.child("denoiser"), cfg.denoiser, false);
    read_training(t.child("classifier"), cfg.classifier, true);
    t.read("momentum", cfg.momentum);
    t.read("split", cfg.split);
    t.read("ridge", cfg.ridge);
    t.finish();
  }
  {
    Section g = root.child("guidance");
    g.read("dataset_use_classifier", cfg.dataset_use_classifier);
    g.read("dataset_use_regressor", cfg.dataset_use_regressor);
    g.read("s_clf", cfg.s_clf);
    g.read("s_reg", cfg.s_reg);
    g.read("stop_gradient_y", cfg.stop_gradient_y);
    g.finish();
  }
  {
    Section r = root.child("repair");
    r.read("max_iters", cfg.repair_iters);
    r.finish();
  }
  {
    Section m = root.child("metrics");
    if (const ojson* s = m.raw("sigma")) {
      if (s->is_string() && s->get<std::string>() == "median") {
        cfg.sigma_mode = SigmaMode::MedianHeuristic;
      } else if (s->is_number()) {
        cfg.sigma_mode = SigmaMode::Fixed;
        cfg.sigma = s->get<double>();
      } else {
        throw Error(Errc::Config, "metrics.sigma must be \"median\" or a positive number");
      }
    }
    m.read("cloud_size", cfg.cloud_size);
    m.finish();
  }
  root.read("output_dir", cfg.output_dir);
  root.finish();
  cfg.validate();
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  ojson j;
  j["seed"] = cfg.seed;
  j["n_conditions"] = cfg.n_conditions;
  j["generations"] = cfg.generations;
  j["n_eval_conditions"] = cfg.n_eval_conditions;
  j["diffusion"] = {{"steps", cfg.steps}, {"beta_start", cfg.beta_start}, {"beta_end", cfg.beta_end}};
  ojson t;
  t["denoiser"] = training_json(cfg.denoiser, false);
  t["classifier"] = training_json(cfg.classifier, true);
  t["momentum"] = cfg.momentum;
  t["split"] = cfg.split;
  t["ridge"] = cfg.ridge;
  j["training"] = std::move(t);
  j["guidance"] = {{"dataset_use_classifier", cfg.dataset_use_classifier},
                   {"dataset_use_regressor", cfg.dataset_use_regressor},
                   {"s_clf", cfg.s_clf},
                   {"s_reg", cfg.s_reg},
                   {"stop_gradient_y", cfg.stop_gradient_y}};
  j["repair"] = {{"max_iters", cfg.repair_iters}};
  ojson m;
  if (cfg.sigma_mode == SigmaMode::MedianHeuristic) {
    m["sigma"] = "median";
  } else {
    m["sigma"] = cfg.sigma;
  }
  m["cloud_size"] = cfg.cloud_size;
  j["metrics"] = std::move(m);
  j["output_dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Config, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace cadrepair
