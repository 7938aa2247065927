#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cadrepair/diffusion.h"
#include "cadrepair/metrics.h"
#include "cadrepair/neural.h"
#include "cadrepair/pipeline.h"

namespace cadrepair {

struct TrainingParams {
  int epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double input_noise = 0.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t n_conditions = 10000;
  std::size_t generations = kDefaultGenerations;
  std::size_t n_eval_conditions = 500;

  int steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  TrainingParams denoiser{200, 64, 0.05, 0.0};
  TrainingParams classifier{100, 64, 0.01, 0.0};
  double momentum = 0.9;
  double split = 0.8;
  double ridge = kDefaultRidge;

  // Guidance used by gen-dataset (normally off) and the scales used by eval.
  // The regressor term is only stable for s_reg < 1 / sigma_max(I - W)^2,
  // which is close to 1 for the fitted regressors here.
  bool dataset_use_classifier = false;
  bool dataset_use_regressor = false;
  double s_clf = 0.1;
  double s_reg = 0.1;
  bool stop_gradient_y = false;
  int repair_iters = 1;

  SigmaMode sigma_mode = SigmaMode::MedianHeuristic;
  double sigma = 1.0;
  std::size_t cloud_size = 512;

  std::string output_dir = "run";

  void validate() const;

  DiffusionSchedule schedule() const { return build_schedule(steps, beta_start, beta_end); }
  TrainConfig denoiser_train_config() const;
  TrainConfig classifier_train_config() const;
  MmdConfig mmd_config() const;
  GuidanceConfig dataset_guidance() const;
};

// Missing keys keep their defaults; unknown keys and wrong types raise
// Errc::Config.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);

}  // namespace cadrepair
