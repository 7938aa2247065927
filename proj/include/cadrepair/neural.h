#pragma once

// Small dense networks with hand-written forward/backward passes, a
// closed-form ridge regressor, and the training loops built on them.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cadrepair/latent_codec.h"
#include "cadrepair/schedule.h"

namespace cadrepair {

enum class OutputActivation { Sigmoid, Identity };

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;    // out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// ReLU hidden layers, configurable output activation.
struct Mlp {
  std::vector<DenseLayer> layers;
  OutputActivation output = OutputActivation::Identity;

  // He-initialised weights, zero biases.
  static Mlp create(std::span<const std::size_t> dims, OutputActivation output, std::uint64_t seed);
  static Mlp zeros(std::span<const std::size_t> dims, OutputActivation output);

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

struct ForwardCache {
  // inputs[l] feeds layer l; pre[l] is layer l's affine output.
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

struct ForwardResult {
  std::vector<double> output;
  ForwardCache cache;
};

ForwardResult mlp_forward(const Mlp& m, std::span<const double> x);
std::vector<double> mlp_predict(const Mlp& m, std::span<const double> x);

// Gradient of the scalar network output with respect to its input.
std::vector<double> mlp_grad_input(const Mlp& m, std::span<const double> x);

struct MlpGradients {
  std::vector<std::vector<double>> weight;
  std::vector<std::vector<double>> bias;

  explicit MlpGradients(const Mlp& m);
  void clear();
};

// Accumulates parameter gradients given dLoss/d(pre-activation of the output
// layer). For sigmoid + binary cross-entropy that is simply p - y.
void mlp_backward(const Mlp& m, const ForwardCache& cache, std::span<const double> grad_output_pre, MlpGradients& grads);

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double split = 0.8;
  // Experimental: Gaussian noise (std dev) added to classifier inputs each
  // epoch. Zero trains on clean latents.
  double input_noise = 0.0;

  void validate() const;
};

// Mini-batch SGD with momentum.
class SgdMomentum {
 public:
  explicit SgdMomentum(const Mlp& m);
  void step(Mlp& m, const MlpGradients& grads, double learning_rate, double momentum, double scale);

 private:
  MlpGradients velocity_;
};

// ---- Latent CAD classifier ----

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassifierMetrics {
  ClassMetrics valid;
  ClassMetrics invalid;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  // confusion[actual][predicted], index 0 = invalid, 1 = valid
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

ClassifierMetrics classification_metrics(std::span<const int> actual, std::span<const int> predicted);

struct ClassifierResult {
  Mlp model;
  ClassifierMetrics metrics;
  std::vector<std::size_t> train_rows;  // indices into the input set
  std::vector<std::size_t> test_rows;
};

inline constexpr std::array<std::size_t, 4> kClassifierDims = {kLatentDim, 128, 64, 1};

// Returns the indices kept after undersampling the majority class to the
// minority count; result is sorted ascending.
std::vector<std::size_t> undersample_balanced(std::span<const int> labels, std::uint64_t seed);

// labels: 1 = valid, 0 = invalid.
ClassifierResult train_classifier(std::span<const LatentVector> latents, std::span<const int> labels,
                                  const TrainConfig& cfg);

double classifier_probability(const Mlp& m, const LatentVector& z);

// ---- Linear regressors ----

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static Matrix from_latents(std::span<const LatentVector> rows);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  Matrix select_rows(std::span<const std::size_t> idx) const;
};

struct LinearRegressor {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;

  static LinearRegressor identity(std::size_t dim);
  double w(std::size_t o, std::size_t i) const { return weight[o * in_dim + i]; }

  friend bool operator==(const LinearRegressor&, const LinearRegressor&) = default;
};

inline constexpr double kDefaultRidge = 1e-6;

// Ridge least squares on [inputs 1]; the intercept is not penalised. Solved
// by column-pivoted Householder QR of the ridge-augmented design.
LinearRegressor fit_linear_regressor(const Matrix& inputs, const Matrix& targets, double ridge = kDefaultRidge);

struct RegressionMetrics {
  double train_r2 = 0.0;
  double train_mse = 0.0;
  double test_r2 = 0.0;
  double test_mse = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

// R^2 averaged uniformly over output columns; a constant column scores 1 if
// predicted exactly, else 0.
double r2_score(const Matrix& targets, const Matrix& predictions);
double mse(const Matrix& targets, const Matrix& predictions);
Matrix predict_rows(const LinearRegressor& r, const Matrix& inputs);

struct RegressionFit {
  LinearRegressor model;
  RegressionMetrics metrics;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

// Seeded shuffle into train/test by `split`, fit on train rows, score both.
RegressionFit fit_and_score(const Matrix& inputs, const Matrix& targets, double ridge, double split,
                            std::uint64_t seed);

std::vector<double> regressor_predict(const LinearRegressor& r, std::span<const double> z);
LatentVector regressor_predict(const LinearRegressor& r, const LatentVector& z);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// L = ||W z + b - z||^2. With stop_gradient_y the prediction is treated as a
// constant target and grad = -2 (y - z); otherwise grad = 2 (W - I)^T (y - z).
LossGrad regressor_loss_grad(const LinearRegressor& r, std::span<const double> z, bool stop_gradient_y = false);

// ---- Diffusion denoiser ----

inline constexpr std::size_t kTimeEmbeddingDim = 8;
inline constexpr std::size_t kDenoiserInputDim = kLatentDim + kTimeEmbeddingDim + kConditionDim;
inline constexpr std::array<std::size_t, 4> kDenoiserDims = {kDenoiserInputDim, 128, 128, kLatentDim};

std::array<double, kTimeEmbeddingDim> timestep_embedding(int t);
std::vector<double> denoiser_input(std::span<const double> z_t, int t, const ConditionVector& c);
std::vector<double> predict_noise(const Mlp& denoiser, std::span<const double> z_t, int t, const ConditionVector& c);

struct DenoiserResult {
  Mlp model;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
};

DenoiserResult train_denoiser(std::span<const ConditionVector> conditions, std::span<const LatentVector> latents,
                              const DiffusionSchedule& sched, const TrainConfig& cfg);

// ---- Model files ----

std::string mlp_to_json(const Mlp& m, const std::string& kind);
Mlp mlp_from_json(const std::string& text);
std::string regressor_to_json(const LinearRegressor& r, const std::string& kind);
LinearRegressor regressor_from_json(const std::string& text);

}  // namespace cadrepair
