#include <algorithm>
#include <cmath>
#include <numeric>

#include "cadrepair/errors.h"
#include "cadrepair/neural.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics c;
  c.support = tp + fn;
  c.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  c.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  c.f1 = c.precision + c.recall > 0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
  return c;
}

}  // namespace

ClassifierMetrics classification_metrics(std::span<const int> actual, std::span<const int> predicted) {
  if (actual.size() != predicted.size()) throw Error(Errc::DimensionMismatch, "label count mismatch");
  ClassifierMetrics m;
  for (std::size_t i = 0; i < actual.size(); ++i) ++m.confusion[actual[i] ? 1 : 0][predicted[i] ? 1 : 0];
  const auto& c = m.confusion;
  m.valid = class_metrics(c[1][1], c[0][1], c[1][0]);
  m.invalid = class_metrics(c[0][0], c[1][0], c[0][1]);
  const std::size_t total = actual.size();
  m.accuracy = total > 0 ? static_cast<double>(c[0][0] + c[1][1]) / static_cast<double>(total) : 0.0;
  m.balanced_accuracy = 0.5 * (m.valid.recall + m.invalid.recall);
  m.n_test = total;
  return m;
}

std::vector<std::size_t> undersample_balanced(std::span<const int> labels, std::uint64_t seed) {
  std::vector<std::size_t> valid;
  std::vector<std::size_t> invalid;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? valid : invalid).push_back(i);
  if (valid.empty() || invalid.empty()) {
    throw Error(Errc::SingleClassData, "classifier data must contain both valid and invalid latents");
  }
  std::vector<std::size_t>& majority = valid.size() >= invalid.size() ? valid : invalid;
  std::vector<std::size_t>& minority = valid.size() >= invalid.size() ? invalid : valid;
  Rng rng(seed);
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(minority.size());
  std::vector<std::size_t> kept = minority;
  kept.insert(kept.end(), majority.begin(), majority.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

ClassifierResult train_classifier(std::span<const LatentVector> latents, std::span<const int> labels,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (latents.size() != labels.size()) throw Error(Errc::DimensionMismatch, "latent/label count mismatch");

  std::vector<std::size_t> kept = undersample_balanced(labels, derive_seed(cfg.seed, "classifier/undersample"));
  Rng split_rng(derive_seed(cfg.seed, "classifier/split"));
  std::shuffle(kept.begin(), kept.end(), split_rng);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(cfg.split * static_cast<double>(kept.size()))), 1, kept.size() - 1);

  ClassifierResult result;
  result.train_rows.assign(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(n_train));
  result.test_rows.assign(kept.begin() + static_cast<std::ptrdiff_t>(n_train), kept.end());
  result.model = Mlp::create(kClassifierDims, OutputActivation::Sigmoid, derive_seed(cfg.seed, "classifier/init"));

  Mlp& model = result.model;
  SgdMomentum opt(model);
  MlpGradients grads(model);
  Rng rng(derive_seed(cfg.seed, "classifier/train"));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::size_t> order = result.train_rows;
  std::vector<double> x(kLatentDim);
  double grad_out[1];

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.clear();
      for (std::size_t k = start; k < end; ++k) {
        const LatentVector& z = latents[order[k]];
        for (std::size_t i = 0; i < kLatentDim; ++i) {
          x[i] = z[i] + (cfg.input_noise > 0.0 ? cfg.input_noise * noise(rng) : 0.0);
        }
        const ForwardResult fwd = mlp_forward(model, x);
        grad_out[0] = fwd.output[0] - static_cast<double>(labels[order[k]] ? 1 : 0);
        mlp_backward(model, fwd.cache, grad_out, grads);
      }
      opt.step(model, grads, cfg.learning_rate, cfg.momentum, 1.0 / static_cast<double>(end - start));
    }
  }

  std::vector<int> actual;
  std::vector<int> predicted;
  for (std::size_t idx : result.test_rows) {
    actual.push_back(labels[idx] ? 1 : 0);
    predicted.push_back(classifier_probability(model, latents[idx]) >= 0.5 ? 1 : 0);
  }
  result.metrics = classification_metrics(actual, predicted);
  result.metrics.n_train = result.train_rows.size();
  return result;
}

double classifier_probability(const Mlp& m, const LatentVector& z) {
  if (m.layers.empty() || m.input_dim() != kLatentDim || m.output_dim() != 1) {
    throw Error(Errc::DimensionMismatch, "classifier must map the latent width to one probability");
  }
  return mlp_predict(m, z.span())[0];
}

}  // namespace cadrepair
