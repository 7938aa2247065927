#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cadrepair/diffusion.h"
#include "cadrepair/errors.h"
#include "cadrepair/neural.h"
#include "cadrepair/rng.h"

namespace cadrepair {

std::array<double, kTimeEmbeddingDim> timestep_embedding(int t) {
  constexpr std::size_t half = kTimeEmbeddingDim / 2;
  std::array<double, kTimeEmbeddingDim> e{};
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    e[k] = std::sin(static_cast<double>(t) * freq);
    e[k + half] = std::cos(static_cast<double>(t) * freq);
  }
  return e;
}

std::vector<double> denoiser_input(std::span<const double> z_t, int t, const ConditionVector& c) {
  if (z_t.size() != kLatentDim) throw Error(Errc::DimensionMismatch, "denoiser latent width mismatch");
  std::vector<double> x;
  x.reserve(kDenoiserInputDim);
  x.insert(x.end(), z_t.begin(), z_t.end());
  const auto emb = timestep_embedding(t);
  x.insert(x.end(), emb.begin(), emb.end());
  x.insert(x.end(), c.values.begin(), c.values.end());
  return x;
}

std::vector<double> predict_noise(const Mlp& denoiser, std::span<const double> z_t, int t, const ConditionVector& c) {
  return mlp_predict(denoiser, denoiser_input(z_t, t, c));
}

DenoiserResult train_denoiser(std::span<const ConditionVector> conditions, std::span<const LatentVector> latents,
                              const DiffusionSchedule& sched, const TrainConfig& cfg) {
  cfg.validate();
  if (conditions.empty()) throw Error(Errc::EmptyDataset, "denoiser needs at least one (condition, latent) pair");
  if (conditions.size() != latents.size()) throw Error(Errc::DimensionMismatch, "condition/latent count mismatch");

  DenoiserResult result;
  result.model = Mlp::create(kDenoiserDims, OutputActivation::Identity, derive_seed(cfg.seed, "denoiser/init"));
  Mlp& model = result.model;
  SgdMomentum opt(model);
  MlpGradients grads(model);
  Rng rng(derive_seed(cfg.seed, "denoiser/train"));
  std::uniform_int_distribution<int> step_dist(1, sched.steps);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::size_t> order(conditions.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad_out(kLatentDim);
  const double inv_dim = 1.0 / static_cast<double>(kLatentDim);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const int t = step_dist(rng);
        LatentVector eps;
        for (double& e : eps.values) e = normal(rng);
        const LatentVector z_t = forward_diffuse(latents[idx], t, eps, sched);
        const ForwardResult fwd = mlp_forward(model, denoiser_input(z_t.span(), t, conditions[idx]));
        double sq = 0.0;
        for (std::size_t i = 0; i < kLatentDim; ++i) {
          const double r = fwd.output[i] - eps[i];
          sq += r * r;
          grad_out[i] = 2.0 * r * inv_dim;
        }
        epoch_loss += sq * inv_dim;
        mlp_backward(model, fwd.cache, grad_out, grads);
      }
      opt.step(model, grads, cfg.learning_rate, cfg.momentum, 1.0 / static_cast<double>(end - start));
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  result.final_loss = result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back();
  return result;
}

}  // namespace cadrepair
