#include "cadrepair/diffusion.h"

#include <cmath>
#include <random>

#include "cadrepair/errors.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

void check_step(int t, const DiffusionSchedule& sched) {
  if (t < 1 || t > sched.steps) {
    throw Error(Errc::StepOutOfRange, "step " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps) + "]");
  }
}

}  // namespace

double DiffusionSchedule::sigma(int t) const { return std::sqrt(posterior_variance.at(static_cast<std::size_t>(t))); }

DiffusionSchedule build_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 2) throw Error(Errc::BadRange, "schedule needs at least 2 steps");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw Error(Errc::BadRange, "need 0 < beta_start < beta_end < 1");
  }
  DiffusionSchedule s;
  s.steps = steps;
  const auto n = static_cast<std::size_t>(steps) + 1;
  s.beta.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.alpha_bar.assign(n, 1.0);
  s.posterior_variance.assign(n, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    s.beta[i] = beta_start + (beta_end - beta_start) * static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    s.alpha[i] = 1.0 - s.beta[i];
    s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
    s.posterior_variance[i] = s.beta[i] * (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]);
  }
  return s;
}

void GuidanceConfig::validate() const {
  if (!(s_clf >= 0.0) || !(s_reg >= 0.0)) throw Error(Errc::BadRange, "guidance scales must be non-negative");
}

LatentVector forward_diffuse(const LatentVector& z0, int t, const LatentVector& eps, const DiffusionSchedule& sched) {
  check_step(t, sched);
  const double a = std::sqrt(sched.alpha_bar[static_cast<std::size_t>(t)]);
  const double b = std::sqrt(1.0 - sched.alpha_bar[static_cast<std::size_t>(t)]);
  LatentVector z;
  for (std::size_t i = 0; i < kLatentDim; ++i) z[i] = a * z0[i] + b * eps[i];
  return z;
}

LatentVector posterior_mean(const LatentVector& z_t, int t, const LatentVector& eps_hat,
                            const DiffusionSchedule& sched) {
  check_step(t, sched);
  const auto i = static_cast<std::size_t>(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[i]);
  const double eps_coef = sched.beta[i] / std::sqrt(1.0 - sched.alpha_bar[i]);
  LatentVector mu;
  for (std::size_t k = 0; k < kLatentDim; ++k) mu[k] = inv_sqrt_alpha * (z_t[k] - eps_coef * eps_hat[k]);
  return mu;
}

LatentVector infeasibility_gradient(const Mlp& classifier, const LatentVector& z) {
  if (classifier.layers.empty() || classifier.input_dim() != kLatentDim) {
    throw Error(Errc::DimensionMismatch, "classifier input width must equal the latent width");
  }
  const std::vector<double> g = mlp_grad_input(classifier, z.span());
  LatentVector out;
  for (std::size_t i = 0; i < kLatentDim; ++i) out[i] = -g[i];
  return out;
}

LatentVector classifier_guide(const LatentVector& mu, const LatentVector& z_t, const Mlp& classifier, double s_clf) {
  if (s_clf == 0.0) return mu;
  const LatentVector g = infeasibility_gradient(classifier, z_t);
  LatentVector out;
  for (std::size_t i = 0; i < kLatentDim; ++i) out[i] = mu[i] - s_clf * g[i];
  return out;
}

LatentVector regressor_guide(const LatentVector& mu, const LatentVector& z_t, const LinearRegressor& regressor,
                             double s_reg, bool stop_gradient_y) {
  if (regressor.in_dim != kLatentDim || regressor.out_dim != kLatentDim) {
    throw Error(Errc::DimensionMismatch, "regressor must map the latent space to itself");
  }
  if (s_reg == 0.0) return mu;
  const LossGrad lg = regressor_loss_grad(regressor, z_t.span(), stop_gradient_y);
  LatentVector out;
  for (std::size_t i = 0; i < kLatentDim; ++i) out[i] = mu[i] - s_reg * lg.grad[i];
  return out;
}

LatentVector guided_mean(const LatentVector& z_t, int t, const LatentVector& eps_hat, const GuidanceConfig& guidance,
                         const GuidanceModels& models, const DiffusionSchedule& sched) {
  LatentVector mu = posterior_mean(z_t, t, eps_hat, sched);
  if (guidance.use_classifier) {
    if (models.classifier == nullptr) throw Error(Errc::MissingModel, "classifier guidance needs a classifier");
    mu = classifier_guide(mu, z_t, *models.classifier, guidance.s_clf);
  }
  if (guidance.use_regressor) {
    if (models.regressor == nullptr) throw Error(Errc::MissingModel, "regressor guidance needs a regressor");
    mu = regressor_guide(mu, z_t, *models.regressor, guidance.s_reg, guidance.stop_gradient_y);
  }
  return mu;
}

LatentVector sample_step(const LatentVector& z_t, int t, const LatentVector& eps_hat, const GuidanceConfig& guidance,
                         const GuidanceModels& models, const LatentVector& noise, const DiffusionSchedule& sched) {
  LatentVector z = guided_mean(z_t, t, eps_hat, guidance, models, sched);
  if (t > 1) {
    const double sigma = sched.sigma(t);
    for (std::size_t i = 0; i < kLatentDim; ++i) z[i] += sigma * noise[i];
  }
  return z;
}

namespace {

struct NoiseStream {
  Rng rng;
  std::normal_distribution<double> normal{0.0, 1.0};

  explicit NoiseStream(std::uint64_t seed) : rng(seed) {}

  LatentVector draw() {
    LatentVector v;
    for (double& x : v.values) x = normal(rng);
    return v;
  }
};

}  // namespace

LatentVector initial_latent(std::uint64_t seed) { return NoiseStream(seed).draw(); }

LatentVector sample(const ConditionVector& c, const Mlp& denoiser, const GuidanceConfig& guidance,
                    const GuidanceModels& models, const DiffusionSchedule& sched, std::uint64_t seed) {
  guidance.validate();
  NoiseStream stream(seed);
  LatentVector z = stream.draw();
  for (int t = sched.steps; t >= 1; --t) {
    const LatentVector eps_hat = LatentVector::from(predict_noise(denoiser, z.span(), t, c));
    const LatentVector noise = t > 1 ? stream.draw() : LatentVector{};
    z = sample_step(z, t, eps_hat, guidance, models, noise, sched);
  }
  return z;
}

}  // namespace cadrepair
