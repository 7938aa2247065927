#pragma once

// Conditional DDPM over latents with classifier and regressor guidance.
//
// Each reverse step computes the epsilon-parameterised posterior mean, then
// shifts it by the scaled gradients of the classifier's infeasibility
// probability and of the regressor's squared error, both evaluated at the
// current noisy latent z_t, and finally adds posterior noise:
//
//   mu'  = mu  - s_clf * grad P_inf(z_t)
//   mu'' = mu' - s_reg * grad ||W z_t + b - z_t||^2
//   z_{t-1} = mu'' + sigma_t * noise

#include <cstdint>
#include <span>

#include "cadrepair/latent_codec.h"
#include "cadrepair/neural.h"
#include "cadrepair/schedule.h"

namespace cadrepair {

inline constexpr int kDefaultSteps = 100;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

struct GuidanceConfig {
  bool use_classifier = false;
  bool use_regressor = false;
  double s_clf = 10.0;
  double s_reg = 10.0;
  bool stop_gradient_y = false;

  void validate() const;
};

// Models consulted by guidance; non-owning and only required when the
// matching guidance flag is set.
struct GuidanceModels {
  const Mlp* classifier = nullptr;
  const LinearRegressor* regressor = nullptr;
};

LatentVector forward_diffuse(const LatentVector& z0, int t, const LatentVector& eps, const DiffusionSchedule& sched);

LatentVector posterior_mean(const LatentVector& z_t, int t, const LatentVector& eps_hat,
                            const DiffusionSchedule& sched);

// Gradient of P_inf = 1 - P_feasible at z.
LatentVector infeasibility_gradient(const Mlp& classifier, const LatentVector& z);

LatentVector classifier_guide(const LatentVector& mu, const LatentVector& z_t, const Mlp& classifier, double s_clf);

LatentVector regressor_guide(const LatentVector& mu, const LatentVector& z_t, const LinearRegressor& regressor,
                             double s_reg, bool stop_gradient_y);

// Posterior mean after optional guidance (mu'' above).
LatentVector guided_mean(const LatentVector& z_t, int t, const LatentVector& eps_hat, const GuidanceConfig& guidance,
                         const GuidanceModels& models, const DiffusionSchedule& sched);

LatentVector sample_step(const LatentVector& z_t, int t, const LatentVector& eps_hat, const GuidanceConfig& guidance,
                         const GuidanceModels& models, const LatentVector& noise, const DiffusionSchedule& sched);

// z_T drawn for a given sampling seed; exposed so paired runs can be audited.
LatentVector initial_latent(std::uint64_t seed);

LatentVector sample(const ConditionVector& c, const Mlp& denoiser, const GuidanceConfig& guidance,
                    const GuidanceModels& models, const DiffusionSchedule& sched, std::uint64_t seed);

}  // namespace cadrepair
