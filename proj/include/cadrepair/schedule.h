#pragma once

#include <cstddef>
#include <vector>

namespace cadrepair {

// Linear-beta DDPM noise schedule. All arrays are indexed by step t in
// [1, T]; index 0 holds the t = 0 convention (beta 0, alpha_bar 1).
struct DiffusionSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> posterior_variance;  // beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)

  double sigma(int t) const;
};

DiffusionSchedule build_schedule(int steps, double beta_start, double beta_end);

}  // namespace cadrepair
