#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadrepair/cad_kernel.h"
#include "cadrepair/latent_codec.h"

namespace cadrepair {

// F = V / (V + I)
double feasibility_rate(std::size_t valid, std::size_t invalid);

double rbf_kernel(const Vec3& x, const Vec3& y, double sigma);

inline constexpr std::size_t kMedianExactLimit = 2048;

// Median pairwise distance over X u Y (exact up to 2048 pooled points, seeded
// uniform subsample of 2048 beyond that). Falls back to 1.0 when the median
// is zero.
double median_heuristic_sigma(const PointCloud& x, const PointCloud& y);

enum class SigmaMode { Fixed, MedianHeuristic };

struct MmdConfig {
  SigmaMode mode = SigmaMode::MedianHeuristic;
  double sigma = 1.0;  // used when mode == Fixed
  std::size_t cloud_size = 512;

  void validate() const;
};

// Biased empirical MMD with an RBF kernel; diagonal terms are included.
double mmd(const PointCloud& x, const PointCloud& y, const MmdConfig& cfg);
double mmd_fixed_sigma(const PointCloud& x, const PointCloud& y, double sigma);

// Jensen-Shannon divergence (base 2) between normalised 3D histograms over
// the joint bounding box.
double jsd(const PointCloud& x, const PointCloud& y, int bins_per_axis = 8);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

// Equal-width bins over [0, max(scores)].
Histogram mmd_histogram(std::span<const double> scores, int bins = 16);
std::string histogram_csv(const Histogram& h);

enum class SourceTag { Baseline, SelfRepairing, GroundTruth };
std::string_view source_tag_name(SourceTag tag);

struct SymmetricEigen {
  std::vector<double> values;                // descending
  std::vector<std::vector<double>> vectors;  // vectors[k] pairs with values[k]
};

// Cyclic Jacobi eigendecomposition of a symmetric n x n row-major matrix.
SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n);

struct PcaProjection {
  std::array<std::array<double, kLatentDim>, 2> components{};
  std::array<double, kLatentDim> mean{};
  std::vector<std::array<double, 2>> coords;
  std::vector<SourceTag> tags;
  std::array<double, 2> explained{};
  std::vector<double> eigenvalues;  // all covariance eigenvalues, descending
};

PcaProjection pca_2d(std::span<const LatentVector> latents, std::span<const SourceTag> tags);
std::string pca_csv(const PcaProjection& p);

}  // namespace cadrepair
