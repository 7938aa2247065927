#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cadrepair/errors.h"
#include "cadrepair/metrics.h"
#include "oracles.h"

using namespace cadrepair;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double shift = 0.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({g(rng) + shift, g(rng), g(rng)});
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("feasibility rate on the paper's counts") {
  CHECK(std::abs(feasibility_rate(7707, 808) - 0.90511) <= 1e-5);
  CHECK(std::abs(feasibility_rate(8239, 276) - 0.96759) <= 1e-5);
  CHECK(feasibility_rate(3, 1) == 0.75);
  CHECK_THROWS_AS(feasibility_rate(0, 0), Error);
}

TEST_CASE("mmd agrees with the double-loop oracle") {
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nx = 1 + rng() % 64, ny = 1 + rng() % 64;
    const PointCloud x = random_cloud(rng, nx);
    const PointCloud y = random_cloud(rng, ny, 0.5);
    const double sigma = 0.3 + 0.01 * static_cast<double>(rng() % 200);
    worst = std::max(worst, std::abs(mmd_fixed_sigma(x, y, sigma) - oracle::mmd_double_loop(x, y, sigma)));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("mmd identities") {
  std::mt19937_64 rng(103);
  const MmdConfig median;
  for (int trial = 0; trial < 50; ++trial) {
    const PointCloud x = random_cloud(rng, 1 + rng() % 64);
    const PointCloud y = random_cloud(rng, 1 + rng() % 64, 0.3);
    CHECK(mmd(x, x, median) <= 1e-9);
    CHECK(mmd(x, y, median) == mmd(y, x, median));
    CHECK(mmd_fixed_sigma(x, y, 0.7) == mmd_fixed_sigma(y, x, 0.7));
  }
  const PointCloud a{{{0, 0, 0}}};
  const PointCloud b{{{1, 0, 0}}};
  CHECK(std::abs(mmd_fixed_sigma(a, b, 1.0) - std::sqrt(2.0 - 2.0 * std::exp(-0.5))) <= 1e-9);
  CHECK(rbf_kernel({0, 0, 0}, {1, 0, 0}, 1.0) == std::exp(-0.5));
  CHECK_THROWS_AS(mmd_fixed_sigma(a, b, 0.0), Error);
  CHECK_THROWS_AS(mmd_fixed_sigma(a, PointCloud{}, 1.0), Error);
}

TEST_CASE("median heuristic on a hand case") {
  // pooled points 0, 1, 3 on a line: distances 1, 2, 3
  const PointCloud x{{{0, 0, 0}, {1, 0, 0}}};
  const PointCloud y{{{3, 0, 0}}};
  CHECK(median_heuristic_sigma(x, y) == 2.0);
  const PointCloud same{{{1, 1, 1}, {1, 1, 1}}};
  CHECK(median_heuristic_sigma(same, same) == 1.0);
}

TEST_CASE("jsd bounds") {
  std::mt19937_64 rng(107);
  const PointCloud x = random_cloud(rng, 500);
  CHECK(jsd(x, x) == doctest::Approx(0.0).scale(1));
  const PointCloud lo{{{0, 0, 0}, {0.1, 0.1, 0.1}}};
  const PointCloud hi{{{10, 10, 10}, {9.9, 9.9, 9.9}}};
  CHECK(jsd(lo, hi) == doctest::Approx(1.0));
  const double mid = jsd(x, random_cloud(rng, 500, 1.0));
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
}

TEST_CASE("histogram") {
  const std::vector<double> s = {0.0, 0.1, 0.2, 0.4};
  const Histogram h = mmd_histogram(s, 4);
  REQUIRE(h.edges.size() == 5);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() == 0.4);
  CHECK(h.counts == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(histogram_csv(h).rfind("bin_lo,bin_hi,count\n", 0) == 0);
  CHECK_THROWS_AS(mmd_histogram(std::vector<double>{}, 4), Error);
}

TEST_CASE("jacobi eigen on a hand matrix") {
  // [[2 1][1 2]] -> 3, 1
  const SymmetricEigen e = jacobi_eigen({2, 1, 1, 2}, 2);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(std::abs(e.vectors[0][0]) - std::sqrt(0.5)) < 1e-12);
}

TEST_CASE("pca: orthonormal, power-iteration oracle, rank one") {
  std::mt19937_64 rng(109);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<LatentVector> zs(600);
  for (LatentVector& z : zs) {
    const double a = 3.0 * g(rng), b = 1.5 * g(rng);
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      z[i] = a * std::cos(0.3 * static_cast<double>(i)) + b * std::sin(0.7 * static_cast<double>(i)) + 0.2 * g(rng);
    }
  }
  const std::vector<SourceTag> tags(zs.size(), SourceTag::Baseline);
  const PcaProjection p = pca_2d(zs, tags);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      CHECK(std::abs(dot(p.components[a], p.components[b]) - (a == b ? 1.0 : 0.0)) < 1e-9);
    }
  }

  // sample covariance built here, independently of the library
  std::vector<double> mean(kLatentDim, 0.0), cov(kLatentDim * kLatentDim, 0.0);
  for (const LatentVector& z : zs) {
    for (std::size_t i = 0; i < kLatentDim; ++i) mean[i] += z[i] / static_cast<double>(zs.size());
  }
  for (const LatentVector& z : zs) {
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      for (std::size_t j = 0; j < kLatentDim; ++j) {
        cov[i * kLatentDim + j] += (z[i] - mean[i]) * (z[j] - mean[j]) / static_cast<double>(zs.size() - 1);
      }
    }
  }
  const auto ref = oracle::power_iteration(cov, kLatentDim, 2);
  // principal angles between span(components) and span(ref) via the 2x2
  // matrix of inner products: all singular values must be ~1
  const double m00 = dot(p.components[0], ref[0]), m01 = dot(p.components[0], ref[1]);
  const double m10 = dot(p.components[1], ref[0]), m11 = dot(p.components[1], ref[1]);
  const double tr = m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11;
  const double det = m00 * m11 - m01 * m10;
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det * det));
  const double smin = std::sqrt(std::max(0.0, tr / 2 - disc));
  CHECK(std::acos(std::min(1.0, smin)) < 1e-6);

  double total = 0;
  for (double v : p.eigenvalues) total += v;
  CHECK(p.explained[0] == doctest::Approx(p.eigenvalues[0] / total));
  CHECK(p.coords.size() == zs.size());
  const std::string csv = pca_csv(p);
  CHECK(csv.rfind("pc1,pc2,tag\n", 0) == 0);

  std::vector<LatentVector> rank1(300);
  for (LatentVector& z : rank1) {
    const double a = g(rng);
    for (std::size_t i = 0; i < kLatentDim; ++i) z[i] = a * (1.0 + 0.1 * static_cast<double>(i));
  }
  const PcaProjection r1 = pca_2d(rank1, std::vector<SourceTag>(rank1.size(), SourceTag::GroundTruth));
  CHECK(r1.explained[0] > 0.999);
}

TEST_CASE("pca reconstruction error equals the trailing eigenvalue sum") {
  std::mt19937_64 rng(113);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<LatentVector> zs(400);
  for (LatentVector& z : zs) {
    for (std::size_t i = 0; i < kLatentDim; ++i) z[i] = g(rng) * (1.0 + 0.2 * static_cast<double>(i % 5));
  }
  const PcaProjection p = pca_2d(zs, std::vector<SourceTag>(zs.size(), SourceTag::Baseline));
  double err = 0;
  for (std::size_t r = 0; r < zs.size(); ++r) {
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      const double rec = p.mean[i] + p.coords[r][0] * p.components[0][i] + p.coords[r][1] * p.components[1][i];
      err += (zs[r][i] - rec) * (zs[r][i] - rec);
    }
  }
  err /= static_cast<double>(zs.size() - 1);
  double trailing = 0;
  for (std::size_t k = 2; k < p.eigenvalues.size(); ++k) trailing += p.eigenvalues[k];
  CHECK(std::abs(err - trailing) < 1e-8);
  CHECK_THROWS_AS(pca_2d(std::vector<LatentVector>(1), std::vector<SourceTag>(1)), Error);
}
