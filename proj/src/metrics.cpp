#include "cadrepair/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "cadrepair/errors.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

constexpr std::uint64_t kMedianSubsampleSeed = 0x6d656469616eULL;

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Self terms go through the same loop as the cross term so that identical
// clouds cancel exactly.
double kernel_mean(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double inv_two_sigma_sq) {
  long double sum = 0.0L;
  for (const Vec3& p : a) {
    for (const Vec3& q : b) sum += std::exp(-squared_distance(p, q) * inv_two_sigma_sq);
  }
  return static_cast<double>(sum / (static_cast<long double>(a.size()) * static_cast<long double>(b.size())));
}

}  // namespace

double feasibility_rate(std::size_t valid, std::size_t invalid) {
  if (valid + invalid == 0) throw Error(Errc::EmptyPopulation, "feasibility rate of an empty population");
  return static_cast<double>(valid) / static_cast<double>(valid + invalid);
}

double rbf_kernel(const Vec3& x, const Vec3& y, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::BadSigma, "RBF bandwidth must be positive");
  return std::exp(-squared_distance(x, y) / (2.0 * sigma * sigma));
}

double median_heuristic_sigma(const PointCloud& x, const PointCloud& y) {
  std::vector<Vec3> pool = x.points;
  pool.insert(pool.end(), y.points.begin(), y.points.end());
  if (pool.size() < 2) throw Error(Errc::TooFewPoints, "median heuristic needs at least two points");
  if (pool.size() > kMedianExactLimit) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(kMedianSubsampleSeed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<Vec3> sub;
    sub.reserve(kMedianExactLimit);
    for (std::size_t k = 0; k < kMedianExactLimit; ++k) sub.push_back(pool[idx[k]]);
    pool = std::move(sub);
  }
  std::vector<double> d;
  d.reserve(pool.size() * (pool.size() - 1) / 2);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) d.push_back(std::sqrt(squared_distance(pool[i], pool[j])));
  }
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  return median > 0.0 ? median : 1.0;
}

void MmdConfig::validate() const {
  if (mode == SigmaMode::Fixed && !(sigma > 0.0)) throw Error(Errc::BadSigma, "fixed sigma must be positive");
  if (cloud_size == 0) throw Error(Errc::BadRange, "cloud size must be positive");
}

double mmd_fixed_sigma(const PointCloud& x, const PointCloud& y, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::BadSigma, "RBF bandwidth must be positive");
  if (x.points.empty() || y.points.empty()) throw Error(Errc::TooFewPoints, "MMD needs non-empty clouds");
  const double g = 1.0 / (2.0 * sigma * sigma);
  const double kxx = kernel_mean(x.points, x.points, g);
  const double kyy = kernel_mean(y.points, y.points, g);
  // The cross term is always summed in the same orientation so that
  // swapping the arguments reproduces the result bit for bit.
  const auto less = [](const Vec3& a, const Vec3& b) {
    return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
  };
  const bool x_first = !std::lexicographical_compare(y.points.begin(), y.points.end(), x.points.begin(),
                                                     x.points.end(), less);
  const double kxy = x_first ? kernel_mean(x.points, y.points, g) : kernel_mean(y.points, x.points, g);
  const double radicand = (kxx + kyy) - 2.0 * kxy;
  return radicand > 0.0 ? std::sqrt(radicand) : 0.0;
}

double mmd(const PointCloud& x, const PointCloud& y, const MmdConfig& cfg) {
  cfg.validate();
  const double sigma = cfg.mode == SigmaMode::Fixed ? cfg.sigma : median_heuristic_sigma(x, y);
  return mmd_fixed_sigma(x, y, sigma);
}

double jsd(const PointCloud& x, const PointCloud& y, int bins_per_axis) {
  if (x.points.empty() || y.points.empty()) throw Error(Errc::TooFewPoints, "JSD needs non-empty clouds");
  if (bins_per_axis < 1) throw Error(Errc::BadRange, "bins_per_axis must be positive");
  Vec3 lo = x.points.front();
  Vec3 hi = lo;
  for (const auto* cloud : {&x, &y}) {
    for (const Vec3& p : cloud->points) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
  }
  const auto b = static_cast<std::size_t>(bins_per_axis);
  auto bin = [&](double v, double l, double h) -> std::size_t {
    if (!(h > l)) return 0;
    const auto k = static_cast<std::size_t>(std::floor((v - l) / (h - l) * static_cast<double>(b)));
    return std::min(k, b - 1);
  };
  auto histogram = [&](const PointCloud& c) {
    std::vector<double> hist(b * b * b, 0.0);
    for (const Vec3& p : c.points) hist[(bin(p.x, lo.x, hi.x) * b + bin(p.y, lo.y, hi.y)) * b + bin(p.z, lo.z, hi.z)] += 1.0;
    for (double& v : hist) v /= static_cast<double>(c.points.size());
    return hist;
  };
  const std::vector<double> p = histogram(x);
  const std::vector<double> q = histogram(y);
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_p += p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) kl_q += q[i] * std::log2(q[i] / m);
  }
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, 1.0);
}

Histogram mmd_histogram(std::span<const double> scores, int bins) {
  if (scores.empty()) throw Error(Errc::EmptyScores, "histogram of no scores");
  if (bins < 1) throw Error(Errc::BadRange, "bins must be positive");
  const double max = *std::max_element(scores.begin(), scores.end());
  Histogram h;
  const auto n = static_cast<std::size_t>(bins);
  h.counts.assign(n, 0);
  for (std::size_t k = 0; k <= n; ++k) h.edges.push_back(max * static_cast<double>(k) / static_cast<double>(n));
  for (double s : scores) {
    std::size_t k = 0;
    if (max > 0.0) k = std::min(n - 1, static_cast<std::size_t>(std::floor(s / max * static_cast<double>(n))));
    ++h.counts[k];
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os.precision(17);
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) os << h.edges[k] << ',' << h.edges[k + 1] << ',' << h.counts[k] << '\n';
  return os.str();
}

std::string_view source_tag_name(SourceTag tag) {
  switch (tag) {
    case SourceTag::Baseline: return "Baseline";
    case SourceTag::SelfRepairing: return "SelfRepairing";
    case SourceTag::GroundTruth: return "GroundTruth";
  }
  return "Unknown";
}

SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n) {
  if (a.size() != n * n) throw Error(Errc::DimensionMismatch, "jacobi_eigen needs an n x n matrix");
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        total += a[i * n + j] * a[i * n + j];
        if (i != j) off += a[i * n + j] * a[i * n + j];
      }
    }
    if (off <= 1e-30 * total || off == 0.0) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i * n + i] > a[j * n + j]; });
  SymmetricEigen out;
  for (std::size_t k : order) {
    out.values.push_back(a[k * n + k]);
    std::vector<double> vec(n);
    for (std::size_t i = 0; i < n; ++i) vec[i] = v[i * n + k];
    // Largest-magnitude entry positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(vec[i]) > std::abs(vec[arg])) arg = i;
    }
    if (vec[arg] < 0.0) {
      for (double& x : vec) x = -x;
    }
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

PcaProjection pca_2d(std::span<const LatentVector> latents, std::span<const SourceTag> tags) {
  if (latents.size() < 3) throw Error(Errc::TooFewRows, "PCA needs at least three latents");
  if (tags.size() != latents.size()) throw Error(Errc::DimensionMismatch, "one tag per latent required");
  constexpr std::size_t d = kLatentDim;
  const auto n = static_cast<double>(latents.size());

  PcaProjection out;
  for (const LatentVector& z : latents) {
    for (std::size_t i = 0; i < d; ++i) out.mean[i] += z[i];
  }
  for (double& m : out.mean) m /= n;

  std::vector<double> cov(d * d, 0.0);
  for (const LatentVector& z : latents) {
    std::array<double, d> c{};
    for (std::size_t i = 0; i < d; ++i) c[i] = z[i] - out.mean[i];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) cov[i * d + j] += c[i] * c[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] /= n - 1.0;
      cov[j * d + i] = cov[i * d + j];
    }
  }

  const SymmetricEigen eig = jacobi_eigen(cov, d);
  out.eigenvalues = eig.values;
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    std::copy(eig.vectors[k].begin(), eig.vectors[k].end(), out.components[k].begin());
    out.explained[k] = total > 0.0 ? std::clamp(std::max(eig.values[k], 0.0) / total, 0.0, 1.0) : 0.0;
  }
  out.tags.assign(tags.begin(), tags.end());
  out.coords.reserve(latents.size());
  for (const LatentVector& z : latents) {
    std::array<double, 2> xy{};
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t i = 0; i < d; ++i) xy[k] += (z[i] - out.mean[i]) * out.components[k][i];
    }
    out.coords.push_back(xy);
  }
  return out;
}

std::string pca_csv(const PcaProjection& p) {
  std::ostringstream os;
  os.precision(17);
  os << "pc1,pc2,tag\n";
  for (std::size_t i = 0; i < p.coords.size(); ++i) {
    os << p.coords[i][0] << ',' << p.coords[i][1] << ',' << source_tag_name(p.tags[i]) << '\n';
  }
  return os.str();
}

}  // namespace cadrepair
