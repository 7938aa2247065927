#pragma once

// Fixed-width latent representation of a CommandSequence.
//
// Layout: five slots of (t, x, y, bulge) followed by the extrusion depth.
// A slot is active while t > 0 (the sequence ends at the first inactive
// slot) and is an arc when t > 0.5. Canonical codes sit at the centre of
// each decision cell: 0.25 line, 0.75 arc, -0.5 inactive.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cadrepair/cad_kernel.h"

namespace cadrepair {

inline constexpr std::size_t kSlotWidth = 4;
inline constexpr std::size_t kLatentDim = kMaxEdges * kSlotWidth + 1;
inline constexpr std::size_t kConditionDim = 8;

inline constexpr double kCodeLine = 0.25;
inline constexpr double kCodeArc = 0.75;
inline constexpr double kCodeInactive = -0.5;
inline constexpr double kActiveThreshold = 0.0;
inline constexpr double kArcThreshold = 0.5;

struct LatentVector {
  std::array<double, kLatentDim> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<double> span() { return values; }
  std::span<const double> span() const { return values; }

  double& slot_code(std::size_t slot) { return values[slot * kSlotWidth]; }
  double slot_code(std::size_t slot) const { return values[slot * kSlotWidth]; }
  double& depth() { return values[kLatentDim - 1]; }
  double depth() const { return values[kLatentDim - 1]; }

  static LatentVector from(std::span<const double> v);

  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

bool is_finite(const LatentVector& z);

struct ConditionVector {
  // edge_count/5, |area|, perimeter, centroid x, centroid y, bbox w, bbox h, depth
  std::array<double, kConditionDim> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const { return values; }

  friend bool operator==(const ConditionVector&, const ConditionVector&) = default;
};

CommandSequence decode(const LatentVector& z);
LatentVector encode(const CommandSequence& seq);
LatentVector quantize(const LatentVector& z);

// Shape descriptor of a kernel-valid sequence, measured on the discretized
// profile. The centroid is the area centroid of the polygon.
ConditionVector condition_descriptor(const CommandSequence& seq);

// Rounds every entry to the nearest float, matching what the binary latent
// matrix stores.
LatentVector round_to_float(const LatentVector& z);

// Binary latent matrix: 16-byte header ("LAT1", little-endian u64 row count,
// u32 row width) then row-major little-endian float32 values.
void write_latent_matrix(const std::filesystem::path& path, std::span<const LatentVector> rows);
std::vector<LatentVector> read_latent_matrix(const std::filesystem::path& path);
std::string latent_matrix_csv(std::span<const LatentVector> rows);

}  // namespace cadrepair
