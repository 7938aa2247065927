#include "cadrepair/latent_codec.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cadrepair/errors.h"

namespace cadrepair {

namespace {

constexpr char kMagic[4] = {'L', 'A', 'T', '1'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(const char* data) {
  T value;
  std::memcpy(&value, data, sizeof(T));
  return value;
}

}  // namespace

LatentVector LatentVector::from(std::span<const double> v) {
  if (v.size() != kLatentDim) {
    throw Error(Errc::DimensionMismatch, "latent needs " + std::to_string(kLatentDim) + " values, got " +
                                             std::to_string(v.size()));
  }
  LatentVector z;
  std::copy(v.begin(), v.end(), z.values.begin());
  return z;
}

bool is_finite(const LatentVector& z) {
  for (double v : z.values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

CommandSequence decode(const LatentVector& z) {
  CommandSequence seq;
  for (std::size_t slot = 0; slot < kMaxEdges; ++slot) {
    const double code = z[slot * kSlotWidth];
    if (!(code > kActiveThreshold)) break;
    const double x = z[slot * kSlotWidth + 1];
    const double y = z[slot * kSlotWidth + 2];
    if (code > kArcThreshold) {
      seq.edges.push_back(SketchEdge::arc(x, y, z[slot * kSlotWidth + 3]));
    } else {
      seq.edges.push_back(SketchEdge::line(x, y));
    }
  }
  seq.depth = z.depth();
  return seq;
}

LatentVector encode(const CommandSequence& seq) {
  if (seq.edges.size() > kMaxEdges) {
    throw Error(Errc::ArityError, std::to_string(seq.edges.size()) + " edges exceed the limit of " +
                                      std::to_string(kMaxEdges));
  }
  LatentVector z;
  for (std::size_t slot = 0; slot < kMaxEdges; ++slot) {
    double* s = &z.values[slot * kSlotWidth];
    if (slot < seq.edges.size()) {
      const SketchEdge& e = seq.edges[slot];
      s[0] = e.kind == EdgeKind::Arc ? kCodeArc : kCodeLine;
      s[1] = e.target.x;
      s[2] = e.target.y;
      s[3] = e.kind == EdgeKind::Arc ? e.bulge : 0.0;
    } else {
      s[0] = kCodeInactive;
    }
  }
  z.depth() = seq.depth;
  return z;
}

LatentVector quantize(const LatentVector& z) { return encode(decode(z)); }

ConditionVector condition_descriptor(const CommandSequence& seq) {
  const ValidityReport report = kernel_check(seq);
  if (!report.valid) {
    throw Error(Errc::InfeasibleSolid, "condition descriptor needs a valid sequence (" + report.reasons_string() + ")");
  }
  const Polygon poly = discretize_profile(seq, kArcSegments);
  const double area = polygon_area(poly);
  double cx = 0.0;
  double cy = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    const double cross = a.x * b.y - b.x * a.y;
    cx += (a.x + b.x) * cross;
    cy += (a.y + b.y) * cross;
  }
  cx /= 6.0 * area;
  cy /= 6.0 * area;
  const Box2 box = bounding_box(poly);

  ConditionVector c;
  c.values = {static_cast<double>(seq.edges.size()) / static_cast<double>(kMaxEdges),
              std::abs(area),
              polygon_perimeter(poly),
              cx,
              cy,
              box.hi.x - box.lo.x,
              box.hi.y - box.lo.y,
              seq.depth};
  return c;
}

LatentVector round_to_float(const LatentVector& z) {
  LatentVector out;
  for (std::size_t i = 0; i < kLatentDim; ++i) out[i] = static_cast<double>(static_cast<float>(z[i]));
  return out;
}

void write_latent_matrix(const std::filesystem::path& path, std::span<const LatentVector> rows) {
  std::string buf;
  buf.reserve(16 + rows.size() * kLatentDim * sizeof(float));
  buf.append(kMagic, 4);
  put_le<std::uint64_t>(buf, rows.size());
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(kLatentDim));
  for (const LatentVector& z : rows) {
    for (double v : z.values) put_le<float>(buf, static_cast<float>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::Io, "failed writing " + path.string());
}

std::vector<LatentVector> read_latent_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw Error(Errc::MalformedRecord, path.string() + ": missing LAT1 header");
  }
  const auto rows = get_le<std::uint64_t>(buf.data() + 4);
  const auto width = get_le<std::uint32_t>(buf.data() + 12);
  if (width != kLatentDim) {
    throw Error(Errc::DimensionMismatch, path.string() + ": row width " + std::to_string(width));
  }
  if (buf.size() != 16 + rows * width * sizeof(float)) {
    throw Error(Errc::MalformedRecord, path.string() + ": size does not match header");
  }
  std::vector<LatentVector> out(rows);
  const char* p = buf.data() + 16;
  for (auto& z : out) {
    for (double& v : z.values) {
      v = get_le<float>(p);
      p += sizeof(float);
    }
  }
  return out;
}

std::string latent_matrix_csv(std::span<const LatentVector> rows) {
  std::ostringstream os;
  os.precision(9);
  for (std::size_t slot = 0; slot < kMaxEdges; ++slot) {
    os << "t" << slot + 1 << ",x" << slot + 1 << ",y" << slot + 1 << ",b" << slot + 1 << ',';
  }
  os << "depth\n";
  for (const LatentVector& z : rows) {
    for (std::size_t i = 0; i < kLatentDim; ++i) os << (i ? "," : "") << static_cast<float>(z[i]);
    os << '\n';
  }
  return os.str();
}

}  // namespace cadrepair
