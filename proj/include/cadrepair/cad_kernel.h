#pragma once

// Miniature sketch-extrude command language and its validity kernel.
//
// A profile is a closed loop whose vertices are the edge targets in order.
// Edge i runs from vertex i-1 to vertex i (edge 0 starts at the last vertex),
// so the loop closes implicitly. Arcs use the bulge convention
// bulge = tan(theta/4): positive bulge sweeps counter-clockwise from start
// to end, |bulge| = 1 is a semicircle, and the sagitta is bulge * chord / 2.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cadrepair {

inline constexpr std::size_t kMaxEdges = 5;
inline constexpr int kArcSegments = 16;
inline constexpr double kMinVertexSeparation = 1e-3;
inline constexpr double kMinArea = 1e-3;
inline constexpr double kCoordBound = 1.0;
inline constexpr double kMaxDepth = 1.0;
inline constexpr double kMaxBulge = 1.0;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

using Polygon = std::vector<Vec2>;

enum class EdgeKind { Line, Arc };

struct SketchEdge {
  EdgeKind kind = EdgeKind::Line;
  Vec2 target;
  double bulge = 0.0;  // always 0 for Line

  static SketchEdge line(double x, double y) { return {EdgeKind::Line, {x, y}, 0.0}; }
  static SketchEdge arc(double x, double y, double bulge) { return {EdgeKind::Arc, {x, y}, bulge}; }

  friend bool operator==(const SketchEdge&, const SketchEdge&) = default;
};

struct CommandSequence {
  std::vector<SketchEdge> edges;
  double depth = 0.0;

  friend bool operator==(const CommandSequence&, const CommandSequence&) = default;
};

// Declaration order is the reporting order.
enum class InvalidReason {
  TooFewVertices,
  DegenerateAdjacentVertices,
  OutOfBounds,
  BulgeOutOfRange,
  SelfIntersection,
  NearZeroArea,
  DepthNonPositive,
  DepthTooLarge,
};

std::string_view reason_name(InvalidReason r);

struct ValidityReport {
  bool valid = true;
  std::vector<InvalidReason> reasons;

  bool has(InvalidReason r) const;
  // Reasons joined with '|', empty when valid.
  std::string reasons_string() const;

  friend bool operator==(const ValidityReport&, const ValidityReport&) = default;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::size_t count() const { return points.size(); }
};

// JSON-lines record: {"edges":[{"kind":"line"|"arc","x":f,"y":f,"bulge":f}...],"depth":f}.
// `line_no` only decorates error messages.
CommandSequence parse_sequence(std::string_view text, std::size_t line_no = 0);
std::string serialize_sequence(const CommandSequence& seq);

Polygon discretize_profile(const CommandSequence& seq, int arc_segments = kArcSegments);

ValidityReport kernel_check(const CommandSequence& seq);

// Sign of the orientation determinant (b - a) x (c - a), exact for all
// finite double inputs: +1 left turn, -1 right turn, 0 collinear.
int orientation(Vec2 a, Vec2 b, Vec2 c);
bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2);
bool self_intersects(const Polygon& polygon);
double polygon_area(const Polygon& polygon);
double polygon_perimeter(const Polygon& polygon);
bool point_in_polygon(const Polygon& polygon, Vec2 p);

struct Box2 {
  Vec2 lo;
  Vec2 hi;
};
Box2 bounding_box(const Polygon& polygon);

// Uniform volume samples of the extruded solid by rejection against the
// discretized profile. Requires a kernel-valid sequence.
PointCloud sample_point_cloud(const CommandSequence& seq, std::size_t n, std::uint64_t seed);

struct VolumeEstimate {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double box_volume = 0.0;
  double volume() const { return box_volume * static_cast<double>(accepted) / static_cast<double>(proposals); }
};

// Runs the same proposal stream as sample_point_cloud for a fixed number of
// proposals and reports the acceptance-based volume estimate.
VolumeEstimate estimate_volume(const CommandSequence& seq, std::size_t proposals, std::uint64_t seed);

std::string point_cloud_csv(const PointCloud& cloud);

}  // namespace cadrepair
