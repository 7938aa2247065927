#include "cadrepair/cad_kernel.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cadrepair/errors.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::size_t kMaxSamplingProposals = 10'000'000;
constexpr double kMinAcceptance = 1e-4;

// Shewchuk's first-stage error bound for the 2D orientation determinant.
constexpr double kOrientErrBound = (3.0 + 16.0 * 1.1102230246251565e-16) * 1.1102230246251565e-16;

struct TwoTerm {
  double hi;
  double lo;
};

TwoTerm two_product(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}

TwoTerm two_sum(double a, double b) {
  const double s = a + b;
  const double bv = s - a;
  const double av = s - bv;
  return {s, (a - av) + (b - bv)};
}

// Adds b to a nonoverlapping expansion kept in increasing magnitude order.
void grow_expansion(std::vector<double>& e, double b) {
  double q = b;
  for (double& component : e) {
    const TwoTerm t = two_sum(q, component);
    component = t.lo;
    q = t.hi;
  }
  e.push_back(q);
}

int exact_orientation(Vec2 a, Vec2 b, Vec2 c) {
  // (b - a) x (c - a) expanded into raw-coordinate products so no rounded
  // differences enter the sum.
  const std::array<TwoTerm, 6> terms = {
      two_product(b.x, c.y),  two_product(-b.x, a.y), two_product(-a.x, c.y),
      two_product(-b.y, c.x), two_product(b.y, a.x),  two_product(a.y, c.x),
  };
  std::vector<double> expansion;
  expansion.reserve(13);
  for (const TwoTerm& t : terms) {
    grow_expansion(expansion, t.lo);
    grow_expansion(expansion, t.hi);
  }
  for (auto it = expansion.rbegin(); it != expansion.rend(); ++it) {
    if (*it > 0.0) return 1;
    if (*it < 0.0) return -1;
  }
  return 0;
}

bool within_box(Vec2 p, Vec2 q, Vec2 r) {
  return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
         r.y <= std::max(p.y, q.y);
}

double distance(Vec2 a, Vec2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

void append_arc(Polygon& out, Vec2 start, Vec2 end, double bulge, int segments) {
  const double dx = end.x - start.x;
  const double dy = end.y - start.y;
  const double chord = std::hypot(dx, dy);
  if (bulge == 0.0 || chord == 0.0) {
    out.push_back(end);
    return;
  }
  const double sweep = 4.0 * std::atan(bulge);
  const double ux = dx / chord;
  const double uy = dy / chord;
  const double half_sweep_sin = std::sin(sweep / 2.0);
  // Chord from start to the point at swept angle phi has length
  // chord * sin(phi/2) / sin(sweep/2) and leaves the main chord direction
  // rotated by (phi - sweep) / 2.
  for (int k = 1; k < segments; ++k) {
    const double phi = sweep * static_cast<double>(k) / static_cast<double>(segments);
    const double len = chord * std::sin(phi / 2.0) / half_sweep_sin;
    const double rot = (phi - sweep) / 2.0;
    const double c = std::cos(rot);
    const double s = std::sin(rot);
    out.push_back({start.x + len * (c * ux - s * uy), start.y + len * (s * ux + c * uy)});
  }
  out.push_back(end);
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
  std::ostringstream os;
  if (line_no > 0) os << "line " << line_no << ": ";
  os << what;
  throw Error(Errc::MalformedRecord, os.str());
}

double number_field(const ojson& obj, const char* key, std::size_t line_no, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) malformed(line_no, where + ": missing field '" + key + "'");
  if (!it->is_number()) malformed(line_no, where + ": field '" + key + "' must be a number");
  return it->get<double>();
}

}  // namespace

std::string_view reason_name(InvalidReason r) {
  switch (r) {
    case InvalidReason::TooFewVertices: return "TooFewVertices";
    case InvalidReason::DegenerateAdjacentVertices: return "DegenerateAdjacentVertices";
    case InvalidReason::OutOfBounds: return "OutOfBounds";
    case InvalidReason::BulgeOutOfRange: return "BulgeOutOfRange";
    case InvalidReason::SelfIntersection: return "SelfIntersection";
    case InvalidReason::NearZeroArea: return "NearZeroArea";
    case InvalidReason::DepthNonPositive: return "DepthNonPositive";
    case InvalidReason::DepthTooLarge: return "DepthTooLarge";
  }
  return "Unknown";
}

bool ValidityReport::has(InvalidReason r) const {
  return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
}

std::string ValidityReport::reasons_string() const {
  std::string out;
  for (InvalidReason r : reasons) {
    if (!out.empty()) out += '|';
    out += reason_name(r);
  }
  return out;
}

CommandSequence parse_sequence(std::string_view text, std::size_t line_no) {
  ojson record;
  try {
    record = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    malformed(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!record.is_object()) malformed(line_no, "record must be a JSON object");
  for (const auto& [key, value] : record.items()) {
    if (key != "edges" && key != "depth") malformed(line_no, "unknown field '" + key + "'");
  }
  const auto edges_it = record.find("edges");
  if (edges_it == record.end() || !edges_it->is_array()) malformed(line_no, "field 'edges' must be an array");
  if (edges_it->size() > kMaxEdges) {
    throw Error(Errc::ArityError, (line_no > 0 ? "line " + std::to_string(line_no) + ": " : std::string()) +
                                      std::to_string(edges_it->size()) + " edges exceed the limit of " +
                                      std::to_string(kMaxEdges));
  }

  CommandSequence seq;
  seq.depth = number_field(record, "depth", line_no, "record");
  for (std::size_t i = 0; i < edges_it->size(); ++i) {
    const ojson& e = (*edges_it)[i];
    const std::string where = "edges[" + std::to_string(i) + "]";
    if (!e.is_object()) malformed(line_no, where + " must be an object");
    for (const auto& [key, value] : e.items()) {
      if (key != "kind" && key != "x" && key != "y" && key != "bulge") {
        malformed(line_no, where + ": unknown field '" + key + "'");
      }
    }
    const auto kind_it = e.find("kind");
    if (kind_it == e.end() || !kind_it->is_string()) malformed(line_no, where + ": field 'kind' must be a string");
    const std::string kind = kind_it->get<std::string>();
    SketchEdge edge;
    if (kind == "line") {
      edge.kind = EdgeKind::Line;
    } else if (kind == "arc") {
      edge.kind = EdgeKind::Arc;
    } else {
      malformed(line_no, where + ": kind must be \"line\" or \"arc\", got \"" + kind + "\"");
    }
    edge.target = {number_field(e, "x", line_no, where), number_field(e, "y", line_no, where)};
    const double bulge = number_field(e, "bulge", line_no, where);
    if (edge.kind == EdgeKind::Line) {
      if (bulge != 0.0) malformed(line_no, where + ": line edge with nonzero bulge");
      edge.bulge = 0.0;
    } else {
      edge.bulge = bulge;
    }
    seq.edges.push_back(edge);
  }
  return seq;
}

std::string serialize_sequence(const CommandSequence& seq) {
  ojson edges = ojson::array();
  for (const SketchEdge& e : seq.edges) {
    ojson edge;
    edge["kind"] = e.kind == EdgeKind::Arc ? "arc" : "line";
    edge["x"] = e.target.x;
    edge["y"] = e.target.y;
    edge["bulge"] = e.kind == EdgeKind::Arc ? e.bulge : 0.0;
    edges.push_back(std::move(edge));
  }
  ojson record;
  record["edges"] = std::move(edges);
  record["depth"] = seq.depth;
  return record.dump();
}

Polygon discretize_profile(const CommandSequence& seq, int arc_segments) {
  if (arc_segments < 1) throw Error(Errc::BadRange, "arc_segments must be >= 1");
  Polygon out;
  const std::size_t n = seq.edges.size();
  for (std::size_t i = 0; i < n; ++i) {
    const SketchEdge& edge = seq.edges[i];
    const Vec2 start = seq.edges[(i + n - 1) % n].target;
    if (edge.kind == EdgeKind::Arc) {
      append_arc(out, start, edge.target, edge.bulge, arc_segments);
    } else {
      out.push_back(edge.target);
    }
  }
  return out;
}

ValidityReport kernel_check(const CommandSequence& seq) {
  ValidityReport report;
  auto flag = [&](InvalidReason r) {
    if (!report.has(r)) report.reasons.push_back(r);
  };

  const std::size_t n = seq.edges.size();
  if (n < 3) flag(InvalidReason::TooFewVertices);

  bool finite = true;
  for (const SketchEdge& e : seq.edges) {
    if (!std::isfinite(e.target.x) || !std::isfinite(e.target.y) || !std::isfinite(e.bulge)) finite = false;
    if (!(std::abs(e.target.x) <= kCoordBound && std::abs(e.target.y) <= kCoordBound)) {
      flag(InvalidReason::OutOfBounds);
    }
  }
  for (const SketchEdge& e : seq.edges) {
    if (e.kind == EdgeKind::Arc && !(std::abs(e.bulge) <= kMaxBulge)) flag(InvalidReason::BulgeOutOfRange);
  }

  bool degenerate = false;
  if (n >= 2) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = distance(seq.edges[i].target, seq.edges[(i + 1) % n].target);
      if (!(d >= kMinVertexSeparation)) degenerate = true;
    }
  }
  if (degenerate) flag(InvalidReason::DegenerateAdjacentVertices);

  if (n >= 3 && finite) {
    const Polygon poly = discretize_profile(seq, kArcSegments);
    // Coincident neighbours break the simple-polygon test's precondition;
    // that defect is already reported above.
    if (!degenerate && self_intersects(poly)) flag(InvalidReason::SelfIntersection);
    if (!(std::abs(polygon_area(poly)) >= kMinArea)) flag(InvalidReason::NearZeroArea);
  }

  if (!(seq.depth > 0.0)) {
    flag(InvalidReason::DepthNonPositive);
  } else if (seq.depth > kMaxDepth) {
    flag(InvalidReason::DepthTooLarge);
  }

  std::sort(report.reasons.begin(), report.reasons.end());
  report.valid = report.reasons.empty();
  return report;
}

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double left = (a.x - c.x) * (b.y - c.y);
  const double right = (a.y - c.y) * (b.x - c.x);
  const double det = left - right;
  const double bound = kOrientErrBound * (std::abs(left) + std::abs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return exact_orientation(a, b, c);
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  if (o1 == 0 && within_box(p1, p2, q1)) return true;
  if (o2 == 0 && within_box(p1, p2, q2)) return true;
  if (o3 == 0 && within_box(q1, q2, p1)) return true;
  if (o4 == 0 && within_box(q1, q2, p2)) return true;
  return false;
}

bool self_intersects(const Polygon& polygon) {
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a1 = polygon[i];
    const Vec2 a2 = polygon[(i + 1) % n];
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // closing edge is adjacent to edge 0
      if (segments_intersect(a1, a2, polygon[j], polygon[(j + 1) % n])) return true;
    }
  }
  return false;
}

double polygon_area(const Polygon& polygon) {
  const std::size_t n = polygon.size();
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

double polygon_perimeter(const Polygon& polygon) {
  const std::size_t n = polygon.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += distance(polygon[i], polygon[(i + 1) % n]);
  return total;
}

bool point_in_polygon(const Polygon& polygon, Vec2 p) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

Box2 bounding_box(const Polygon& polygon) {
  Box2 box{polygon.front(), polygon.front()};
  for (const Vec2& v : polygon) {
    box.lo.x = std::min(box.lo.x, v.x);
    box.lo.y = std::min(box.lo.y, v.y);
    box.hi.x = std::max(box.hi.x, v.x);
    box.hi.y = std::max(box.hi.y, v.y);
  }
  return box;
}

namespace {

// Shared proposal loop. Stops after `target_accepts` acceptances or
// `max_proposals` proposals, whichever comes first. With `stall_check`, a run
// whose acceptance rate is below 1e-4 after 1e7 proposals throws.
template <typename OnAccept>
std::size_t run_proposals(const CommandSequence& seq, const Polygon& poly, const Box2& box, std::uint64_t seed,
                          std::size_t target_accepts, std::size_t max_proposals, bool stall_check,
                          OnAccept&& on_accept) {
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(box.lo.x, box.hi.x);
  std::uniform_real_distribution<double> uy(box.lo.y, box.hi.y);
  std::uniform_real_distribution<double> uz(0.0, seq.depth);
  std::size_t accepted = 0;
  std::size_t proposals = 0;
  while (accepted < target_accepts && proposals < max_proposals) {
    const Vec2 p{ux(rng), uy(rng)};
    ++proposals;
    if (point_in_polygon(poly, p)) {
      on_accept(Vec3{p.x, p.y, uz(rng)});
      ++accepted;
    }
    if (stall_check && proposals == kMaxSamplingProposals &&
        static_cast<double>(accepted) < kMinAcceptance * static_cast<double>(proposals)) {
      throw Error(Errc::SamplingStall, "acceptance rate below 1e-4 after 1e7 proposals");
    }
  }
  return proposals;
}

void require_valid(const CommandSequence& seq) {
  const ValidityReport report = kernel_check(seq);
  if (!report.valid) throw Error(Errc::InfeasibleSolid, "cannot sample an invalid solid (" + report.reasons_string() + ")");
}

}  // namespace

PointCloud sample_point_cloud(const CommandSequence& seq, std::size_t n, std::uint64_t seed) {
  require_valid(seq);
  const Polygon poly = discretize_profile(seq, kArcSegments);
  const Box2 box = bounding_box(poly);
  PointCloud cloud;
  cloud.points.reserve(n);
  run_proposals(seq, poly, box, seed, n, std::numeric_limits<std::size_t>::max(), true,
                [&](const Vec3& p) { cloud.points.push_back(p); });
  return cloud;
}

VolumeEstimate estimate_volume(const CommandSequence& seq, std::size_t proposals, std::uint64_t seed) {
  require_valid(seq);
  const Polygon poly = discretize_profile(seq, kArcSegments);
  const Box2 box = bounding_box(poly);
  VolumeEstimate est;
  est.box_volume = (box.hi.x - box.lo.x) * (box.hi.y - box.lo.y) * seq.depth;
  est.proposals = run_proposals(seq, poly, box, seed, proposals, proposals, false, [&](const Vec3&) { ++est.accepted; });
  return est;
}

std::string point_cloud_csv(const PointCloud& cloud) {
  std::ostringstream os;
  os.precision(17);
  os << "x,y,z\n";
  for (const Vec3& p : cloud.points) os << p.x << ',' << p.y << ',' << p.z << '\n';
  return os.str();
}

}  // namespace cadrepair
