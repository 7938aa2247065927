#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cadrepair/cad_kernel.h"
#include "cadrepair/errors.h"
#include "oracles.h"

using namespace cadrepair;

namespace {

CommandSequence square(double lo, double hi, double depth) {
  return {{SketchEdge::line(lo, lo), SketchEdge::line(hi, lo), SketchEdge::line(hi, hi), SketchEdge::line(lo, hi)},
          depth};
}

CommandSequence random_sequence(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  CommandSequence s;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    if (rng() % 2) {
      s.edges.push_back(SketchEdge::line(u(rng), u(rng)));
    } else {
      s.edges.push_back(SketchEdge::arc(u(rng), u(rng), u(rng)));
    }
  }
  s.depth = u(rng);
  return s;
}

}  // namespace

TEST_CASE("parse maps fields directly") {
  const auto s = parse_sequence(
      R"({"edges":[{"kind":"line","x":0,"y":0,"bulge":0},{"kind":"line","x":1,"y":0,"bulge":0},)"
      R"({"kind":"line","x":1,"y":1,"bulge":0},{"kind":"line","x":0,"y":1,"bulge":0}],"depth":0.5})");
  CHECK(s.edges.size() == 4);
  CHECK(s.depth == 0.5);
  CHECK(s.edges[2].target == Vec2{1, 1});

  const auto empty = parse_sequence(R"({"edges":[],"depth":1.0})");
  CHECK(empty.edges.empty());
  CHECK(empty.depth == 1.0);
}

TEST_CASE("parse rejects bad records") {
  std::string six = R"({"edges":[)";
  for (int i = 0; i < 6; ++i) six += std::string(i ? "," : "") + R"({"kind":"line","x":0,"y":0,"bulge":0})";
  six += R"(],"depth":0.5})";
  try {
    parse_sequence(six);
    FAIL("expected ArityError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ArityError);
  }

  for (const char* bad : {R"({"edges":[{"kind":"spline","x":0,"y":0,"bulge":0}],"depth":1})",
                          R"({"edges":[{"kind":"line","x":"a","y":0,"bulge":0}],"depth":1})",
                          R"({"edges":[],"depth":1,"extra":2})", R"({"edges":[]})", "not json"}) {
    try {
      parse_sequence(bad, 7);
      FAIL("expected MalformedRecord for " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MalformedRecord);
    }
  }
}

TEST_CASE("serialize round-trips bit-exactly") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const CommandSequence s = random_sequence(rng);
    CHECK(parse_sequence(serialize_sequence(s)) == s);
  }
  const CommandSequence arc{{SketchEdge::arc(0.1, 0.2, 0.3)}, 0.4};
  CHECK(serialize_sequence(arc).find("\"bulge\":0.3") != std::string::npos);
}

TEST_CASE("discretize: lines keep their vertices, arcs add segments") {
  CHECK(discretize_profile(square(0, 1, 1), 16).size() == 4);

  CommandSequence tri{{SketchEdge::line(0, 0), SketchEdge::arc(1, 0, 0.5), SketchEdge::line(0, 1)}, 1};
  CHECK(discretize_profile(tri, 16).size() == 2 + 16);

  CommandSequence flat{{SketchEdge::line(0, 0), SketchEdge::arc(1, 0, 0.0), SketchEdge::line(0, 1)}, 1};
  CommandSequence lines{{SketchEdge::line(0, 0), SketchEdge::line(1, 0), SketchEdge::line(0, 1)}, 1};
  // a zero-bulge arc degenerates to its chord
  CHECK(discretize_profile(flat, 16) == discretize_profile(lines, 16));
  CHECK(discretize_profile(lines, 16).size() == 3);
}

TEST_CASE("semicircle midpoint sits at half the chord from the chord midpoint") {
  // Edge 1 runs from (0,0) to (2,0); bulge 1 is a half circle.
  CommandSequence s{{SketchEdge::line(0, 0), SketchEdge::arc(2, 0, 1.0), SketchEdge::line(1, 5)}, 1};
  const Polygon p = discretize_profile(s, 2);
  REQUIRE(p.size() == 4);
  const Vec2 mid = p[1];
  CHECK(std::hypot(mid.x - 1.0, mid.y - 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  // sagitta b*c/2 for a general bulge, checked at the arc midpoint
  for (double b : {0.2, 0.5, -0.7}) {
    CommandSequence g{{SketchEdge::line(0, 0), SketchEdge::arc(2, 0, b), SketchEdge::line(1, 5)}, 1};
    const Vec2 m = discretize_profile(g, 2)[1];
    CHECK(std::abs(m.y) == doctest::Approx(std::abs(b) * 2.0 / 2.0).epsilon(1e-12));
    CHECK(m.x == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("kernel_check examples") {
  const CommandSequence sq = square(-0.5, 0.5, 0.5);
  CHECK(kernel_check(sq).valid);
  CHECK(kernel_check(sq).reasons.empty());

  const auto neg = kernel_check(square(-0.5, 0.5, -0.1));
  CHECK_FALSE(neg.valid);
  CHECK(neg.reasons == std::vector<InvalidReason>{InvalidReason::DepthNonPositive});

  CommandSequence bowtie{{SketchEdge::line(0, 0), SketchEdge::line(1, 1), SketchEdge::line(1, 0), SketchEdge::line(0, 1)},
                         0.5};
  // the two lobes cancel, so the signed area is zero as well
  CHECK(kernel_check(bowtie).reasons ==
        std::vector<InvalidReason>{InvalidReason::SelfIntersection, InvalidReason::NearZeroArea});
  CHECK(oracle::brute_self_intersects(discretize_profile(bowtie)));
}

TEST_CASE("kernel_check reports every failing rule in enum order") {
  CommandSequence s{{SketchEdge::line(0, 0), SketchEdge::line(2, 0)}, 1.5};
  CHECK(kernel_check(s).reasons ==
        std::vector<InvalidReason>{InvalidReason::TooFewVertices, InvalidReason::OutOfBounds, InvalidReason::DepthTooLarge});

  CommandSequence many{{SketchEdge::line(0, 0), SketchEdge::line(0, 0), SketchEdge::arc(0.5, 0.5, 1.5),
                        SketchEdge::line(0.5, 0.5000001)},
                       0.0};
  const auto r = kernel_check(many);
  CHECK(r.has(InvalidReason::DegenerateAdjacentVertices));
  CHECK(r.has(InvalidReason::BulgeOutOfRange));
  CHECK(r.has(InvalidReason::DepthNonPositive));
  CHECK(std::is_sorted(r.reasons.begin(), r.reasons.end()));
  CHECK(r.reasons_string().find('|') != std::string::npos);

  CommandSequence thin{{SketchEdge::line(0, 0), SketchEdge::line(0.5, 0.0), SketchEdge::line(0.5, 0.002)}, 0.5};
  CHECK(kernel_check(thin).reasons == std::vector<InvalidReason>{InvalidReason::NearZeroArea});

  CommandSequence nan{{SketchEdge::line(0, 0), SketchEdge::line(NAN, 0), SketchEdge::line(0, 1)}, NAN};
  const auto rn = kernel_check(nan);
  CHECK_FALSE(rn.valid);
  CHECK(rn.has(InvalidReason::OutOfBounds));
}

TEST_CASE("kernel_check is deterministic and valid iff no reasons") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 3000; ++i) {
    const CommandSequence s = random_sequence(rng);
    const auto a = kernel_check(s);
    CHECK(a == kernel_check(s));
    CHECK(a.valid == a.reasons.empty());
  }
}

TEST_CASE("self_intersects agrees with the integer all-pairs oracle") {
  std::mt19937_64 rng(2024);
  int hits = 0;
  for (int f = 0; f < 10000; ++f) {
    const Polygon p = oracle::random_grid_polygon(rng, f % 2 == 0);
    const bool expected = oracle::brute_self_intersects(p);
    hits += expected ? 1 : 0;
    REQUIRE(self_intersects(p) == expected);
  }
  CHECK(hits > 1000);
  CHECK(hits < 9000);
}

TEST_CASE("orientation is exact near degeneracy") {
  const Vec2 a{0.5, 0.5};
  const Vec2 b{12.0, 12.0};
  const Vec2 c{24.0, 24.0};
  CHECK(orientation(a, b, c) == 0);
  // Nudge c by one ulp; naive evaluation often loses the sign here.
  const Vec2 up{24.0, std::nextafter(24.0, 25.0)};
  const Vec2 down{24.0, std::nextafter(24.0, 23.0)};
  CHECK(orientation(a, b, up) == 1);
  CHECK(orientation(a, b, down) == -1);
  CHECK(orientation(a, c, b) == 0);
}

TEST_CASE("polygon_area matches the trapezoid oracle and flips with winding") {
  const Polygon ccw{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(polygon_area(ccw) == 1.0);
  CHECK(polygon_area(Polygon{{0, 0}, {1, 0}, {0, 1}}) == 0.5);
  Polygon cw(ccw.rbegin(), ccw.rend());
  CHECK(polygon_area(cw) == -1.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Polygon p(3 + rng() % 30);
    for (Vec2& v : p) v = {u(rng), u(rng)};
    CHECK(std::abs(polygon_area(p) - oracle::trapezoid_area(p)) < 1e-12);
    Polygon r(p.rbegin(), p.rend());
    CHECK(std::abs(polygon_area(r) + polygon_area(p)) < 1e-12);
  }
}

TEST_CASE("perimeter and bounding box") {
  const Polygon tri{{0, 0}, {1, 0}, {0, 1}};
  CHECK(polygon_perimeter(tri) == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-14));
  const Box2 b = bounding_box(tri);
  CHECK(b.lo == Vec2{0, 0});
  CHECK(b.hi == Vec2{1, 1});
}

TEST_CASE("point_in_polygon uses even-odd") {
  const Polygon sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(point_in_polygon(sq, {0.5, 0.5}));
  CHECK_FALSE(point_in_polygon(sq, {1.5, 0.5}));
  // Pentagram: the central pentagon has winding number 2, so even-odd
  // calls it outside while the tips are inside.
  Polygon star;
  for (int k : {0, 2, 4, 1, 3}) {
    const double a = M_PI / 2 + 2 * M_PI * k / 5;
    star.push_back({std::cos(a), std::sin(a)});
  }
  CHECK_FALSE(point_in_polygon(star, {0.0, 0.0}));
  CHECK(point_in_polygon(star, {0.0, 0.8}));
}

TEST_CASE("point cloud: bounds, exact count, determinism") {
  const CommandSequence sq = square(0, 1, 1);
  const PointCloud a = sample_point_cloud(sq, 1000, 42);
  CHECK(a.count() == 1000);
  for (const Vec3& p : a.points) {
    CHECK(p.x >= 0.0);
    CHECK(p.x <= 1.0);
    CHECK(p.y >= 0.0);
    CHECK(p.y <= 1.0);
    CHECK(p.z >= 0.0);
    CHECK(p.z <= 1.0);
  }
  CHECK(sample_point_cloud(sq, 1000, 42).points == a.points);
  CHECK(sample_point_cloud(sq, 1000, 43).points != a.points);
  CHECK(point_cloud_csv(a).rfind("x,y,z\n", 0) == 0);
}

TEST_CASE("point cloud of a triangle follows uniform-volume statistics") {
  const double depth = 0.8;
  CommandSequence tri{{SketchEdge::line(0, 0), SketchEdge::line(1, 0), SketchEdge::line(0, 1)}, depth};
  const std::size_t n = 100000;
  const PointCloud c = sample_point_cloud(tri, n, 7);
  std::size_t inside = 0;
  double zsum = 0.0;
  for (const Vec3& p : c.points) {
    if (p.x + p.y < 1.0) ++inside;
    zsum += p.z;
  }
  CHECK(inside == n);
  const double se = depth / std::sqrt(12.0 * static_cast<double>(n));
  CHECK(std::abs(zsum / static_cast<double>(n) - depth / 2.0) < 3.0 * se);
}

TEST_CASE("Monte-Carlo volume is within 2% of area times depth") {
  CommandSequence tri{{SketchEdge::line(-0.5, -0.5), SketchEdge::line(0.7, -0.2), SketchEdge::line(0.1, 0.6)}, 0.6};
  CommandSequence arcs{{SketchEdge::line(-0.6, -0.6), SketchEdge::arc(0.6, -0.6, 0.4), SketchEdge::line(0.6, 0.6),
                        SketchEdge::arc(-0.6, 0.6, -0.3)},
                       0.9};
  for (const CommandSequence& s : {tri, arcs}) {
    REQUIRE(kernel_check(s).valid);
    const double exact = std::abs(oracle::trapezoid_area(discretize_profile(s))) * s.depth;
    const VolumeEstimate v = estimate_volume(s, 1000000, 99);
    CHECK(v.proposals == 1000000);
    CHECK(std::abs(v.volume() - exact) / exact < 0.02);
  }
}

TEST_CASE("sampling an invalid solid is an error") {
  try {
    sample_point_cloud(square(0, 1, -1), 10, 1);
    FAIL("expected InfeasibleSolid");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InfeasibleSolid);
  }
}
