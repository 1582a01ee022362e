#include <doctest.h>

#include <cmath>

#include "covindex/body.hpp"
#include "covindex/error.hpp"
#include "covindex/parallel.hpp"

using namespace covindex;

namespace {

std::shared_ptr<const BlockSpace> lp(std::size_t n, double p) {
  return std::make_shared<const BlockSpace>(BlockSpace::lp(n, p));
}

// Direct evaluation of the cylinder inequality for coordinate spaces.
bool cylinder_member(const QCylinder& c, const Point& x, double q) {
  double s = 0.0;
  for (std::size_t b : c.blocks) s += std::pow(std::abs(x[b]), q);
  double lhs = c.sign * x[0];
  return lhs <= c.level - c.coef * s + 1e-12 && lp_norm(x, q) <= 1.0 + 1e-12;
}

}  // namespace

TEST_SUITE("body") {
  TEST_CASE("ball membership and closed-form support") {
    auto s = lp(3, 2.0);
    ConvexBody b = ConvexBody::ball(s, {0.5, 0.0, 0.0}, 0.25);
    CHECK(contains(b, Point{0.7, 0.0, 0.0}));
    CHECK_FALSE(contains(b, Point{0.8, 0.0, 0.0}));
    Point d{0.0, 3.0, 4.0};
    CHECK(support(b, d).value == doctest::Approx(0.25 * 5.0));
    CHECK_FALSE(support(b, d).approximate);
    auto l1 = lp(3, 1.0);
    Point d2{1.0, -3.0, 2.0};
    CHECK(support(ConvexBody::unit_ball(l1), d2).value == doctest::Approx(3.0));
  }

  TEST_CASE("halfspace violation reads as a distance") {
    auto s = lp(2, 2.0);
    ConvexBody h = ConvexBody::halfspace(s, {2.0, 0.0}, 1.0);
    CHECK(h.violation(Point{1.0, 0.0}) == doctest::Approx(0.5));
    CHECK(h.violation(Point{0.0, 0.0}) == doctest::Approx(-0.5));
    CHECK_THROWS_AS(support(h, Point{1.0, 0.0}), Error);
  }

  TEST_CASE("support of a ball cut by a coordinate halfspace") {
    auto s = lp(2, 2.0);
    ConvexBody body = ConvexBody::intersect({ConvexBody::unit_ball(s), ConvexBody::halfspace(s, {1.0, 0.0}, 0.3)});
    CHECK(support(body, Point{1.0, 0.0}).value == doctest::Approx(0.3));
    CHECK(support(body, Point{0.0, 1.0}).value == doctest::Approx(1.0));
    // Maximizer sits on the corner x0 = 0.3, x1 = sqrt(1 - 0.09).
    SupportValue v = support(body, Point{1.0, 1.0});
    CHECK(v.value == doctest::Approx(0.3 + std::sqrt(0.91)).epsilon(1e-7));
    CHECK_FALSE(v.approximate);
  }

  TEST_CASE("cylinder membership matches the defining inequality") {
    auto s = lp(6, 2.0);
    QCylinder c = QCylinder::residue_class(*s, -1, 1, 4, 1.0, 2.0, 0.5);
    REQUIRE(c.blocks == std::vector<std::size_t>{1, 5});
    CHECK(c.coef == doctest::Approx(2.0));
    ConvexBody body = ConvexBody::cylinder(s, c);
    for (const Point& x : sample_ball(*s, 2000, 4)) CHECK(contains(body, x, 0.0) == cylinder_member(c, x, 2.0));
  }

  TEST_CASE("ascent support of a cylinder is a member value below the dual-norm bound") {
    auto s = lp(4, 2.0);
    ConvexBody body = ConvexBody::cylinder(s, QCylinder::residue_class(*s, -1, 0, 2, 1.0, 2.0, 0.5));
    // sign = -1 reads -x0 <= 1/2, so the piece reaches x0 = 1 but not below -1/2.
    SupportValue v = support(body, Point{1.0, 0.0, 0.0, 0.0});
    CHECK(v.approximate);
    CHECK(v.value == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(contains(body, v.argmax, 1e-9));
    SupportValue u = support(body, Point{-1.0, 0.0, 0.0, 0.0});
    CHECK(u.value <= 0.5 + 1e-9);
    CHECK(u.value == doctest::Approx(0.5).epsilon(1e-3));
  }

  TEST_CASE("separation gives a valid cut") {
    auto s = lp(3, 1.0);
    ConvexBody b = ConvexBody::unit_ball(s);
    Point x{0.8, 0.5, 0.0};
    auto n = separate(b, x);
    REQUIRE(n.has_value());
    double nx = (*n)[0] * x[0] + (*n)[1] * x[1] + (*n)[2] * x[2];
    CHECK(nx > support(b, *n).value);
    CHECK_FALSE(separate(b, Point{0.2, 0.2, 0.2}).has_value());
  }

  TEST_CASE("convexity self-test on pieces") {
    auto s = std::make_shared<const BlockSpace>(BlockSpace::block_sum({2, 2, 2}, 2.0, 3.0, 1.0, 1.0));
    ConvexBody body = ConvexBody::cylinder(s, QCylinder::residue_class(*s, 1, 0, 2, 1.0, 3.0, 0.5));
    ConvexityReport r = convexity_selftest(body, 500, 9);
    CHECK(r.member_pairs > 0);
    CHECK(r.violations == 0);
  }

  TEST_CASE("slab neighbourhoods are open slabs") {
    SlabNeighborhood u{{0.5, 0.0}, {{1.0, 0.0}}, 0.1};
    CHECK(u.contains(Point{0.55, 10.0}));
    CHECK_FALSE(u.contains(Point{0.65, 0.0}));
  }

  TEST_CASE("ball-box recognition") {
    auto s = lp(3, 2.0);
    ConvexBody body = ConvexBody::intersect({ConvexBody::ball(s, {0.1, 0.0, 0.0}, 0.5),
                                             ConvexBody::halfspace(s, {0.0, -2.0, 0.0}, 0.4)});
    auto box = ball_box_form(body);
    REQUIRE(box.has_value());
    CHECK(box->lo[1] == doctest::Approx(-0.2));
    CHECK(std::isinf(box->hi[1]));
    ConvexBody oblique = ConvexBody::intersect({ConvexBody::unit_ball(s), ConvexBody::halfspace(s, {1.0, 1.0, 0.0}, 0.2)});
    CHECK_FALSE(ball_box_form(oblique).has_value());
  }

  TEST_CASE("json round trip keeps membership") {
    auto s = lp(5, 3.0);
    ConvexBody body = ConvexBody::intersect({ConvexBody::cylinder(s, QCylinder::residue_class(*s, -1, 1, 2, 1.0, 3.0, 0.5)),
                                             ConvexBody::halfspace(s, {0.0, 1.0, 0.0, 0.0, 0.0}, 0.4)});
    ConvexBody back = body_from_json(s, to_json(body));
    for (const Point& x : sample_ball(*s, 500, 2)) CHECK(back.violation(x) == doctest::Approx(body.violation(x)));
    CHECK_THROWS(body_from_json(s, nlohmann::json{{"shape", "torus"}}));
  }
}
