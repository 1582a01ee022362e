#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "covindex/derive.hpp"
#include "covindex/error.hpp"

using namespace covindex;

namespace {

std::shared_ptr<const BlockSpace> lp(std::size_t n, double p) {
  return std::make_shared<const BlockSpace>(BlockSpace::lp(n, p));
}

}  // namespace

TEST_SUITE("derive") {
  TEST_CASE("slab inradius at the origin of the l2 ball") {
    auto s = lp(8, 2.0);
    ConvexBody ball = ConvexBody::unit_ball(s);
    Point origin(8, 0.0);
    // Slab coordinates are dropped, so the full unit section remains.
    CHECK(slab_inradius(ball, origin, {0, 1}, 1, 0.05) == doctest::Approx(1.0));
  }

  TEST_CASE("slab inradius near the sphere is small") {
    auto s = lp(8, 2.0);
    ConvexBody ball = ConvexBody::unit_ball(s);
    Point x(8, 0.0);
    x[0] = 0.99;
    x[1] = 0.1;
    double r = slab_inradius(ball, x, {0, 1}, 1, 0.05);
    CHECK(r < 0.5);
    CHECK(r >= 0.0);
  }

  TEST_CASE("one step keeps the origin and removes sphere points") {
    auto s = lp(16, 2.0);
    ConvexBody ball = ConvexBody::unit_ball(s);
    Point origin(16, 0.0), far(16, 0.0);
    far[3] = 1.0;
    auto survivors = derivation_step({origin, far}, ball, 0.5, 1, 4, 0.05, 8, 1);
    CHECK(survivors == std::vector<std::size_t>{0});
    Point outside(16, 0.0);
    outside[0] = 2.0;
    CHECK_THROWS_AS(derivation_step({outside}, ball, 0.5, 1, 4, 0.05, 8, 1), Error);
  }

  TEST_CASE("gz on l2 grows with 1/eps") {
    auto s = lp(32, 2.0);
    DeriveParams p;
    p.cloud_samples = 300;
    p.epsilon = 0.5;
    auto a = gz_estimate(ConvexBody::unit_ball(s), p);
    p.epsilon = 0.25;
    auto b = gz_estimate(ConvexBody::unit_ball(s), p);
    REQUIRE(a.gz.has_value());
    REQUIRE(b.gz.has_value());
    CHECK(*b.gz > *a.gz);
    // eps above 1: nothing has a section that big, one stage empties the ball.
    p.epsilon = 1.01;
    CHECK(gz_estimate(ConvexBody::unit_ball(s), p).gz == std::optional<std::size_t>(1));
  }

  TEST_CASE("stage radii are nonincreasing and survivors nest") {
    auto s = lp(16, 3.0);
    DeriveParams p;
    p.cloud_samples = 200;
    p.epsilon = 0.4;
    auto t = gz_estimate(ConvexBody::unit_ball(s), p);
    for (std::size_t m = 1; m < t.records.size(); ++m) CHECK(t.records[m].radius <= t.records[m - 1].radius);
    for (std::size_t m = 1; m < t.stages.size(); ++m)
      for (std::size_t i : t.stages[m])
        CHECK(std::find(t.stages[m - 1].begin(), t.stages[m - 1].end(), i) != t.stages[m - 1].end());
    CHECK_FALSE(t.bias_note.empty());
  }

  TEST_CASE("c0 model overflows the stage cap") {
    auto s = lp(16, kInf);
    DeriveParams p;
    p.epsilon = 0.9;
    p.cloud_samples = 200;
    auto t = gz_estimate(ConvexBody::unit_ball(s), p);
    CHECK(t.overflow());
    CHECK(to_json(t)["gz"] == "Overflow(64)");
  }

  TEST_CASE("gz needs an origin-centred ball") {
    auto s = lp(8, 2.0);
    DeriveParams p;
    CHECK_THROWS_AS(gz_estimate(ConvexBody::ball(s, Point(8, 0.1), 0.5), p), Error);
  }

  TEST_CASE("stage survivors lie in more pieces than the stage index") {
    auto s = lp(16, 2.0);
    Covering cov = cylinder_cover(s, 2);
    DeriveParams p;
    p.epsilon = 0.77;
    p.cloud_samples = 400;
    auto r = covering_derivation_check(cov, p);
    CHECK(r.hypothesis_holds);
    CHECK(r.max_piece_inradius < 0.77);
    CHECK(r.violations.empty());
    for (std::size_t m = 0; m < r.min_count_per_stage.size(); ++m)
      if (r.survivors_per_stage[m] > 0) CHECK(r.min_count_per_stage[m] > m);
  }

  TEST_CASE("unaccepted covers are refused") {
    auto s = lp(8, 2.0);
    Covering gap = two_piece_family(s, 0.3, 0.9);
    DeriveParams p;
    CHECK_THROWS_AS(covering_derivation_check(gap, p), Error);
  }
}
