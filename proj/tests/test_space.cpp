#include <doctest.h>

#include <cmath>

#include "covindex/error.hpp"
#include "covindex/parallel.hpp"
#include "covindex/space.hpp"

using namespace covindex;

TEST_SUITE("space") {
  TEST_CASE("lp norms of a fixed vector") {
    Point v{3.0, -4.0, 0.0};
    CHECK(lp_norm(v, 1.0) == doctest::Approx(7.0));
    CHECK(lp_norm(v, 2.0) == doctest::Approx(5.0));
    CHECK(lp_norm(v, kInf) == doctest::Approx(4.0));
    CHECK(lp_norm(v, 3.0) == doctest::Approx(std::cbrt(27.0 + 64.0)));
    CHECK(conjugate(2.0) == doctest::Approx(2.0));
    CHECK(conjugate(1.0) == kInf);
    CHECK(conjugate(kInf) == doctest::Approx(1.0));
    CHECK(conjugate(3.0) == doctest::Approx(1.5));
  }

  TEST_CASE("block-sum norm combines weighted inner norms") {
    // blocks: {0}, {1,2}, {3,4}; inner l2, outer l1.
    BlockSpace s = BlockSpace::block_sum({2, 2}, 2.0, 1.0, 1.0, 1.0);
    REQUIRE(s.dim() == 5);
    REQUIRE(s.block_count() == 3);
    Point x{1.0, 3.0, 4.0, 0.0, -2.0};
    CHECK(block_norm(s, x, 1) == doctest::Approx(5.0));
    CHECK(norm(s, x) == doctest::Approx(1.0 + 5.0 + 2.0));
    CHECK_FALSE(s.coordinate_blocks());
  }

  TEST_CASE("dual norm satisfies the Hoelder pairing") {
    for (double p : {1.0, 1.5, 2.0, 4.0, kInf}) {
      BlockSpace s = BlockSpace::lp(6, p);
      Point d{1.0, -2.0, 0.5, 0.0, 3.0, -1.0};
      double dn = dual_norm(s, d);
      CHECK(dn == doctest::Approx(lp_norm(d, conjugate(p))));
      Rng rng = make_rng(3, 0);
      std::normal_distribution<double> g;
      for (int t = 0; t < 200; ++t) {
        Point x(6);
        for (auto& v : x) v = g(rng);
        double pair = 0.0;
        for (int i = 0; i < 6; ++i) pair += d[i] * x[i];
        CHECK(pair <= dn * norm(s, x) + 1e-9);
      }
    }
  }

  TEST_CASE("masked dual norm ignores masked-out coordinates") {
    BlockSpace s = BlockSpace::lp(3, 2.0);
    Point d{3.0, 4.0, 12.0};
    CHECK(dual_norm(s, d, {true, true, false}) == doctest::Approx(5.0));
  }

  TEST_CASE("norm subgradient has unit dual norm and attains the norm") {
    BlockSpace s = BlockSpace::block_sum({2, 3}, 3.0, 2.0, 1.0, 1.0);
    Point x{0.3, -0.2, 0.5, 0.1, 0.0, -0.7};
    Point g = norm_subgradient(s, x);
    double pair = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) pair += g[i] * x[i];
    CHECK(pair == doctest::Approx(norm(s, x)));
    CHECK(dual_norm(s, g) == doctest::Approx(1.0));
  }

  TEST_CASE("uniform ball sampler: radial law P(||x|| <= r) = r^N") {
    for (double p : {1.0, 2.0, kInf}) {
      BlockSpace s = BlockSpace::lp(3, p);
      auto pts = sample_ball(s, 20000, 11);
      std::size_t inside = 0;
      for (const auto& x : pts) {
        CHECK(norm(s, x) <= 1.0 + 1e-12);
        if (norm(s, x) <= 0.8) ++inside;
      }
      double frac = static_cast<double>(inside) / pts.size();
      CHECK(frac == doctest::Approx(0.512).epsilon(0.05));
    }
  }

  TEST_CASE("sampler is deterministic in the seed") {
    BlockSpace s = BlockSpace::block_sum({2, 2}, 2.0, 3.0, 1.0, 1.0);
    CHECK(sample_ball(s, 50, 5) == sample_ball(s, 50, 5));
    CHECK(sample_ball(s, 50, 5) != sample_ball(s, 50, 6));
  }

  TEST_CASE("renorming constant") {
    BlockSpace s = BlockSpace::lp(4, 2.0);
    Renorming r = renorm(s, {2.0, 0.5, 2.0, 0.5});
    CHECK(r.lambda == doctest::Approx(2.0));
    Point e1{0.0, 1.0, 0.0, 0.0};
    CHECK(norm(r.space, e1) == doctest::Approx(0.5));
    CHECK(renorm(s, {1.0, 1.0, 1.0, 1.0}).lambda == doctest::Approx(1.0));
    CHECK_THROWS_AS(renorm(s, {1.0, 0.0, 1.0, 1.0}), Error);
  }

  TEST_CASE("json round trip and presets") {
    BlockSpace s = BlockSpace::block_sum({2, 3}, 1.5, kInf, 1.0, 1.0);
    CHECK(space_from_json(to_json(s)) == s);
    CHECK(space_from_preset("lq:3", 5) == BlockSpace::lp(5, 3.0));
    CHECK(space_from_preset("linf", 4).outer_q() == kInf);
    CHECK_THROWS_AS(space_from_preset("l7", 4), Error);
    CHECK_THROWS_AS(space_from_preset("lq:0.5", 4), Error);
  }

  TEST_CASE("invalid layouts are rejected") {
    CHECK_THROWS_AS(BlockSpace(3, {{0, 2}, {2, 1}}, 2.0, 2.0), Error);  // block 0 too long
    CHECK_THROWS_AS(BlockSpace(3, {{0, 1}, {2, 1}}, 2.0, 2.0), Error);  // gap
    CHECK_THROWS_AS(BlockSpace::lp(4, 0.5), Error);
  }

  TEST_CASE("a declared lower estimate that fails is rejected") {
    // l1 sum of l2 blocks does not satisfy a lower 1-estimate with c = 2.
    CHECK_THROWS_AS(BlockSpace::block_sum({2, 2}, 2.0, 1.0, 2.0, 2.0), Error);
  }

  TEST_CASE("check_point flags bad input") {
    BlockSpace s = BlockSpace::lp(3, 2.0);
    Point bad{0.0, NAN, 0.0};
    CHECK_THROWS_AS(check_point(s, bad), Error);
    Point shortp{0.0, 1.0};
    CHECK_THROWS_AS(check_point(s, shortp), Error);
  }
}
