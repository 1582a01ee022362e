#include <doctest.h>

#include <cmath>

#include "covindex/cover.hpp"
#include "covindex/error.hpp"

using namespace covindex;

namespace {

std::shared_ptr<const BlockSpace> lp(std::size_t n, double p) {
  return std::make_shared<const BlockSpace>(BlockSpace::lp(n, p));
}

std::size_t count_misses(const Covering& cov, std::size_t samples, std::uint64_t seed) {
  std::size_t misses = 0;
  for (const Point& x : sample_ball(*cov.space, samples, seed))
    if (membership_count(cov, x) == 0) ++misses;
  return misses;
}

}  // namespace

TEST_SUITE("cover") {
  TEST_CASE("cylinder cover on l1^16 with n = 2") {
    Covering cov = cylinder_cover(lp(16, 1.0), 2);
    CHECK(cov.pieces.size() == 4);
    CHECK(cov.certificate.status == CoverStatus::Algebraic);
    CHECK(cylinder_sum_argument(cov).has_value());
    CoverCertificate cert = verify_cover(cov, 100000, 3);
    CHECK(cert.misses == 0);
    CHECK(cert.replay_points == 100);
    CHECK(cert.replay_failures == 0);
    CHECK(cert.status == CoverStatus::Algebraic);
  }

  TEST_CASE("cylinder cover on a block sum with a lower estimate") {
    auto s = std::make_shared<const BlockSpace>(BlockSpace::block_sum({2, 2, 2, 2}, 2.0, 3.0, 1.0, 1.0));
    Covering cov = cylinder_cover(s, 2);
    CHECK(cov.accepted());
    CHECK(count_misses(cov, 20000, 4) == 0);
  }

  TEST_CASE("cylinder cover needs enough blocks") {
    CHECK_THROWS_AS(cylinder_cover(lp(4, 2.0), 2), Error);
    CHECK_THROWS_AS(cylinder_cover(lp(8, kInf), 1), Error);
  }

  TEST_CASE("replay builds points outside the ball") {
    Covering cov = cylinder_cover(lp(12, 3.0), 3);
    ReplayReport r = replay_contradiction(cov, 100, 6);
    CHECK(r.points == 100);
    CHECK(r.failures == 0);
  }

  TEST_CASE("residue and slab covers cover the ball") {
    for (double p : {1.0, 2.0, 3.0}) {
      Covering r = residue_cover(lp(9, p), 3);
      CHECK(r.accepted());
      CHECK(count_misses(r, 20000, 1) == 0);
      Covering sl = slab_cover(lp(9, p), 3);
      CHECK(sl.accepted());
      CHECK(count_misses(sl, 20000, 2) == 0);
    }
  }

  TEST_CASE("two-piece family: exact cover iff beta <= 2 alpha") {
    auto s = lp(8, 2.0);
    Covering good = two_piece_family(s, 0.4, 0.8);
    CHECK(good.accepted());
    CHECK(count_misses(good, 20000, 5) == 0);
    Covering gap = two_piece_family(s, 0.3, 0.9);
    CHECK(gap.certificate.status == CoverStatus::Failed);
    REQUIRE_FALSE(gap.certificate.witness.empty());
    CHECK(norm(*s, gap.certificate.witness) <= 1.0 + 1e-9);
    CHECK(membership_count(gap, gap.certificate.witness) == 0);
    CHECK(count_misses(gap, 20000, 5) > 0);
  }

  TEST_CASE("two-piece family at alpha = 1/2, beta = 1 is the n = 1 cylinder cover") {
    auto s = lp(10, 2.0);
    Covering a = two_piece_family(s, 0.5, 1.0, Split::Alternating);
    Covering b = cylinder_cover(s, 1);
    for (const Point& x : sample_ball(*s, 5000, 7))
      for (std::size_t j = 0; j < 2; ++j) CHECK(contains(a.pieces[j], x) == contains(b.pieces[j], x));
  }

  TEST_CASE("random convex covers: total, convex and deterministic") {
    for (auto family : {NormalFamily::Coordinate, NormalFamily::Gaussian}) {
      auto s = lp(5, 2.0);
      Covering c = random_convex_cover(s, 6, 2, 42, family);
      CHECK(c.pieces.size() == 6);
      CHECK(c.accepted());
      CHECK(count_misses(c, 20000, 8) == 0);
      for (const ConvexBody& piece : c.pieces) CHECK(convexity_selftest(piece, 200, 1).violations == 0);
      Covering again = random_convex_cover(s, 6, 2, 42, family);
      CHECK(to_json(again) == to_json(c));
    }
    Covering two = random_convex_cover(lp(3, 2.0), 2, 1, 1);
    CHECK(two.pieces.size() == 2);
  }

  TEST_CASE("verification of a gapped custom cover fails with a witness") {
    auto s = lp(3, 2.0);
    std::vector<ConvexBody> pieces = {
        ConvexBody::intersect({ConvexBody::unit_ball(s), ConvexBody::halfspace(s, {1.0, 0, 0}, -0.1)}),
        ConvexBody::intersect({ConvexBody::unit_ball(s), ConvexBody::halfspace(s, {-1.0, 0, 0}, -0.1)})};
    Covering c = custom_cover(s, pieces, "gapped");
    CHECK(c.certificate.status == CoverStatus::None);
    CoverCertificate cert = verify_cover(c, 5000, 1);
    CHECK(cert.status == CoverStatus::Failed);
    CHECK(cert.misses > 0);
    CHECK(std::abs(cert.witness[0]) < 0.1 + 1e-12);
  }

  TEST_CASE("json round trip re-derives the certificate") {
    Covering cov = cylinder_cover(lp(9, 2.0), 2);
    Covering back = covering_from_json(to_json(cov));
    CHECK(back.pieces.size() == cov.pieces.size());
    CHECK(back.certificate.status == CoverStatus::Algebraic);
    for (const Point& x : sample_ball(*cov.space, 500, 3)) CHECK(membership_count(back, x) == membership_count(cov, x));
  }
}
