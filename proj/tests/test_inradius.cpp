#include <doctest.h>

#include <cmath>
#include <functional>

#include "covindex/cover.hpp"
#include "covindex/error.hpp"
#include "covindex/inradius.hpp"
#include "covindex/parallel.hpp"

using namespace covindex;

namespace {

std::shared_ptr<const BlockSpace> lp(std::size_t n, double p) {
  return std::make_shared<const BlockSpace>(BlockSpace::lp(n, p));
}

// Radius for the cylinder piece of a 2n-piece cover with x_0 dropped:
// solve n r^q = 1/2 + a and a^q + r^q = 1 for a >= 0.
double dropped_lead_radius(double n, double q) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    double r = 0.5 * (lo + hi);
    double a = std::max(0.0, n * std::pow(r, q) - 0.5);
    if (std::pow(a, q) + std::pow(r, q) <= 1.0) lo = r;
    else hi = r;
  }
  return lo;
}

double exhaustive(const ConvexBody& body, std::size_t n, std::size_t k) {
  double best = inradius_for_dropped(body, {}).value;
  for (std::size_t i = 0; i < n; ++i) {
    if (k >= 1) best = std::max(best, inradius_for_dropped(body, {i}).value);
    for (std::size_t j = i + 1; j < n && k >= 2; ++j) best = std::max(best, inradius_for_dropped(body, {i, j}).value);
  }
  return best;
}

// Sampled check that center + r (B cap Y) lies in the body.
std::size_t escapes(const ConvexBody& body, const InradiusCertificate& cert, std::size_t samples) {
  const BlockSpace& s = body.space();
  std::size_t bad = 0;
  for (const Point& u : sample_ball(s, samples, 17)) {
    Point y = cert.subspace.project(u);
    double ny = norm(s, y);
    if (ny == 0.0) continue;
    Point x = cert.center;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += cert.value * y[i] / ny * (1.0 - 1e-9);
    if (!contains(body, x, 1e-9)) ++bad;
  }
  return bad;
}

}  // namespace

TEST_SUITE("inradius") {
  TEST_CASE("unit ball has inradius one") {
    for (double p : {1.0, 2.0, kInf}) {
      auto s = lp(5, p);
      auto c = inradius_coordinate(ConvexBody::unit_ball(s), 1);
      CHECK(c.value == doctest::Approx(1.0));
      CHECK(c.kind == CertificateKind::Exact);
    }
  }

  TEST_CASE("ball cut by x0 <= -0.6: hand-derived radii") {
    for (double p : {1.0, 2.0}) {
      auto s = lp(4, p);
      ConvexBody body = ConvexBody::intersect({ConvexBody::unit_ball(s), ConvexBody::halfspace(s, {1.0, 0, 0, 0}, -0.6)});
      // k = 0: the ball [-1, -0.6] along x0 forces r = 0.2 in any lp.
      CHECK(inradius_coordinate(body, 0).value == doctest::Approx(0.2));
      // k = 1: drop x0, center at -0.6 e0; l2 gives sqrt(1 - 0.36), l1 gives 1 - 0.6.
      double expect = p == 2.0 ? 0.8 : 0.4;
      CHECK(inradius_coordinate(body, 1).value == doctest::Approx(expect));
    }
  }

  TEST_CASE("cylinder cover pieces: closed forms for q = 1 and the dropped-lead system") {
    for (std::size_t n = 1; n <= 8; ++n) {
      auto s1 = lp(64, 1.0);
      Covering c1 = cylinder_cover(s1, n);
      // q = 1: -a + n r <= 1/2 and a + r <= 1 give r = 1.5 / (n + 1).
      CHECK(inradius_coordinate(c1.pieces[0], 1).value == doctest::Approx(1.5 / (n + 1.0)));
      for (double q : {2.0, 3.0}) {
        auto s = lp(64, q);
        Covering c = cylinder_cover(s, n);
        for (std::size_t j : {std::size_t{0}, std::size_t{1}})
          CHECK(inradius_coordinate(c.pieces[j], 1).value == doctest::Approx(dropped_lead_radius(n, q)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("coordinate solver equals exhaustive enumeration at N = 10, k <= 2") {
    std::vector<ConvexBody> bodies;
    for (double q : {1.0, 2.0, 3.0}) {
      auto s = lp(10, q);
      for (std::size_t n : {1, 2}) {
        Covering c = cylinder_cover(s, n);
        bodies.insert(bodies.end(), c.pieces.begin(), c.pieces.end());
      }
      Covering r = residue_cover(s, 3);
      bodies.insert(bodies.end(), r.pieces.begin(), r.pieces.end());
      Covering rc = random_convex_cover(s, 5, 2, 3);
      bodies.insert(bodies.end(), rc.pieces.begin(), rc.pieces.end());
    }
    for (const ConvexBody& b : bodies)
      for (std::size_t k = 0; k <= 2; ++k)
        CHECK(inradius_coordinate(b, k).value == exhaustive(b, 10, k));
  }

  TEST_CASE("exact certificates hold on sampled directions") {
    auto s = lp(8, 3.0);
    Covering c = cylinder_cover(s, 2);
    for (const ConvexBody& piece : c.pieces) {
      auto cert = inradius_coordinate(piece, 1);
      CHECK(escapes(piece, cert, 3000) == 0);
    }
    auto s2 = lp(6, 2.0);
    Covering rc = random_convex_cover(s2, 4, 2, 8);
    for (const ConvexBody& piece : rc.pieces) {
      auto cert = inradius_coordinate(piece, 2);
      if (cert.center.empty()) continue;
      CHECK(escapes(piece, cert, 3000) == 0);
    }
  }

  TEST_CASE("search witness respects the family upper bound") {
    auto s = lp(16, 2.0);
    Covering c = cylinder_cover(s, 2);
    for (const ConvexBody& piece : c.pieces) {
      double upper = inradius_upper_family(piece, 1);
      CHECK(upper == doctest::Approx(std::sqrt(1.5 / 2.0)));
      auto w = inradius_search(piece, 1, 24, 5);
      CHECK(w.kind == CertificateKind::LowerWitness);
      CHECK(w.value <= upper + 1e-6);
      CHECK(w.value >= inradius_coordinate(piece, 1).value - 1e-9);
      CHECK(net_radius(piece, w.center, w.subspace, 64, 3) >= w.value - 1e-9);
    }
  }

  TEST_CASE("family bound is void when the budget removes every residue coordinate") {
    auto s = lp(5, 2.0);
    Covering c = cylinder_cover(s, 2);  // one residue coordinate per piece
    CHECK_THROWS_AS(inradius_upper_family(c.pieces[0], 1), Error);
    try {
      inradius_upper_family(c.pieces[0], 1);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BudgetTooLarge);
    }
  }

  TEST_CASE("general subspaces") {
    Subspace y = Subspace::general({{1.0, 1.0, 0.0}});
    Point p = y.project(Point{1.0, 1.0, 1.0});
    CHECK(p[0] == doctest::Approx(0.0));
    CHECK(p[2] == doctest::Approx(1.0));
    CHECK(y.codim() == 1);
    CHECK_THROWS_AS(Subspace::general({{1.0, 0.0}, {2.0, 0.0}}), Error);
    Subspace yc = Subspace::coordinates({1});
    CHECK(yc.project(Point{1.0, 2.0, 3.0}) == Point{1.0, 0.0, 3.0});
  }

  TEST_CASE("empty body") {
    auto s = lp(3, 2.0);
    ConvexBody empty = ConvexBody::intersect({ConvexBody::unit_ball(s), ConvexBody::halfspace(s, {1.0, 0, 0}, -2.0)});
    auto c = inradius_coordinate(empty, 1);
    CHECK(c.value == 0.0);
    CHECK(c.center.empty());
  }
}
