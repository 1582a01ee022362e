#include <doctest.h>

#include <cmath>

#include "covindex/error.hpp"
#include "covindex/study.hpp"

using namespace covindex;

namespace {

std::shared_ptr<const BlockSpace> lp(std::size_t n, double p) {
  return std::make_shared<const BlockSpace>(BlockSpace::lp(n, p));
}

}  // namespace

TEST_SUITE("study") {
  TEST_CASE("log-log fit recovers an exact power law") {
    std::vector<double> x{2, 4, 8, 16}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
    SlopeFit f = fit_loglog(x, y);
    CHECK(f.slope == doctest::Approx(-0.5));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)));
    CHECK(f.std_error == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(fit_loglog({1.0}, {1.0}), Error);
    CHECK_THROWS_AS(fit_loglog({1.0, 2.0}, {1.0, -1.0}), Error);
  }

  TEST_CASE("least-squares slope and standard error on noisy data") {
    // Hand computation: lx = {0, 1, 2}, ly = {0, 1, 1} gives slope 1/2,
    // residuals {-1/6, 1/3, -1/6}, SSR = 1/6, Sxx = 2, se = sqrt(1/12).
    std::vector<double> x{1.0, std::exp(1.0), std::exp(2.0)};
    std::vector<double> y{1.0, std::exp(1.0), std::exp(1.0)};
    SlopeFit f = fit_loglog(x, y);
    CHECK(f.slope == doctest::Approx(0.5));
    CHECK(f.std_error == doctest::Approx(std::sqrt(1.0 / 12.0)));
  }

  TEST_CASE("upper estimate slopes for l1 and l2") {
    auto r1 = scaling_study(lp(64, 1.0), {2, 4, 8, 16}, 1, default_strategies(), 1);
    CHECK(r1.fit.slope >= -1.15);
    CHECK(r1.fit.slope <= -0.85);
    auto r2 = scaling_study(lp(64, 2.0), {2, 4, 8, 16}, 1, default_strategies(), 1);
    CHECK(r2.fit.slope >= -0.65);
    CHECK(r2.fit.slope <= -0.35);
    for (const auto& row : r2.rows) {
      CHECK(*row.upper <= 1.0);
      CHECK(*row.upper >= 0.5 / row.n);
    }
  }

  TEST_CASE("c0 model: constructed covers never shrink pieces") {
    auto s = lp(32, kInf);
    for (std::size_t n : {1, 2, 4, 8}) {
      ThetaEstimate e = theta_upper(s, n, 1, default_strategies(), 1);
      CHECK(*e.upper == doctest::Approx(1.0));
    }
  }

  TEST_CASE("single piece lower estimate is one") {
    ThetaEstimate e = theta_lower(lp(6, 2.0), 1, 1, 10, 1);
    CHECK(*e.lower == 1.0);
  }

  TEST_CASE("corpus lower estimate and gz flags") {
    ThetaLowerOptions opt;
    opt.eps_grid = {0.5, 1.01};
    opt.derive.cloud_samples = 200;
    ThetaEstimate e = theta_lower(lp(16, 2.0), 2, 1, 20, 3, opt);
    REQUIRE(e.lower.has_value());
    CHECK(*e.lower > 0.0);
    CHECK(*e.lower <= 1.0);
    CHECK(e.details["gz"].size() == 2);
    CHECK(e.details["gz_certified_eps"] == 0.5);
  }

  TEST_CASE("two-piece optimization beats the trivial cover") {
    auto s = lp(8, 2.0);
    TwoPieceCandidate c = optimize_two_piece(s, 1, 24, 2);
    CHECK(c.value < 1.0);
    CHECK(c.beta <= 2.0 * c.alpha + 1e-12);
    CHECK(two_piece_family(s, c.alpha, c.beta, c.split).accepted());
    CHECK_THROWS_AS(optimize_two_piece(lp(8, 3.0), 1, 4, 1), Error);
  }

  TEST_CASE("beta = 0 leaves a full hyperplane section") {
    auto s = lp(8, 2.0);
    Covering c = two_piece_family(s, 0.5, 0.0);
    CHECK(piece_inradii(c, 1, 1).max_value == doctest::Approx(1.0));
  }

  TEST_CASE("renorming with lambda = 1 changes nothing") {
    auto s = lp(16, 2.0);
    RenormReport r = renorm_equivalence_check(s, alternating_weights(*s, 1.0), 4, 1, 1);
    CHECK(r.lambda == doctest::Approx(1.0));
    CHECK(*r.renormed.upper == doctest::Approx(*r.base.upper));
    CHECK(r.holds);
  }

  TEST_CASE("moduli match the lp closed form") {
    std::vector<double> eps{0.25, 0.5, 1.0};
    for (double p : {1.0, 2.0, 3.0}) {
      ModulusEstimate m = moduli_estimate(BlockSpace::lp(64, p), eps, 1, 1);
      for (std::size_t i = 0; i < eps.size(); ++i) {
        double oracle = std::pow(1.0 + std::pow(eps[i], p), 1.0 / p) - 1.0;
        CHECK(m.delta_bar[i] == doctest::Approx(oracle).epsilon(0.02));
        CHECK(m.rho_bar[i] == doctest::Approx(oracle).epsilon(0.02));
        CHECK(m.delta_bar[i] <= m.rho_bar[i] + 1e-12);
        if (i > 0) CHECK(m.delta_bar[i] >= m.delta_bar[i - 1]);
      }
    }
    ModulusEstimate c0 = moduli_estimate(BlockSpace::lp(64, kInf), {0.9}, 1, 1);
    CHECK(c0.delta_bar[0] == doctest::Approx(0.0));
    CHECK_THROWS_AS(moduli_estimate(BlockSpace::lp(8, 2.0), {1.5}, 1, 1), Error);
  }

  TEST_CASE("strategy names") {
    for (Strategy s : default_strategies()) CHECK(strategy_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(strategy_from_string("spirals"), Error);
  }

  TEST_CASE("gz and cover coherence on a small model") {
    DeriveParams p;
    p.cloud_samples = 200;
    auto rows = gz_cover_coherence(lp(16, 2.0), {2, 4}, {0.5, 0.77}, 1, p);
    CHECK(rows.size() == 4);
    for (const auto& r : rows) CHECK(r.ok);
  }
}
