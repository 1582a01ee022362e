#include "covindex/derive.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "covindex/error.hpp"
#include "covindex/inradius.hpp"
#include "covindex/parallel.hpp"

namespace covindex {

namespace {

BallBox require_ball_box(const ConvexBody& body) {
  auto box = ball_box_form(body);
  if (!box)
    fail(ErrorKind::Unsupported, "derivation needs a ball or a ball cut by coordinate halfspaces");
  return *box;
}

double slab_inradius_on(const BlockSpace& space, BallBox box, std::span<const double> x,
                        const std::vector<std::size_t>& slab_coords, std::size_t k, double delta) {
  const std::size_t n = space.dim();
  std::vector<bool> in_slab(n, false);
  for (std::size_t i : slab_coords) {
    in_slab[i] = true;
    double rel = x[i] - box.center[i];
    double lo = rel >= 0.0 ? rel : rel - 2.0 * delta;
    double hi = rel >= 0.0 ? rel + 2.0 * delta : rel;
    box.lo[i] = std::max(box.lo[i], lo);
    box.hi[i] = std::min(box.hi[i], hi);
  }
  std::vector<std::size_t> extra;
  for (std::size_t i = 0; i < n; ++i)
    if (!in_slab[i] && (std::isfinite(box.lo[i]) || std::isfinite(box.hi[i]))) extra.push_back(i);
  double best = 0.0;
  std::vector<std::size_t> dropped(slab_coords);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t left) {
    if (dropped.size() < n) best = std::max(best, ball_box_inradius(space, box, dropped).value);
    if (left == 0) return;
    for (std::size_t i = start; i < extra.size(); ++i) {
      dropped.push_back(extra[i]);
      rec(i + 1, left - 1);
      dropped.pop_back();
    }
  };
  rec(0, k);
  return best;
}

// One adversary run at x: trial 0 slabs the w coordinates where x is largest,
// later trials use random sets or one-coordinate swaps of the greedy set.
bool adversary_kills(const BlockSpace& space, const BallBox& box, std::span<const double> x,
                     double epsilon, std::size_t k, std::size_t w, double delta,
                     std::size_t budget, std::uint64_t seed) {
  const std::size_t n = space.dim();
  const std::size_t width = std::min(w, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return space.weight(a) * std::abs(x[a] - box.center[a]) >
           space.weight(b) * std::abs(x[b] - box.center[b]);
  });
  std::vector<std::size_t> greedy(order.begin(), order.begin() + width);
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  for (std::size_t trial = 0; trial < std::max<std::size_t>(budget, 1); ++trial) {
    std::vector<std::size_t> slabs = greedy;
    if (trial > 0 && width > 0) {
      if (trial % 2 == 1) {
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        std::shuffle(pool.begin(), pool.end(), rng);
        slabs.assign(pool.begin(), pool.begin() + width);
      } else {
        std::size_t pos = any(rng) % width;
        std::size_t repl = any(rng);
        if (std::find(slabs.begin(), slabs.end(), repl) == slabs.end()) slabs[pos] = repl;
      }
    }
    std::sort(slabs.begin(), slabs.end());
    if (slab_inradius_on(space, box, x, slabs, k, delta) <= epsilon + kSurviveTol) return true;
  }
  return false;
}

}  // namespace

double slab_inradius(const ConvexBody& body, std::span<const double> x,
                     const std::vector<std::size_t>& slab_coords, std::size_t k, double delta) {
  check_point(body.space(), x);
  for (std::size_t i : slab_coords) require(i < body.space().dim(), "slab coordinate out of range");
  return slab_inradius_on(body.space(), require_ball_box(body), x, slab_coords, k, delta);
}

std::vector<std::size_t> derivation_step(const std::vector<Point>& cloud, const ConvexBody& body,
                                         double epsilon, std::size_t k, std::size_t w, double delta,
                                         std::size_t adversary_budget, std::uint64_t seed) {
  require(epsilon > 0.0, "epsilon must be positive");
  require(w >= 1, "slab budget w must be >= 1");
  require(delta > 0.0, "slab half-width must be positive");
  const BlockSpace& space = body.space();
  BallBox box = require_ball_box(body);
  for (const Point& x : cloud)
    if (!contains(body, x)) fail(ErrorKind::NotMember, "derivation cloud point is not in the body");
  std::vector<char> alive(cloud.size(), 0);
  const std::size_t chunk = 32;
  parallel_for((cloud.size() + chunk - 1) / chunk, [&](std::size_t c) {
    for (std::size_t i = c * chunk; i < std::min(cloud.size(), (c + 1) * chunk); ++i)
      alive[i] = !adversary_kills(space, box, cloud[i], epsilon, k, w, delta, adversary_budget,
                                  mix_seed(seed, i));
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (alive[i]) out.push_back(i);
  return out;
}

DerivationTrace gz_estimate(const ConvexBody& body, const DeriveParams& params) {
  require(params.stage_cap >= 1, "stage cap must be >= 1");
  const auto* ball = std::get_if<NormBall>(&body.shape());
  const BlockSpace& space = body.space();
  if (!ball || !space.coordinate_blocks() ||
      std::any_of(ball->center.begin(), ball->center.end(), [](double v) { return v != 0.0; }))
    fail(ErrorKind::Unsupported, "gz estimate needs an origin-centred ball of a coordinate-block space");
  const std::size_t n = space.dim();
  auto space_ptr = body.space_ptr();

  DerivationTrace trace;
  trace.params = params;
  trace.bias_note =
      "survivors over-approximate the slab-model derived set (finite adversary); the stage ball "
      "under-approximates it (largest origin-centred ball inside the survivors)";

  // Cloud: origin, radial probes along every axis, random ball points.
  const double r0 = ball->radius;
  trace.grid.push_back(Point(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (double s : {1.0, -1.0})
      for (int j = 1; j <= 8; ++j) {
        Point p(n, 0.0);
        p[i] = s * r0 * j / 8.0 / space.weight(i);
        trace.grid.push_back(std::move(p));
      }
  for (auto& p : sample_ball(space, params.cloud_samples, mix_seed(params.seed, 0xc10d))) {
    for (auto& v : p) v *= r0;
    trace.grid.push_back(std::move(p));
  }
  std::vector<double> norms(trace.grid.size());
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i] = norm(space, trace.grid[i]);

  std::vector<std::size_t> current(trace.grid.size());
  std::iota(current.begin(), current.end(), 0);
  trace.stages.push_back(current);
  double radius = r0;

  for (std::size_t stage = 1; stage <= params.stage_cap; ++stage) {
    ConvexBody stage_ball = ConvexBody::ball(space_ptr, Point(n, 0.0), radius);
    BallBox box = require_ball_box(stage_ball);
    std::uint64_t stage_seed = mix_seed(params.seed, stage);
    std::vector<Point> cloud;
    cloud.reserve(current.size());
    for (std::size_t idx : current) cloud.push_back(trace.grid[idx]);
    auto alive = derivation_step(cloud, stage_ball, params.epsilon, params.k, params.w, params.delta,
                                 params.adversary_budget, stage_seed);

    double next_radius = radius;
    std::vector<char> is_alive(cloud.size(), 0);
    for (std::size_t a : alive) is_alive[a] = 1;
    for (std::size_t j = 0; j < cloud.size(); ++j)
      if (!is_alive[j]) next_radius = std::min(next_radius, norms[current[j]]);

    // Exact kill thresholds along each axis ray, by bisection.
    std::vector<double> thresholds(2 * n, radius);
    parallel_for(2 * n, [&](std::size_t ray) {
      std::size_t i = ray / 2;
      double s = ray % 2 == 0 ? 1.0 : -1.0;
      Point p(n, 0.0);
      auto kills = [&](double t) {
        p[i] = s * t / space.weight(i);
        return adversary_kills(space, box, p, params.epsilon, params.k, params.w, params.delta,
                               params.adversary_budget, mix_seed(stage_seed, 0xa000 + ray));
      };
      if (!kills(radius)) return;
      if (kills(0.0)) {
        thresholds[ray] = 0.0;
        return;
      }
      double lo = 0.0, hi = radius;
      for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
        double mid = 0.5 * (lo + hi);
        if (kills(mid)) hi = mid;
        else lo = mid;
      }
      thresholds[ray] = hi;
    });
    for (double t : thresholds) next_radius = std::min(next_radius, t);

    std::vector<std::size_t> next;
    for (std::size_t a : alive)
      if (norms[current[a]] <= next_radius + 1e-12) next.push_back(current[a]);
    trace.records.push_back({stage, radius, next.size(), cloud.size() - alive.size()});
    trace.stages.push_back(next);
    current = std::move(next);
    radius = next_radius;
    if (current.empty()) {
      trace.gz = stage;
      break;
    }
  }
  return trace;
}

CoverDerivationReport covering_derivation_check(const Covering& cov, const DeriveParams& params) {
  if (!cov.accepted())
    fail(ErrorKind::Uncertified, "covering has no accepted certificate; run cover-verify first");
  CoverDerivationReport report;
  report.params = params;
  report.samples = params.cloud_samples;
  for (std::size_t j = 0; j < cov.pieces.size(); ++j) {
    const ConvexBody& piece = cov.pieces[j];
    double r = coordinate_supported(piece)
                   ? inradius_coordinate(piece, params.k).value
                   : inradius_search(piece, params.k, 32, mix_seed(params.seed, j)).value;
    report.max_piece_inradius = std::max(report.max_piece_inradius, r);
  }
  report.hypothesis_holds = params.epsilon > report.max_piece_inradius + kSurviveTol;

  DerivationTrace trace = gz_estimate(ConvexBody::unit_ball(cov.space), params);
  report.gz = trace.gz;
  for (std::size_t m = 1; m < trace.stages.size(); ++m) {
    std::size_t min_count = 0;
    bool first = true;
    for (std::size_t idx : trace.stages[m]) {
      std::size_t count = membership_count(cov, trace.grid[idx]);
      if (first || count < min_count) min_count = count;
      first = false;
      if (count <= m) report.violations.push_back({idx, m, count});
    }
    report.min_count_per_stage.push_back(min_count);
    report.survivors_per_stage.push_back(trace.stages[m].size());
  }
  return report;
}

nlohmann::json to_json(const DeriveParams& p) {
  return {{"epsilon", p.epsilon},         {"k", p.k},
          {"w", p.w},                     {"delta", p.delta},
          {"adversary_budget", p.adversary_budget}, {"stage_cap", p.stage_cap},
          {"cloud_samples", p.cloud_samples},       {"seed", p.seed}};
}

nlohmann::json to_json(const DerivationTrace& trace) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& r : trace.records)
    stages.push_back({{"stage", r.stage}, {"radius", r.radius}, {"survivors", r.survivors}, {"killed", r.killed}});
  nlohmann::json j = {{"params", to_json(trace.params)},
                      {"grid_size", trace.grid.size()},
                      {"stages", stages},
                      {"bias", trace.bias_note}};
  if (trace.gz) j["gz"] = *trace.gz;
  else j["gz"] = "Overflow(" + std::to_string(trace.params.stage_cap) + ")";
  return j;
}

nlohmann::json to_json(const CoverDerivationReport& report) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : report.violations)
    violations.push_back({{"point", v.point}, {"stage", v.stage}, {"count", v.count}});
  nlohmann::json j = {{"params", to_json(report.params)},
                      {"samples", report.samples},
                      {"max_piece_inradius", report.max_piece_inradius},
                      {"hypothesis_holds", report.hypothesis_holds},
                      {"min_count_per_stage", report.min_count_per_stage},
                      {"survivors_per_stage", report.survivors_per_stage},
                      {"violations", violations}};
  if (report.gz) j["gz"] = *report.gz;
  else j["gz"] = "Overflow(" + std::to_string(report.params.stage_cap) + ")";
  return j;
}

}  // namespace covindex
