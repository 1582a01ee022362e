#include "covindex/study.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "covindex/error.hpp"
#include "covindex/parallel.hpp"

namespace covindex {

namespace {

bool is_l2_model(const BlockSpace& space) {
  return space.coordinate_blocks() && space.outer_q() == 2.0 && space.dim() >= 3;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Cylinders: return "cylinders";
    case Strategy::Residue: return "residue";
    case Strategy::TwoPiece: return "two-piece";
    case Strategy::Slabs: return "slabs";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  for (Strategy s : {Strategy::Cylinders, Strategy::Residue, Strategy::TwoPiece, Strategy::Slabs})
    if (name == to_string(s)) return s;
  fail(ErrorKind::InvalidArgument, "unknown strategy: " + name);
}

std::vector<Strategy> default_strategies() {
  return {Strategy::Cylinders, Strategy::Residue, Strategy::TwoPiece, Strategy::Slabs};
}

PieceRadii piece_inradii(const Covering& cov, std::size_t k, std::uint64_t seed, std::size_t search_budget) {
  PieceRadii out;
  out.values.assign(cov.pieces.size(), 0.0);
  std::vector<char> exact(cov.pieces.size(), 1);
  parallel_for(cov.pieces.size(), [&](std::size_t j) {
    const ConvexBody& piece = cov.pieces[j];
    if (coordinate_supported(piece)) {
      out.values[j] = inradius_coordinate(piece, k).value;
    } else {
      out.values[j] = inradius_search(piece, k, search_budget, mix_seed(seed, j)).value;
      exact[j] = 0;
    }
  });
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    out.max_value = std::max(out.max_value, out.values[j]);
    if (!exact[j]) out.kind = CertificateKind::LowerWitness;
  }
  return out;
}

std::vector<Covering> strategy_covers(const std::shared_ptr<const BlockSpace>& space, std::size_t n,
                                      std::size_t k, const std::vector<Strategy>& strategies,
                                      std::uint64_t seed, std::vector<std::string>* skipped) {
  require(n >= 1, "n must be >= 1");
  std::vector<Covering> covers;
  auto skip = [&](const std::string& why) {
    if (skipped) skipped->push_back(why);
  };
  if (n == 1) covers.push_back(trivial_cover(space));
  const bool finite_q = std::isfinite(space->outer_q());
  for (Strategy s : strategies) {
    switch (s) {
      case Strategy::Cylinders: {
        std::size_t pairs = (n + 1) / 2;
        if (!finite_q) skip("cylinders: infinite outer exponent");
        else if (2 * pairs > space->block_count() - 1) skip("cylinders: too few blocks");
        else covers.push_back(cylinder_cover(space, pairs));
        break;
      }
      case Strategy::Residue:
        if (n < 2) break;
        if (!finite_q) skip("residue: infinite outer exponent");
        else if (n > space->block_count()) skip("residue: too few blocks");
        else covers.push_back(residue_cover(space, n));
        break;
      case Strategy::TwoPiece:
        if (n != 2) break;
        if (!is_l2_model(*space)) {
          skip("two-piece: needs an l2 model");
        } else {
          TwoPieceCandidate best = optimize_two_piece(space, k, 48, seed);
          covers.push_back(two_piece_family(space, best.alpha, best.beta, best.split));
        }
        break;
      case Strategy::Slabs:
        if (n >= 2) covers.push_back(slab_cover(space, n));
        break;
    }
  }
  std::vector<Covering> accepted;
  for (auto& c : covers) {
    if (c.accepted()) accepted.push_back(std::move(c));
    else skip(c.construction + ": certificate not accepted");
  }
  return accepted;
}

ThetaEstimate theta_upper(const std::shared_ptr<const BlockSpace>& space, std::size_t n, std::size_t k,
                          const std::vector<Strategy>& strategies, std::uint64_t seed) {
  std::vector<std::string> skipped;
  auto covers = strategy_covers(space, n, k, strategies, seed, &skipped);
  if (covers.empty()) fail(ErrorKind::Uncertified, "no accepted cover for the requested strategies");
  ThetaEstimate est;
  est.space = space->label();
  est.N = space->dim();
  est.n = n;
  est.k = k;
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < covers.size(); ++c) {
    PieceRadii radii = piece_inradii(covers[c], k, mix_seed(seed, c));
    per[covers[c].construction] = {{"pieces", covers[c].pieces.size()}, {"max_inradius", radii.max_value}};
    if (!est.upper || radii.max_value < *est.upper) {
      est.upper = radii.max_value;
      est.strategy = covers[c].construction;
      est.pieces = covers[c].pieces.size();
      est.kind = std::string("upper/") + to_string(radii.kind);
    }
  }
  est.details["strategies"] = per;
  est.details["skipped"] = skipped;
  std::ostringstream os;
  os << "strategy=" << est.strategy << " pieces=" << est.pieces;
  est.notes = os.str();
  return est;
}

ThetaEstimate theta_lower(const std::shared_ptr<const BlockSpace>& space, std::size_t n, std::size_t k,
                          std::size_t corpus_size, std::uint64_t seed, const ThetaLowerOptions& options) {
  require(n >= 1, "n must be >= 1");
  ThetaEstimate est;
  est.space = space->label();
  est.N = space->dim();
  est.n = n;
  est.k = k;
  est.pieces = n;
  est.kind = "lower/corpus";
  if (n == 1) {
    est.lower = 1.0;
    est.strategy = "trivial";
    est.notes = "a single piece is the ball";
    return est;
  }
  require(corpus_size >= 1, "corpus size must be >= 1");
  std::vector<double> worst(corpus_size, 0.0);
  std::vector<char> exact(corpus_size, 1);
  parallel_for(corpus_size, [&](std::size_t c) {
    Covering cov = random_convex_cover(space, n, options.complexity, mix_seed(seed, c), options.family);
    PieceRadii radii = piece_inradii(cov, k, mix_seed(seed, 0x10000 + c), options.search_budget);
    worst[c] = radii.max_value;
    exact[c] = radii.kind == CertificateKind::Exact;
  });
  auto it = std::min_element(worst.begin(), worst.end());
  est.lower = *it;
  est.strategy = "random";
  est.details["corpus_size"] = corpus_size;
  est.details["argmin_cover"] = static_cast<std::size_t>(it - worst.begin());
  est.details["all_exact"] = std::all_of(exact.begin(), exact.end(), [](char e) { return e != 0; });
  std::size_t below = 0;
  for (double v : worst)
    if (v < 0.95) ++below;
  est.details["covers_below_0.95"] = below;

  std::optional<double> certified;
  if (!options.eps_grid.empty() && space->coordinate_blocks()) {
    nlohmann::json gz = nlohmann::json::array();
    for (double eps : options.eps_grid) {
      DeriveParams p = options.derive;
      p.epsilon = eps;
      p.k = k;
      DerivationTrace trace = gz_estimate(ConvexBody::unit_ball(space), p);
      bool above = trace.overflow() || *trace.gz > n;
      gz.push_back({{"eps", eps}, {"gz", trace.gz ? nlohmann::json(*trace.gz) : nlohmann::json("overflow")}});
      if (above && (!certified || eps > *certified)) certified = eps;
    }
    est.details["gz"] = gz;
    est.details["gz_certified_eps"] = optional_json(certified);
  }
  std::ostringstream os;
  os << "corpus=" << corpus_size << " complexity=" << options.complexity;
  if (certified) os << " gz_certified_eps=" << *certified;
  est.notes = os.str();
  return est;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope fit needs at least two points");
  const std::size_t m = x.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "log-log fit needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  require(sxx > 0.0, "slope fit needs distinct x values");
  SlopeFit f;
  f.points = m;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (m > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double r = ly[i] - (f.intercept + f.slope * lx[i]);
      ssr += r * r;
    }
    f.std_error = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
  }
  return f;
}

ScalingReport scaling_study(const std::shared_ptr<const BlockSpace>& space,
                            const std::vector<std::size_t>& ns, std::size_t k,
                            const std::vector<Strategy>& strategies, std::uint64_t seed) {
  ScalingReport report;
  report.rows.resize(ns.size());
  parallel_for(ns.size(), [&](std::size_t i) {
    report.rows[i] = theta_upper(space, ns[i], k, strategies, mix_seed(seed, ns[i]));
  });
  std::vector<double> x, y;
  for (const auto& r : report.rows)
    if (r.n >= 2) {
      x.push_back(static_cast<double>(r.n));
      y.push_back(*r.upper);
    }
  if (x.size() >= 2) report.fit = fit_loglog(x, y);
  return report;
}

TwoPieceCandidate optimize_two_piece(const std::shared_ptr<const BlockSpace>& space, std::size_t k,
                                     std::size_t iterations, std::uint64_t seed) {
  require(is_l2_model(*space), "two-piece search needs an l2 model with N >= 3");
  auto evaluate = [&](TwoPieceCandidate c) {
    c.alpha = std::clamp(c.alpha, 1e-3, 0.999);
    c.beta = std::clamp(c.beta, 0.0, 2.0 * c.alpha);
    Covering cov = two_piece_family(space, c.alpha, c.beta, c.split);
    c.value = cov.accepted() ? piece_inradii(cov, k, seed).max_value : kInf;
    return c;
  };
  TwoPieceCandidate best = evaluate({0.5, 1.0, Split::Alternating, 1.0});
  Rng rng = make_rng(seed, 0x2b);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t explore = std::max<std::size_t>(1, iterations / 2);
  for (std::size_t it = 0; it < iterations; ++it) {
    TwoPieceCandidate c;
    if (it < explore) {
      c.alpha = 0.02 + 0.975 * unit(rng);
      c.beta = 2.0 * c.alpha * unit(rng);
      c.split = unit(rng) < 0.5 ? Split::Alternating : Split::Halves;
    } else {
      double scale = 0.2 * std::pow(0.02, static_cast<double>(it - explore) / (iterations - explore));
      c = best;
      c.alpha += scale * (2.0 * unit(rng) - 1.0);
      c.beta = 2.0 * c.alpha * std::min(1.0, best.beta / (2.0 * best.alpha) + scale * unit(rng));
    }
    TwoPieceCandidate e = evaluate(c);
    if (e.value < best.value) best = e;
  }
  return best;
}

TwoPieceReport two_piece_search(std::size_t N, std::size_t k, std::size_t iterations, std::uint64_t seed,
                                const std::vector<std::size_t>& sweep_ns, std::size_t disk_corpus) {
  require(N >= 3, "two-piece search needs N >= 3");
  TwoPieceReport r;
  r.N = N;
  r.k = k;
  r.iterations = iterations;
  auto space = std::make_shared<const BlockSpace>(BlockSpace::lp(N, 2.0));
  r.best = optimize_two_piece(space, k, iterations, seed);
  Covering cov = two_piece_family(space, r.best.alpha, r.best.beta, r.best.split);
  CoverCertificate cert = verify_cover(cov, 10000, mix_seed(seed, 0xfeed));
  r.verify_samples = cert.points;
  r.verify_misses = cert.misses;
  r.gap_to_reference = r.best.value - kTwoPieceReference;
  for (std::size_t n : sweep_ns) {
    auto sp = std::make_shared<const BlockSpace>(BlockSpace::lp(n, 2.0));
    r.sweep.emplace_back(n, optimize_two_piece(sp, k, iterations, seed).value);
  }
  for (std::size_t i = 1; i < r.sweep.size(); ++i)
    if (r.sweep[i].second > r.sweep[i - 1].second + 1e-9) r.sweep_nonincreasing = false;
  if (disk_corpus > 0 && k < 2) {
    auto disk = std::make_shared<const BlockSpace>(BlockSpace::lp(2, 2.0));
    r.disk_lower = *theta_lower(disk, 2, k, disk_corpus, seed).lower;
    r.disk_corpus = disk_corpus;
  }
  return r;
}

std::vector<double> alternating_weights(const BlockSpace& space, double lambda) {
  require(lambda >= 1.0, "lambda must be >= 1");
  std::vector<double> w(space.block_count());
  for (std::size_t b = 0; b < w.size(); ++b) w[b] = b % 2 == 0 ? lambda : 1.0 / lambda;
  return w;
}

RenormReport renorm_equivalence_check(const std::shared_ptr<const BlockSpace>& space,
                                      const std::vector<double>& weights, std::size_t n, std::size_t k,
                                      std::uint64_t seed, const std::vector<Strategy>& strategies) {
  Renorming rn = renorm(*space, weights);
  auto renormed = std::make_shared<const BlockSpace>(rn.space);
  RenormReport r;
  r.lambda = rn.lambda;
  r.base = theta_upper(space, n, k, strategies, seed);
  r.renormed = theta_upper(renormed, n, k, strategies, seed);
  double l2 = r.lambda * r.lambda;
  r.low = *r.base.upper / l2 - r.tol;
  r.high = *r.base.upper * l2 + r.tol;
  r.holds = *r.renormed.upper >= r.low && *r.renormed.upper <= r.high;
  return r;
}

ModulusEstimate moduli_estimate(const BlockSpace& space, const std::vector<double>& epsilon_grid,
                                std::size_t k, std::uint64_t seed, std::size_t samples) {
  require(space.coordinate_blocks(), "moduli need a coordinate-block space");
  require(k >= 1 && k < space.dim(), "moduli need 1 <= k < N");
  require(samples >= 1, "moduli need samples >= 1");
  for (double e : epsilon_grid) require(e > 0.0 && e <= 1.0, "epsilon grid must lie in (0, 1]");
  const std::size_t n = space.dim();
  const double q = space.outer_q();
  ModulusEstimate out;
  out.space = space.label();
  out.k = k;
  out.samples = samples;
  out.epsilon = epsilon_grid;

  // Unit vectors supported on at most k coordinates.
  Rng rng = make_rng(seed, 0x3d);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<std::size_t> support_size(1, k);
  std::vector<Point> xs;
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    Point x(n, 0.0);
    std::size_t m = support_size(rng);
    for (std::size_t j = 0; j < m; ++j) x[idx[j]] = gauss(rng);
    double nx = norm(space, x);
    if (nx == 0.0) continue;
    for (auto& v : x) v /= nx;
    xs.push_back(std::move(x));
  }

  auto combine = [&](double a, double b) {
    return std::isinf(q) ? std::max(a, b) : std::pow(std::pow(a, q) + std::pow(b, q), 1.0 / q);
  };
  for (double eps : epsilon_grid) {
    double delta_bar = kInf, rho_bar = -kInf;
    for (const Point& x : xs) {
      // Dropping the k largest weighted coordinates is optimal for both the
      // sup (convexity) and the inf (smoothness) over coordinate subspaces.
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return space.weight(a) * std::abs(x[a]) > space.weight(b) * std::abs(x[b]);
      });
      Point xd(n, 0.0), xy(x);
      for (std::size_t j = 0; j < k; ++j) {
        xd[order[j]] = x[order[j]];
        xy[order[j]] = 0.0;
      }
      double nd = norm(space, xd), ny = norm(space, xy);
      // inf over y in Y with ||y|| >= eps of ||x + y||, and sup over ||y|| <= eps.
      double auc = combine(nd, std::max(0.0, eps - ny)) - 1.0;
      double aus = combine(nd, ny + eps) - 1.0;
      delta_bar = std::min(delta_bar, auc);
      rho_bar = std::max(rho_bar, aus);
    }
    out.delta_bar.push_back(delta_bar);
    out.rho_bar.push_back(rho_bar);
  }
  return out;
}

std::vector<CoherenceRow> gz_cover_coherence(const std::shared_ptr<const BlockSpace>& space,
                                             const std::vector<std::size_t>& ns,
                                             const std::vector<double>& eps_grid, std::size_t k,
                                             const DeriveParams& params) {
  std::vector<std::optional<std::size_t>> gz(eps_grid.size());
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    DeriveParams p = params;
    p.epsilon = eps_grid[e];
    p.k = k;
    gz[e] = gz_estimate(ConvexBody::unit_ball(space), p).gz;
  }
  std::vector<CoherenceRow> rows;
  for (std::size_t n : ns) {
    double weakest_value = kInf;
    std::string weakest;
    for (const Covering& cov : strategy_covers(space, n, k, default_strategies(), params.seed)) {
      if (cov.pieces.size() > n) continue;
      double v = piece_inradii(cov, k, params.seed).max_value;
      if (v < weakest_value) {
        weakest_value = v;
        weakest = cov.construction;
      }
    }
    for (std::size_t e = 0; e < eps_grid.size(); ++e) {
      CoherenceRow row;
      row.n = n;
      row.epsilon = eps_grid[e];
      row.gz = gz[e];
      row.min_cover_inradius = weakest_value;
      row.weakest = weakest;
      row.applies = !gz[e] || *gz[e] > n;
      row.ok = !row.applies || weakest_value >= eps_grid[e] - 0.02;
      rows.push_back(row);
    }
  }
  return rows;
}

nlohmann::json to_json(const ThetaEstimate& e) {
  return {{"space", e.space},     {"N", e.N},           {"n", e.n},
          {"k", e.k},             {"upper", optional_json(e.upper)},
          {"lower", optional_json(e.lower)}, {"kind", e.kind},
          {"strategy", e.strategy}, {"pieces", e.pieces}, {"notes", e.notes},
          {"details", e.details}};
}

nlohmann::json to_json(const SlopeFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"std_error", f.std_error}, {"points", f.points}};
}

nlohmann::json to_json(const TwoPieceReport& r) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& [n, v] : r.sweep) sweep.push_back({{"N", n}, {"upper", v}});
  return {{"N", r.N},
          {"k", r.k},
          {"iterations", r.iterations},
          {"best", {{"alpha", r.best.alpha},
                    {"beta", r.best.beta},
                    {"split", r.best.split == Split::Alternating ? "alternating" : "halves"},
                    {"upper", r.best.value}}},
          {"verify_samples", r.verify_samples},
          {"verify_misses", r.verify_misses},
          {"reference_upper", kTwoPieceReference},
          {"gap_to_reference", r.gap_to_reference},
          {"sweep", sweep},
          {"sweep_nonincreasing", r.sweep_nonincreasing},
          {"disk_lower", optional_json(r.disk_lower)},
          {"disk_corpus", r.disk_corpus}};
}

nlohmann::json to_json(const RenormReport& r) {
  return {{"lambda", r.lambda}, {"base", to_json(r.base)}, {"renormed", to_json(r.renormed)},
          {"low", r.low},       {"high", r.high},          {"tol", r.tol},
          {"holds", r.holds}};
}

nlohmann::json to_json(const ModulusEstimate& m) {
  return {{"space", m.space},       {"k", m.k},
          {"samples", m.samples},   {"epsilon", m.epsilon},
          {"delta_bar", m.delta_bar}, {"rho_bar", m.rho_bar}};
}

}  // namespace covindex
