#include "covindex/inradius.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "covindex/error.hpp"
#include "covindex/parallel.hpp"

namespace covindex {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<std::size_t> residue_coordinates(const BlockSpace& space, const QCylinder& cyl) {
  std::vector<std::size_t> coords;
  for (std::size_t b : cyl.blocks) {
    const Block& blk = space.block(b);
    for (std::size_t i = blk.offset; i < blk.offset + blk.length; ++i) coords.push_back(i);
  }
  std::sort(coords.begin(), coords.end());
  return coords;
}

bool cylinder_supported(const BlockSpace& space, const QCylinder& cyl) {
  return std::isfinite(space.outer_q()) && std::abs(cyl.q - space.outer_q()) < 1e-12;
}

// Optimum of a QCylinder for a coordinate complement, which only depends on
// whether coordinate 0 is dropped and whether a residue coordinate is free.
// The optimal center lies on the x_0 axis at -sign * a * e_0.
DroppedOptimum cylinder_optimum(const BlockSpace& space, const QCylinder& cyl, bool lead_dropped,
                                bool residue_free) {
  const std::size_t n = space.dim();
  const double q = cyl.q;
  const double K = residue_free ? cyl.coef : 0.0;
  const double w0 = space.weight(0);

  if (cyl.sign == 0) {
    if (cyl.level < 0.0) return {0.0, {}};
    double r = K > 0.0 ? std::min(1.0, std::pow(cyl.level / K, 1.0 / q)) : 1.0;
    return {r, Point(n, 0.0)};
  }

  // Worst cylinder excess over a ball of radius r in Y when x_0 is free:
  // max over u in [0, r] of u / w0 + K (r^q - u^q).
  auto excess = [&](double r) {
    if (K == 0.0) return r / w0;
    if (q == 1.0) return std::max(r / w0, K * r);
    double u = std::min(r, std::pow(1.0 / (w0 * K * q), 1.0 / (q - 1.0)));
    return u / w0 + K * (std::pow(r, q) - std::pow(u, q));
  };
  // Largest radius the cylinder inequality allows for center offset a.
  auto r_cyl = [&](double a) -> double {
    double allowance = cyl.level + a;
    if (allowance < 0.0) return -1.0;
    if (lead_dropped) return K > 0.0 ? std::pow(allowance / K, 1.0 / q) : kInf;
    if (excess(1.0) <= allowance) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (excess(mid) <= allowance) lo = mid;
      else hi = mid;
    }
    return lo;
  };
  // Largest radius the unit ball allows for center offset a.
  auto r_norm = [&](double a) {
    double t = std::min(1.0, w0 * a);
    if (lead_dropped) return std::pow(std::max(0.0, 1.0 - std::pow(t, q)), 1.0 / q);
    return std::max(0.0, 1.0 - t);
  };
  auto value = [&](double a) { return std::min(r_cyl(a), r_norm(a)); };

  // r_cyl is nondecreasing and r_norm nonincreasing in a.
  double lo = 0.0, hi = 1.0 / w0, a = 0.0;
  if (r_cyl(lo) >= r_norm(lo)) {
    a = lo;
  } else if (r_cyl(hi) < r_norm(hi)) {
    a = hi;
  } else {
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (r_cyl(mid) < r_norm(mid)) lo = mid;
      else hi = mid;
    }
    a = value(lo) >= value(hi) ? lo : hi;
  }
  double r = value(a);
  if (r < 0.0) return {0.0, {}};
  Point center(n, 0.0);
  center[0] = -cyl.sign * a;
  return {r, std::move(center)};
}

DroppedOptimum cylinder_for_dropped(const BlockSpace& space, const QCylinder& cyl,
                                    const std::vector<std::size_t>& dropped) {
  std::vector<bool> is_dropped(space.dim(), false);
  for (std::size_t i : dropped) is_dropped[i] = true;
  bool residue_free = false;
  for (std::size_t i : residue_coordinates(space, cyl))
    if (!is_dropped[i]) residue_free = true;
  bool lead_dropped = cyl.sign != 0 && is_dropped[0];
  return cylinder_optimum(space, cyl, lead_dropped, residue_free);
}

// Ball-box optimum for a fixed dropped set: dropped coordinates sit at the
// point of their interval nearest the ball center, free ones leave room r/w_i
// on both sides, and the ball condition reads
//   sum_D (w|z|)^q + (||z_Y|| + r)^q <= R^q.
DroppedOptimum ball_box_for_dropped(const BlockSpace& space, const BallBox& box,
                                    const std::vector<std::size_t>& dropped) {
  const std::size_t n = space.dim();
  const double q = space.outer_q();
  std::vector<bool> is_dropped(n, false);
  for (std::size_t i : dropped) is_dropped[i] = true;
  Point z(n, 0.0);
  auto feasible = [&](double r) {
    double dropped_mass = 0.0, free_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = space.weight(i);
      double lo = box.lo[i], hi = box.hi[i];
      if (!is_dropped[i]) {
        lo += r / w;
        hi -= r / w;
      }
      if (lo > hi) return false;
      z[i] = std::clamp(0.0, lo, hi);
      double a = w * std::abs(z[i]);
      if (is_dropped[i]) {
        dropped_mass = std::isinf(q) ? std::max(dropped_mass, a) : dropped_mass + std::pow(a, q);
      } else {
        free_norm = std::isinf(q) ? std::max(free_norm, a) : free_norm + std::pow(a, q);
      }
    }
    if (std::isinf(q)) return std::max(dropped_mass, free_norm + r) <= box.radius;
    free_norm = std::pow(free_norm, 1.0 / q);
    return dropped_mass + std::pow(free_norm + r, q) <= std::pow(box.radius, q) * (1 + 1e-15);
  };
  if (!feasible(0.0)) return {0.0, {}};
  double lo = 0.0, hi = box.radius;
  if (feasible(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      double mid = 0.5 * (lo + hi);
      if (feasible(mid)) lo = mid;
      else hi = mid;
    }
  }
  feasible(lo);
  Point center(n);
  for (std::size_t i = 0; i < n; ++i) center[i] = box.center[i] + z[i];
  return {lo, std::move(center)};
}

void for_each_subset(const std::vector<std::size_t>& pool, std::size_t max_size,
                     const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> current;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    visit(current);
    if (current.size() == max_size) return;
    for (std::size_t i = start; i < pool.size(); ++i) {
      current.push_back(pool[i]);
      rec(i + 1);
      current.pop_back();
    }
  };
  rec(0);
}

Point random_direction(const BlockSpace& space, const Subspace& y, Rng& rng) {
  std::normal_distribution<double> gauss;
  for (int attempt = 0; attempt < 16; ++attempt) {
    Point g(space.dim());
    for (auto& v : g) v = gauss(rng);
    Point p = y.project(g);
    double nv = norm(space, p);
    if (nv > 1e-12) {
      for (auto& v : p) v /= nv;
      return p;
    }
  }
  return {};
}

// Ray walker from a center: the largest t <= cap with center + t v inside.
class RayProbe {
 public:
  RayProbe(const ConvexBody& body, std::span<const double> center)
      : body_(body), center_(center.begin(), center.end()), trial_(center.size()) {}

  bool inside(const Point& v, double t) {
    for (std::size_t i = 0; i < trial_.size(); ++i) trial_[i] = center_[i] + t * v[i];
    return contains(body_, trial_);
  }

  double exit(const Point& v, double cap) {
    if (inside(v, cap)) return cap;
    double lo = 0.0, hi = cap;
    for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
      double mid = 0.5 * (lo + hi);
      if (inside(v, mid)) lo = mid;
      else hi = mid;
    }
    return lo;
  }

 private:
  const ConvexBody& body_;
  Point center_;
  Point trial_;
};

struct NetResult {
  double radius;
  Point worst;  // direction realizing the radius (empty if none bounded it)
};

NetResult net_search(const ConvexBody& body, std::span<const double> center, const Subspace& y,
                     std::size_t random_directions, std::uint64_t seed, int refine_steps) {
  const BlockSpace& space = body.space();
  const std::size_t n = space.dim();
  if (!contains(body, center)) return {0.0, {}};
  double bound = body.bounding_ball().second;
  double r = std::isinf(bound) ? 4.0 : 2.0 * bound + 1e-12;
  RayProbe probe(body, center);
  NetResult result{r, {}};
  std::vector<std::pair<double, Point>> hits;

  auto consider = [&](Point v) {
    double nv = norm(space, v);
    if (nv <= 1e-12) return;
    for (auto& a : v) a /= nv;
    if (probe.inside(v, result.radius)) return;
    result.radius = probe.exit(v, result.radius);
    hits.emplace_back(result.radius, v);
    result.worst = std::move(v);
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (double s : {1.0, -1.0}) {
      Point e(n, 0.0);
      e[i] = s;
      consider(y.project(e));
    }
  }
  Rng rng = make_rng(seed, 0x6e6574);
  for (std::size_t j = 0; j < random_directions; ++j) consider(random_direction(space, y, rng));

  // Local ascent from the directions that lowered the radius most recently.
  std::normal_distribution<double> gauss;
  std::size_t starts = std::min<std::size_t>(4, hits.size());
  for (std::size_t h = hits.size() - starts; h < hits.size(); ++h) {
    Point v = hits[h].second;
    double sigma = 0.5;
    for (int step = 0; step < refine_steps && sigma > 1e-4; ++step) {
      Point g(n);
      for (auto& a : g) a = gauss(rng);
      g = y.project(g);
      Point cand(n);
      for (std::size_t i = 0; i < n; ++i) cand[i] = v[i] + sigma * g[i];
      double nc = norm(space, cand);
      if (nc <= 1e-12) continue;
      for (auto& a : cand) a /= nc;
      if (!probe.inside(cand, result.radius)) {
        result.radius = probe.exit(cand, result.radius);
        result.worst = cand;
        v = std::move(cand);
      } else {
        sigma *= 0.9;
      }
    }
  }
  return result;
}

std::optional<Point> deepest_member(const ConvexBody& body) {
  auto [center, radius] = body.bounding_ball();
  std::optional<Point> best;
  double best_v = kInf;
  auto offer = [&](const Point& p) {
    double v = body.violation(p);
    if (v <= kFeasTol && v < best_v) {
      best_v = v;
      best = p;
    }
  };
  offer(center);
  offer(Point(body.space().dim(), 0.0));
  double scale = std::isinf(radius) ? 1.0 : radius;
  for (auto s : sample_ball(body.space(), 256, 0xce47e5ULL)) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = center[i] + scale * s[i];
    offer(s);
  }
  return best;
}

}  // namespace

Subspace Subspace::coordinates(std::vector<std::size_t> dropped) {
  std::sort(dropped.begin(), dropped.end());
  require(std::adjacent_find(dropped.begin(), dropped.end()) == dropped.end(),
          "dropped coordinates must be distinct");
  Subspace y;
  y.kind = Kind::CoordinateComplement;
  y.dropped = std::move(dropped);
  return y;
}

Subspace Subspace::general(std::vector<Point> directions) {
  Subspace y;
  y.kind = Kind::GeneralBasis;
  for (Point v : directions) {
    for (const Point& u : y.normals) {
      double c = dot(v, u);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * u[i];
    }
    double nv = std::sqrt(dot(v, v));
    if (nv < 1e-10) fail(ErrorKind::InvalidArgument, "subspace directions are linearly dependent");
    for (auto& a : v) a /= nv;
    y.normals.push_back(std::move(v));
  }
  return y;
}

Point Subspace::project(std::span<const double> v) const {
  Point p(v.begin(), v.end());
  if (kind == Kind::CoordinateComplement) {
    for (std::size_t i : dropped) p[i] = 0.0;
    return p;
  }
  for (const Point& u : normals) {
    double c = dot(p, u);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= c * u[i];
  }
  return p;
}

const char* to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::Exact: return "Exact";
    case CertificateKind::LowerWitness: return "LowerWitness";
    case CertificateKind::UpperBound: return "UpperBound";
  }
  return "unknown";
}

nlohmann::json to_json(const Subspace& y) {
  if (y.kind == Subspace::Kind::CoordinateComplement)
    return {{"kind", "CoordinateComplement"}, {"dropped", y.dropped}, {"codim", y.codim()}};
  return {{"kind", "GeneralBasis"}, {"normals", y.normals}, {"codim", y.codim()}};
}

nlohmann::json to_json(const InradiusCertificate& cert) {
  return {{"value", cert.value},        {"center", cert.center},
          {"subspace", to_json(cert.subspace)}, {"kind", to_string(cert.kind)},
          {"notes", cert.notes}};
}

bool coordinate_supported(const ConvexBody& body) {
  if (std::holds_alternative<NormBall>(body.shape())) return true;
  if (const auto* cyl = std::get_if<QCylinder>(&body.shape()))
    return cylinder_supported(body.space(), *cyl);
  return ball_box_form(body).has_value();
}

DroppedOptimum ball_box_inradius(const BlockSpace& space, const BallBox& box,
                                 const std::vector<std::size_t>& dropped) {
  require(space.coordinate_blocks(), "ball-box solver needs a coordinate-block space");
  return ball_box_for_dropped(space, box, dropped);
}

DroppedOptimum inradius_for_dropped(const ConvexBody& body, const std::vector<std::size_t>& dropped) {
  const BlockSpace& space = body.space();
  require(dropped.size() < space.dim(), "the subspace must be nontrivial");
  for (std::size_t i : dropped) require(i < space.dim(), "dropped coordinate out of range");
  if (const auto* b = std::get_if<NormBall>(&body.shape())) return {b->radius, b->center};
  if (const auto* cyl = std::get_if<QCylinder>(&body.shape())) {
    if (!cylinder_supported(space, *cyl))
      fail(ErrorKind::Unsupported, "cylinder exponent differs from the space; use inradius_search");
    return cylinder_for_dropped(space, *cyl, dropped);
  }
  if (auto box = ball_box_form(body)) return ball_box_for_dropped(space, *box, dropped);
  fail(ErrorKind::Unsupported, "shape has no coordinate solver; use inradius_search");
}

InradiusCertificate inradius_coordinate(const ConvexBody& body, std::size_t k) {
  const BlockSpace& space = body.space();
  const std::size_t n = space.dim();
  require(k < n, "codimension budget must be below the dimension");

  InradiusCertificate best;
  best.kind = CertificateKind::Exact;
  best.value = -1.0;
  auto offer = [&](const std::vector<std::size_t>& dropped) {
    if (dropped.size() > k || dropped.size() >= n) return;
    DroppedOptimum opt = inradius_for_dropped(body, dropped);
    if (opt.value > best.value) {
      best.value = opt.value;
      best.center = std::move(opt.center);
      best.subspace = Subspace::coordinates(dropped);
    }
  };

  if (const auto* b = std::get_if<NormBall>(&body.shape())) {
    best.value = b->radius;
    best.center = b->center;
    best.notes = "ball";
    return best;
  }
  if (const auto* cyl = std::get_if<QCylinder>(&body.shape())) {
    if (!cylinder_supported(space, *cyl))
      fail(ErrorKind::Unsupported, "cylinder exponent differs from the space; use inradius_search");
    auto residue = residue_coordinates(space, *cyl);
    offer({});
    if (cyl->sign != 0) offer({0});
    offer(residue);
    if (cyl->sign != 0 && (residue.empty() || residue.front() != 0)) {
      std::vector<std::size_t> both{0};
      both.insert(both.end(), residue.begin(), residue.end());
      offer(both);
    }
    best.notes = "cylinder closed form";
  } else if (auto box = ball_box_form(body)) {
    std::vector<std::size_t> constrained;
    for (std::size_t i = 0; i < n; ++i)
      if (std::isfinite(box->lo[i]) || std::isfinite(box->hi[i])) constrained.push_back(i);
    for_each_subset(constrained, std::min(k, n - 1), offer);
    best.notes = "ball-box closed form";
  } else {
    fail(ErrorKind::Unsupported, "shape has no coordinate solver; use inradius_search");
  }
  if (best.center.empty()) best.value = 0.0;
  return best;
}

double net_radius(const ConvexBody& body, std::span<const double> center, const Subspace& y,
                  std::size_t random_directions, std::uint64_t seed) {
  check_point(body.space(), center);
  return net_search(body, center, y, random_directions, seed, 200).radius;
}

InradiusCertificate inradius_search(const ConvexBody& body, std::size_t k, std::size_t budget,
                                    std::uint64_t seed) {
  const BlockSpace& space = body.space();
  const std::size_t n = space.dim();
  require(k < n, "codimension budget must be below the dimension");
  InradiusCertificate out;
  out.kind = CertificateKind::LowerWitness;

  std::optional<InradiusCertificate> exact;
  Point x;
  Subspace y;
  if (coordinate_supported(body)) {
    exact = inradius_coordinate(body, k);
    if (exact->center.empty()) {
      out.notes = "empty body";
      return out;
    }
    x = exact->center;
    y = exact->subspace;
  } else {
    auto start = deepest_member(body);
    if (!start) {
      out.notes = "empty body";
      return out;
    }
    x = *start;
    y = Subspace::coordinates({});
  }

  const int refine = 60;
  auto evaluate = [&](const Point& c, const Subspace& s, std::uint64_t stream) {
    return net_search(body, c, s, budget, mix_seed(seed, stream), refine);
  };
  NetResult cur = evaluate(x, y, 0);
  Rng rng = make_rng(seed, 1);
  std::normal_distribution<double> gauss;

  for (int round = 0; round < 6; ++round) {
    // Center step: back away from the binding boundary point, then try a few
    // random moves; keep whatever enlarges the certified radius.
    if (!cur.worst.empty()) {
      for (double eta : {0.5, 0.25, 0.1, 0.03}) {
        Point c = x;
        for (std::size_t i = 0; i < n; ++i) c[i] -= eta * cur.radius * cur.worst[i];
        NetResult trial = evaluate(c, y, 0);
        if (trial.radius > cur.radius + 1e-9) {
          x = std::move(c);
          cur = std::move(trial);
          break;
        }
      }
    }
    for (int t = 0; t < 4; ++t) {
      Point c = x;
      double step = 0.1 * cur.radius + 1e-3;
      for (auto& a : c) a += step * gauss(rng) / std::sqrt(static_cast<double>(n));
      NetResult trial = evaluate(c, y, 0);
      if (trial.radius > cur.radius + 1e-9) {
        x = std::move(c);
        cur = std::move(trial);
      }
    }
    // Subspace step: drop the k most violated outward normals at a slightly
    // larger radius.
    if (k > 0) {
      double probe_r = cur.radius * 1.1 + 1e-3;
      std::vector<std::pair<double, Point>> normals;
      Rng drng = make_rng(seed, 100 + round);
      Point p(n);
      for (std::size_t j = 0; j < 2 * n + budget; ++j) {
        Point v;
        if (j < 2 * n) {
          Point e(n, 0.0);
          e[j / 2] = (j % 2 == 0) ? 1.0 : -1.0;
          double nv = norm(space, e);
          for (auto& a : e) a /= nv;
          v = std::move(e);
        } else {
          v = random_direction(space, Subspace::coordinates({}), drng);
        }
        if (v.empty()) continue;
        for (std::size_t i = 0; i < n; ++i) p[i] = x[i] + probe_r * v[i];
        Violation viol = body.violation_with_gradient(p);
        if (viol.value > kFeasTol && !viol.gradient.empty()) normals.emplace_back(viol.value, viol.gradient);
      }
      std::stable_sort(normals.begin(), normals.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::vector<Point> chosen;
      for (auto& [val, g] : normals) {
        if (chosen.size() == k) break;
        Point v = g;
        for (const Point& u : chosen) {
          double c = dot(v, u) / dot(u, u);
          for (std::size_t i = 0; i < n; ++i) v[i] -= c * u[i];
        }
        if (std::sqrt(dot(v, v)) > 1e-6 * std::sqrt(dot(g, g))) chosen.push_back(std::move(v));
      }
      if (chosen.size() == k) {
        Subspace cand = Subspace::general(chosen);
        NetResult trial = evaluate(x, cand, 0);
        if (trial.radius > cur.radius + 1e-9) {
          y = std::move(cand);
          cur = std::move(trial);
        }
      }
    }
  }

  // Final certification on a denser net with a fresh seed.
  NetResult final_net = net_search(body, x, y, 4 * budget + 64, mix_seed(seed, 0xf1a1), 300);
  out.value = final_net.radius;
  out.center = std::move(x);
  out.subspace = std::move(y);
  out.notes = "net-certified search";
  if (exact && exact->value >= out.value) {
    out.value = exact->value;
    out.center = exact->center;
    out.subspace = exact->subspace;
    out.notes = "coordinate witness (no improvement found)";
  }
  return out;
}

double inradius_upper_family(const ConvexBody& body, std::size_t k) {
  const auto* cyl = std::get_if<QCylinder>(&body.shape());
  if (!cyl) fail(ErrorKind::Unsupported, "family bound applies to cylinder pieces only");
  const BlockSpace& space = body.space();
  std::size_t residue = residue_coordinates(space, *cyl).size();
  if (k >= residue)
    fail(ErrorKind::BudgetTooLarge, "budget too large: bound void (the subspace can avoid every residue coordinate)");
  double m = cyl->level + (cyl->sign != 0 ? 1.0 / space.weight(0) : 0.0);
  if (cyl->coef <= 0.0) return 1.0;
  return std::min(1.0, std::pow(std::max(0.0, m) / cyl->coef, 1.0 / cyl->q));
}

}  // namespace covindex
