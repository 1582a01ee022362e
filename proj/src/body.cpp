#include "covindex/body.hpp"

#include <algorithm>
#include <cmath>

#include "covindex/error.hpp"
#include "covindex/parallel.hpp"

namespace covindex {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Weighted block norm w_b * ||x_b||_p and its gradient added into g.
double weighted_block_norm(const BlockSpace& space, std::span<const double> x, std::size_t b) {
  return space.weight(b) * block_norm(space, x, b);
}

void add_block_norm_gradient(const BlockSpace& space, std::span<const double> x, std::size_t b,
                             double factor, Point& g) {
  const Block& blk = space.block(b);
  double nb = block_norm(space, x, b);
  if (nb == 0.0) return;
  double p = space.inner_p();
  factor *= space.weight(b);
  if (std::isinf(p)) {
    std::size_t arg = blk.offset;
    for (std::size_t i = blk.offset; i < blk.offset + blk.length; ++i)
      if (std::abs(x[i]) > std::abs(x[arg])) arg = i;
    g[arg] += factor * (x[arg] > 0 ? 1.0 : -1.0);
    return;
  }
  for (std::size_t i = blk.offset; i < blk.offset + blk.length; ++i) {
    if (x[i] == 0.0) continue;
    double s = x[i] > 0 ? 1.0 : -1.0;
    g[i] += factor * (p == 1.0 ? s : s * std::pow(std::abs(x[i]) / nb, p - 1.0));
  }
}

double cylinder_sum(const BlockSpace& space, const QCylinder& cyl, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t b : cyl.blocks) s += std::pow(weighted_block_norm(space, x, b), cyl.q);
  return s;
}

Violation evaluate(const BlockSpace& space, const Shape& shape, std::span<const double> x,
                   bool want_gradient);

Violation evaluate_ball(const BlockSpace& space, const NormBall& ball, std::span<const double> x,
                        bool want_gradient) {
  Point diff(x.begin(), x.end());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= ball.center[i];
  Violation v{norm(space, diff) - ball.radius, {}};
  if (want_gradient) v.gradient = norm_subgradient(space, diff);
  return v;
}

Violation evaluate_halfspace(const BlockSpace& space, const Halfspace& h,
                             std::span<const double> x, bool want_gradient) {
  double scale = dual_norm(space, h.normal);
  Violation v{(dot(h.normal, x) - h.offset) / scale, {}};
  if (want_gradient) {
    v.gradient = h.normal;
    for (auto& a : v.gradient) a /= scale;
  }
  return v;
}

Violation evaluate_cylinder(const BlockSpace& space, const QCylinder& cyl,
                            std::span<const double> x, bool want_gradient) {
  double ball = norm(space, x) - 1.0;
  double cyl_value = cyl.sign * x[0] + cyl.coef * cylinder_sum(space, cyl, x) - cyl.level;
  if (ball >= cyl_value) {
    Violation v{ball, {}};
    if (want_gradient) v.gradient = norm_subgradient(space, x);
    return v;
  }
  Violation v{cyl_value, {}};
  if (want_gradient) {
    v.gradient.assign(space.dim(), 0.0);
    v.gradient[0] += cyl.sign;
    for (std::size_t b : cyl.blocks) {
      double nb = weighted_block_norm(space, x, b);
      if (nb == 0.0) continue;
      double outer = cyl.q == 1.0 ? 1.0 : cyl.q * std::pow(nb, cyl.q - 1.0);
      add_block_norm_gradient(space, x, b, cyl.coef * outer, v.gradient);
    }
  }
  return v;
}

Violation evaluate(const BlockSpace& space, const Shape& shape, std::span<const double> x,
                   bool want_gradient) {
  return std::visit(
      overloaded{
          [&](const NormBall& b) { return evaluate_ball(space, b, x, want_gradient); },
          [&](const Halfspace& h) { return evaluate_halfspace(space, h, x, want_gradient); },
          [&](const QCylinder& c) { return evaluate_cylinder(space, c, x, want_gradient); },
          [&](const Intersection& in) {
            Violation worst{-kInf, {}};
            for (const ConvexBody& part : in.parts) {
              Violation v = evaluate(space, part.shape(), x, want_gradient);
              if (v.value > worst.value) worst = std::move(v);
            }
            return worst;
          }},
      shape);
}

// sup <d, z> over { sum (w_i |z_i|)^q <= R^q, lo <= z <= hi } for q in (1, inf].
std::optional<double> ball_box_support(const BlockSpace& space, const BallBox& box,
                                       std::span<const double> d, Point& argmax) {
  const double q = space.outer_q();
  const std::size_t n = space.dim();
  argmax.assign(n, 0.0);
  auto clip = [&](std::size_t i, double v) { return std::clamp(v, box.lo[i], box.hi[i]); };
  for (std::size_t i = 0; i < n; ++i)
    if (box.lo[i] > box.hi[i]) return std::nullopt;
  if (std::isinf(q)) {
    for (std::size_t i = 0; i < n; ++i) {
      double cap = box.radius / space.weight(i);
      double lo = std::max(box.lo[i], -cap), hi = std::min(box.hi[i], cap);
      if (lo > hi) return std::nullopt;
      argmax[i] = d[i] > 0 ? hi : (d[i] < 0 ? lo : clip(i, 0.0));
      if (d[i] == 0.0) argmax[i] = std::clamp(0.0, lo, hi);
    }
  } else {
    auto point_at = [&](double lambda, Point& z) {
      for (std::size_t i = 0; i < n; ++i) {
        double w = space.weight(i);
        double free = 0.0;
        if (d[i] != 0.0) {
          double m = std::pow(std::abs(d[i]) / (lambda * q * std::pow(w, q)), 1.0 / (q - 1.0));
          free = d[i] > 0 ? m : -m;
        }
        z[i] = clip(i, free);
      }
    };
    auto mass = [&](const Point& z) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::pow(space.weight(i) * std::abs(z[i]), q);
      return s;
    };
    const double target = std::pow(box.radius, q);
    Point z(n);
    point_at(1e300, z);
    if (mass(z) > target * (1 + 1e-12)) return std::nullopt;
    double lo = 1e-300, hi = 1.0;
    point_at(hi, z);
    while (mass(z) > target && hi < 1e300) {
      hi *= 4.0;
      point_at(hi, z);
    }
    point_at(lo, z);
    if (mass(z) <= target) {
      argmax = z;
    } else {
      // Geometric bisection on the multiplier; mass is decreasing in lambda.
      for (int it = 0; it < 200; ++it) {
        double mid = std::sqrt(lo * hi);
        point_at(mid, z);
        if (mass(z) > target) lo = mid;
        else hi = mid;
      }
      point_at(hi, argmax);
    }
  }
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    value += d[i] * (argmax[i] + box.center[i]);
    argmax[i] += box.center[i];
  }
  return value;
}

std::optional<Point> find_member(const ConvexBody& body) {
  auto [center, radius] = body.bounding_ball();
  if (contains(body, center)) return center;
  Point origin(body.space().dim(), 0.0);
  if (contains(body, origin)) return origin;
  auto samples = sample_ball(body.space(), 512, 0xb0d7ULL);
  double scale = std::isinf(radius) ? 1.0 : radius;
  for (auto& s : samples) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = center[i] + scale * s[i];
    if (contains(body, s)) return s;
  }
  return std::nullopt;
}

}  // namespace

QCylinder QCylinder::residue_class(const BlockSpace& space, int sign, std::size_t residue,
                                   std::size_t modulus, double c, double q, double level,
                                   std::size_t first_block) {
  require(modulus >= 1, "cylinder modulus must be positive");
  require(sign >= -1 && sign <= 1, "cylinder sign must be -1, 0 or +1");
  QCylinder cyl;
  cyl.sign = sign;
  cyl.q = q;
  cyl.c = c;
  cyl.level = level;
  cyl.residue = residue % modulus;
  cyl.modulus = modulus;
  cyl.coef = std::pow(c, q) * static_cast<double>(modulus) / 2.0;
  for (std::size_t b = first_block; b < space.block_count(); ++b)
    if (b % modulus == cyl.residue) cyl.blocks.push_back(b);
  return cyl;
}

ConvexBody::ConvexBody(std::shared_ptr<const BlockSpace> space, Shape shape)
    : space_(std::move(space)), shape_(std::move(shape)) {
  require(space_ != nullptr, "body needs a space");
  const std::size_t n = space_->dim();
  std::visit(overloaded{
                 [&](const NormBall& b) {
                   check_point(*space_, b.center);
                   require(std::isfinite(b.radius) && b.radius >= 0.0, "ball radius must be >= 0");
                 },
                 [&](const Halfspace& h) {
                   check_point(*space_, h.normal);
                   require(dual_norm(*space_, h.normal) > 0.0, "halfspace normal must be nonzero");
                   require(std::isfinite(h.offset), "halfspace offset must be finite");
                 },
                 [&](const QCylinder& c) {
                   require(n >= 1 && space_->block(0).length == 1, "cylinder needs a 1-dim block 0");
                   require(std::isfinite(c.q) && c.q >= 1.0, "cylinder exponent must be finite and >= 1");
                   require(c.coef >= 0.0 && std::isfinite(c.coef), "cylinder coefficient must be >= 0");
                   require(std::isfinite(c.level), "cylinder level must be finite");
                   for (std::size_t b : c.blocks)
                     require(b < space_->block_count() && (b > 0 || c.sign == 0),
                             "cylinder block index out of range");
                 },
                 [&](const Intersection& in) {
                   require(!in.parts.empty(), "intersection needs parts");
                   for (const auto& p : in.parts)
                     require(*p.space_ptr() == *space_, "intersection parts must share a space");
                 }},
             shape_);
}

ConvexBody ConvexBody::ball(std::shared_ptr<const BlockSpace> space, Point center, double radius) {
  return ConvexBody(std::move(space), NormBall{std::move(center), radius});
}

ConvexBody ConvexBody::unit_ball(std::shared_ptr<const BlockSpace> space) {
  Point origin(space->dim(), 0.0);
  return ball(std::move(space), std::move(origin), 1.0);
}

ConvexBody ConvexBody::halfspace(std::shared_ptr<const BlockSpace> space, Point normal,
                                 double offset) {
  return ConvexBody(std::move(space), Halfspace{std::move(normal), offset});
}

ConvexBody ConvexBody::cylinder(std::shared_ptr<const BlockSpace> space, QCylinder cyl) {
  return ConvexBody(std::move(space), std::move(cyl));
}

ConvexBody ConvexBody::intersect(std::vector<ConvexBody> parts) {
  require(!parts.empty(), "intersection needs parts");
  auto space = parts.front().space_ptr();
  return ConvexBody(std::move(space), Intersection{std::move(parts)});
}

double ConvexBody::violation(std::span<const double> x) const {
  check_point(*space_, x);
  return evaluate(*space_, shape_, x, false).value;
}

Violation ConvexBody::violation_with_gradient(std::span<const double> x) const {
  check_point(*space_, x);
  return evaluate(*space_, shape_, x, true);
}

std::pair<Point, double> ConvexBody::bounding_ball() const {
  const std::size_t n = space_->dim();
  return std::visit(overloaded{
                        [&](const NormBall& b) { return std::pair{b.center, b.radius}; },
                        [&](const Halfspace&) { return std::pair{Point(n, 0.0), kInf}; },
                        [&](const QCylinder&) { return std::pair{Point(n, 0.0), 1.0}; },
                        [&](const Intersection& in) {
                          std::pair<Point, double> best{Point(n, 0.0), kInf};
                          for (const auto& p : in.parts) {
                            auto bb = p.bounding_ball();
                            if (bb.second < best.second) best = std::move(bb);
                          }
                          return best;
                        }},
                    shape_);
}

std::optional<BallBox> ball_box_form(const ConvexBody& body) {
  const BlockSpace& space = body.space();
  if (!space.coordinate_blocks()) return std::nullopt;
  std::vector<const ConvexBody*> parts;
  if (const auto* in = std::get_if<Intersection>(&body.shape())) {
    for (const auto& p : in->parts) parts.push_back(&p);
  } else {
    parts.push_back(&body);
  }
  std::optional<NormBall> ball;
  BallBox box{0.0, {}, std::vector<double>(space.dim(), -kInf), std::vector<double>(space.dim(), kInf)};
  std::vector<const Halfspace*> halfspaces;
  for (const ConvexBody* p : parts) {
    if (const auto* b = std::get_if<NormBall>(&p->shape())) {
      if (ball) return std::nullopt;
      ball = *b;
    } else if (const auto* h = std::get_if<Halfspace>(&p->shape())) {
      halfspaces.push_back(h);
    } else {
      return std::nullopt;
    }
  }
  if (!ball) return std::nullopt;
  box.radius = ball->radius;
  box.center = ball->center;
  for (const Halfspace* h : halfspaces) {
    std::size_t nz = 0, idx = 0;
    for (std::size_t i = 0; i < h->normal.size(); ++i)
      if (h->normal[i] != 0.0) {
        ++nz;
        idx = i;
      }
    if (nz != 1) return std::nullopt;
    // a x_i <= b, expressed relative to the ball center.
    double a = h->normal[idx];
    double bound = h->offset / a - ball->center[idx];
    if (a > 0) box.hi[idx] = std::min(box.hi[idx], bound);
    else box.lo[idx] = std::max(box.lo[idx], bound);
  }
  return box;
}

bool contains(const ConvexBody& body, std::span<const double> x, double tol) {
  return body.violation(x) <= tol;
}

SupportValue support(const ConvexBody& body, std::span<const double> direction) {
  const BlockSpace& space = body.space();
  check_point(space, direction);
  if (dual_norm(space, direction) == 0.0)
    fail(ErrorKind::InvalidArgument, "support direction must be nonzero");
  if (const auto* b = std::get_if<NormBall>(&body.shape()))
    return {dot(direction, b->center) + b->radius * dual_norm(space, direction), false, {}};
  if (std::isinf(body.bounding_ball().second))
    fail(ErrorKind::Unbounded, "body is unbounded in the support direction");
  if (auto box = ball_box_form(body); box && space.outer_q() > 1.0) {
    Point argmax;
    auto v = ball_box_support(space, *box, direction, argmax);
    if (!v) fail(ErrorKind::InvalidArgument, "support of an empty body");
    return {*v, false, std::move(argmax)};
  }

  // Feasible ascent: move along the direction, sliding along the active
  // constraint when blocked; bisection keeps every iterate a member.
  auto start = find_member(body);
  if (!start) fail(ErrorKind::InvalidArgument, "support of an empty body");
  Point x = *start;
  const std::size_t n = space.dim();
  double dn = lp_norm(direction, 2.0);
  Point d(direction.begin(), direction.end());
  for (auto& v : d) v /= dn;
  double step = body.bounding_ball().second;
  Point trial(n);
  auto advance = [&](const Point& dir, double len) {
    // Longest t in [0, len] with x + t dir a member.
    double lo = 0.0, hi = len;
    for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + hi * dir[i];
    if (!contains(body, trial)) {
      for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + mid * dir[i];
        if (contains(body, trial)) lo = mid;
        else hi = mid;
      }
    } else {
      lo = hi;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] += lo * dir[i];
    return lo;
  };
  for (int iter = 0; iter < 400 && step > 1e-10; ++iter) {
    double moved = advance(d, step);
    if (moved > 0.5 * step) continue;
    // Blocked: project the direction onto the tangent of the active constraint.
    for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + 1e-7 * d[i];
    Violation v = body.violation_with_gradient(trial);
    double gg = dot(v.gradient, v.gradient);
    if (gg > 0.0) {
      double dg = dot(d, v.gradient);
      Point slide(n);
      for (std::size_t i = 0; i < n; ++i) slide[i] = d[i] - (dg / gg) * v.gradient[i];
      // Bias slightly inward so the slide does not immediately hit the boundary.
      for (std::size_t i = 0; i < n; ++i) slide[i] -= 1e-3 * v.gradient[i] / std::sqrt(gg);
      if (dot(slide, d) > 0.0) advance(slide, step);
    }
    step *= 0.7;
  }
  return {dot(direction, x), true, x};
}

std::optional<Point> separate(const ConvexBody& body, std::span<const double> x, double tol) {
  Violation v = body.violation_with_gradient(x);
  if (v.value <= tol) return std::nullopt;
  return v.gradient;
}

ConvexityReport convexity_selftest(const ConvexBody& body, std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, "convexity_selftest needs trials >= 1");
  auto [center, radius] = body.bounding_ball();
  if (std::isinf(radius)) radius = 1.0;
  const BlockSpace& space = body.space();
  auto samples = sample_ball(space, 8 * trials, seed);
  std::vector<Point> members;
  for (auto& s : samples) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = center[i] + radius * s[i];
    if (contains(body, s)) members.push_back(std::move(s));
  }
  ConvexityReport report;
  report.trials = trials;
  if (members.size() < 2) return report;
  Rng rng = make_rng(seed, 1);
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Point mix(space.dim());
  for (std::size_t t = 0; t < trials; ++t) {
    const Point& u = members[pick(rng)];
    const Point& v = members[pick(rng)];
    ++report.member_pairs;
    for (double s : {0.5, unit(rng)}) {
      for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = s * u[i] + (1 - s) * v[i];
      if (!contains(body, mix)) {
        ++report.violations;
        break;
      }
    }
  }
  return report;
}

bool SlabNeighborhood::contains(std::span<const double> x) const {
  for (const Point& a : functionals) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += a[i] * (x[i] - center[i]);
    if (!(std::abs(s) < half_width)) return false;
  }
  return true;
}

nlohmann::json to_json(const ConvexBody& body) {
  return std::visit(
      overloaded{[](const NormBall& b) -> nlohmann::json {
                   return {{"shape", "NormBall"}, {"center", b.center}, {"radius", b.radius}};
                 },
                 [](const Halfspace& h) -> nlohmann::json {
                   return {{"shape", "Halfspace"}, {"normal", h.normal}, {"offset", h.offset}};
                 },
                 [](const QCylinder& c) -> nlohmann::json {
                   return {{"shape", "QCylinder"}, {"sign", c.sign},     {"blocks", c.blocks},
                           {"coef", c.coef},       {"q", c.q},           {"level", c.level},
                           {"c", c.c},             {"residue", c.residue}, {"modulus", c.modulus}};
                 },
                 [](const Intersection& in) -> nlohmann::json {
                   nlohmann::json parts = nlohmann::json::array();
                   for (const auto& p : in.parts) parts.push_back(to_json(p));
                   return {{"shape", "Intersection"}, {"parts", parts}};
                 }},
      body.shape());
}

ConvexBody body_from_json(std::shared_ptr<const BlockSpace> space, const nlohmann::json& j) {
  try {
    const std::string shape = j.at("shape").get<std::string>();
    if (shape == "NormBall")
      return ConvexBody::ball(space, j.at("center").get<Point>(), j.at("radius").get<double>());
    if (shape == "Halfspace")
      return ConvexBody::halfspace(space, j.at("normal").get<Point>(), j.at("offset").get<double>());
    if (shape == "QCylinder") {
      QCylinder c;
      c.sign = j.at("sign").get<int>();
      c.blocks = j.at("blocks").get<std::vector<std::size_t>>();
      c.coef = j.at("coef").get<double>();
      c.q = j.at("q").get<double>();
      c.level = j.at("level").get<double>();
      c.c = j.value("c", 1.0);
      c.residue = j.value("residue", std::size_t{0});
      c.modulus = j.value("modulus", std::size_t{0});
      return ConvexBody::cylinder(space, std::move(c));
    }
    if (shape == "Intersection") {
      std::vector<ConvexBody> parts;
      for (const auto& p : j.at("parts")) parts.push_back(body_from_json(space, p));
      return ConvexBody::intersect(std::move(parts));
    }
    fail(ErrorKind::InvalidArgument, "unknown body shape: " + shape);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed body: ") + e.what());
  }
}

}  // namespace covindex
