#include "covindex/cover.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covindex/error.hpp"
#include "covindex/parallel.hpp"

namespace covindex {

namespace {

constexpr std::size_t kChunk = 1024;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

bool all_cylinders(const Covering& cov) {
  if (cov.pieces.empty()) return false;
  for (const auto& p : cov.pieces)
    if (!std::holds_alternative<QCylinder>(p.shape())) return false;
  return true;
}

double weighted_block_mass(const BlockSpace& space, std::span<const double> x,
                           const std::vector<std::size_t>& blocks, double q) {
  double s = 0.0;
  for (std::size_t b : blocks) s += std::pow(space.weight(b) * block_norm(space, x, b), q);
  return s;
}

// A ball point outside every cylinder: x_0 = 0 and, for each piece, one
// coordinate of its class carrying just over level / coef of q-mass.
std::optional<Point> cylinder_gap_witness(const Covering& cov) {
  if (!all_cylinders(cov)) return std::nullopt;
  const BlockSpace& space = *cov.space;
  Point x(space.dim(), 0.0);
  for (const auto& piece : cov.pieces) {
    const auto& cyl = std::get<QCylinder>(piece.shape());
    if (cyl.level < 0.0) continue;
    if (cyl.coef <= 0.0) return std::nullopt;
    auto it = std::find_if(cyl.blocks.begin(), cyl.blocks.end(), [](std::size_t b) { return b != 0; });
    if (it == cyl.blocks.end()) return std::nullopt;
    double mass = std::pow(cyl.level / cyl.coef * (1.0 + 1e-6), 1.0 / cyl.q);
    x[space.block(*it).offset] = mass / space.weight(*it);
  }
  if (norm(space, x) > 1.0) return std::nullopt;
  for (const auto& piece : cov.pieces)
    if (contains(piece, x)) return std::nullopt;
  return x;
}

void attach_cylinder_certificate(Covering& cov) {
  if (auto text = cylinder_sum_argument(cov)) {
    cov.certificate.status = CoverStatus::Algebraic;
    cov.certificate.derivation = *text;
  } else if (auto w = cylinder_gap_witness(cov)) {
    cov.certificate.status = CoverStatus::Failed;
    cov.certificate.witness = *w;
    cov.certificate.derivation = "summed inequalities do not force ||x|| > 1; explicit uncovered point";
  }
}

}  // namespace

const char* to_string(CoverStatus status) {
  switch (status) {
    case CoverStatus::None: return "None";
    case CoverStatus::Algebraic: return "Algebraic";
    case CoverStatus::Sampled: return "Sampled";
    case CoverStatus::Failed: return "Failed";
  }
  return "unknown";
}

Covering cylinder_cover(std::shared_ptr<const BlockSpace> space, std::size_t n) {
  require(n >= 1, "cylinder cover needs n >= 1");
  require(std::isfinite(space->outer_q()), "cylinder cover needs a finite outer exponent");
  if (2 * n > space->block_count() - 1)
    fail(ErrorKind::InvalidArgument, "modulus 2n = " + std::to_string(2 * n) +
                                         " exceeds the " + std::to_string(space->block_count() - 1) +
                                         " available residue blocks");
  Covering cov;
  cov.space = space;
  cov.construction = "cylinders";
  const double c = space->lower_c(), q = space->outer_q();
  for (std::size_t j = 0; j < 2 * n; ++j) {
    int sign = (j % 2 == 0) ? 1 : -1;
    cov.pieces.push_back(ConvexBody::cylinder(
        space, QCylinder::residue_class(*space, sign, j, 2 * n, c, q, 0.5)));
  }
  cov.parameters = {{"n", n}, {"pieces", 2 * n}, {"c", c}, {"q", q}, {"level", 0.5}};
  attach_cylinder_certificate(cov);
  return cov;
}

Covering residue_cover(std::shared_ptr<const BlockSpace> space, std::size_t pieces) {
  require(pieces >= 1, "residue cover needs at least one piece");
  require(std::isfinite(space->outer_q()), "residue cover needs a finite outer exponent");
  require(pieces <= space->block_count(), "more residue classes than blocks");
  Covering cov;
  cov.space = space;
  cov.construction = "residue";
  const double c = space->lower_c(), q = space->outer_q();
  for (std::size_t j = 0; j < pieces; ++j)
    cov.pieces.push_back(ConvexBody::cylinder(
        space, QCylinder::residue_class(*space, 0, j, pieces, c, q, 0.5, 0)));
  cov.parameters = {{"pieces", pieces}, {"c", c}, {"q", q}};
  attach_cylinder_certificate(cov);
  return cov;
}

Covering slab_cover(std::shared_ptr<const BlockSpace> space, std::size_t pieces) {
  require(pieces >= 1, "slab cover needs at least one piece");
  Covering cov;
  cov.space = space;
  cov.construction = "slabs";
  const std::size_t n = space->dim();
  const double reach = 1.0 / space->weight(0);
  Point e0(n, 0.0), minus_e0(n, 0.0);
  e0[0] = 1.0;
  minus_e0[0] = -1.0;
  for (std::size_t j = 0; j < pieces; ++j) {
    std::vector<ConvexBody> parts{ConvexBody::unit_ball(space)};
    double lo = reach * (-1.0 + 2.0 * j / pieces), hi = reach * (-1.0 + 2.0 * (j + 1) / pieces);
    if (j > 0) parts.push_back(ConvexBody::halfspace(space, minus_e0, -lo));
    if (j + 1 < pieces) parts.push_back(ConvexBody::halfspace(space, e0, hi));
    cov.pieces.push_back(parts.size() == 1 ? parts.front() : ConvexBody::intersect(std::move(parts)));
  }
  cov.parameters = {{"pieces", pieces}};
  cov.certificate.status = CoverStatus::Algebraic;
  cov.certificate.derivation = "the slab intervals cover [-1/w0, 1/w0], the range of x_0 on B";
  return cov;
}

Covering trivial_cover(std::shared_ptr<const BlockSpace> space) {
  Covering cov;
  cov.space = space;
  cov.construction = "trivial";
  cov.pieces.push_back(ConvexBody::unit_ball(space));
  cov.certificate.status = CoverStatus::Algebraic;
  cov.certificate.derivation = "the single piece is B";
  return cov;
}

Covering two_piece_family(std::shared_ptr<const BlockSpace> space, double alpha, double beta,
                          Split split) {
  require(space->coordinate_blocks() && space->outer_q() == 2.0, "two-piece family needs an l2 model");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(beta >= 0.0 && std::isfinite(beta), "beta must be >= 0");
  const std::size_t n = space->dim();
  require(n >= 3, "two-piece family needs N >= 3");
  QCylinder plus, minus;
  plus.sign = 1;
  minus.sign = -1;
  for (QCylinder* c : {&plus, &minus}) {
    c->coef = beta;
    c->q = 2.0;
    c->level = alpha;
    c->c = 1.0;
    c->modulus = 2;
  }
  plus.residue = 0;
  minus.residue = 1;
  for (std::size_t i = 1; i < n; ++i) {
    bool to_plus = split == Split::Alternating ? (i % 2 == 0) : (i <= (n - 1) / 2);
    (to_plus ? plus : minus).blocks.push_back(i);
  }
  Covering cov;
  cov.space = space;
  cov.construction = "two-piece";
  cov.pieces.push_back(ConvexBody::cylinder(space, plus));
  cov.pieces.push_back(ConvexBody::cylinder(space, minus));
  cov.parameters = {{"alpha", alpha},
                    {"beta", beta},
                    {"split", split == Split::Alternating ? "alternating" : "halves"}};
  attach_cylinder_certificate(cov);
  return cov;
}

Covering random_convex_cover(std::shared_ptr<const BlockSpace> space, std::size_t pieces,
                             std::size_t complexity, std::uint64_t seed, NormalFamily family) {
  require(pieces >= 2, "random cover needs pieces >= 2");
  const std::size_t n = space->dim();
  const std::size_t min_interior = 4;
  auto cloud = sample_ball(*space, 2048, mix_seed(seed, 1));
  Rng rng = make_rng(seed, 2);
  std::uniform_int_distribution<std::size_t> coord(0, n - 1);
  std::normal_distribution<double> gauss;

  struct Cell {
    std::vector<std::pair<Point, double>> cuts;  // <a, x> <= b
    std::vector<std::size_t> members;
  };
  std::vector<Cell> cells(1);
  cells[0].members.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) cells[0].members[i] = i;

  auto draw_normal = [&]() {
    Point a(n, 0.0);
    if (family == NormalFamily::Coordinate) {
      a[coord(rng)] = 1.0;
    } else {
      for (auto& v : a) v = gauss(rng);
    }
    return a;
  };
  auto dot = [](const Point& a, const Point& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
    return s;
  };
  // Splits cell idx by <a, x> = t when both sides keep interior samples.
  auto try_split = [&](std::size_t idx, const Point& a, double t) {
    std::vector<std::size_t> below, above;
    for (std::size_t m : cells[idx].members) {
      double v = dot(a, cloud[m]);
      if (v < t) below.push_back(m);
      else if (v > t) above.push_back(m);
    }
    if (below.size() < min_interior || above.size() < min_interior) return false;
    Cell upper = cells[idx];
    Point neg(a);
    for (auto& v : neg) v = -v;
    cells[idx].cuts.emplace_back(a, t);
    cells[idx].members = std::move(below);
    upper.cuts.emplace_back(neg, -t);
    upper.members = std::move(above);
    cells.push_back(std::move(upper));
    return true;
  };

  std::uniform_int_distribution<std::size_t> any_point(0, cloud.size() - 1);
  for (std::size_t c = 0; c < complexity && cells.size() < pieces; ++c) {
    Point a = draw_normal();
    double t = dot(a, cloud[any_point(rng)]);
    std::size_t existing = cells.size();
    for (std::size_t idx = 0; idx < existing && cells.size() < pieces; ++idx) try_split(idx, a, t);
  }
  std::size_t stalls = 0;
  while (cells.size() < pieces && stalls < 1000) {
    std::uniform_int_distribution<std::size_t> pick_cell(0, cells.size() - 1);
    std::size_t idx = pick_cell(rng);
    const auto& members = cells[idx].members;
    std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
    Point a = draw_normal();
    double t = dot(a, cloud[members[pick_member(rng)]]);
    if (!try_split(idx, a, t)) ++stalls;
  }

  Covering cov;
  cov.space = space;
  cov.construction = "random";
  for (const Cell& cell : cells) {
    std::vector<ConvexBody> parts{ConvexBody::unit_ball(space)};
    for (const auto& [a, t] : cell.cuts) parts.push_back(ConvexBody::halfspace(space, a, t));
    cov.pieces.push_back(parts.size() == 1 ? parts.front() : ConvexBody::intersect(std::move(parts)));
  }
  cov.parameters = {{"pieces", cells.size()},
                    {"requested_pieces", pieces},
                    {"complexity", complexity},
                    {"seed", seed},
                    {"normals", family == NormalFamily::Coordinate ? "coordinate" : "gaussian"}};
  cov.certificate.status = CoverStatus::Algebraic;
  cov.certificate.derivation = "cells of a hyperplane refinement of R^N intersected with B";
  return cov;
}

Covering custom_cover(std::shared_ptr<const BlockSpace> space, std::vector<ConvexBody> pieces,
                      std::string construction) {
  require(!pieces.empty(), "a covering needs pieces");
  for (const auto& p : pieces) require(p.space() == *space, "pieces must live in the covering space");
  Covering cov;
  cov.space = std::move(space);
  cov.pieces = std::move(pieces);
  cov.construction = std::move(construction);
  return cov;
}

std::optional<std::string> cylinder_sum_argument(const Covering& cov) {
  if (!all_cylinders(cov)) return std::nullopt;
  const BlockSpace& space = *cov.space;
  const double q = space.outer_q();
  if (!std::isfinite(q)) return std::nullopt;
  const auto& first = std::get<QCylinder>(cov.pieces.front().shape());
  const double coef = first.coef;
  if (!(coef > 0.0)) return std::nullopt;
  int sign_sum = 0;
  double level_sum = 0.0;
  std::vector<int> used(space.block_count(), 0);
  for (const auto& piece : cov.pieces) {
    const auto& cyl = std::get<QCylinder>(piece.shape());
    if (std::abs(cyl.coef - coef) > 1e-12 * coef || std::abs(cyl.q - q) > 1e-12) return std::nullopt;
    sign_sum += cyl.sign;
    level_sum += cyl.level;
    for (std::size_t b : cyl.blocks)
      if (used[b]++ > 0) return std::nullopt;
  }
  if (sign_sum != 0) return std::nullopt;
  const double c = space.lower_c();
  const double ratio = std::pow(c, q) * level_sum / coef;
  if (ratio < 1.0 - 1e-12) return std::nullopt;
  std::ostringstream os;
  os << "if x lies in no piece then s_j x_0 + K S_j > L_j for all " << cov.pieces.size()
     << " pieces (K = " << fmt(coef) << "); summing, sum_j s_j = 0 and the classes are disjoint, so "
     << "K S > " << fmt(level_sum) << " with S = sum_b ||x_b||^" << fmt(q)
     << "; the lower estimate gives ||x||^q >= c^q S > c^q L / K = " << fmt(ratio)
     << " >= 1, contradicting ||x|| <= 1";
  return os.str();
}

ReplayReport replay_contradiction(const Covering& cov, std::size_t points, std::uint64_t seed) {
  require(all_cylinders(cov), "replay applies to cylinder coverings");
  const BlockSpace& space = *cov.space;
  const std::size_t n = space.dim();
  ReplayReport report;
  Rng rng = make_rng(seed, 0x7e91);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> lead(-1.0 / space.weight(0), 1.0 / space.weight(0));
  bool any_sign = false;
  for (const auto& p : cov.pieces) any_sign |= std::get<QCylinder>(p.shape()).sign != 0;
  std::size_t attempts = 0;
  while (report.points < points && attempts < 100 * points) {
    ++attempts;
    Point g(n);
    for (auto& v : g) v = gauss(rng);
    double x0 = any_sign ? lead(rng) : g[0];
    // t^q needed so that s_j x_0 + K_j t^q S_j(g) > L_j for every piece.
    double need = 0.0;
    bool ok = true;
    for (const auto& piece : cov.pieces) {
      const auto& cyl = std::get<QCylinder>(piece.shape());
      double slack = cyl.level - cyl.sign * x0;
      if (slack < 0.0) continue;
      Point probe = g;
      if (any_sign) probe[0] = 0.0;  // signed cylinders never use block 0
      double mass = cyl.coef * weighted_block_mass(space, probe, cyl.blocks, cyl.q);
      if (mass <= 0.0) {
        ok = false;
        break;
      }
      need = std::max(need, slack / mass);
    }
    if (!ok) continue;
    double q = std::get<QCylinder>(cov.pieces.front().shape()).q;
    double t = std::pow(need, 1.0 / q) * (1.0 + 1e-9) + 1e-12;
    // With signed pieces x_0 is kept and the rest scaled; otherwise the
    // whole direction is scaled.
    Point x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = t * g[i];
    if (any_sign) x[0] = x0;
    bool reversed = true;
    for (const auto& piece : cov.pieces) {
      const auto& cyl = std::get<QCylinder>(piece.shape());
      double lhs = cyl.sign * x[0] + cyl.coef * weighted_block_mass(space, x, cyl.blocks, cyl.q);
      if (!(lhs > cyl.level)) reversed = false;
    }
    if (!reversed) continue;
    ++report.points;
    if (!(norm(space, x) > 1.0)) ++report.failures;
  }
  return report;
}

CoverCertificate verify_cover(const Covering& cov, std::size_t samples, std::uint64_t seed,
                              double tol) {
  require(samples >= 1, "verify_cover needs samples >= 1");
  const BlockSpace& space = *cov.space;
  const std::size_t chunks = (samples + kChunk - 1) / kChunk;
  struct ChunkResult {
    std::size_t misses = 0;
    double worst = -kInf;
    Point witness;
  };
  std::vector<ChunkResult> results(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    std::size_t count = std::min(kChunk, samples - c * kChunk);
    auto pts = sample_ball(space, count, mix_seed(seed, c));
    ChunkResult& r = results[c];
    for (const Point& x : pts) {
      double margin = kInf;
      for (const auto& piece : cov.pieces) {
        margin = std::min(margin, piece.violation(x));
        if (margin <= tol) break;
      }
      if (margin > tol) {
        ++r.misses;
        if (margin > r.worst) r.witness = x;
      }
      r.worst = std::max(r.worst, margin);
    }
  });
  CoverCertificate cert = cov.certificate;
  cert.points = samples;
  cert.misses = 0;
  cert.worst_margin = -kInf;
  double witness_margin = -kInf;
  for (const auto& r : results) {
    cert.misses += r.misses;
    cert.worst_margin = std::max(cert.worst_margin, r.worst);
    if (r.misses > 0 && r.worst > witness_margin) {
      witness_margin = r.worst;
      cert.witness = r.witness;
    }
  }
  if (cert.misses > 0) {
    cert.status = CoverStatus::Failed;
  } else if (cert.status == CoverStatus::Failed && !cert.witness.empty()) {
    // An explicit uncovered point outranks clean sampling.
  } else if (cert.status != CoverStatus::Algebraic) {
    cert.status = CoverStatus::Sampled;
  }
  if (cylinder_sum_argument(cov)) {
    ReplayReport replay = replay_contradiction(cov, 100, mix_seed(seed, 0x5eed));
    cert.replay_points = replay.points;
    cert.replay_failures = replay.failures;
    if (replay.failures > 0 || replay.points < 100) cert.status = CoverStatus::Failed;
  }
  return cert;
}

std::size_t membership_count(const Covering& cov, std::span<const double> x, double tol) {
  std::size_t count = 0;
  for (const auto& p : cov.pieces)
    if (contains(p, x, tol)) ++count;
  return count;
}

nlohmann::json to_json(const CoverCertificate& cert) {
  nlohmann::json j = {{"status", to_string(cert.status)},
                      {"points", cert.points},
                      {"misses", cert.misses},
                      {"replay_points", cert.replay_points},
                      {"replay_failures", cert.replay_failures}};
  if (std::isfinite(cert.worst_margin)) j["worst_margin"] = cert.worst_margin;
  if (!cert.derivation.empty()) j["derivation"] = cert.derivation;
  if (!cert.witness.empty()) j["witness"] = cert.witness;
  return j;
}

nlohmann::json to_json(const Covering& cov) {
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& p : cov.pieces) pieces.push_back(to_json(p));
  return {{"space", to_json(*cov.space)},
          {"pieces", pieces},
          {"construction", cov.construction},
          {"parameters", cov.parameters},
          {"certificate", to_json(cov.certificate)}};
}

Covering covering_from_json(const nlohmann::json& j) {
  try {
    auto space = std::make_shared<const BlockSpace>(space_from_json(j.at("space")));
    std::vector<ConvexBody> pieces;
    for (const auto& p : j.at("pieces")) pieces.push_back(body_from_json(space, p));
    Covering cov = custom_cover(space, std::move(pieces), j.value("construction", std::string("custom")));
    cov.parameters = j.value("parameters", nlohmann::json::object());
    attach_cylinder_certificate(cov);
    return cov;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed covering: ") + e.what());
  }
}

}  // namespace covindex
