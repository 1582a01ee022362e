#include "covindex/space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covindex/error.hpp"
#include "covindex/parallel.hpp"

namespace covindex {

namespace {

std::string format_exponent(double p) {
  if (std::isinf(p)) return "inf";
  std::ostringstream os;
  os << p;
  return os.str();
}

void validate_exponent(double p, const char* name) {
  if (!(p >= 1.0)) fail(ErrorKind::InvalidArgument, std::string(name) + " must lie in [1, inf]");
}

// Sample from the density proportional to exp(-|t|^q); q = inf gives U(-1, 1).
double generalized_normal(Rng& rng, double q) {
  if (std::isinf(q)) return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  std::gamma_distribution<double> gamma(1.0 / q, 1.0);
  double magnitude = std::pow(gamma(rng), 1.0 / q);
  return std::bernoulli_distribution(0.5)(rng) ? magnitude : -magnitude;
}

// Uniform point of the unweighted l_q unit ball in dimension n.
std::vector<double> uniform_lq_ball(Rng& rng, std::size_t n, double q) {
  std::vector<double> g(n);
  for (auto& v : g) v = generalized_normal(rng, q);
  if (std::isinf(q)) return g;
  double sum = 0.0;
  for (double v : g) sum += std::pow(std::abs(v), q);
  double z = std::exponential_distribution<double>(1.0)(rng);
  double scale = std::pow(sum + z, 1.0 / q);
  for (auto& v : g) v /= scale;
  return g;
}

}  // namespace

BlockSpace::BlockSpace(std::size_t dim, std::vector<Block> blocks, double inner_p,
                       double outer_q, double lower_c, double upper_C,
                       std::vector<double> weights)
    : dim_(dim),
      blocks_(std::move(blocks)),
      inner_p_(inner_p),
      outer_q_(outer_q),
      lower_c_(lower_c),
      upper_C_(upper_C),
      weights_(std::move(weights)) {
  require(dim_ >= 1, "space dimension must be positive");
  validate_exponent(inner_p_, "inner_p");
  validate_exponent(outer_q_, "outer_q");
  require(std::isfinite(lower_c_) && lower_c_ > 0.0, "lower_c must be positive");
  require(std::isfinite(upper_C_) && upper_C_ > 0.0, "upper_C must be positive");
  require(!blocks_.empty(), "space needs at least one block");
  require(blocks_.front().length == 1, "block 0 must have length 1");
  block_of_.assign(dim_, 0);
  std::size_t next = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    require(blk.length >= 1, "blocks must be nonempty");
    require(blk.offset == next, "blocks must be contiguous and ordered");
    require(blk.offset + blk.length <= dim_, "blocks exceed the dimension");
    for (std::size_t i = blk.offset; i < blk.offset + blk.length; ++i) block_of_[i] = b;
    next = blk.offset + blk.length;
  }
  require(next == dim_, "blocks must cover every coordinate");
  if (weights_.empty()) weights_.assign(blocks_.size(), 1.0);
  require(weights_.size() == blocks_.size(), "one weight per block expected");
  for (double w : weights_)
    require(std::isfinite(w) && w > 0.0, "block weights must be positive");

  // Both estimates compare ||sum x_b|| with the outer-q sum of block norms.
  Rng rng = make_rng(0x5eed0fb10c5ULL, dim_);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 32; ++trial) {
    Point x(dim_);
    for (auto& v : x) v = gauss(rng);
    std::vector<double> pieces(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      pieces[b] = weights_[b] * block_norm(*this, x, b);
    double combined = lp_norm(pieces, outer_q_);
    double total = norm(*this, x);
    double slack = 1e-12 * std::max(1.0, total);
    if (total < lower_c_ * combined - slack)
      fail(ErrorKind::InvalidArgument, "lower estimate with constant lower_c fails on sampled tuples");
    if (total > upper_C_ * combined + slack)
      fail(ErrorKind::InvalidArgument, "upper estimate with constant upper_C fails on sampled tuples");
  }
}

BlockSpace BlockSpace::lp(std::size_t dim, double p) {
  std::vector<Block> blocks(dim);
  for (std::size_t i = 0; i < dim; ++i) blocks[i] = {i, 1};
  return BlockSpace(dim, std::move(blocks), p, p);
}

BlockSpace BlockSpace::block_sum(const std::vector<std::size_t>& lengths, double inner_p,
                                 double outer_q, double lower_c, double upper_C) {
  std::vector<Block> blocks{{0, 1}};
  std::size_t offset = 1;
  for (std::size_t len : lengths) {
    blocks.push_back({offset, len});
    offset += len;
  }
  return BlockSpace(offset, std::move(blocks), inner_p, outer_q, lower_c, upper_C);
}

std::string BlockSpace::label() const {
  if (coordinate_blocks()) {
    bool unweighted = std::all_of(weights_.begin(), weights_.end(),
                                  [](double w) { return w == 1.0; });
    std::string base = outer_q_ == 1.0   ? "l1"
                       : outer_q_ == 2.0 ? "l2"
                       : std::isinf(outer_q_) ? "linf"
                                              : "lq:" + format_exponent(outer_q_);
    return unweighted ? base : base + "~";
  }
  return "blocks(p=" + format_exponent(inner_p_) + ",q=" + format_exponent(outer_q_) + ")";
}

double conjugate(double p) {
  if (p == 1.0) return kInf;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

double lp_norm(std::span<const double> v, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
  }
  if (p == 1.0) {
    double s = 0.0;
    for (double a : v) s += std::abs(a);
    return s;
  }
  // Scale by the max entry to keep pow() away from under/overflow.
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  if (m == 0.0) return 0.0;
  double s = 0.0;
  if (p == 2.0) {
    for (double a : v) s += (a / m) * (a / m);
    return m * std::sqrt(s);
  }
  for (double a : v) s += std::pow(std::abs(a) / m, p);
  return m * std::pow(s, 1.0 / p);
}

void check_point(const BlockSpace& space, std::span<const double> x) {
  if (x.size() != space.dim())
    fail(ErrorKind::DimensionMismatch, "point has " + std::to_string(x.size()) +
                                           " coordinates, space has " + std::to_string(space.dim()));
  for (double v : x)
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "point has a non-finite coordinate");
}

double block_norm(const BlockSpace& space, std::span<const double> x, std::size_t b) {
  const Block& blk = space.block(b);
  return lp_norm(x.subspan(blk.offset, blk.length), space.inner_p());
}

double norm(const BlockSpace& space, std::span<const double> x) {
  check_point(space, x);
  if (space.coordinate_blocks()) {
    std::vector<double> scaled(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = space.weight(i) * x[i];
    return lp_norm(scaled, space.outer_q());
  }
  std::vector<double> pieces(space.block_count());
  for (std::size_t b = 0; b < pieces.size(); ++b)
    pieces[b] = space.weight(b) * block_norm(space, x, b);
  return lp_norm(pieces, space.outer_q());
}

double dual_norm(const BlockSpace& space, std::span<const double> d,
                 const std::vector<bool>& mask) {
  if (d.size() != space.dim()) fail(ErrorKind::DimensionMismatch, "functional dimension mismatch");
  require(mask.empty() || mask.size() == space.dim(), "mask dimension mismatch");
  double p_dual = conjugate(space.inner_p());
  double q_dual = conjugate(space.outer_q());
  std::vector<double> pieces(space.block_count());
  std::vector<double> scratch;
  for (std::size_t b = 0; b < space.block_count(); ++b) {
    const Block& blk = space.block(b);
    scratch.assign(blk.length, 0.0);
    for (std::size_t i = 0; i < blk.length; ++i) {
      std::size_t c = blk.offset + i;
      if (mask.empty() || mask[c]) scratch[i] = d[c];
    }
    pieces[b] = lp_norm(scratch, p_dual) / space.weight(b);
  }
  return lp_norm(pieces, q_dual);
}

Point norm_subgradient(const BlockSpace& space, std::span<const double> x) {
  check_point(space, x);
  Point g(space.dim(), 0.0);
  double total = norm(space, x);
  if (total == 0.0) return g;
  const double p = space.inner_p();
  const double q = space.outer_q();
  std::vector<double> bnorm(space.block_count());
  for (std::size_t b = 0; b < bnorm.size(); ++b)
    bnorm[b] = space.weight(b) * block_norm(space, x, b);

  auto inner_gradient = [&](std::size_t b, double factor) {
    const Block& blk = space.block(b);
    double nb = block_norm(space, x, b);
    if (nb == 0.0) return;
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
  };

  if (std::isinf(q)) {
    std::size_t arg = static_cast<std::size_t>(
        std::max_element(bnorm.begin(), bnorm.end()) - bnorm.begin());
    inner_gradient(arg, space.weight(arg));
    return g;
  }
  for (std::size_t b = 0; b < bnorm.size(); ++b) {
    if (bnorm[b] == 0.0) continue;
    double outer = q == 1.0 ? 1.0 : std::pow(bnorm[b] / total, q - 1.0);
    inner_gradient(b, outer * space.weight(b));
  }
  return g;
}

std::vector<Point> sample_ball(const BlockSpace& space, std::size_t count, std::uint64_t seed) {
  require(count >= 1, "sample_ball needs count >= 1");
  std::vector<Point> out(count);
  // Chunked streams keep the output independent of the worker count.
  constexpr std::size_t kChunk = 1024;
  std::size_t chunks = (count + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t s = c * kChunk; s < end; ++s) {
      Point x(space.dim(), 0.0);
      if (space.coordinate_blocks()) {
        auto u = uniform_lq_ball(rng, space.dim(), space.outer_q());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = u[i] / space.weight(i);
      } else {
        auto radii = uniform_lq_ball(rng, space.block_count(), space.outer_q());
        for (std::size_t b = 0; b < space.block_count(); ++b) {
          const Block& blk = space.block(b);
          std::vector<double> dir(blk.length);
          double n = 0.0;
          while (n == 0.0) {
            for (auto& v : dir) v = generalized_normal(rng, space.inner_p());
            n = lp_norm(dir, space.inner_p());
          }
          double r = std::abs(radii[b]) / space.weight(b);
          for (std::size_t i = 0; i < blk.length; ++i) x[blk.offset + i] = r * dir[i] / n;
        }
      }
      out[s] = std::move(x);
    }
  });
  return out;
}

Renorming renorm(const BlockSpace& space, const std::vector<double>& weights) {
  require(weights.size() == space.block_count(), "renorm needs one weight per block");
  std::vector<double> combined(weights.size());
  double lambda = 1.0;
  for (std::size_t b = 0; b < weights.size(); ++b) {
    if (!(std::isfinite(weights[b]) && weights[b] > 0.0))
      fail(ErrorKind::InvalidArgument, "renorm weights must be positive");
    combined[b] = space.weight(b) * weights[b];
    lambda = std::max({lambda, weights[b], 1.0 / weights[b]});
  }
  BlockSpace out(space.dim(), space.blocks(), space.inner_p(), space.outer_q(), space.lower_c(),
                 space.upper_C(), std::move(combined));
  return {std::move(out), lambda};
}

double exponent_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    fail(ErrorKind::InvalidArgument, "exponent strings must be \"inf\"");
  }
  if (!j.is_number()) fail(ErrorKind::InvalidArgument, "exponent must be a number or \"inf\"");
  return j.get<double>();
}

nlohmann::json exponent_to_json(double p) {
  if (std::isinf(p)) return "inf";
  return p;
}

nlohmann::json to_json(const BlockSpace& space) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const Block& b : space.blocks()) blocks.push_back({b.offset, b.length});
  nlohmann::json j{{"dim", space.dim()},
                   {"blocks", blocks},
                   {"inner_p", exponent_to_json(space.inner_p())},
                   {"outer_q", exponent_to_json(space.outer_q())},
                   {"lower_c", space.lower_c()},
                   {"upper_C", space.upper_C()}};
  bool unweighted = std::all_of(space.weights().begin(), space.weights().end(),
                                [](double w) { return w == 1.0; });
  if (!unweighted) j["weights"] = space.weights();
  return j;
}

BlockSpace space_from_json(const nlohmann::json& j) {
  require(j.is_object(), "space description must be a JSON object");
  static const std::vector<std::string> known{"dim", "blocks", "inner_p", "outer_q",
                                              "lower_c", "upper_C", "weights"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      fail(ErrorKind::InvalidArgument, "unknown space field: " + it.key());
  try {
    std::size_t dim = j.at("dim").get<std::size_t>();
    std::vector<Block> blocks;
    if (j.contains("blocks")) {
      for (const auto& b : j.at("blocks")) {
        require(b.is_array() && b.size() == 2, "blocks entries are [offset, length] pairs");
        blocks.push_back({b[0].get<std::size_t>(), b[1].get<std::size_t>()});
      }
    } else {
      for (std::size_t i = 0; i < dim; ++i) blocks.push_back({i, 1});
    }
    double p = exponent_from_json(j.at("inner_p"));
    double q = exponent_from_json(j.at("outer_q"));
    double c = j.value("lower_c", 1.0);
    double C = j.value("upper_C", 1.0);
    std::vector<double> w = j.value("weights", std::vector<double>{});
    return BlockSpace(dim, std::move(blocks), p, q, c, C, std::move(w));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed space description: ") + e.what());
  }
}

BlockSpace space_from_preset(const std::string& preset, std::size_t dim) {
  if (preset == "l1") return BlockSpace::lp(dim, 1.0);
  if (preset == "l2") return BlockSpace::lp(dim, 2.0);
  if (preset == "linf") return BlockSpace::linf(dim);
  if (preset.rfind("lq:", 0) == 0) {
    std::string rest = preset.substr(3);
    double q = rest == "inf" ? kInf : 0.0;
    if (q == 0.0) {
      try {
        std::size_t used = 0;
        q = std::stod(rest, &used);
        require(used == rest.size(), "bad exponent in preset " + preset);
      } catch (const std::logic_error&) {
        fail(ErrorKind::InvalidArgument, "bad exponent in preset " + preset);
      }
    }
    return BlockSpace::lp(dim, q);
  }
  fail(ErrorKind::InvalidArgument, "unknown space preset: " + preset);
}

}  // namespace covindex
