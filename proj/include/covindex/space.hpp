#pragma once

// Finite-dimensional models of sequence spaces and FDD sums.
//
// A BlockSpace partitions the coordinates {0, ..., N-1} into contiguous
// blocks. The norm of x is the outer-q combination of the weighted inner-p
// norms of its blocks:
//
//     ||x|| = ( sum_b ( w_b * ||x_b||_p )^q )^(1/q)
//
// Block 0 always has length one and plays the role of the distinguished
// real line E_0. Infinite exponents are stored as +inf.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace covindex {

using Point = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kFeasTol = 1e-9;

struct Block {
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Block&) const = default;
};

class BlockSpace {
 public:
  /// Validates the layout and the declared lower/upper estimates. The lower
  /// estimate is checked on randomly sampled block-supported tuples.
  BlockSpace(std::size_t dim, std::vector<Block> blocks, double inner_p,
             double outer_q, double lower_c = 1.0, double upper_C = 1.0,
             std::vector<double> weights = {});

  static BlockSpace lp(std::size_t dim, double p);
  static BlockSpace linf(std::size_t dim) { return lp(dim, kInf); }
  /// Block 0 of length one followed by blocks of the given lengths.
  static BlockSpace block_sum(const std::vector<std::size_t>& lengths,
                              double inner_p, double outer_q,
                              double lower_c, double upper_C);

  std::size_t dim() const { return dim_; }
  std::size_t block_count() const { return blocks_.size(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block(std::size_t b) const { return blocks_[b]; }
  std::size_t block_of(std::size_t coord) const { return block_of_[coord]; }
  double inner_p() const { return inner_p_; }
  double outer_q() const { return outer_q_; }
  double lower_c() const { return lower_c_; }
  double upper_C() const { return upper_C_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t b) const { return weights_[b]; }

  /// True when every block is a single coordinate (a weighted l_q model).
  bool coordinate_blocks() const { return blocks_.size() == dim_; }

  /// Short human-readable tag, e.g. "l2", "linf", "blocks(p=2,q=1)".
  std::string label() const;

  bool operator==(const BlockSpace&) const = default;

 private:
  std::size_t dim_;
  std::vector<Block> blocks_;
  std::vector<std::size_t> block_of_;
  double inner_p_;
  double outer_q_;
  double lower_c_;
  double upper_C_;
  std::vector<double> weights_;
};

/// l_p norm of a plain vector, p in [1, inf].
double lp_norm(std::span<const double> v, double p);

/// Hoelder conjugate exponent.
double conjugate(double p);

double norm(const BlockSpace& space, std::span<const double> x);

/// Unweighted inner norm of block b of x.
double block_norm(const BlockSpace& space, std::span<const double> x,
                  std::size_t b);

/// Dual norm of a functional d, restricted to the coordinates where
/// mask[i] is true (all coordinates when mask is empty). This is the
/// support function of the unit ball of the coordinate subspace.
double dual_norm(const BlockSpace& space, std::span<const double> d,
                 const std::vector<bool>& mask = {});

/// A subgradient of the norm at x (zero vector at x = 0).
Point norm_subgradient(const BlockSpace& space, std::span<const double> x);

void check_point(const BlockSpace& space, std::span<const double> x);

/// Monte-Carlo points of the unit ball, deterministic in seed.
///
/// Coordinate-block spaces use the exact uniform sampler for weighted l_q
/// balls: g_i with density ~ exp(-|t|^q), an independent Exp(1) variable z,
/// and x = g / (||g||_q^q + z)^(1/q). Block spaces sample the vector of block
/// norms that way, then a direction inside each block on the inner-p sphere.
std::vector<Point> sample_ball(const BlockSpace& space, std::size_t count,
                               std::uint64_t seed);

struct Renorming {
  BlockSpace space;
  double lambda;
};

/// Diagonal renorming by per-block weights. lambda is the smallest constant
/// with lambda^-1 ||x|| <= ||x||~ <= lambda ||x||.
Renorming renorm(const BlockSpace& space, const std::vector<double>& weights);

double exponent_from_json(const nlohmann::json& j);
nlohmann::json exponent_to_json(double p);

nlohmann::json to_json(const BlockSpace& space);
BlockSpace space_from_json(const nlohmann::json& j);

/// Presets: "l1", "l2", "lq:<q>", "linf".
BlockSpace space_from_preset(const std::string& preset, std::size_t dim);

}  // namespace covindex
