#pragma once

// Goal derivation under the slab model of weak neighbourhoods.
//
// A neighbourhood of x is U = { y : |y_i - c_i| < delta, i in F } for at most
// w coordinates F. The adversary places each slab so that x sits on its far
// edge from the origin, which makes U cap A as small as the model allows.
// The inradius of U cap A is taken over subspaces that drop F plus at most k
// further coordinates. x is removed when some trial U gives inradius <= eps.
//
// Bias: the adversary only tries `adversary_budget` slab sets, so survivors
// over-approximate the derived set; the stage radius update (largest
// origin-centred ball inside the survivors) under-approximates it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covindex/cover.hpp"

namespace covindex {

struct DeriveParams {
  double epsilon = 0.5;
  std::size_t k = 1;
  std::size_t w = 4;
  double delta = 0.05;
  std::size_t adversary_budget = 8;
  std::size_t stage_cap = 64;
  std::size_t cloud_samples = 1000;
  std::uint64_t seed = 1;
};

/// Strict-inequality tolerance: x survives when the inradius exceeds
/// eps + kSurviveTol.
inline constexpr double kSurviveTol = 1e-9;

/// Largest inradius of body cap U over the trials, where U is the slab
/// neighbourhood of x on coordinates F. Body must be a ball or ball-box.
double slab_inradius(const ConvexBody& body, std::span<const double> x,
                     const std::vector<std::size_t>& slab_coords, std::size_t k, double delta);

/// Indices of cloud points that survive one derivation step.
std::vector<std::size_t> derivation_step(const std::vector<Point>& cloud, const ConvexBody& body,
                                         double epsilon, std::size_t k, std::size_t w, double delta,
                                         std::size_t adversary_budget, std::uint64_t seed);

struct StageRecord {
  std::size_t stage = 0;
  double radius = 0.0;  // radius of the ball the stage derives
  std::size_t survivors = 0;
  std::size_t killed = 0;
};

struct DerivationTrace {
  DeriveParams params;
  std::vector<Point> grid;
  /// stages[m] lists the grid indices alive after stage m (stages[0] is the
  /// initial cloud).
  std::vector<std::vector<std::size_t>> stages;
  std::vector<StageRecord> records;
  std::optional<std::size_t> gz;  // empty means Overflow(stage_cap)
  std::string bias_note;

  bool overflow() const { return !gz.has_value(); }
};

/// Iterates derivation steps on an origin-centred ball of a coordinate-block
/// space until no point survives or the stage cap is hit.
DerivationTrace gz_estimate(const ConvexBody& body, const DeriveParams& params);

struct InclusionViolation {
  std::size_t point;
  std::size_t stage;
  std::size_t count;
};

struct CoverDerivationReport {
  DeriveParams params;
  std::size_t samples = 0;
  double max_piece_inradius = 0.0;
  /// eps exceeds every piece inradius, the regime where stage-m survivors
  /// must lie in more than m pieces.
  bool hypothesis_holds = false;
  std::optional<std::size_t> gz;
  /// Smallest membership count among survivors of each stage (0 if none).
  std::vector<std::size_t> min_count_per_stage;
  std::vector<std::size_t> survivors_per_stage;
  std::vector<InclusionViolation> violations;
};

/// Runs the stages on B_X and checks that every stage-m survivor lies in
/// more than m pieces of the covering. Requires an accepted certificate.
CoverDerivationReport covering_derivation_check(const Covering& cov, const DeriveParams& params);

nlohmann::json to_json(const DeriveParams& p);
nlohmann::json to_json(const DerivationTrace& trace);
nlohmann::json to_json(const CoverDerivationReport& report);

}  // namespace covindex
