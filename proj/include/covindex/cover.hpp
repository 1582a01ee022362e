#pragma once

// Finite convex coverings of the unit ball and their certificates.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covindex/body.hpp"

namespace covindex {

enum class CoverStatus { None, Algebraic, Sampled, Failed };
const char* to_string(CoverStatus status);

struct CoverCertificate {
  CoverStatus status = CoverStatus::None;
  std::string derivation;  // the algebraic argument, when there is one
  std::size_t points = 0;
  std::size_t misses = 0;
  /// Largest over sampled points of the smallest piece violation; <= tol
  /// means every sample was covered.
  double worst_margin = -kInf;
  Point witness;  // a ball point in no piece (Failed only)
  std::size_t replay_points = 0;
  std::size_t replay_failures = 0;
};

struct Covering {
  std::shared_ptr<const BlockSpace> space;
  std::vector<ConvexBody> pieces;
  std::string construction;
  nlohmann::json parameters = nlohmann::json::object();
  CoverCertificate certificate;

  bool accepted() const {
    return certificate.status == CoverStatus::Algebraic ||
           (certificate.status == CoverStatus::Sampled && certificate.misses == 0);
  }
};

/// 2n cylinders { (-1)^j x_0 <= 1/2 - c^q n sum_{b = j mod 2n} ||x_b||^q }
/// built from the lower q-estimate of the space.
Covering cylinder_cover(std::shared_ptr<const BlockSpace> space, std::size_t n);

/// P pieces { sum_{b = j mod P} ||x_b||^q <= 1 / (c^q P) } over all blocks.
/// Some class must hold at most a 1/P share of the q-mass.
Covering residue_cover(std::shared_ptr<const BlockSpace> space, std::size_t pieces);

/// P slabs of equal width along x_0.
Covering slab_cover(std::shared_ptr<const BlockSpace> space, std::size_t pieces);

/// The single piece B_X.
Covering trivial_cover(std::shared_ptr<const BlockSpace> space);

enum class Split { Alternating, Halves };

/// { x in B : +-x_0 <= alpha - beta sum_{i in I+-} x_i^2 } with I+ and I-
/// partitioning {1, ..., N-1}. Covers B exactly when beta <= 2 alpha.
Covering two_piece_family(std::shared_ptr<const BlockSpace> space, double alpha, double beta,
                          Split split = Split::Alternating);

enum class NormalFamily { Coordinate, Gaussian };

/// Random hyperplane refinement of B: `complexity` arrangement cuts applied
/// to every cell they cross, then binary splits of uniformly chosen cells
/// through a random interior point until `pieces` cells exist. Every piece is
/// B intersected with halfspaces, and cells with no interior sample are never
/// created.
Covering random_convex_cover(std::shared_ptr<const BlockSpace> space, std::size_t pieces,
                             std::size_t complexity, std::uint64_t seed,
                             NormalFamily family = NormalFamily::Coordinate);

/// Wraps arbitrary pieces with no certificate.
Covering custom_cover(std::shared_ptr<const BlockSpace> space, std::vector<ConvexBody> pieces,
                      std::string construction);

/// Checks the summed-inequality argument for cylinder coverings: equal
/// coefficients, signs summing to zero, disjoint block classes and
/// c^q * sum(levels) / coef >= 1. Returns the derivation text when it holds.
std::optional<std::string> cylinder_sum_argument(const Covering& cov);

/// Samples the ball and counts points in no piece. Failed when a miss is
/// found (the witness is the deepest miss); otherwise keeps Algebraic or
/// upgrades to Sampled. Cylinder covers also replay the summed-inequality
/// contradiction on 100 pseudo-points.
CoverCertificate verify_cover(const Covering& cov, std::size_t samples, std::uint64_t seed,
                              double tol = kFeasTol);

struct ReplayReport {
  std::size_t points = 0;
  std::size_t failures = 0;
};

/// Builds points satisfying every reversed piece inequality by scaling a
/// random direction and checks that each has norm > 1.
ReplayReport replay_contradiction(const Covering& cov, std::size_t points, std::uint64_t seed);

/// Number of pieces containing x.
std::size_t membership_count(const Covering& cov, std::span<const double> x, double tol = kFeasTol);

nlohmann::json to_json(const CoverCertificate& cert);
nlohmann::json to_json(const Covering& cov);
/// Certificates in the document are ignored; the algebraic check is redone.
Covering covering_from_json(const nlohmann::json& j);

}  // namespace covindex
