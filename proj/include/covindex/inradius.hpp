#pragma once

// Codimension-budgeted inradius
//
//   rho_k(A) = sup { r : exists x, Y with codim Y <= k, x + r (B_X cap Y) in A }.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "covindex/body.hpp"

namespace covindex {

struct Subspace {
  enum class Kind { CoordinateComplement, GeneralBasis };

  Kind kind = Kind::CoordinateComplement;
  /// CoordinateComplement: Y = span{e_i : i not in dropped}.
  std::vector<std::size_t> dropped;
  /// GeneralBasis: Y is the Euclidean orthogonal complement of these
  /// orthonormal directions (k vectors rather than an N - k basis).
  std::vector<Point> normals;

  std::size_t codim() const {
    return kind == Kind::CoordinateComplement ? dropped.size() : normals.size();
  }

  static Subspace coordinates(std::vector<std::size_t> dropped);
  /// Gram-Schmidt on the given directions; throws if they are dependent.
  static Subspace general(std::vector<Point> directions);

  /// Euclidean projection onto Y.
  Point project(std::span<const double> v) const;
};

enum class CertificateKind { Exact, LowerWitness, UpperBound };
const char* to_string(CertificateKind kind);

struct InradiusCertificate {
  double value = 0.0;
  Point center;  // empty when the body is empty
  Subspace subspace;
  CertificateKind kind = CertificateKind::Exact;
  std::string notes;
};

nlohmann::json to_json(const Subspace& y);
nlohmann::json to_json(const InradiusCertificate& cert);

/// True for shapes with a closed-form coordinate solver: balls, a ball cut
/// by coordinate halfspaces (coordinate-block spaces), and QCylinders whose
/// exponent equals the outer exponent of the space.
bool coordinate_supported(const ConvexBody& body);

struct DroppedOptimum {
  double value = 0.0;
  Point center;
};

/// Exact optimum over centers for the fixed subspace Y = complement of the
/// dropped coordinates. Throws Unsupported for other shapes.
DroppedOptimum inradius_for_dropped(const ConvexBody& body, const std::vector<std::size_t>& dropped);

/// Same optimum computed directly on a ball-box description.
DroppedOptimum ball_box_inradius(const BlockSpace& space, const BallBox& box,
                                 const std::vector<std::size_t>& dropped);

/// Exact optimum over coordinate subspaces with at most k dropped coordinates.
InradiusCertificate inradius_coordinate(const ConvexBody& body, std::size_t k);

/// Alternating search over centers and general subspaces. The returned value
/// is a LowerWitness: x + r (B_X cap Y) was checked on a net of basis and
/// random directions refined by local ascent.
InradiusCertificate inradius_search(const ConvexBody& body, std::size_t k, std::size_t budget,
                                    std::uint64_t seed);

/// (M / coef)^(1/q) with M = level + max |x_0| over B_X, clamped to 1.
/// Throws BudgetTooLarge when k can remove every residue-class coordinate.
double inradius_upper_family(const ConvexBody& body, std::size_t k);

/// Smallest distance along the sampled directions from x to the boundary of
/// the body inside x + Y; i.e. the radius certified by the net.
double net_radius(const ConvexBody& body, std::span<const double> center, const Subspace& y,
                  std::size_t random_directions, std::uint64_t seed);

}  // namespace covindex
