#pragma once

// Oracle-backed closed bounded convex subsets of a BlockSpace.

#include <cstdint>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "covindex/space.hpp"

namespace covindex {

class ConvexBody;

/// { x : ||x - center|| <= radius }
struct NormBall {
  Point center;
  double radius = 1.0;
};

/// { x : <normal, x> <= offset }. Unbounded on its own; used inside an
/// Intersection with a ball.
struct Halfspace {
  Point normal;
  double offset = 0.0;
};

/// { x in B_X : sign * x_0 <= level - coef * sum_{b in blocks} ||x_b||^q }
///
/// With coef = c^q * n, q the lower-estimate exponent, level 1/2 and the
/// blocks b >= 1 with b = j (mod 2n), this is piece j of the 2n-set covering
/// built from a lower q-estimate. sign = 0 drops the x_0 term entirely.
/// residue/modulus are kept as labels when the block set is a residue class.
struct QCylinder {
  int sign = -1;
  std::vector<std::size_t> blocks;
  double coef = 1.0;
  double q = 2.0;
  double level = 0.5;
  double c = 1.0;
  std::size_t residue = 0;
  std::size_t modulus = 0;

  /// Residue-class cylinder: blocks b >= first with b = residue (mod modulus),
  /// coef = c^q * modulus / 2.
  static QCylinder residue_class(const BlockSpace& space, int sign, std::size_t residue,
                                 std::size_t modulus, double c, double q, double level,
                                 std::size_t first_block = 1);
};

struct Intersection {
  std::vector<ConvexBody> parts;
};

using Shape = std::variant<NormBall, Halfspace, QCylinder, Intersection>;

struct Violation {
  double value;    // <= 0 inside (up to tolerance)
  Point gradient;  // outward subgradient of the most violated constraint
};

class ConvexBody {
 public:
  ConvexBody(std::shared_ptr<const BlockSpace> space, Shape shape);

  static ConvexBody ball(std::shared_ptr<const BlockSpace> space, Point center, double radius);
  static ConvexBody unit_ball(std::shared_ptr<const BlockSpace> space);
  static ConvexBody halfspace(std::shared_ptr<const BlockSpace> space, Point normal, double offset);
  static ConvexBody cylinder(std::shared_ptr<const BlockSpace> space, QCylinder cyl);
  static ConvexBody intersect(std::vector<ConvexBody> parts);

  const BlockSpace& space() const { return *space_; }
  const std::shared_ptr<const BlockSpace>& space_ptr() const { return space_; }
  const Shape& shape() const { return shape_; }

  /// Largest constraint value; membership is value <= tol. Halfspace values
  /// are normalized by the dual norm of the normal, so they read as distances.
  double violation(std::span<const double> x) const;
  Violation violation_with_gradient(std::span<const double> x) const;

  /// Declared bounding ball (center, radius); radius = inf when unbounded.
  std::pair<Point, double> bounding_ball() const;

 private:
  std::shared_ptr<const BlockSpace> space_;
  Shape shape_;
};

bool contains(const ConvexBody& body, std::span<const double> x, double tol = kFeasTol);

struct SupportValue {
  double value;
  bool approximate;
  Point argmax;
};

/// h(d) = sup { <d, x> : x in body }. Closed form for balls and for a ball
/// intersected with coordinate halfspaces of a coordinate-block space; a
/// feasible-ascent estimate otherwise (approximate = true).
SupportValue support(const ConvexBody& body, std::span<const double> direction);

/// Outward normal separating x from the body, when x lies outside.
std::optional<Point> separate(const ConvexBody& body, std::span<const double> x,
                              double tol = kFeasTol);

struct ConvexityReport {
  std::size_t trials = 0;
  std::size_t member_pairs = 0;
  std::size_t violations = 0;
};

/// Samples member pairs and checks convex combinations for membership.
ConvexityReport convexity_selftest(const ConvexBody& body, std::size_t trials, std::uint64_t seed);

/// Finite-functional weak neighbourhood { x : |<a_i, x - center>| < half_width }.
struct SlabNeighborhood {
  Point center;
  std::vector<Point> functionals;
  double half_width = 0.05;

  bool contains(std::span<const double> x) const;
};

/// A ball intersected with coordinate halfspaces, in coordinates relative to
/// the ball center: { center + z : ||z|| <= radius, lo <= z <= hi }.
struct BallBox {
  double radius;
  Point center;
  std::vector<double> lo, hi;
};

/// Recognizes balls and ball-halfspace intersections whose halfspaces are
/// coordinate aligned, in a coordinate-block space.
std::optional<BallBox> ball_box_form(const ConvexBody& body);

nlohmann::json to_json(const ConvexBody& body);
ConvexBody body_from_json(std::shared_ptr<const BlockSpace> space, const nlohmann::json& j);

}  // namespace covindex
