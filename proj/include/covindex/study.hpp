#pragma once

// Experiment drivers: covering-index estimates, scaling fits, the two-piece
// Hilbert-space search, renorming checks and asymptotic moduli.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covindex/cover.hpp"
#include "covindex/derive.hpp"
#include "covindex/inradius.hpp"

namespace covindex {

/// Known upper bound for two pieces of the Hilbert ball; a comparison point
/// in reports, never asserted.
inline constexpr double kTwoPieceReference = 0.931;
/// Matching known lower bound.
inline constexpr double kTwoPieceLowerReference = 0.707;

enum class Strategy { Cylinders, Residue, TwoPiece, Slabs };
const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);
std::vector<Strategy> default_strategies();

struct ThetaEstimate {
  std::string space;
  std::size_t N = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  std::optional<double> upper;
  std::optional<double> lower;
  std::string kind;      // which certificate kind backs the number
  std::string strategy;  // winning construction
  std::size_t pieces = 0;
  std::string notes;
  nlohmann::json details = nlohmann::json::object();
};

struct PieceRadii {
  double max_value = 0.0;
  std::vector<double> values;
  CertificateKind kind = CertificateKind::Exact;
};

/// Inradius of every piece: exact coordinate solver where available, the
/// net-certified search otherwise.
PieceRadii piece_inradii(const Covering& cov, std::size_t k, std::uint64_t seed,
                         std::size_t search_budget = 48);

/// Builds the covers the strategies can produce for n pieces. Cylinders use
/// 2 ceil(n/2) pieces; the others use exactly n.
std::vector<Covering> strategy_covers(const std::shared_ptr<const BlockSpace>& space, std::size_t n,
                                      std::size_t k, const std::vector<Strategy>& strategies,
                                      std::uint64_t seed, std::vector<std::string>* skipped = nullptr);

/// upper = min over accepted covers of the largest piece inradius.
ThetaEstimate theta_upper(const std::shared_ptr<const BlockSpace>& space, std::size_t n, std::size_t k,
                          const std::vector<Strategy>& strategies, std::uint64_t seed);

struct ThetaLowerOptions {
  std::size_t complexity = 1;
  NormalFamily family = NormalFamily::Coordinate;
  std::vector<double> eps_grid;  // empty: skip the gz certification
  DeriveParams derive;
  std::size_t search_budget = 32;
};

/// lower = min over a random-cover corpus of the largest piece inradius; the
/// details also carry the largest grid eps with gz(eps) > n.
ThetaEstimate theta_lower(const std::shared_ptr<const BlockSpace>& space, std::size_t n, std::size_t k,
                          std::size_t corpus_size, std::uint64_t seed,
                          const ThetaLowerOptions& options = {});

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  std::size_t points = 0;
};

/// Least squares of log y on log x.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingReport {
  std::vector<ThetaEstimate> rows;
  SlopeFit fit;
};

ScalingReport scaling_study(const std::shared_ptr<const BlockSpace>& space,
                            const std::vector<std::size_t>& ns, std::size_t k,
                            const std::vector<Strategy>& strategies, std::uint64_t seed);

struct TwoPieceCandidate {
  double alpha = 0.5;
  double beta = 1.0;
  Split split = Split::Alternating;
  double value = 1.0;
};

struct TwoPieceReport {
  std::size_t N = 0;
  std::size_t k = 1;
  std::size_t iterations = 0;
  TwoPieceCandidate best;
  std::size_t verify_samples = 0;
  std::size_t verify_misses = 0;
  double gap_to_reference = 0.0;  // best.value - 0.931
  std::vector<std::pair<std::size_t, double>> sweep;
  bool sweep_nonincreasing = true;
  std::optional<double> disk_lower;
  std::size_t disk_corpus = 0;
};

/// Minimizes the largest piece inradius of two_piece_family over (alpha,
/// beta, split) among parameters that cover the ball.
TwoPieceCandidate optimize_two_piece(const std::shared_ptr<const BlockSpace>& space, std::size_t k,
                                     std::size_t iterations, std::uint64_t seed);

TwoPieceReport two_piece_search(std::size_t N, std::size_t k, std::size_t iterations, std::uint64_t seed,
                                const std::vector<std::size_t>& sweep_ns = {8, 16, 32, 64},
                                std::size_t disk_corpus = 1000);

struct RenormReport {
  double lambda = 1.0;
  ThetaEstimate base;
  ThetaEstimate renormed;
  double low = 0.0;
  double high = 0.0;
  double tol = 0.02;
  bool holds = true;
};

/// Weights lambda on even blocks and 1/lambda on odd blocks.
std::vector<double> alternating_weights(const BlockSpace& space, double lambda);

RenormReport renorm_equivalence_check(const std::shared_ptr<const BlockSpace>& space,
                                      const std::vector<double>& weights, std::size_t n, std::size_t k,
                                      std::uint64_t seed, const std::vector<Strategy>& strategies = default_strategies());

struct ModulusEstimate {
  std::string space;
  std::size_t k = 1;
  std::size_t samples = 0;
  std::vector<double> epsilon;
  std::vector<double> delta_bar;  // asymptotic uniform convexity
  std::vector<double> rho_bar;    // asymptotic uniform smoothness
};

/// Both moduli over coordinate subspaces of codimension <= k, with unit
/// vectors x supported on at most k coordinates (the finite stand-in for
/// finitely supported vectors, whose support the subspace can avoid).
ModulusEstimate moduli_estimate(const BlockSpace& space, const std::vector<double>& epsilon_grid,
                                std::size_t k, std::uint64_t seed, std::size_t samples = 256);

struct CoherenceRow {
  std::size_t n = 0;
  double epsilon = 0.0;
  std::optional<std::size_t> gz;  // empty means overflow
  double min_cover_inradius = 1.0;
  std::string weakest;
  bool applies = false;  // gz > n
  bool ok = true;        // applies => every cover has inradius >= eps - 0.02
};

/// For every eps with gz(eps) > n, every constructed n-piece cover must keep a
/// piece of inradius >= eps - 0.02.
std::vector<CoherenceRow> gz_cover_coherence(const std::shared_ptr<const BlockSpace>& space,
                                             const std::vector<std::size_t>& ns,
                                             const std::vector<double>& eps_grid, std::size_t k,
                                             const DeriveParams& params);

nlohmann::json to_json(const ThetaEstimate& e);
nlohmann::json to_json(const SlopeFit& f);
nlohmann::json to_json(const TwoPieceReport& r);
nlohmann::json to_json(const RenormReport& r);
nlohmann::json to_json(const ModulusEstimate& m);

}  // namespace covindex
