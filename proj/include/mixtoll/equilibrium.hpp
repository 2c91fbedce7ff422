#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mixtoll/model.hpp"

namespace mixtoll {

/// Absolute slack on tolled-cost comparisons; ties count as satisfied.
inline constexpr double kEquilibriumTol = 1e-8;

class NoEquilibriumFound : public Error {
 public:
  using Error::Error;
};

/// Proof that a routing is a Wardrop equilibrium: every used path of each
/// commodity costs within tol of that commodity's cheapest path.
struct EquilibriumCertificate {
  SupportGraph support{0, 0, {}};
  /// Per commodity (per type on parallel networks): the cheapest tolled path cost.
  std::vector<double> common_costs;
  /// Largest excess of a used path's cost over its commodity's cheapest path.
  double residual = 0.0;
};

struct WardropViolation {
  std::size_t commodity = 0;
  std::size_t type = 0;
  std::size_t path = 0;  // road index on parallel networks
  double excess = 0.0;
};

struct WardropReport {
  std::optional<EquilibriumCertificate> certificate;
  std::optional<WardropViolation> violation;

  bool is_equilibrium() const { return certificate.has_value(); }
};

/// Throws InfeasibleRouting when z does not meet the demands.
WardropReport wardrop_check(const Network& net, const TollSchedule& tolls, const Routing& z,
                            double tol = kEquilibriumTol);

/// Tolled cost of every path of every commodity, flattened in commodity order.
Eigen::VectorXd tolled_path_costs(const Network& net, const TollSchedule& tolls, const Routing& z);

struct Equilibrium {
  Routing routing;
  EquilibriumCertificate certificate;
  double cost = 0.0;
  /// Point of a support pattern whose equilibria form a polytope of positive dimension.
  bool degenerate = false;
  /// Vertex centroid of such a polytope (all other degenerate members are vertices).
  bool interior = false;
};

struct EquilibriumSet {
  std::vector<Equilibrium> equilibria;
  bool exhaustive = false;
  /// Members (by index) spanning each degenerate polytope, centroid excluded.
  std::vector<std::vector<std::size_t>> degenerate_faces;
};

struct EnumerationOptions {
  double tol = kEquilibriumTol;
  /// Optional per-commodity bitmask of paths that may carry flow.
  std::vector<unsigned> allowed_paths;
};

/// Exhaustive support enumeration: for each choice of used paths per
/// commodity, solves {equal tolled cost on used paths, demand} and keeps
/// solutions with nonnegative flow and no cheaper unused path. Degenerate
/// patterns contribute their polytope vertices plus the vertex centroid.
EquilibriumSet enumerate_equilibria(const Network& net, const TollSchedule& tolls,
                                    const EnumerationOptions& options = {});

struct WorstEquilibrium {
  Routing routing;
  double cost = 0.0;
  /// True when the maximiser came from ascent inside a degenerate polytope.
  bool from_local_search = false;
};

/// Highest social cost over the enumerated equilibria, refined by conditional
/// gradient ascent over each degenerate polytope (approximate there).
WorstEquilibrium worst_equilibrium(const Network& net, const TollSchedule& tolls,
                                   double tol = kEquilibriumTol);
WorstEquilibrium worst_equilibrium(const Network& net, const EquilibriumSet& set,
                                   const TollSchedule& tolls, double tol = kEquilibriumTol);

struct BestResponseResult {
  Routing routing;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Round-robin damped best response: each commodity moves halfway toward its
/// exact best response to the others. converged=false is the non-convergence
/// outcome and still carries the last iterate and residual.
BestResponseResult iterate_best_response(const Network& net, const TollSchedule& tolls,
                                         const Routing& z0, std::size_t max_iterations = 10000,
                                         double tol = 1e-9);

}  // namespace mixtoll
