#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mixtoll/model.hpp"

namespace mixtoll {

/// Largest number of (commodity, path) variables the exact enumerators accept.
inline constexpr std::size_t kExactVariableCap = 12;

enum class SolveMode { Exact, Heuristic };
enum class SolveMethod { Enumeration, Multistart };

struct OptimizationResult {
  Routing routing;
  double cost = 0.0;
  SolveMethod method = SolveMethod::Enumeration;

  /// Enumeration certificate: the winning support (one path bitmask per
  /// commodity), its per-commodity stationarity multipliers, and how many
  /// stationary candidates were compared.
  std::vector<unsigned> support_pattern;
  std::vector<double> multipliers;
  std::size_t candidates_examined = 0;

  /// Multistart only: best cost minus the enumeration optimum, when the
  /// instance is small enough to compute it.
  std::optional<double> gap_estimate;
};

struct HeuristicOptions {
  std::uint64_t seed = 1;
  std::size_t restarts = 64;
  std::size_t max_iterations = 500;
};

/// Exact mode enumerates every face of the feasible polytope, solves the
/// stationarity system of the (indefinite) social cost on it, and keeps the
/// cheapest feasible stationary point; ties go to the lexicographically
/// smallest support. Heuristic mode runs seeded projected-gradient restarts.
OptimizationResult solve_optimal(const Network& net, SolveMode mode = SolveMode::Exact,
                                 const HeuristicOptions& heuristic = {});

/// Shifts flow around support-graph cycles of a parallel-network routing until
/// the support graph is a forest. Each shift moves the same amount along every
/// type of a shortest cycle, which keeps every road's total flow fixed; the
/// direction is the one that drains the smallest cycle edge. Social cost is
/// unchanged at an optimal input (the shift is a zero-gradient direction).
Routing make_acyclic(const Network& net, const Routing& z, double tol = kSupportTol);

}  // namespace mixtoll
