#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixtoll/equilibrium.hpp"
#include "mixtoll/model.hpp"
#include "mixtoll/tolling.hpp"

namespace mixtoll {

/// Untolled PoA upper bound: 4/(4-k) for k <= 3, 4k/3 above. Throws for k < 1.
double lambda_bound(double k);

/// Anonymous-toll PoA upper bound 4k^2/(3k+1). Throws for k < 1.
double anonymous_bound(double k);

struct LowerBoundCurves {
  double untolled_a = 0.0;  // k
  double untolled_b = 0.0;  // 1 + k/(2 sqrt(k) + 1)
  /// Worst anonymous-tolled cost (7k+3)/4 - 1/(k+1) on the two-road example,
  /// raw and divided by that example's optimal cost 2.
  double anonymous_unrestricted_cost = 0.0;
  double anonymous_unrestricted_ratio = 0.0;
};
LowerBoundCurves lower_bound_curves(double k);

enum class SegmentOrder {
  Input,               // segments follow the scenario's type order
  NonincreasingSlope,  // types relabelled per road so slopes are nonincreasing
};

/// Single-commodity piecewise-linear latency built from one road's
/// equilibrium flows: flow is counted as type 1 up to zhat^1, then as type 2,
/// and so on; everything past the last breakpoint is counted as the last type.
struct AggregatedLatency {
  std::size_t road = 0;
  /// Interior breakpoints v^1 .. v^{m-1} (v^0 = 0 and v^m = infinity implied).
  std::vector<double> breakpoints;
  std::vector<double> segment_slopes;
  double base = 0.0;

  double operator()(double f) const;
  /// Value at the left end of segment s and the segment index holding f.
  double value_at_segment_start(std::size_t s) const;
  std::size_t segment_of(double f) const;
};

struct Aggregation {
  std::vector<AggregatedLatency> latencies;
  Eigen::VectorXd f_hat;

  /// L(f) = sum_i f_i l_i(f_i).
  double total_cost(const Eigen::VectorXd& f) const;
};

/// Parallel networks only.
Aggregation aggregate(const Network& net, const Routing& zhat,
                      SegmentOrder order = SegmentOrder::Input);

/// Minimiser of L over {f >= 0, sum f = D}. Each road's f l(f) is convex on
/// every segment, so all segment combinations are solved exactly by scanning
/// the breakpoints of the equalised marginal costs.
struct AggregateOptimum {
  Eigen::VectorXd flows;
  double cost = 0.0;
};
AggregateOptimum minimize_aggregate(const Aggregation& agg, double total_demand);

struct AggregationReport {
  double social_cost = 0.0;        // C(zhat)
  double aggregated_cost = 0.0;    // L(f_hat)
  bool f_hat_is_equilibrium = false;
  double equilibrium_residual = 0.0;
  double optimal_aggregated_cost = 0.0;  // L(f*)
  Eigen::VectorXd optimal_flows;
  double optimal_social_cost = 0.0;      // C(z*)
  double k = 1.0;
  /// Chain L(f*) <= L(f(z*)) <= sum_i F*_i k c_i(w_i(z*)) <= k C(z*).
  double aggregated_cost_of_optimum = 0.0;
  double reassignment_bound = 0.0;

  bool cost_identity_holds = false;  // |L(f_hat) - C(zhat)| <= 1e-9 (relative)
  bool agg_poa_holds = false;        // L(f_hat) <= 4/3 L(f*) + 1e-6 (relative)
  bool agg_opt_cost_holds = false;   // L(f*) <= k C(z*) + 1e-6 (relative); true when k unbounded
  bool all_hold() const {
    return cost_identity_holds && f_hat_is_equilibrium && agg_poa_holds && agg_opt_cost_holds;
  }
};

/// Throws InvalidArgument when zhat is not an untolled equilibrium.
AggregationReport verify_aggregation(const Network& net, const Routing& zhat,
                                     const Routing& optimal,
                                     SegmentOrder order = SegmentOrder::NonincreasingSlope);

/// Single-road ratio expressions whose suprema bound the PoA. Slopes are
/// relabelled nonincreasing where the construction needs it. A zero
/// denominator yields 0.
double beta_ck_ratio(const std::vector<double>& slopes, double intercept,
                     const std::vector<double>& zhat, const std::vector<double>& z);
double beta_l_ratio(const std::vector<double>& slopes, double intercept,
                    const std::vector<double>& zhat, double f);
/// Anonymous toll on the road is min slope times f.
double gamma_ratio(const std::vector<double>& slopes, double intercept,
                   const std::vector<double>& zhat, double f);

struct SamplerResult {
  double k = 1.0;
  std::size_t samples = 0;
  double max_beta_ck = 0.0;
  double max_beta_l = 0.0;
  double max_gamma_ck = 0.0;
  double bound_beta_ck = 0.0;   // k/4
  double bound_beta_l = 0.25;   // 1/4
  double bound_gamma_ck = 0.0;  // (k-1)/(4k)
};

SamplerResult beta_gamma_sampler(double k, std::size_t samples, std::uint64_t seed);

/// The ratio expressions evaluated at their analytic maximisers: slopes (k, 1),
/// zhat all on the steeper type, and f = f_hat/2; for the multitype beta the
/// comparison flow is all on the shallower type with total k f_hat/2.
SamplerResult analytic_maximizers(double k);

struct PartitionDiagnostics {
  std::vector<std::size_t> used_roads;  // roads carrying reference flow
  std::vector<std::size_t> i1, i2, i3;
  Eigen::VectorXd standard_costs;
  double c_low = 0.0;
  double c_high = 0.0;
  bool deviation = false;
  /// I1 and I2 intersect: the contradiction case of the uniqueness argument.
  bool contradiction = false;
  bool greater_flow_holds = true;  // std cost >= reference std cost on I1
  bool lesser_flow_holds = true;   // std cost <= reference std cost on I2
  /// Evaluated only when zhat is a deviating equilibrium under the tolls.
  std::optional<bool> relative_costs_holds;
  std::size_t closure_steps = 0;   // applications of Phi until fixed point (max over I1, I2)

  bool flags_hold() const {
    return greater_flow_holds && lesser_flow_holds && relative_costs_holds.value_or(true);
  }
};

/// Requires a schedule from epsilon_differentiated_tolls.
PartitionDiagnostics partition_roads(const Network& net, const TollSchedule& tolls,
                                     const Routing& zhat, double tol = 1e-9);

/// Phi(A): A plus every road sharing a reference-flow type with a road in A.
std::vector<std::size_t> phi_closure_step(const Eigen::MatrixXd& reference,
                                          const std::vector<std::size_t>& roads);

enum class BoundName { LambdaUntolled, Anonymous, None };
std::string to_string(BoundName name);

struct PoAReport {
  double optimal_cost = 0.0;
  double worst_eq_cost = 0.0;
  double empirical_poa = 1.0;
  double k = 1.0;
  double bound_value = 0.0;
  BoundName bound_name = BoundName::None;
  bool satisfied = true;
  TollSchedule tolls;
  Routing optimal;
  Routing worst;
};

/// Builds the scheme's tolls from the exact optimum, then compares the worst
/// enumerated equilibrium against the applicable bound (1e-6 slack after
/// normalising by the optimal cost).
PoAReport poa_report(const Network& net, TollScheme scheme = TollScheme::None,
                     const EpsilonTollParams& params = {});

/// Same, for an explicit schedule; bound selects which theorem applies.
PoAReport poa_report(const Network& net, const TollSchedule& tolls, BoundName bound);

}  // namespace mixtoll
