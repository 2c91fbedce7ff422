#pragma once

#include <optional>
#include <string>

#include "mixtoll/model.hpp"

namespace mixtoll {

enum class TollScheme { None, Differentiated, Anonymous, Epsilon, Marginal };

/// Parses "none", "differentiated", "anonymous", "epsilon" or "marginal".
TollScheme parse_toll_scheme(const std::string& name);
std::string to_string(TollScheme scheme);

/// Unset fields take their defaults: mu is the largest latency over roads
/// used by the reference routing, epsilon is 1e-3 * mu (1e-3 when mu is 0),
/// and big_p is mu + max_i latency(road i carrying all demand) + 1.
struct EpsilonTollParams {
  std::optional<double> mu;
  std::optional<double> epsilon;
  std::optional<double> big_p;
};

/// tau^j_i = a^j_i * (total optimal flow on i). The congestion matrix has one
/// block per road whose rows all equal a_i, so A_i^T z*_i has j-th entry
/// a^j_i * sum_j' z*^j'_i.
TollSchedule differentiated_tolls(const Network& net, const Routing& optimal);

/// tau^j_i = (min_j' a^j'_i) * (total optimal flow on i), the same for every type.
TollSchedule anonymous_tolls(const Network& net, const Routing& optimal);

/// Parallel networks only. Requires strictly increasing latencies and an
/// acyclic support graph for the reference routing. Own roads pay
/// mu - c_i(z*), roads used only by other types add epsilon, unused roads pay P.
TollSchedule epsilon_differentiated_tolls(const Network& net, const Routing& optimal,
                                          const EpsilonTollParams& params = {});

/// Flow-dependent externality toll a^j_i * (total flow on i) evaluated at z.
TollSchedule marginal_cost_tolls(const Network& net, const Routing& z);

/// tau^j_i = mu - c_i(z*_i) for every type on every road. Requires every road
/// to carry reference flow. Used to study equilibria confined to z*'s support.
TollSchedule same_roads_tolls(const Network& net, const Routing& optimal,
                              std::optional<double> mu = std::nullopt);

/// c_i(z) + mu - c_i(z*) on roads used by the reference routing, P elsewhere.
double standard_cost(const Network& net, const TollSchedule& tolls, const Eigen::MatrixXd& z,
                     std::size_t road);

/// Builds a schedule for the scheme; None yields zero tolls. The reference
/// routing is z* for every scheme except Marginal, where it is the flow at
/// which tolls are evaluated.
TollSchedule build_tolls(const Network& net, TollScheme scheme, const Routing& reference,
                         const EpsilonTollParams& params = {});

}  // namespace mixtoll
