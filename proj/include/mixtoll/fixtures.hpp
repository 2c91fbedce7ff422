#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixtoll/scenario.hpp"

namespace mixtoll::fixtures {

/// Two parallel roads, c1 = k z^1 + z^2 and c2 = z^1 + k z^2, unit demands.
Network example_a(double k);

/// Road 1 constant at 1; road 2 = (k z^1 + z^2)/(sqrt(k)+1); demands (1/sqrt(k), 1).
Network example_b(double k);

/// Single type: a constant road of latency 1 beside a road of latency z.
Network pigou();

/// Four nodes, five edges, two vehicle types and two OD pairs (3 and 2 paths).
Network general_two_od();

/// Names accepted by bundled_scenario.
std::vector<std::string> bundled_names();

/// example_a_k1.5, example_a_k2, example_a_k3, example_a_k4, example_b_k4,
/// pigou and general_two_od; nullopt for other names.
std::optional<ScenarioFile> bundled_scenario(const std::string& name);

}  // namespace mixtoll::fixtures
