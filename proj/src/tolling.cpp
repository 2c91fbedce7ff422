#include "mixtoll/tolling.hpp"

#include <algorithm>
#include <cmath>

namespace mixtoll {

namespace {

void require_shape(const Network& net, const Routing& z, const char* what) {
  if (z.edge_flows.rows() != static_cast<Eigen::Index>(net.num_roads()) ||
      z.edge_flows.cols() != static_cast<Eigen::Index>(net.num_types())) {
    throw DimensionMismatch(std::string(what) + ": routing must be " +
                            std::to_string(net.num_roads()) + "x" + std::to_string(net.num_types()));
  }
}

Eigen::MatrixXd externality(const Network& net, const Eigen::MatrixXd& z, bool anonymous) {
  const Eigen::Index n = z.rows(), m = z.cols();
  Eigen::MatrixXd tau(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& slopes = net.road(static_cast<std::size_t>(i)).slopes;
    const double load = z.row(i).sum();
    const double least = *std::min_element(slopes.begin(), slopes.end());
    for (Eigen::Index j = 0; j < m; ++j) {
      tau(i, j) = (anonymous ? least : slopes[static_cast<std::size_t>(j)]) * load;
    }
  }
  return tau;
}

double default_mu(const Network& net, const Eigen::MatrixXd& z) {
  const Eigen::VectorXd c = road_latencies(net, z);
  double mu = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if ((z.row(i).array() > kSupportTol).any()) mu = std::max(mu, c[i]);
  }
  return mu;
}

double default_big_p(const Network& net, double mu) {
  double worst = 0.0;
  for (const auto& road : net.roads()) worst = std::max(worst, latency(road, net.demands()));
  return mu + worst + 1.0;
}

}  // namespace

TollScheme parse_toll_scheme(const std::string& name) {
  if (name == "none") return TollScheme::None;
  if (name == "differentiated") return TollScheme::Differentiated;
  if (name == "anonymous") return TollScheme::Anonymous;
  if (name == "epsilon") return TollScheme::Epsilon;
  if (name == "marginal") return TollScheme::Marginal;
  throw InvalidArgument("scheme: unknown toll scheme '" + name + "'");
}

std::string to_string(TollScheme scheme) {
  switch (scheme) {
    case TollScheme::None: return "none";
    case TollScheme::Differentiated: return "differentiated";
    case TollScheme::Anonymous: return "anonymous";
    case TollScheme::Epsilon: return "epsilon";
    case TollScheme::Marginal: return "marginal";
  }
  return "none";
}

TollSchedule differentiated_tolls(const Network& net, const Routing& optimal) {
  require_feasible(net, optimal);
  return TollSchedule(externality(net, optimal.edge_flows, false));
}

TollSchedule anonymous_tolls(const Network& net, const Routing& optimal) {
  require_feasible(net, optimal);
  return TollSchedule(externality(net, optimal.edge_flows, true));
}

TollSchedule marginal_cost_tolls(const Network& net, const Routing& z) {
  require_feasible(net, z);
  return TollSchedule(externality(net, z.edge_flows, false));
}

TollSchedule epsilon_differentiated_tolls(const Network& net, const Routing& optimal,
                                          const EpsilonTollParams& params) {
  if (!net.is_parallel()) throw InvalidArgument("epsilon tolls: parallel networks only");
  require_feasible(net, optimal);
  require_shape(net, optimal, "epsilon tolls");
  if (!net.satisfies_strict_increase()) {
    throw InvalidArgument("epsilon tolls: every slope must be positive (strictly increasing latencies)");
  }
  const Eigen::MatrixXd& z = optimal.edge_flows;
  const SupportGraph g = support_graph(z);
  if (!is_acyclic(g)) throw InvalidArgument("epsilon tolls: reference routing has a cyclic support graph");

  const double floor_mu = default_mu(net, z);
  const double mu = params.mu.value_or(floor_mu);
  if (!std::isfinite(mu) || mu < floor_mu - 1e-12 * (1.0 + floor_mu)) {
    throw InvalidArgument("mu: must be at least the largest used-road latency " +
                          std::to_string(floor_mu) + " for nonnegative tolls");
  }
  const double epsilon = params.epsilon.value_or(mu > 0.0 ? 1e-3 * mu : 1e-3);
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon: must be positive");
  const double floor_p = default_big_p(net, mu);
  const double big_p = params.big_p.value_or(floor_p);
  if (!std::isfinite(big_p) || big_p < floor_p) {
    throw InvalidArgument("big_p: must be at least " + std::to_string(floor_p));
  }

  const Eigen::VectorXd c = road_latencies(net, z);
  const Eigen::Index n = z.rows(), m = z.cols();
  Eigen::MatrixXd tau(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool used = (z.row(i).array() > kSupportTol).any();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!used) {
        tau(i, j) = big_p;
      } else {
        tau(i, j) = std::max(0.0, mu - c[i]) + (z(i, j) > kSupportTol ? 0.0 : epsilon);
      }
    }
  }
  return TollSchedule(tau, EpsilonTollMetadata{z, mu, epsilon, big_p});
}

TollSchedule same_roads_tolls(const Network& net, const Routing& optimal, std::optional<double> mu) {
  if (!net.is_parallel()) throw InvalidArgument("same-roads tolls: parallel networks only");
  require_feasible(net, optimal);
  const Eigen::MatrixXd& z = optimal.edge_flows;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!(z.row(i).array() > kSupportTol).any()) {
      throw InvalidArgument("same-roads tolls: road " + std::to_string(i) + " carries no reference flow");
    }
  }
  const double floor_mu = default_mu(net, z);
  const double offset = mu.value_or(floor_mu);
  if (offset < floor_mu - 1e-12 * (1.0 + floor_mu)) {
    throw InvalidArgument("mu: must be at least " + std::to_string(floor_mu));
  }
  const Eigen::VectorXd c = road_latencies(net, z);
  Eigen::MatrixXd tau(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) tau.row(i).setConstant(std::max(0.0, offset - c[i]));
  return TollSchedule(tau);
}

double standard_cost(const Network& net, const TollSchedule& tolls, const Eigen::MatrixXd& z,
                     std::size_t road) {
  const auto& meta = tolls.epsilon_metadata();
  if (!meta) throw InvalidArgument("standard_cost: toll schedule lacks epsilon metadata");
  if (road >= net.num_roads()) {
    throw InvalidArgument("road: index " + std::to_string(road) + " out of range");
  }
  const auto i = static_cast<Eigen::Index>(road);
  if (!(meta->reference_flows.row(i).array() > kSupportTol).any()) return meta->big_p;
  const Eigen::VectorXd zi = z.row(i).transpose();
  const Eigen::VectorXd zs = meta->reference_flows.row(i).transpose();
  return latency(net.road(road), zi) + meta->mu - latency(net.road(road), zs);
}

TollSchedule build_tolls(const Network& net, TollScheme scheme, const Routing& reference,
                         const EpsilonTollParams& params) {
  switch (scheme) {
    case TollScheme::None: return TollSchedule::zero(net);
    case TollScheme::Differentiated: return differentiated_tolls(net, reference);
    case TollScheme::Anonymous: return anonymous_tolls(net, reference);
    case TollScheme::Epsilon: return epsilon_differentiated_tolls(net, reference, params);
    case TollScheme::Marginal: return marginal_cost_tolls(net, reference);
  }
  return TollSchedule::zero(net);
}

}  // namespace mixtoll
