#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mixtoll {

/// Flows at or below this value count as "no flow" in every support predicate.
inline constexpr double kSupportTol = 1e-9;

/// Default cap on enumerated simple paths per origin-destination pair.
inline constexpr std::size_t kDefaultPathCap = 64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InfeasibleRouting : public Error {
 public:
  using Error::Error;
};

class SizeLimitExceeded : public Error {
 public:
  using Error::Error;
};

/// c(z) = intercept + sum_j slopes[j] * z[j]; every vehicle type sees the same latency.
struct AffineLatency {
  std::vector<double> slopes;
  double intercept = 0.0;

  bool strictly_increasing() const;
  bool operator==(const AffineLatency&) const = default;
};

enum class NetworkKind { Parallel, General };

/// Demand of one vehicle type between two nodes of a general network.
struct OdDemand {
  std::size_t type = 0;
  std::size_t origin = 0;
  std::size_t destination = 0;
  double demand = 0.0;

  bool operator==(const OdDemand&) const = default;
};

/// One routing decision unit: a vehicle type with a fixed demand and a set of
/// alternative paths (edge-index lists). On a parallel network every type is
/// one commodity and every road is a one-edge path.
struct Commodity {
  std::size_t type = 0;
  double demand = 0.0;
  std::vector<std::vector<std::size_t>> paths;
};

class Network {
 public:
  static Network parallel(std::vector<std::string> types, std::vector<AffineLatency> roads,
                          std::vector<double> demands);

  /// Paths per OD entry may be supplied; an empty list for an entry means
  /// "enumerate simple paths", failing if more than path_cap exist.
  static Network general(std::vector<std::string> types, std::size_t node_count,
                         std::vector<AffineLatency> edges,
                         std::vector<std::pair<std::size_t, std::size_t>> endpoints,
                         std::vector<OdDemand> od_demands,
                         std::vector<std::vector<std::vector<std::size_t>>> paths = {},
                         std::size_t path_cap = kDefaultPathCap);

  NetworkKind kind() const { return kind_; }
  bool is_parallel() const { return kind_ == NetworkKind::Parallel; }
  std::size_t num_roads() const { return roads_.size(); }
  std::size_t num_types() const { return types_.size(); }
  const std::vector<std::string>& types() const { return types_; }
  const std::vector<AffineLatency>& roads() const { return roads_; }
  const AffineLatency& road(std::size_t i) const { return roads_.at(i); }

  /// Per-type demand. For general networks this is the sum over OD entries.
  const std::vector<double>& demands() const { return demands_; }

  std::size_t node_count() const { return node_count_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& endpoints() const { return endpoints_; }
  const std::vector<OdDemand>& od_demands() const { return od_demands_; }

  const std::vector<Commodity>& commodities() const { return commodities_; }

  /// Total number of (commodity, path) flow variables.
  std::size_t num_path_variables() const;

  bool satisfies_strict_increase() const;

  bool operator==(const Network&) const;

 private:
  Network() = default;

  NetworkKind kind_ = NetworkKind::Parallel;
  std::vector<std::string> types_;
  std::vector<AffineLatency> roads_;
  std::vector<double> demands_;
  std::size_t node_count_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> endpoints_;
  std::vector<OdDemand> od_demands_;
  std::vector<Commodity> commodities_;
};

/// Enumerates the simple directed paths from origin to destination, in DFS
/// order over ascending edge index.
std::vector<std::vector<std::size_t>> enumerate_simple_paths(
    std::size_t node_count, const std::vector<std::pair<std::size_t, std::size_t>>& endpoints,
    std::size_t origin, std::size_t destination, std::size_t cap = kDefaultPathCap);

/// Per-road per-type flows (n x m). General networks also carry the per-path
/// flows of each commodity, and edge_flows is their aggregation.
struct Routing {
  Eigen::MatrixXd edge_flows;
  std::vector<Eigen::VectorXd> path_flows;
};

Routing make_parallel_routing(const Network& net, const Eigen::MatrixXd& edge_flows);

/// Builds a routing from the flat vector of all (commodity, path) flows, in
/// commodity order. Works for both network kinds.
Routing make_path_routing(const Network& net, const Eigen::VectorXd& flat_path_flows);

/// Flat (commodity, path) flow vector of a routing.
Eigen::VectorXd flatten_path_flows(const Network& net, const Routing& z);

/// Throws InfeasibleRouting when z has negative entries, misses a demand, or
/// its edge flows disagree with its path flows.
void require_feasible(const Network& net, const Routing& z, double tol = 1e-7);
bool is_feasible(const Network& net, const Routing& z, double tol = 1e-7);

/// Tolls in latency units, one per road and vehicle type.
struct EpsilonTollMetadata {
  Eigen::MatrixXd reference_flows;  // the acyclic optimal routing the tolls were built from
  double mu = 0.0;
  double epsilon = 0.0;
  double big_p = 0.0;
};

class TollSchedule {
 public:
  TollSchedule() = default;
  explicit TollSchedule(Eigen::MatrixXd tolls,
                        std::optional<EpsilonTollMetadata> metadata = std::nullopt);

  static TollSchedule zero(const Network& net);

  const Eigen::MatrixXd& tolls() const { return tolls_; }
  double operator()(std::size_t road, std::size_t type) const { return tolls_(road, type); }
  const std::optional<EpsilonTollMetadata>& epsilon_metadata() const { return metadata_; }

 private:
  Eigen::MatrixXd tolls_;
  std::optional<EpsilonTollMetadata> metadata_;
};

double latency(const AffineLatency& road, std::span<const double> flows);
double latency(const AffineLatency& road, const Eigen::Ref<const Eigen::VectorXd>& flows);
double tolled_latency(const AffineLatency& road, std::span<const double> flows, double toll);

/// Latency of every road under edge flows z (n x m).
Eigen::VectorXd road_latencies(const Network& net, const Eigen::MatrixXd& edge_flows);

/// Sum over roads of total flow times latency. Validates feasibility.
double social_cost(const Network& net, const Routing& z);
/// Same quantity without the feasibility check.
double social_cost(const Network& net, const Eigen::MatrixXd& edge_flows);

/// max over roads and type pairs of a^j_i / a^j'_i. Roads whose slopes are all
/// zero are skipped; a road mixing zero and positive slopes makes the ratio
/// unbounded, reported as +infinity.
double degree_of_asymmetry(const Network& net);
inline bool is_unbounded(double k) { return k == std::numeric_limits<double>::infinity(); }

/// Bipartite roads x types graph with an edge wherever flow exceeds tol.
class SupportGraph {
 public:
  SupportGraph(std::size_t num_roads, std::size_t num_types,
               std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t num_roads() const { return num_roads_; }
  std::size_t num_types() const { return num_types_; }
  /// (road, type) pairs in lexicographic order.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  bool has_edge(std::size_t road, std::size_t type) const;
  std::vector<std::size_t> roads_used_by(std::size_t type) const;
  std::vector<std::size_t> types_on(std::size_t road) const;

  bool operator==(const SupportGraph&) const = default;

 private:
  std::size_t num_roads_;
  std::size_t num_types_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

SupportGraph support_graph(const Eigen::MatrixXd& edge_flows, double tol = kSupportTol);
SupportGraph support_graph(const Routing& z, double tol = kSupportTol);

bool is_acyclic(const SupportGraph& g);

/// A shortest cycle as the alternating sequence road, type, road, type, ...;
/// the last type closes back to the first road. Empty when acyclic.
struct SupportCycle {
  std::vector<std::size_t> roads;
  std::vector<std::size_t> types;  // types[l] joins roads[l] and roads[(l+1) % L]
};
std::optional<SupportCycle> shortest_cycle(const SupportGraph& g);

}  // namespace mixtoll
