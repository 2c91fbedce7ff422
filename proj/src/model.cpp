#include "mixtoll/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace mixtoll {

namespace {

void require_nonnegative_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw InvalidArgument(what + ": must be finite");
  if (v < 0.0) throw InvalidArgument(what + ": must be nonnegative");
}

void validate_roads(const std::vector<AffineLatency>& roads, std::size_t m, const char* label) {
  if (roads.empty()) throw InvalidArgument(std::string(label) + ": must be non-empty");
  for (std::size_t i = 0; i < roads.size(); ++i) {
    const auto& r = roads[i];
    const std::string where = std::string(label) + "[" + std::to_string(i) + "]";
    if (r.slopes.size() != m) {
      throw DimensionMismatch(where + ".slopes: expected " + std::to_string(m) + " entries, got " +
                              std::to_string(r.slopes.size()));
    }
    for (double a : r.slopes) require_nonnegative_finite(a, where + ".slopes");
    require_nonnegative_finite(r.intercept, where + ".intercept");
  }
}

void validate_types(const std::vector<std::string>& types) {
  if (types.empty()) throw InvalidArgument("types: must be non-empty");
}

}  // namespace

bool AffineLatency::strictly_increasing() const {
  return std::all_of(slopes.begin(), slopes.end(), [](double a) { return a > 0.0; });
}

Network Network::parallel(std::vector<std::string> types, std::vector<AffineLatency> roads,
                          std::vector<double> demands) {
  validate_types(types);
  validate_roads(roads, types.size(), "roads");
  if (demands.size() != types.size()) {
    throw DimensionMismatch("demands: expected " + std::to_string(types.size()) +
                            " entries, got " + std::to_string(demands.size()));
  }
  for (double d : demands) require_nonnegative_finite(d, "demands");

  Network net;
  net.kind_ = NetworkKind::Parallel;
  net.types_ = std::move(types);
  net.roads_ = std::move(roads);
  net.demands_ = std::move(demands);
  net.node_count_ = 2;
  const std::size_t n = net.roads_.size();
  net.endpoints_.assign(n, {0, 1});
  for (std::size_t j = 0; j < net.types_.size(); ++j) {
    Commodity c;
    c.type = j;
    c.demand = net.demands_[j];
    for (std::size_t i = 0; i < n; ++i) c.paths.push_back({i});
    net.commodities_.push_back(std::move(c));
  }
  return net;
}

Network Network::general(std::vector<std::string> types, std::size_t node_count,
                         std::vector<AffineLatency> edges,
                         std::vector<std::pair<std::size_t, std::size_t>> endpoints,
                         std::vector<OdDemand> od_demands,
                         std::vector<std::vector<std::vector<std::size_t>>> paths,
                         std::size_t path_cap) {
  validate_types(types);
  validate_roads(edges, types.size(), "edges");
  if (endpoints.size() != edges.size()) {
    throw DimensionMismatch("edges: endpoint list length differs from edge list length");
  }
  if (node_count < 2) throw InvalidArgument("nodes: need at least two nodes");
  for (std::size_t e = 0; e < endpoints.size(); ++e) {
    auto [u, v] = endpoints[e];
    if (u >= node_count || v >= node_count) {
      throw InvalidArgument("edges[" + std::to_string(e) + "]: endpoint out of range");
    }
    if (u == v) throw InvalidArgument("edges[" + std::to_string(e) + "]: self loop");
  }
  if (od_demands.empty()) throw InvalidArgument("od: must be non-empty");
  if (!paths.empty() && paths.size() != od_demands.size()) {
    throw DimensionMismatch("paths: expected one path list per od entry");
  }

  Network net;
  net.kind_ = NetworkKind::General;
  net.demands_.assign(types.size(), 0.0);
  for (std::size_t k = 0; k < od_demands.size(); ++k) {
    const auto& od = od_demands[k];
    const std::string where = "od[" + std::to_string(k) + "]";
    if (od.type >= types.size()) throw InvalidArgument(where + ".type: out of range");
    if (od.origin >= node_count || od.destination >= node_count) {
      throw InvalidArgument(where + ": node out of range");
    }
    if (od.origin == od.destination) throw InvalidArgument(where + ": origin equals destination");
    require_nonnegative_finite(od.demand, where + ".demand");
    net.demands_[od.type] += od.demand;

    Commodity c;
    c.type = od.type;
    c.demand = od.demand;
    if (!paths.empty() && !paths[k].empty()) {
      for (const auto& p : paths[k]) {
        if (p.empty()) throw InvalidArgument("paths[" + std::to_string(k) + "]: empty path");
        std::size_t at = od.origin;
        for (std::size_t e : p) {
          if (e >= edges.size()) {
            throw InvalidArgument("paths[" + std::to_string(k) + "]: edge index out of range");
          }
          if (endpoints[e].first != at) {
            throw InvalidArgument("paths[" + std::to_string(k) + "]: edges do not form a walk");
          }
          at = endpoints[e].second;
        }
        if (at != od.destination) {
          throw InvalidArgument("paths[" + std::to_string(k) + "]: path does not reach destination");
        }
      }
      c.paths = paths[k];
    } else {
      c.paths = enumerate_simple_paths(node_count, endpoints, od.origin, od.destination, path_cap);
    }
    if (c.paths.empty()) throw InvalidArgument(where + ": no path from origin to destination");
    net.commodities_.push_back(std::move(c));
  }
  net.types_ = std::move(types);
  net.roads_ = std::move(edges);
  net.node_count_ = node_count;
  net.endpoints_ = std::move(endpoints);
  net.od_demands_ = std::move(od_demands);
  return net;
}

std::size_t Network::num_path_variables() const {
  std::size_t total = 0;
  for (const auto& c : commodities_) total += c.paths.size();
  return total;
}

bool Network::satisfies_strict_increase() const {
  return std::all_of(roads_.begin(), roads_.end(),
                     [](const AffineLatency& r) { return r.strictly_increasing(); });
}

bool Network::operator==(const Network& o) const {
  if (kind_ != o.kind_ || types_ != o.types_ || roads_ != o.roads_) return false;
  if (kind_ == NetworkKind::Parallel) return demands_ == o.demands_;
  if (node_count_ != o.node_count_ || endpoints_ != o.endpoints_ || od_demands_ != o.od_demands_) {
    return false;
  }
  for (std::size_t k = 0; k < commodities_.size(); ++k) {
    if (commodities_[k].paths != o.commodities_[k].paths) return false;
  }
  return true;
}

std::vector<std::vector<std::size_t>> enumerate_simple_paths(
    std::size_t node_count, const std::vector<std::pair<std::size_t, std::size_t>>& endpoints,
    std::size_t origin, std::size_t destination, std::size_t cap) {
  std::vector<std::vector<std::size_t>> out_edges(node_count);
  for (std::size_t e = 0; e < endpoints.size(); ++e) out_edges[endpoints[e].first].push_back(e);

  std::vector<std::vector<std::size_t>> result;
  std::vector<std::size_t> current;
  std::vector<bool> visited(node_count, false);

  auto dfs = [&](auto&& self, std::size_t node) -> void {
    if (node == destination) {
      if (result.size() >= cap) {
        throw SizeLimitExceeded("more than " + std::to_string(cap) +
                                " simple paths between nodes " + std::to_string(origin) + " and " +
                                std::to_string(destination));
      }
      result.push_back(current);
      return;
    }
    visited[node] = true;
    for (std::size_t e : out_edges[node]) {
      std::size_t next = endpoints[e].second;
      if (visited[next]) continue;
      current.push_back(e);
      self(self, next);
      current.pop_back();
    }
    visited[node] = false;
  };
  dfs(dfs, origin);
  return result;
}

Routing make_parallel_routing(const Network& net, const Eigen::MatrixXd& edge_flows) {
  if (!net.is_parallel()) {
    throw InvalidArgument("edge-flow routings are only defined for parallel networks");
  }
  if (edge_flows.rows() != static_cast<Eigen::Index>(net.num_roads()) ||
      edge_flows.cols() != static_cast<Eigen::Index>(net.num_types())) {
    throw DimensionMismatch("routing: expected " + std::to_string(net.num_roads()) + "x" +
                            std::to_string(net.num_types()) + " flow matrix");
  }
  return Routing{edge_flows, {}};
}

Routing make_path_routing(const Network& net, const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(net.num_path_variables())) {
    throw DimensionMismatch("path flows: expected " + std::to_string(net.num_path_variables()) +
                            " entries");
  }
  Routing z;
  z.edge_flows = Eigen::MatrixXd::Zero(net.num_roads(), net.num_types());
  Eigen::Index v = 0;
  for (const auto& c : net.commodities()) {
    Eigen::VectorXd h(c.paths.size());
    for (std::size_t p = 0; p < c.paths.size(); ++p, ++v) {
      h[p] = flat[v];
      for (std::size_t e : c.paths[p]) z.edge_flows(e, c.type) += flat[v];
    }
    z.path_flows.push_back(std::move(h));
  }
  if (net.is_parallel()) z.path_flows.clear();
  return z;
}

Eigen::VectorXd flatten_path_flows(const Network& net, const Routing& z) {
  Eigen::VectorXd flat(net.num_path_variables());
  Eigen::Index v = 0;
  if (net.is_parallel()) {
    for (const auto& c : net.commodities()) {
      for (std::size_t i = 0; i < c.paths.size(); ++i) flat[v++] = z.edge_flows(i, c.type);
    }
    return flat;
  }
  if (z.path_flows.size() != net.commodities().size()) {
    throw DimensionMismatch("routing: general networks need per-commodity path flows");
  }
  for (std::size_t k = 0; k < net.commodities().size(); ++k) {
    const auto& h = z.path_flows[k];
    if (h.size() != static_cast<Eigen::Index>(net.commodities()[k].paths.size())) {
      throw DimensionMismatch("routing: path flow vector " + std::to_string(k) + " has wrong size");
    }
    for (Eigen::Index p = 0; p < h.size(); ++p) flat[v++] = h[p];
  }
  return flat;
}

void require_feasible(const Network& net, const Routing& z, double tol) {
  const auto n = static_cast<Eigen::Index>(net.num_roads());
  const auto m = static_cast<Eigen::Index>(net.num_types());
  if (z.edge_flows.rows() != n || z.edge_flows.cols() != m) {
    throw DimensionMismatch("routing: expected " + std::to_string(n) + "x" + std::to_string(m) +
                            " flow matrix");
  }
  const double scale = 1.0 + *std::max_element(net.demands().begin(), net.demands().end());
  if ((z.edge_flows.array() < -tol).any()) throw InfeasibleRouting("routing: negative flow");
  if (net.is_parallel()) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double total = z.edge_flows.col(j).sum();
      if (std::abs(total - net.demands()[j]) > tol * scale) {
        std::ostringstream os;
        os << "routing: type " << j << " routes " << total << " but demand is " << net.demands()[j];
        throw InfeasibleRouting(os.str());
      }
    }
    return;
  }
  Eigen::VectorXd flat = flatten_path_flows(net, z);
  if ((flat.array() < -tol).any()) throw InfeasibleRouting("routing: negative path flow");
  Eigen::Index v = 0;
  for (std::size_t k = 0; k < net.commodities().size(); ++k) {
    const auto& c = net.commodities()[k];
    double total = flat.segment(v, static_cast<Eigen::Index>(c.paths.size())).sum();
    v += static_cast<Eigen::Index>(c.paths.size());
    if (std::abs(total - c.demand) > tol * scale) {
      throw InfeasibleRouting("routing: od entry " + std::to_string(k) + " misses its demand");
    }
  }
  Routing rebuilt = make_path_routing(net, flat);
  if ((rebuilt.edge_flows - z.edge_flows).cwiseAbs().maxCoeff() > tol * scale) {
    throw InfeasibleRouting("routing: edge flows disagree with path flows");
  }
}

bool is_feasible(const Network& net, const Routing& z, double tol) {
  try {
    require_feasible(net, z, tol);
    return true;
  } catch (const Error&) {
    return false;
  }
}

TollSchedule::TollSchedule(Eigen::MatrixXd tolls, std::optional<EpsilonTollMetadata> metadata)
    : tolls_(std::move(tolls)), metadata_(std::move(metadata)) {
  for (Eigen::Index i = 0; i < tolls_.rows(); ++i) {
    for (Eigen::Index j = 0; j < tolls_.cols(); ++j) {
      if (!std::isfinite(tolls_(i, j))) throw InvalidArgument("tolls: entries must be finite");
      if (tolls_(i, j) < 0.0) {
        throw InvalidArgument("tolls: negative toll on road " + std::to_string(i) + " type " +
                              std::to_string(j));
      }
    }
  }
}

TollSchedule TollSchedule::zero(const Network& net) {
  return TollSchedule(Eigen::MatrixXd::Zero(net.num_roads(), net.num_types()));
}

double latency(const AffineLatency& road, std::span<const double> flows) {
  if (flows.size() != road.slopes.size()) {
    throw DimensionMismatch("latency: expected " + std::to_string(road.slopes.size()) +
                            " flows, got " + std::to_string(flows.size()));
  }
  double c = road.intercept;
  for (std::size_t j = 0; j < flows.size(); ++j) c += road.slopes[j] * flows[j];
  return c;
}

double latency(const AffineLatency& road, const Eigen::Ref<const Eigen::VectorXd>& flows) {
  return latency(road, std::span<const double>(flows.data(), static_cast<std::size_t>(flows.size())));
}

double tolled_latency(const AffineLatency& road, std::span<const double> flows, double toll) {
  if (toll < 0.0) throw InvalidArgument("tolled_latency: toll must be nonnegative");
  return latency(road, flows) + toll;
}

Eigen::VectorXd road_latencies(const Network& net, const Eigen::MatrixXd& z) {
  Eigen::VectorXd c(net.num_roads());
  for (std::size_t i = 0; i < net.num_roads(); ++i) {
    Eigen::VectorXd row = z.row(static_cast<Eigen::Index>(i)).transpose();
    c[static_cast<Eigen::Index>(i)] = latency(net.road(i), row);
  }
  return c;
}

double social_cost(const Network& net, const Eigen::MatrixXd& z) {
  Eigen::VectorXd c = road_latencies(net, z);
  return z.rowwise().sum().dot(c);
}

double social_cost(const Network& net, const Routing& z) {
  require_feasible(net, z);
  return social_cost(net, z.edge_flows);
}

double degree_of_asymmetry(const Network& net) {
  double k = 1.0;
  for (const auto& r : net.roads()) {
    const double hi = *std::max_element(r.slopes.begin(), r.slopes.end());
    const double lo = *std::min_element(r.slopes.begin(), r.slopes.end());
    if (hi == 0.0) continue;
    if (lo == 0.0) return std::numeric_limits<double>::infinity();
    k = std::max(k, hi / lo);
  }
  return k;
}

SupportGraph::SupportGraph(std::size_t num_roads, std::size_t num_types,
                           std::vector<std::pair<std::size_t, std::size_t>> edges)
    : num_roads_(num_roads), num_types_(num_types), edges_(std::move(edges)) {
  for (auto [i, j] : edges_) {
    if (i >= num_roads_ || j >= num_types_) throw InvalidArgument("support graph: edge out of range");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool SupportGraph::has_edge(std::size_t road, std::size_t type) const {
  return std::binary_search(edges_.begin(), edges_.end(), std::pair{road, type});
}

std::vector<std::size_t> SupportGraph::roads_used_by(std::size_t type) const {
  std::vector<std::size_t> out;
  for (auto [i, j] : edges_) {
    if (j == type) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SupportGraph::types_on(std::size_t road) const {
  std::vector<std::size_t> out;
  for (auto [i, j] : edges_) {
    if (i == road) out.push_back(j);
  }
  return out;
}

SupportGraph support_graph(const Eigen::MatrixXd& z, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("support_graph: tolerance must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (z(i, j) > tol) edges.emplace_back(i, j);
    }
  }
  return SupportGraph(static_cast<std::size_t>(z.rows()), static_cast<std::size_t>(z.cols()),
                      std::move(edges));
}

SupportGraph support_graph(const Routing& z, double tol) { return support_graph(z.edge_flows, tol); }

bool is_acyclic(const SupportGraph& g) {
  // Union-find: an edge joining two already-connected nodes closes a cycle.
  std::vector<std::size_t> parent(g.num_roads() + g.num_types());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [i, j] : g.edges()) {
    std::size_t a = find(i), b = find(g.num_roads() + j);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

std::optional<SupportCycle> shortest_cycle(const SupportGraph& g) {
  const std::size_t n = g.num_roads();
  const std::size_t total = n + g.num_types();
  std::vector<std::vector<std::size_t>> adj(total);
  for (auto [i, j] : g.edges()) {
    adj[i].push_back(n + j);
    adj[n + j].push_back(i);
  }

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t best_len = kNone;
  std::vector<std::size_t> best_nodes;

  for (std::size_t root = 0; root < total; ++root) {
    std::vector<std::size_t> dist(total, kNone), parent(total, kNone);
    std::queue<std::size_t> q;
    dist[root] = 0;
    q.push(root);
    while (!q.empty()) {
      std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u]) {
        if (dist[v] == kNone) {
          dist[v] = dist[u] + 1;
          parent[v] = u;
          q.push(v);
        } else if (v != parent[u] && parent[v] != u) {
          std::size_t len = dist[u] + dist[v] + 1;
          if (len >= best_len) continue;
          // Walk both tree paths back to the root and keep only simple cycles.
          std::vector<std::size_t> left, right;
          for (std::size_t x = u; x != kNone; x = parent[x]) left.push_back(x);
          for (std::size_t x = v; x != kNone; x = parent[x]) right.push_back(x);
          std::vector<std::size_t> nodes(left.rbegin(), left.rend());
          nodes.insert(nodes.end(), right.begin(), right.end() - 1);
          std::vector<std::size_t> sorted = nodes;
          std::sort(sorted.begin(), sorted.end());
          if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
          best_len = len;
          best_nodes = std::move(nodes);
        }
      }
    }
  }
  if (best_nodes.empty()) return std::nullopt;

  // Rotate so the cycle starts at its smallest road node.
  auto first_road = std::min_element(best_nodes.begin(), best_nodes.end());
  std::rotate(best_nodes.begin(), first_road, best_nodes.end());
  SupportCycle cycle;
  for (std::size_t p = 0; p < best_nodes.size(); ++p) {
    if (p % 2 == 0) {
      cycle.roads.push_back(best_nodes[p]);
    } else {
      cycle.types.push_back(best_nodes[p] - n);
    }
  }
  return cycle;
}

}  // namespace mixtoll
