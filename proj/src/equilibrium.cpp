#include "mixtoll/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "flow_algebra.hpp"

namespace mixtoll {

namespace {

using detail::FlowAlgebra;

double demand_scale(const Network& net) {
  double d = 0.0;
  for (const auto& c : net.commodities()) d = std::max(d, c.demand);
  return 1.0 + d;
}

/// Exact minimiser of 0.5 x'Qx + r'x over {x >= 0, sum x = total} for a
/// convex Q. Diagonal Q is water-filled; otherwise supports are enumerated.
Eigen::VectorXd solve_simplex_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& r,
                                 double total) {
  const Eigen::Index P = r.size();
  if (total <= 0.0) return Eigen::VectorXd::Zero(P);
  const bool diagonal = (Q - Eigen::MatrixXd(Q.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;

  if (diagonal) {
    // x_i = (lambda - r_i) / q_i above r_i; zero-slope paths cap lambda at their cost.
    double flat_cost = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < P; ++i) {
      if (Q(i, i) <= 0.0) flat_cost = std::min(flat_cost, r[i]);
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(P));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r[a] < r[b]; });
    double inv_sum = 0.0, weighted = 0.0, lambda = flat_cost;
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
      const Eigen::Index i = order[idx];
      if (Q(i, i) <= 0.0) continue;
      if (r[i] >= flat_cost) break;
      inv_sum += 1.0 / Q(i, i);
      weighted += r[i] / Q(i, i);
      const double candidate = (total + weighted) / inv_sum;
      double next = flat_cost;
      for (std::size_t jdx = idx + 1; jdx < order.size(); ++jdx) {
        if (Q(order[jdx], order[jdx]) > 0.0) {
          next = std::min(next, r[order[jdx]]);
          break;
        }
      }
      if (candidate <= next) {
        lambda = candidate;
        break;
      }
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(P);
    double placed = 0.0;
    for (Eigen::Index i = 0; i < P; ++i) {
      if (Q(i, i) > 0.0 && r[i] < lambda) {
        x[i] = (lambda - r[i]) / Q(i, i);
        placed += x[i];
      }
    }
    if (placed < total && std::isfinite(flat_cost)) {
      std::vector<Eigen::Index> flat;
      for (Eigen::Index i = 0; i < P; ++i) {
        if (Q(i, i) <= 0.0 && r[i] == flat_cost) flat.push_back(i);
      }
      for (auto i : flat) x[i] = (total - placed) / static_cast<double>(flat.size());
    }
    return x;
  }

  if (P > 12) throw SizeLimitExceeded("best response: too many paths for exact solve");
  for (unsigned mask = 1; mask < (1u << P); ++mask) {
    std::vector<Eigen::Index> S;
    for (Eigen::Index i = 0; i < P; ++i) {
      if (mask & (1u << i)) S.push_back(i);
    }
    const auto s = static_cast<Eigen::Index>(S.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(s + 1);
    for (Eigen::Index a = 0; a < s; ++a) {
      for (Eigen::Index c = 0; c < s; ++c) A(a, c) = Q(S[a], S[c]);
      A(a, s) = -1.0;
      b[a] = -r[S[a]];
      A(s, a) = 1.0;
    }
    b[s] = total;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, s + 1);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(P);
    for (Eigen::Index i = 0, row = 0; i < P; ++i, ++row) {
      if (mask & (1u << i)) {
        G(row, std::find(S.begin(), S.end(), i) - S.begin()) = 1.0;
      } else {
        for (Eigen::Index c = 0; c < s; ++c) G(row, c) = Q(i, S[c]);
        G(row, s) = -1.0;
        h[row] = -r[i];
      }
    }
    const auto poly = detail::enumerate_vertices(A, b, G, h, 1e-11);
    if (poly.vertices.empty()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(P);
    for (Eigen::Index a = 0; a < s; ++a) x[S[a]] = std::max(0.0, poly.vertices.front()[a]);
    return x;
  }
  throw Error("best response: no KKT point found");
}

Eigen::VectorXd clamp_flows(const Network& net, const FlowAlgebra& alg, Eigen::VectorXd x) {
  x = x.cwiseMax(0.0);
  // Renormalise each commodity so demands hold to rounding.
  for (std::size_t k = 0; k < alg.num_commodities(); ++k) {
    auto seg = x.segment(alg.offset(k), alg.size(k));
    const double total = seg.sum();
    const double d = net.commodities()[k].demand;
    if (total > 0.0) seg *= d / total;
  }
  return x;
}

}  // namespace

Eigen::VectorXd tolled_path_costs(const Network& net, const TollSchedule& tolls, const Routing& z) {
  const FlowAlgebra alg(net);
  return alg.path_costs(flatten_path_flows(net, z), alg.toll_offset(tolls));
}

WardropReport wardrop_check(const Network& net, const TollSchedule& tolls, const Routing& z,
                            double tol) {
  require_feasible(net, z);
  const FlowAlgebra alg(net);
  const Eigen::VectorXd x = flatten_path_flows(net, z);
  const Eigen::VectorXd costs = alg.path_costs(x, alg.toll_offset(tolls));

  EquilibriumCertificate cert;
  cert.support = support_graph(z);
  WardropViolation worst;
  for (std::size_t k = 0; k < alg.num_commodities(); ++k) {
    const auto seg = costs.segment(alg.offset(k), alg.size(k));
    const double cheapest = seg.minCoeff();
    cert.common_costs.push_back(cheapest);
    for (Eigen::Index p = 0; p < alg.size(k); ++p) {
      if (x[alg.offset(k) + p] <= kSupportTol) continue;
      const double excess = seg[p] - cheapest;
      if (excess > cert.residual) {
        cert.residual = excess;
        worst = {k, net.commodities()[k].type, static_cast<std::size_t>(p), excess};
      }
    }
  }
  WardropReport report;
  if (cert.residual <= tol) {
    report.certificate = std::move(cert);
  } else {
    report.violation = worst;
  }
  return report;
}

EquilibriumSet enumerate_equilibria(const Network& net, const TollSchedule& tolls,
                                    const EnumerationOptions& options) {
  if (net.num_path_variables() > 12) {
    throw SizeLimitExceeded("enumerate_equilibria: " + std::to_string(net.num_path_variables()) +
                            " flow variables exceed the enumeration cap of 12");
  }
  const FlowAlgebra alg(net);
  const Eigen::VectorXd toll = alg.toll_offset(tolls);
  const std::size_t K = alg.num_commodities();
  const Eigen::Index N = alg.num_variables();
  if (!options.allowed_paths.empty() && options.allowed_paths.size() != K) {
    throw DimensionMismatch("enumerate_equilibria: one allowed-path mask per commodity");
  }

  std::vector<Eigen::Index> sizes;
  std::vector<bool> active;
  for (std::size_t k = 0; k < K; ++k) {
    sizes.push_back(alg.size(k));
    active.push_back(net.commodities()[k].demand > 0.0);
  }
  detail::SupportPatterns patterns(sizes, active, options.allowed_paths);

  const double scale = demand_scale(net);
  std::vector<Eigen::VectorXd> points;
  std::vector<bool> degenerate_flags;
  std::vector<bool> interior_flags;
  std::vector<std::vector<std::size_t>> faces;
  auto intern = [&](const Eigen::VectorXd& x, bool degenerate, bool interior) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if ((points[i] - x).cwiseAbs().maxCoeff() <= 1e-9 * scale) {
        if (degenerate) degenerate_flags[i] = true;
        return i;
      }
    }
    points.push_back(x);
    degenerate_flags.push_back(degenerate);
    interior_flags.push_back(interior);
    return points.size() - 1;
  };

  while (patterns.next()) {
    const auto& masks = patterns.masks();
    std::vector<Eigen::Index> vars, others;
    std::vector<Eigen::Index> lambda_of;
    Eigen::Index lambdas = 0;
    for (std::size_t k = 0; k < K; ++k) {
      lambda_of.push_back(active[k] ? lambdas++ : -1);
      for (Eigen::Index p = 0; p < alg.size(k); ++p) {
        if (masks[k] & (1u << p)) {
          vars.push_back(alg.offset(k) + p);
        } else if (active[k]) {
          others.push_back(alg.offset(k) + p);
        }
      }
    }
    const auto S = static_cast<Eigen::Index>(vars.size());
    const auto O = static_cast<Eigen::Index>(others.size());
    const auto& J = alg.path_jacobian();

    Eigen::MatrixXd Aeq = Eigen::MatrixXd::Zero(S + lambdas, S + lambdas);
    Eigen::VectorXd beq = Eigen::VectorXd::Zero(S + lambdas);
    for (Eigen::Index r = 0; r < S; ++r) {
      for (Eigen::Index c = 0; c < S; ++c) Aeq(r, c) = J(vars[r], vars[c]);
      Aeq(r, S + lambda_of[alg.commodity_of(vars[r])]) = -1.0;
      beq[r] = -(alg.path_base()[vars[r]] + toll[vars[r]]);
      const auto k = alg.commodity_of(vars[r]);
      Aeq(S + lambda_of[k], r) = 1.0;
      beq[S + lambda_of[k]] = net.commodities()[k].demand;
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(S + O, S + lambdas);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(S + O);
    G.topLeftCorner(S, S).setIdentity();
    for (Eigen::Index r = 0; r < O; ++r) {
      const Eigen::Index v = others[r];
      for (Eigen::Index c = 0; c < S; ++c) G(S + r, c) = J(v, vars[c]);
      G(S + r, S + lambda_of[alg.commodity_of(v)]) = -1.0;
      h[S + r] = -(alg.path_base()[v] + toll[v]);
    }

    const auto poly = detail::enumerate_vertices(Aeq, beq, G, h, 1e-10);
    if (poly.vertices.empty()) continue;
    const bool degenerate = poly.dimension > 0 && poly.vertices.size() > 1;
    std::vector<std::size_t> face;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(N);
    for (const auto& sol : poly.vertices) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
      for (Eigen::Index r = 0; r < S; ++r) x[vars[r]] = sol[r];
      x = clamp_flows(net, alg, x);
      centroid += x / static_cast<double>(poly.vertices.size());
      face.push_back(intern(x, degenerate, false));
    }
    if (degenerate) {
      std::sort(face.begin(), face.end());
      face.erase(std::unique(face.begin(), face.end()), face.end());
      if (face.size() > 1 && std::find(faces.begin(), faces.end(), face) == faces.end()) {
        faces.push_back(face);
        intern(centroid, true, true);
      }
    }
  }

  EquilibriumSet set;
  set.exhaustive = options.allowed_paths.empty();
  set.degenerate_faces = std::move(faces);
  for (std::size_t i = 0; i < points.size(); ++i) {
    Routing z = make_path_routing(net, points[i]);
    auto report = wardrop_check(net, tolls, z, options.tol);
    if (!report.is_equilibrium()) {
      throw Error("enumerate_equilibria: candidate failed verification (residual " +
                  std::to_string(report.violation->excess) + ")");
    }
    Equilibrium eq;
    eq.cost = social_cost(net, z.edge_flows);
    eq.routing = std::move(z);
    eq.certificate = std::move(*report.certificate);
    eq.degenerate = degenerate_flags[i];
    eq.interior = interior_flags[i];
    set.equilibria.push_back(std::move(eq));
  }
  if (set.equilibria.empty()) {
    throw NoEquilibriumFound("enumerate_equilibria: no support pattern admits an equilibrium");
  }
  return set;
}

WorstEquilibrium worst_equilibrium(const Network& net, const EquilibriumSet& set,
                                   const TollSchedule& tolls, double tol) {
  if (set.equilibria.empty()) throw NoEquilibriumFound("worst_equilibrium: empty equilibrium set");
  const FlowAlgebra alg(net);

  WorstEquilibrium worst;
  worst.cost = -std::numeric_limits<double>::infinity();
  for (const auto& eq : set.equilibria) {
    if (eq.cost > worst.cost) {
      worst.cost = eq.cost;
      worst.routing = eq.routing;
    }
  }

  // Conditional-gradient ascent of the social cost over each degenerate
  // polytope, which is the convex hull of its vertices.
  const double scale = 1.0 + std::abs(worst.cost);
  for (const auto& face : set.degenerate_faces) {
    std::vector<Eigen::VectorXd> vertices;
    for (auto idx : face) vertices.push_back(flatten_path_flows(net, set.equilibria[idx].routing));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(alg.num_variables());
    for (const auto& v : vertices) x += v / static_cast<double>(vertices.size());
    double cost = alg.social_cost(x);
    for (int it = 0; it < 500; ++it) {
      const Eigen::VectorXd g = alg.cost_gradient(x);
      std::size_t best = 0;
      for (std::size_t v = 1; v < vertices.size(); ++v) {
        if (g.dot(vertices[v]) > g.dot(vertices[best])) best = v;
      }
      const Eigen::VectorXd d = vertices[best] - x;
      const double slope = g.dot(d);
      if (slope <= 1e-14 * scale) break;
      const double curvature = d.dot(alg.path_jacobian() * d);
      double t = 1.0;
      if (curvature < 0.0) t = std::min(1.0, -slope / (2.0 * curvature));
      x += t * d;
      cost = alg.social_cost(x);
    }
    if (cost > worst.cost + 1e-12 * scale) {
      Routing z = make_path_routing(net, x);
      if (wardrop_check(net, tolls, z, tol).is_equilibrium()) {
        worst.cost = social_cost(net, z.edge_flows);
        worst.routing = std::move(z);
        worst.from_local_search = true;
      }
    }
  }
  return worst;
}

WorstEquilibrium worst_equilibrium(const Network& net, const TollSchedule& tolls, double tol) {
  EnumerationOptions options;
  options.tol = tol;
  return worst_equilibrium(net, enumerate_equilibria(net, tolls, options), tolls, tol);
}

BestResponseResult iterate_best_response(const Network& net, const TollSchedule& tolls,
                                         const Routing& z0, std::size_t max_iterations,
                                         double tol) {
  require_feasible(net, z0);
  const FlowAlgebra alg(net);
  const Eigen::VectorXd toll = alg.toll_offset(tolls);
  const auto& J = alg.path_jacobian();
  Eigen::VectorXd x = flatten_path_flows(net, z0);

  auto residual_of = [&](const Eigen::VectorXd& flows) {
    const Eigen::VectorXd costs = alg.path_costs(flows, toll);
    double worst = 0.0;
    for (std::size_t k = 0; k < alg.num_commodities(); ++k) {
      const auto seg = costs.segment(alg.offset(k), alg.size(k));
      const double cheapest = seg.minCoeff();
      for (Eigen::Index p = 0; p < alg.size(k); ++p) {
        if (flows[alg.offset(k) + p] > kSupportTol) worst = std::max(worst, seg[p] - cheapest);
      }
    }
    return worst;
  };

  BestResponseResult result;
  result.residual = residual_of(x);
  while (result.residual > tol && result.iterations < max_iterations) {
    for (std::size_t k = 0; k < alg.num_commodities(); ++k) {
      const Eigen::Index off = alg.offset(k), len = alg.size(k);
      const Eigen::MatrixXd own = J.block(off, off, len, len);
      // Costs seen by commodity k with its own flow removed.
      const Eigen::VectorXd rest =
          (alg.path_costs(x, toll)).segment(off, len) - own * x.segment(off, len);
      const Eigen::MatrixXd Q = 0.5 * (own + own.transpose());
      const Eigen::VectorXd response = solve_simplex_qp(Q, rest, net.commodities()[k].demand);
      x.segment(off, len) = 0.5 * x.segment(off, len) + 0.5 * response;
    }
    ++result.iterations;
    result.residual = residual_of(x);
  }
  result.converged = result.residual <= tol;
  result.routing = make_path_routing(net, x);
  return result;
}

}  // namespace mixtoll
