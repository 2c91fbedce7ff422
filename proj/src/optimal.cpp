#include "mixtoll/optimal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "flow_algebra.hpp"
#include "mixtoll/rng.hpp"

namespace mixtoll {

namespace {

using detail::FlowAlgebra;

void require_exact_size(const Network& net, const char* what) {
  if (net.num_path_variables() > kExactVariableCap) {
    throw SizeLimitExceeded(std::string(what) + ": " + std::to_string(net.num_path_variables()) +
                            " flow variables exceed the exact-mode cap of " +
                            std::to_string(kExactVariableCap));
  }
}

std::vector<bool> active_commodities(const Network& net) {
  std::vector<bool> active;
  for (const auto& c : net.commodities()) active.push_back(c.demand > 0.0);
  return active;
}

OptimizationResult solve_exact(const Network& net) {
  require_exact_size(net, "solve_optimal");
  const FlowAlgebra alg(net);
  const std::size_t K = alg.num_commodities();
  const Eigen::Index N = alg.num_variables();
  const auto active = active_commodities(net);

  std::vector<Eigen::Index> sizes;
  for (std::size_t k = 0; k < K; ++k) sizes.push_back(alg.size(k));
  detail::SupportPatterns patterns(sizes, active);

  const double scale = 1.0 + std::abs(alg.social_cost(Eigen::VectorXd::Zero(N)));
  OptimizationResult best;
  best.method = SolveMethod::Enumeration;
  best.cost = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;

  while (patterns.next()) {
    const auto& masks = patterns.masks();
    std::vector<Eigen::Index> vars;
    std::vector<Eigen::Index> lambda_of;  // per commodity, column of its multiplier or -1
    Eigen::Index lambdas = 0;
    for (std::size_t k = 0; k < K; ++k) {
      lambda_of.push_back(active[k] ? lambdas++ : -1);
      for (Eigen::Index p = 0; p < alg.size(k); ++p) {
        if (masks[k] & (1u << p)) vars.push_back(alg.offset(k) + p);
      }
    }
    const auto S = static_cast<Eigen::Index>(vars.size());

    // Unknowns: face flows then multipliers. Stationarity H_SS x - lambda = -g0,
    // and each commodity's face flows sum to its demand.
    Eigen::MatrixXd Aeq = Eigen::MatrixXd::Zero(S + lambdas, S + lambdas);
    Eigen::VectorXd beq = Eigen::VectorXd::Zero(S + lambdas);
    for (Eigen::Index r = 0; r < S; ++r) {
      for (Eigen::Index c = 0; c < S; ++c) Aeq(r, c) = alg.cost_hessian()(vars[r], vars[c]);
      Aeq(r, S + lambda_of[alg.commodity_of(vars[r])]) = -1.0;
      beq[r] = -alg.path_base()[vars[r]];
    }
    for (Eigen::Index r = 0; r < S; ++r) {
      const auto k = alg.commodity_of(vars[r]);
      Aeq(S + lambda_of[k], r) = 1.0;
      beq[S + lambda_of[k]] = net.commodities()[k].demand;
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(S, S + lambdas);
    G.leftCols(S).setIdentity();
    Eigen::VectorXd h = Eigen::VectorXd::Zero(S);

    const auto poly = detail::enumerate_vertices(Aeq, beq, G, h, 1e-10);
    for (const auto& sol : poly.vertices) {
      ++best.candidates_examined;
      Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
      for (Eigen::Index r = 0; r < S; ++r) x[vars[r]] = std::max(0.0, sol[r]);
      const double cost = alg.social_cost(x);
      if (cost < best.cost - 1e-12 * scale) {
        best.cost = cost;
        best_x = x;
        best.support_pattern = masks;
        best.multipliers.assign(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
          if (lambda_of[k] >= 0) best.multipliers[k] = sol[S + lambda_of[k]];
        }
      }
    }
  }
  if (best_x.size() == 0) throw InfeasibleRouting("solve_optimal: no feasible stationary point");
  best.routing = make_path_routing(net, best_x);
  best.cost = social_cost(net, best.routing.edge_flows);
  return best;
}

Eigen::VectorXd project_feasible(const FlowAlgebra& alg, const Network& net,
                                 const Eigen::VectorXd& v) {
  Eigen::VectorXd x(v.size());
  for (std::size_t k = 0; k < alg.num_commodities(); ++k) {
    x.segment(alg.offset(k), alg.size(k)) =
        detail::project_to_simplex(v.segment(alg.offset(k), alg.size(k)), net.commodities()[k].demand);
  }
  return x;
}

OptimizationResult solve_heuristic(const Network& net, const HeuristicOptions& opt) {
  const FlowAlgebra alg(net);
  const Eigen::Index N = alg.num_variables();
  double max_slope = 0.0;
  for (const auto& r : net.roads()) {
    for (double a : r.slopes) max_slope = std::max(max_slope, a);
  }
  const double initial_step = max_slope > 0.0 ? 0.1 / max_slope : 0.1;

  Rng rng(opt.seed);
  Eigen::VectorXd best_x;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t restart = 0; restart < std::max<std::size_t>(opt.restarts, 1); ++restart) {
    // Random start: exponential weights normalised onto each demand simplex.
    Eigen::VectorXd x(N);
    for (std::size_t k = 0; k < alg.num_commodities(); ++k) {
      Eigen::VectorXd w(alg.size(k));
      for (Eigen::Index p = 0; p < w.size(); ++p) w[p] = -std::log(1.0 - rng.uniform());
      x.segment(alg.offset(k), alg.size(k)) = w / w.sum() * net.commodities()[k].demand;
    }
    double cost = alg.social_cost(x);
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
      const Eigen::VectorXd g = alg.cost_gradient(x);
      double step = initial_step;
      bool moved = false;
      for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
        Eigen::VectorXd trial = project_feasible(alg, net, x - step * g);
        const double trial_cost = alg.social_cost(trial);
        // Armijo condition along the projection arc.
        if (trial_cost <= cost + 1e-4 * g.dot(trial - x)) {
          moved = (trial - x).cwiseAbs().maxCoeff() > 1e-15;
          x = std::move(trial);
          cost = trial_cost;
          break;
        }
      }
      if (!moved) break;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_x = x;
    }
  }

  OptimizationResult result;
  result.method = SolveMethod::Multistart;
  result.routing = make_path_routing(net, best_x);
  result.cost = social_cost(net, result.routing.edge_flows);
  if (net.num_path_variables() <= kExactVariableCap) {
    result.gap_estimate = result.cost - solve_exact(net).cost;
  }
  return result;
}

}  // namespace

OptimizationResult solve_optimal(const Network& net, SolveMode mode,
                                 const HeuristicOptions& heuristic) {
  return mode == SolveMode::Exact ? solve_exact(net) : solve_heuristic(net, heuristic);
}

Routing make_acyclic(const Network& net, const Routing& input, double tol) {
  if (!net.is_parallel()) throw InvalidArgument("make_acyclic: parallel networks only");
  require_feasible(net, input);
  Eigen::MatrixXd z = input.edge_flows;

  const std::size_t max_iterations = static_cast<std::size_t>(z.size()) + 1;
  for (std::size_t iteration = 0; iteration < max_iterations; ++iteration) {
    const auto cycle = shortest_cycle(support_graph(z, tol));
    if (!cycle) return make_parallel_routing(net, z);

    // Forward direction: type types[l] moves one unit from roads[l] to roads[l+1].
    // Road loads stay fixed; the cost changes linearly with slope sum_r F_r dc_r.
    const std::size_t L = cycle->roads.size();
    const Eigen::VectorXd loads = z.rowwise().sum();
    double slope = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t from = cycle->roads[l];
      const std::size_t to = cycle->roads[(l + 1) % L];
      const std::size_t t = cycle->types[l];
      slope += loads[static_cast<Eigen::Index>(to)] * net.road(to).slopes[t] -
               loads[static_cast<Eigen::Index>(from)] * net.road(from).slopes[t];
    }

    double forward_room = std::numeric_limits<double>::infinity();
    double backward_room = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < L; ++l) {
      const auto t = static_cast<Eigen::Index>(cycle->types[l]);
      forward_room = std::min(forward_room, z(static_cast<Eigen::Index>(cycle->roads[l]), t));
      backward_room =
          std::min(backward_room, z(static_cast<Eigen::Index>(cycle->roads[(l + 1) % L]), t));
    }
    const double cost_scale = 1.0 + std::abs(social_cost(net, z));
    bool forward = forward_room <= backward_room;
    if (std::abs(slope) * std::max(forward_room, backward_room) > 1e-9 * cost_scale) {
      forward = slope < 0.0;
    }
    const double step = forward ? forward_room : backward_room;
    const double sign = forward ? 1.0 : -1.0;
    for (std::size_t l = 0; l < L; ++l) {
      const auto t = static_cast<Eigen::Index>(cycle->types[l]);
      const auto from = static_cast<Eigen::Index>(cycle->roads[l]);
      const auto to = static_cast<Eigen::Index>(cycle->roads[(l + 1) % L]);
      z(from, t) -= sign * step;
      z(to, t) += sign * step;
    }
    // Drained edges are set to exact zero so the support strictly shrinks.
    for (std::size_t l = 0; l < L; ++l) {
      const auto t = static_cast<Eigen::Index>(cycle->types[l]);
      for (auto r : {cycle->roads[l], cycle->roads[(l + 1) % L]}) {
        double& v = z(static_cast<Eigen::Index>(r), t);
        if (v <= tol) v = 0.0;
      }
    }
  }
  throw Error("make_acyclic: support did not shrink to a forest");
}

}  // namespace mixtoll
