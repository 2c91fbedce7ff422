#include <doctest.h>

#include <cmath>

#include "mixtoll/fixtures.hpp"
#include "mixtoll/optimal.hpp"
#include "mixtoll/rng.hpp"
#include "mixtoll/scenario.hpp"
#include "oracles.hpp"

using namespace mixtoll;

namespace {

bool types_share_at_most_one_road(const Eigen::MatrixXd& z) {
  for (Eigen::Index a = 0; a < z.cols(); ++a) {
    for (Eigen::Index b = a + 1; b < z.cols(); ++b) {
      int shared = 0;
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        if (z(i, a) > kSupportTol && z(i, b) > kSupportTol) ++shared;
      }
      if (shared > 1) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("exact optimum of the two-road example") {
  const auto r = solve_optimal(fixtures::example_a(2.0));
  CHECK(std::abs(r.cost - 2.0) < 1e-12);
  CHECK(r.routing.edge_flows(1, 0) == doctest::Approx(1.0));
  CHECK(r.routing.edge_flows(0, 1) == doctest::Approx(1.0));
  CHECK(r.method == SolveMethod::Enumeration);
  CHECK(r.candidates_examined > 0);
}

TEST_CASE("exact optimum of the constant-road example") {
  const auto r = solve_optimal(fixtures::example_b(4.0));
  CHECK(std::abs(r.cost - 5.0 / 6.0) < 1e-12);
  CHECK(r.routing.edge_flows(0, 0) == doctest::Approx(0.5));
  CHECK(r.routing.edge_flows(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("single road carries everything") {
  const Network net = Network::parallel({"1", "2"}, {{{2.0, 0.5}, 1.0}}, {0.7, 1.3});
  const auto r = solve_optimal(net);
  CHECK(std::abs(r.cost - 2.0 * (1.0 + 2.0 * 0.7 + 0.5 * 1.3)) < 1e-12);
}

TEST_CASE("exact optimum matches grid search on two-road instances") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    InstanceGenSpec spec;
    spec.seed = seed;
    spec.n = 2;
    spec.m = 2;
    const Network net = generate_instance(spec);
    const auto r = solve_optimal(net);
    const double grid = oracle::grid_optimum_two_roads(net);
    CHECK(r.cost <= grid + 1e-12);
    CHECK(r.cost >= grid - 1e-3);
    CHECK(std::abs(r.cost - oracle::cost(net, oracle::to_matrix(r.routing.edge_flows))) < 1e-9);
  }
}

TEST_CASE("heuristic never beats the certified optimum") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    InstanceGenSpec spec;
    spec.seed = seed;
    spec.n = 3;
    spec.m = 2;
    const Network net = generate_instance(spec);
    const auto exact = solve_optimal(net);
    HeuristicOptions h;
    h.seed = seed;
    const auto heur = solve_optimal(net, SolveMode::Heuristic, h);
    CHECK(heur.method == SolveMethod::Multistart);
    CHECK(heur.cost >= exact.cost - 1e-6);
    REQUIRE(heur.gap_estimate.has_value());
    CHECK(*heur.gap_estimate >= -1e-6);
    CHECK(is_feasible(net, heur.routing));
  }
}

TEST_CASE("heuristic is deterministic per seed") {
  InstanceGenSpec spec;
  spec.seed = 9;
  spec.n = 3;
  const Network net = generate_instance(spec);
  HeuristicOptions h;
  h.seed = 4;
  const auto a = solve_optimal(net, SolveMode::Heuristic, h);
  const auto b = solve_optimal(net, SolveMode::Heuristic, h);
  CHECK(a.routing.edge_flows == b.routing.edge_flows);
}

TEST_CASE("exact mode enforces the size cap") {
  std::vector<AffineLatency> roads(7, AffineLatency{{1.0, 1.0}, 0.0});
  const Network net = Network::parallel({"1", "2"}, roads, {1.0, 1.0});
  CHECK_THROWS_AS(solve_optimal(net), SizeLimitExceeded);
}

TEST_CASE("general network optimum is no worse than sampled routings") {
  const Network g = fixtures::general_two_od();
  const auto r = solve_optimal(g);
  CHECK(is_feasible(g, r.routing));
  Rng rng(2);
  for (int t = 0; t < 2000; ++t) {
    Eigen::VectorXd x(5);
    double a = rng.uniform(), b = rng.uniform(), c = rng.uniform(), d = rng.uniform();
    x << a, b, c, d, 1.0 - d;
    x.head(3) /= (a + b + c);
    x.tail(2) *= 0.8;
    CHECK(r.cost <= social_cost(g, make_path_routing(g, x)) + 1e-12);
  }
}

TEST_CASE("make_acyclic on two identical roads") {
  const Network net = Network::parallel({"1", "2"}, {{{1, 1}, 0}, {{1, 1}, 0}}, {1, 1});
  const Routing split = make_parallel_routing(net, Eigen::MatrixXd::Constant(2, 2, 0.5));
  CHECK(social_cost(net, split) == doctest::Approx(2.0));
  const Routing out = make_acyclic(net, split);
  CHECK(is_acyclic(support_graph(out)));
  CHECK(std::abs(social_cost(net, out) - 2.0) < 1e-12);
  CHECK(out.edge_flows.colwise().sum().isApprox(Eigen::RowVector2d(1, 1)));
}

TEST_CASE("make_acyclic leaves an acyclic routing unchanged") {
  const Network net = fixtures::example_a(2.0);
  const auto opt = solve_optimal(net);
  CHECK(make_acyclic(net, opt.routing).edge_flows == opt.routing.edge_flows);
}

TEST_CASE("make_acyclic on the four-road figure support") {
  std::vector<AffineLatency> roads(4, AffineLatency{{1, 1, 1}, 0});
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4, 3);
  z(0, 0) = z(1, 0) = 0.5;
  z(1, 1) = z(2, 1) = 0.5;
  z(0, 2) = z(2, 2) = 0.3;
  z(3, 2) = 0.4;
  const Network net = Network::parallel({"1", "2", "3"}, roads, {1.0, 1.0, 1.0});
  const Routing in = make_parallel_routing(net, z);
  const Routing out = make_acyclic(net, in);
  CHECK(is_acyclic(support_graph(out)));
  CHECK(support_graph(out).edges().size() <= 4 + 3 - 1);
  CHECK(types_share_at_most_one_road(out.edge_flows));
  CHECK(std::abs(social_cost(net, out) - social_cost(net, in)) < 1e-12);
}

TEST_CASE("make_acyclic preserves optimal cost on generated instances") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    InstanceGenSpec spec;
    spec.seed = seed;
    spec.n = 3 + seed % 2;
    spec.m = 3;
    spec.target_k = 1.0 + static_cast<double>(seed % 3);
    const Network net = generate_instance(spec);
    const auto opt = solve_optimal(net);
    const Routing out = make_acyclic(net, opt.routing);
    CHECK(is_acyclic(support_graph(out)));
    CHECK(types_share_at_most_one_road(out.edge_flows));
    CHECK(std::abs(social_cost(net, out) - opt.cost) <= 1e-8 * std::max(1.0, opt.cost));
  }
}

TEST_CASE("make_acyclic with equal slopes breaks cyclic optima") {
  // With k = 1 every split with the same road loads is optimal, so a cyclic
  // optimum exists; the shift must keep the cost.
  InstanceGenSpec spec;
  spec.seed = 21;
  spec.n = 3;
  spec.m = 3;
  spec.target_k = 1.0;
  const Network net = generate_instance(spec);
  const auto opt = solve_optimal(net);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  const Eigen::VectorXd loads = opt.routing.edge_flows.rowwise().sum();
  const double total = loads.sum();
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) z(i, j) = loads[i] * net.demands()[static_cast<std::size_t>(j)] / total;
  }
  const Routing cyclic = make_parallel_routing(net, z);
  CHECK(std::abs(social_cost(net, cyclic) - opt.cost) < 1e-9);
  const Routing out = make_acyclic(net, cyclic);
  CHECK(is_acyclic(support_graph(out)));
  CHECK(std::abs(social_cost(net, out) - opt.cost) < 1e-9);
}
