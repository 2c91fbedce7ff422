#include <doctest.h>

#include <cmath>

#include "mixtoll/analysis.hpp"
#include "mixtoll/equilibrium.hpp"
#include "mixtoll/fixtures.hpp"
#include "mixtoll/optimal.hpp"
#include "mixtoll/scenario.hpp"
#include "mixtoll/tolling.hpp"
#include "oracles.hpp"

using namespace mixtoll;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd z(2, 2);
  z << a, b, c, d;
  return z;
}

// Piecewise-linear latency from the definition: the first zhat[0] units of
// flow count as type 0, the next zhat[1] as type 1, and so on.
double literal_latency(const std::vector<double>& slopes, double base, const std::vector<double>& zhat, double f) {
  double value = base, used = 0.0;
  for (std::size_t j = 0; j < slopes.size(); ++j) {
    const bool last = j + 1 == slopes.size();
    const double take = last ? f - used : std::min(zhat[j], std::max(0.0, f - used));
    value += slopes[j] * std::max(0.0, take);
    used += std::max(0.0, take);
  }
  return value;
}

}  // namespace

TEST_CASE("bound formulas") {
  CHECK(lambda_bound(1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(lambda_bound(3.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(lambda_bound(std::nextafter(3.0, 4.0)) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(lambda_bound(4.0) == doctest::Approx(16.0 / 3.0).epsilon(1e-15));
  CHECK(anonymous_bound(1.0) == 1.0);
  CHECK(anonymous_bound(2.0) == doctest::Approx(16.0 / 7.0).epsilon(1e-15));
  CHECK(anonymous_bound(4.0) == doctest::Approx(64.0 / 13.0).epsilon(1e-15));
  CHECK_THROWS_AS(lambda_bound(0.5), InvalidArgument);
  CHECK_THROWS_AS(anonymous_bound(0.99), InvalidArgument);
  CHECK_THROWS_AS(lambda_bound(std::numeric_limits<double>::infinity()), InvalidArgument);
}

TEST_CASE("lower bound curves") {
  const auto c1 = lower_bound_curves(1.0);
  CHECK(c1.untolled_a == 1.0);
  CHECK(c1.untolled_b == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(c1.anonymous_unrestricted_cost == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c1.anonymous_unrestricted_ratio == doctest::Approx(1.0).epsilon(1e-15));
  const auto c4 = lower_bound_curves(4.0);
  CHECK(c4.untolled_b == doctest::Approx(9.0 / 5.0).epsilon(1e-15));
  CHECK(c4.anonymous_unrestricted_cost == doctest::Approx(31.0 / 4.0 - 0.2).epsilon(1e-15));
}

TEST_CASE("aggregated latency of a single road") {
  const Network net = Network::parallel({"1", "2"}, {{{2.0, 1.0}, 1.0}}, {1.0, 1.0});
  const Routing zhat = make_parallel_routing(net, Eigen::RowVector2d(1.0, 1.0));
  const Aggregation agg = aggregate(net, zhat);
  CHECK(agg.f_hat[0] == 2.0);
  CHECK(agg.latencies[0](2.0) == doctest::Approx(4.0));
  CHECK(agg.total_cost(agg.f_hat) == doctest::Approx(8.0));
  CHECK(agg.total_cost(agg.f_hat) == doctest::Approx(social_cost(net, zhat)));
  for (double f : {0.0, 0.3, 1.0, 1.7, 2.0, 3.5}) {
    CHECK(agg.latencies[0](f) == doctest::Approx(literal_latency({2.0, 1.0}, 1.0, {1.0, 1.0}, f)));
  }
}

TEST_CASE("aggregation of an empty road uses the last slope") {
  const Network net = Network::parallel({"1", "2"}, {{{2.0, 3.0}, 1.0}, {{1.0, 1.0}, 0.0}}, {1.0, 1.0});
  const Routing zhat = make_parallel_routing(net, mat2(0, 0, 1, 1));
  const Aggregation agg = aggregate(net, zhat);
  CHECK(agg.latencies[0](0.5) == doctest::Approx(1.0 + 3.0 * 0.5));
  CHECK(agg.latencies[0](2.0) == doctest::Approx(1.0 + 3.0 * 2.0));
}

TEST_CASE("aggregation keeps the cost identity in either segment order") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    InstanceGenSpec spec;
    spec.seed = seed;
    spec.n = 3;
    spec.m = 3;
    const Network net = generate_instance(spec);
    const auto set = enumerate_equilibria(net, TollSchedule::zero(net));
    for (const auto& e : set.equilibria) {
      for (auto order : {SegmentOrder::Input, SegmentOrder::NonincreasingSlope}) {
        const Aggregation agg = aggregate(net, e.routing, order);
        CHECK(std::abs(agg.total_cost(agg.f_hat) - e.cost) <= 1e-9 * std::max(1.0, e.cost));
        for (std::size_t i = 0; i < 3; ++i) {
          const double lat = road_latencies(net, e.routing.edge_flows)[static_cast<Eigen::Index>(i)];
          CHECK(agg.latencies[i](agg.f_hat[static_cast<Eigen::Index>(i)]) == doctest::Approx(lat));
        }
      }
    }
  }
}

TEST_CASE("aggregate minimiser matches a dense grid") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    InstanceGenSpec spec;
    spec.seed = seed;
    spec.n = 2;
    spec.m = 3;
    const Network net = generate_instance(spec);
    const auto eq = worst_equilibrium(net, TollSchedule::zero(net));
    for (auto order : {SegmentOrder::Input, SegmentOrder::NonincreasingSlope}) {
      const Aggregation agg = aggregate(net, eq.routing, order);
      const double D = agg.f_hat.sum();
      const auto opt = minimize_aggregate(agg, D);
      const double grid = oracle::grid_min_two([&](double f) { return agg.latencies[0](f); },
                                               [&](double f) { return agg.latencies[1](f); }, D);
      CHECK(opt.cost <= grid + 1e-9);
      CHECK(opt.cost >= grid - 1e-6);
      CHECK(opt.flows.sum() == doctest::Approx(D));
      CHECK(agg.total_cost(opt.flows) == doctest::Approx(opt.cost));
    }
  }
}

TEST_CASE("aggregation report on the worked examples") {
  {
    const Network net = fixtures::example_a(2.0);
    const auto opt = solve_optimal(net);
    const Routing rev = make_parallel_routing(net, mat2(1, 0, 0, 1));
    const auto r = verify_aggregation(net, rev, opt.routing);
    CHECK(r.aggregated_cost == doctest::Approx(4.0));
    CHECK(r.optimal_aggregated_cost >= 3.0 - 1e-9);
    CHECK(r.all_hold());
    const auto input = verify_aggregation(net, rev, opt.routing, SegmentOrder::Input);
    CHECK(input.cost_identity_holds);
    CHECK(input.f_hat_is_equilibrium);
  }
  {
    const Network net = fixtures::example_b(4.0);
    const auto opt = solve_optimal(net);
    const auto worst = worst_equilibrium(net, TollSchedule::zero(net));
    CHECK(verify_aggregation(net, worst.routing, opt.routing).all_hold());
  }
  {
    // Equal slopes and no intercepts: equilibrium and optimum coincide.
    const Network net = Network::parallel({"1", "2"}, {{{1, 1}, 0}, {{2, 2}, 0}}, {1, 1});
    const auto opt = solve_optimal(net);
    const auto set = enumerate_equilibria(net, TollSchedule::zero(net));
    REQUIRE(set.equilibria.size() >= 1);
    const auto r = verify_aggregation(net, set.equilibria[0].routing, opt.routing);
    CHECK(r.aggregated_cost == doctest::Approx(r.optimal_aggregated_cost).epsilon(1e-9));
  }
  {
    const Network net = fixtures::example_a(2.0);
    const Routing bad = make_parallel_routing(net, mat2(0.5, 0, 0.5, 1));
    CHECK_THROWS_AS(verify_aggregation(net, bad, solve_optimal(net).routing), InvalidArgument);
  }
}

TEST_CASE("input segment order can break monotonicity") {
  // Shallow type first: the steep segment comes last, so the per-road ratio
  // exceeds 1/4 under the literal order but not under the relabelled one.
  const std::vector<double> slopes{1.0, 10.0};
  const std::vector<double> zhat{1.0, 1.0};
  auto literal_ratio = [&](double f) {
    const double fh = 2.0, lh = literal_latency(slopes, 0.0, zhat, fh);
    return (lh - literal_latency(slopes, 0.0, zhat, f)) * f / (lh * fh);
  };
  double best = 0.0;
  for (int s = 0; s <= 2000; ++s) best = std::max(best, literal_ratio(2.0 * s / 2000));
  CHECK(best > 0.25);
  double relabelled = 0.0;
  for (int s = 0; s <= 2000; ++s) relabelled = std::max(relabelled, beta_l_ratio(slopes, 0.0, zhat, 2.0 * s / 2000));
  CHECK(relabelled <= 0.25 + 1e-12);
}

TEST_CASE("ratio expressions") {
  CHECK(beta_ck_ratio({1.0}, 0.5, {1.0}, {1.0}) == 0.0);
  CHECK(beta_ck_ratio({2.0, 1.0}, 0.0, {0.0, 0.0}, {0.0, 0.0}) == 0.0);
  const auto a = analytic_maximizers(2.0);
  CHECK(a.max_beta_ck == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.max_beta_l == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(a.max_gamma_ck == doctest::Approx(0.125).epsilon(1e-15));
  const auto a1 = analytic_maximizers(1.0);
  CHECK(a1.max_gamma_ck == doctest::Approx(0.0));
}

TEST_CASE("sampler maxima stay below the analytic bounds") {
  for (double k : {1.0, 2.0, 3.5}) {
    const auto r = beta_gamma_sampler(k, 20000, 7);
    CHECK(r.samples == 20000);
    CHECK(r.max_beta_ck <= r.bound_beta_ck + 1e-9);
    CHECK(r.max_beta_l <= r.bound_beta_l + 1e-9);
    CHECK(r.max_gamma_ck <= r.bound_gamma_ck + 1e-9);
    CHECK(r.max_beta_ck >= 0.9 * r.bound_beta_ck);
  }
  const auto x = beta_gamma_sampler(2.0, 500, 3);
  const auto y = beta_gamma_sampler(2.0, 500, 3);
  CHECK(x.max_beta_ck == y.max_beta_ck);
  CHECK_THROWS_AS(beta_gamma_sampler(2.0, 0, 1), InvalidArgument);
}

TEST_CASE("partitions at the reference routing") {
  const Network net = fixtures::example_a(2.0);
  const Routing ref = make_acyclic(net, solve_optimal(net).routing);
  const TollSchedule t = epsilon_differentiated_tolls(net, ref);
  const auto d = partition_roads(net, t, ref);
  CHECK(d.i1.empty());
  CHECK(d.i2.empty());
  CHECK(d.i3 == std::vector<std::size_t>{0, 1});
  CHECK_FALSE(d.deviation);
  CHECK_FALSE(d.contradiction);
  for (Eigen::Index i = 0; i < 2; ++i) CHECK(d.standard_costs[i] == doctest::Approx(t.epsilon_metadata()->mu));
  CHECK_THROWS_AS(partition_roads(net, differentiated_tolls(net, ref), ref), InvalidArgument);
}

TEST_CASE("partitions of a hand-built deviation") {
  // Type A alone on road 0; type B on roads 1 and 2. B then moves 0.1 onto road 0.
  const Network net = Network::parallel({"A", "B"}, {{{1, 1}, 0}, {{1, 1}, 0}, {{1, 1}, 0}}, {1, 2});
  Eigen::MatrixXd ref(3, 2);
  ref << 1, 0, 0, 1, 0, 1;
  const TollSchedule t = epsilon_differentiated_tolls(net, make_parallel_routing(net, ref));
  Eigen::MatrixXd dev(3, 2);
  dev << 1, 0.1, 0, 0.95, 0, 0.95;
  const auto d = partition_roads(net, t, make_parallel_routing(net, dev));
  CHECK(d.deviation);
  CHECK(d.i1 == std::vector<std::size_t>{0});
  CHECK(d.i2 == std::vector<std::size_t>{1, 2});
  CHECK(d.i3.empty());
  CHECK_FALSE(d.contradiction);
  CHECK(d.greater_flow_holds);
  CHECK(d.lesser_flow_holds);
  CHECK_FALSE(d.relative_costs_holds.has_value());
  CHECK(d.flags_hold());
  CHECK(d.standard_costs[0] == doctest::Approx(1.1));
  CHECK(d.standard_costs[1] == doctest::Approx(0.95));
}

TEST_CASE("phi closure reaches a fixed point within n steps") {
  Eigen::MatrixXd ref(4, 3);
  ref << 1, 0, 0,
         1, 1, 0,
         0, 1, 1,
         0, 0, 1;
  std::vector<std::size_t> a{0};
  for (int s = 0; s < 4; ++s) a = phi_closure_step(ref, a);
  CHECK(a == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(phi_closure_step(ref, a) == a);
  CHECK(phi_closure_step(ref, {}).empty());
  CHECK(phi_closure_step(ref, {0}) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("price of anarchy reports") {
  {
    const auto r = poa_report(fixtures::example_a(2.0));
    CHECK(r.empirical_poa == doctest::Approx(2.0));
    CHECK(r.bound_value == doctest::Approx(2.0));
    CHECK(r.bound_name == BoundName::LambdaUntolled);
    CHECK(r.satisfied);
  }
  {
    const auto r = poa_report(fixtures::example_a(2.0), TollScheme::Anonymous);
    CHECK(r.empirical_poa == doctest::Approx(2.0));
    CHECK(r.bound_value == doctest::Approx(16.0 / 7.0));
    CHECK(r.bound_name == BoundName::Anonymous);
    CHECK(r.satisfied);
  }
  {
    const auto r = poa_report(fixtures::example_b(4.0), TollScheme::Anonymous);
    CHECK(r.worst_eq_cost == doctest::Approx(4.0 / 3.0));
    CHECK(r.empirical_poa == doctest::Approx(1.6));
    CHECK(r.bound_value == doctest::Approx(64.0 / 13.0));
    CHECK(r.satisfied);
  }
  {
    const auto r = poa_report(fixtures::example_a(2.0), TollScheme::Epsilon);
    CHECK(r.empirical_poa == doctest::Approx(1.0));
    CHECK(r.bound_name == BoundName::None);
  }
  {
    const auto r = poa_report(fixtures::pigou());
    CHECK(r.empirical_poa == doctest::Approx(4.0 / 3.0));
    CHECK(r.satisfied);
  }
  CHECK(to_string(BoundName::LambdaUntolled) == "lambda_untolled");
  CHECK(to_string(BoundName::None) == "none");
}
