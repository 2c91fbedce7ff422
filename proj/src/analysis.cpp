#include "mixtoll/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mixtoll/optimal.hpp"
#include "mixtoll/rng.hpp"

namespace mixtoll {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_k(double k, const char* what) {
  if (!(k >= 1.0) || !std::isfinite(k)) {
    throw InvalidArgument(std::string(what) + ": k must be finite and at least 1");
  }
}

std::vector<std::size_t> nonincreasing_order(const std::vector<double>& slopes) {
  std::vector<std::size_t> order(slopes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return slopes[a] > slopes[b]; });
  return order;
}

AggregatedLatency build_latency(std::size_t road, const std::vector<double>& slopes,
                                double intercept, const std::vector<double>& zhat,
                                SegmentOrder order) {
  std::vector<std::size_t> perm(slopes.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (order == SegmentOrder::NonincreasingSlope) perm = nonincreasing_order(slopes);
  AggregatedLatency l;
  l.road = road;
  l.base = intercept;
  double cumulative = 0.0;
  for (std::size_t s = 0; s < perm.size(); ++s) {
    l.segment_slopes.push_back(slopes[perm[s]]);
    if (s + 1 < perm.size()) {
      cumulative += zhat[perm[s]];
      l.breakpoints.push_back(cumulative);
    }
  }
  return l;
}

/// Exact minimiser of sum_i (q_i f_i^2 + r_i f_i) over lo <= f <= hi, sum f = D
/// with q >= 0, via the piecewise-linear response f_i(lambda) of the
/// equalised marginal cost r_i + 2 q_i f_i = lambda.
std::optional<Eigen::VectorXd> separable_qp(const std::vector<double>& q, const std::vector<double>& r,
                                            const std::vector<double>& lo,
                                            const std::vector<double>& hi, double D) {
  const std::size_t n = q.size();
  double lo_sum = 0.0, hi_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lo_sum += lo[i];
    hi_sum += hi[i];
  }
  const double slack = 1e-12 * (1.0 + D);
  if (lo_sum > D + slack || hi_sum < D - slack) return std::nullopt;

  auto response = [&](std::size_t i, double lambda) {
    return std::clamp((lambda - r[i]) / (2.0 * q[i]), lo[i], hi[i]);
  };
  // Left (right) limit of the total response at lambda: flat roads priced
  // exactly lambda sit at their lower (upper) bound.
  auto total = [&](double lambda, bool right) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (q[i] > 0.0) {
        sum += response(i, lambda);
      } else {
        sum += (r[i] < lambda || (right && r[i] == lambda)) ? hi[i] : lo[i];
      }
    }
    return sum;
  };
  // Responses at lambda with flat roads priced lambda filled up to D in index order.
  auto fill_at = [&](double lambda) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(n));
    double placed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      f[ii] = q[i] > 0.0 ? response(i, lambda) : (r[i] < lambda ? hi[i] : lo[i]);
      placed += f[ii];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (q[i] > 0.0 || r[i] != lambda) continue;
      const double add = std::clamp(D - placed, 0.0, hi[i] - lo[i]);
      f[static_cast<Eigen::Index>(i)] += add;
      placed += add;
    }
    return f;
  };

  std::vector<double> breaks;
  for (std::size_t i = 0; i < n; ++i) {
    breaks.push_back(r[i] + 2.0 * q[i] * lo[i]);
    if (std::isfinite(hi[i])) breaks.push_back(r[i] + 2.0 * q[i] * hi[i]);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (breaks.empty()) return std::nullopt;

  // The total is piecewise linear between breakpoints, so the crossing is exact.
  for (std::size_t b = 0; b < breaks.size(); ++b) {
    const double left = total(breaks[b], false);
    if (b > 0 && left > D) {
      const double prev = total(breaks[b - 1], true);
      const double t = breaks[b - 1] + (breaks[b] - breaks[b - 1]) * (D - prev) / (left - prev);
      return fill_at(t);
    }
    if (total(breaks[b], true) >= D) return fill_at(breaks[b]);
  }
  // Past the last breakpoint only unbounded sloped roads keep growing.
  double rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (q[i] > 0.0 && !std::isfinite(hi[i])) rate += 1.0 / (2.0 * q[i]);
  }
  if (rate <= 0.0) return std::nullopt;
  return fill_at(breaks.back() + (D - total(breaks.back(), true)) / rate);
}

}  // namespace

double lambda_bound(double k) {
  require_k(k, "lambda_bound");
  return k <= 3.0 ? 4.0 / (4.0 - k) : 4.0 * k / 3.0;
}

double anonymous_bound(double k) {
  require_k(k, "anonymous_bound");
  return 4.0 * k * k / (3.0 * k + 1.0);
}

LowerBoundCurves lower_bound_curves(double k) {
  require_k(k, "lower_bound_curves");
  LowerBoundCurves c;
  c.untolled_a = k;
  c.untolled_b = 1.0 + k / (2.0 * std::sqrt(k) + 1.0);
  c.anonymous_unrestricted_cost = (7.0 * k + 3.0) / 4.0 - 1.0 / (k + 1.0);
  c.anonymous_unrestricted_ratio = c.anonymous_unrestricted_cost / 2.0;
  return c;
}

double AggregatedLatency::value_at_segment_start(std::size_t s) const {
  double value = base;
  double previous = 0.0;
  for (std::size_t t = 0; t < s; ++t) {
    value += segment_slopes[t] * (breakpoints[t] - previous);
    previous = breakpoints[t];
  }
  return value;
}

std::size_t AggregatedLatency::segment_of(double f) const {
  for (std::size_t s = 0; s < breakpoints.size(); ++s) {
    if (f <= breakpoints[s]) return s;
  }
  return breakpoints.size();
}

double AggregatedLatency::operator()(double f) const {
  const std::size_t s = segment_of(f);
  const double start = s == 0 ? 0.0 : breakpoints[s - 1];
  return value_at_segment_start(s) + segment_slopes[s] * (f - start);
}

double Aggregation::total_cost(const Eigen::VectorXd& f) const {
  double total = 0.0;
  for (std::size_t i = 0; i < latencies.size(); ++i) {
    const double fi = f[static_cast<Eigen::Index>(i)];
    total += fi * latencies[i](fi);
  }
  return total;
}

Aggregation aggregate(const Network& net, const Routing& zhat, SegmentOrder order) {
  if (!net.is_parallel()) throw InvalidArgument("aggregate: parallel networks only");
  require_feasible(net, zhat);
  Aggregation agg;
  agg.f_hat = zhat.edge_flows.rowwise().sum();
  for (std::size_t i = 0; i < net.num_roads(); ++i) {
    const auto row = zhat.edge_flows.row(static_cast<Eigen::Index>(i));
    std::vector<double> flows;
    for (Eigen::Index j = 0; j < row.size(); ++j) flows.push_back(row[j]);
    agg.latencies.push_back(
        build_latency(i, net.road(i).slopes, net.road(i).intercept, flows, order));
  }
  return agg;
}

AggregateOptimum minimize_aggregate(const Aggregation& agg, double total_demand) {
  const std::size_t n = agg.latencies.size();
  std::vector<std::size_t> counts, choice(n, 0);
  double combos = 1.0;
  for (const auto& l : agg.latencies) {
    counts.push_back(l.segment_slopes.size());
    combos *= static_cast<double>(l.segment_slopes.size());
  }
  if (combos > 1e6) throw SizeLimitExceeded("minimize_aggregate: too many segment combinations");

  AggregateOptimum best;
  best.cost = kInf;
  std::vector<double> q(n), r(n), lo(n), hi(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& l = agg.latencies[i];
      const std::size_t s = choice[i];
      lo[i] = s == 0 ? 0.0 : l.breakpoints[s - 1];
      hi[i] = s < l.breakpoints.size() ? l.breakpoints[s] : kInf;
      q[i] = l.segment_slopes[s];
      r[i] = l.value_at_segment_start(s) - q[i] * lo[i];
    }
    if (auto f = separable_qp(q, r, lo, hi, total_demand)) {
      const double cost = agg.total_cost(*f);
      if (cost < best.cost) {
        best.cost = cost;
        best.flows = *f;
      }
    }
    std::size_t i = 0;
    for (; i < n; ++i) {
      if (++choice[i] < counts[i]) break;
      choice[i] = 0;
    }
    if (i == n) break;
  }
  if (!std::isfinite(best.cost)) throw Error("minimize_aggregate: no feasible segment combination");
  return best;
}

AggregationReport verify_aggregation(const Network& net, const Routing& zhat,
                                     const Routing& optimal, SegmentOrder order) {
  const auto eq = wardrop_check(net, TollSchedule::zero(net), zhat);
  if (!eq.is_equilibrium()) throw InvalidArgument("verify_aggregation: routing is not an equilibrium");
  const Aggregation agg = aggregate(net, zhat, order);

  AggregationReport rep;
  rep.social_cost = social_cost(net, zhat);
  rep.aggregated_cost = agg.total_cost(agg.f_hat);
  const double scale = std::max(1.0, std::abs(rep.social_cost));
  rep.cost_identity_holds = std::abs(rep.aggregated_cost - rep.social_cost) <= 1e-9 * scale;

  double cheapest = kInf;
  for (std::size_t i = 0; i < agg.latencies.size(); ++i) {
    cheapest = std::min(cheapest, agg.latencies[i](agg.f_hat[static_cast<Eigen::Index>(i)]));
  }
  for (std::size_t i = 0; i < agg.latencies.size(); ++i) {
    const double fi = agg.f_hat[static_cast<Eigen::Index>(i)];
    if (fi > kSupportTol) {
      rep.equilibrium_residual = std::max(rep.equilibrium_residual, agg.latencies[i](fi) - cheapest);
    }
  }
  rep.f_hat_is_equilibrium = rep.equilibrium_residual <= kEquilibriumTol;

  const double demand = std::accumulate(net.demands().begin(), net.demands().end(), 0.0);
  const auto opt = minimize_aggregate(agg, demand);
  rep.optimal_aggregated_cost = opt.cost;
  rep.optimal_flows = opt.flows;
  rep.agg_poa_holds = rep.aggregated_cost <= 4.0 / 3.0 * opt.cost + 1e-6 * scale;

  rep.optimal_social_cost = social_cost(net, optimal);
  rep.k = degree_of_asymmetry(net);
  const Eigen::VectorXd f_opt = optimal.edge_flows.rowwise().sum();
  rep.aggregated_cost_of_optimum = agg.total_cost(f_opt);
  for (std::size_t i = 0; i < net.num_roads(); ++i) {
    const auto& road = net.road(i);
    const double load = f_opt[static_cast<Eigen::Index>(i)];
    const double least = *std::min_element(road.slopes.begin(), road.slopes.end());
    rep.reassignment_bound += load * rep.k * (road.intercept + least * load);
  }
  if (is_unbounded(rep.k)) {
    rep.agg_opt_cost_holds = true;
  } else {
    const double opt_scale = std::max(1.0, std::abs(rep.optimal_social_cost));
    rep.agg_opt_cost_holds = opt.cost <= rep.k * rep.optimal_social_cost + 1e-6 * opt_scale;
  }
  return rep;
}

double beta_ck_ratio(const std::vector<double>& slopes, double intercept,
                     const std::vector<double>& zhat, const std::vector<double>& z) {
  double z_total = 0.0, zhat_total = 0.0, diff = 0.0, load = intercept;
  for (std::size_t j = 0; j < slopes.size(); ++j) {
    z_total += z[j];
    zhat_total += zhat[j];
    diff += slopes[j] * (zhat[j] - z[j]);
    load += slopes[j] * zhat[j];
  }
  const double den = zhat_total * load;
  return den > 0.0 ? z_total * diff / den : 0.0;
}

double beta_l_ratio(const std::vector<double>& slopes, double intercept,
                    const std::vector<double>& zhat, double f) {
  const auto l = build_latency(0, slopes, intercept, zhat, SegmentOrder::NonincreasingSlope);
  const double f_hat = std::accumulate(zhat.begin(), zhat.end(), 0.0);
  const double den = l(f_hat) * f_hat;
  return den > 0.0 ? (l(f_hat) - l(f)) * f / den : 0.0;
}

double gamma_ratio(const std::vector<double>& slopes, double intercept,
                   const std::vector<double>& zhat, double f) {
  const auto l = build_latency(0, slopes, intercept, zhat, SegmentOrder::NonincreasingSlope);
  const double f_hat = std::accumulate(zhat.begin(), zhat.end(), 0.0);
  const double toll = *std::min_element(slopes.begin(), slopes.end()) * f;
  const double den = l(f_hat) * f_hat;
  return den > 0.0 ? ((l(f_hat) - l(f)) * f - toll * (f_hat - f)) / den : 0.0;
}

SamplerResult beta_gamma_sampler(double k, std::size_t samples, std::uint64_t seed) {
  require_k(k, "beta_gamma_sampler");
  if (samples == 0) throw InvalidArgument("samples: must be at least 1");
  SamplerResult out;
  out.k = k;
  out.samples = samples;
  out.bound_beta_ck = k / 4.0;
  out.bound_gamma_ck = (k - 1.0) / (4.0 * k);
  out.max_beta_ck = out.max_beta_l = out.max_gamma_ck = -kInf;

  Rng rng(seed);
  std::vector<double> a, zhat, z;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t m = 1 + static_cast<std::size_t>(rng.below(4));
    const double scale = rng.uniform(0.1, 3.0);
    a.assign(m, 0.0);
    zhat.assign(m, 0.0);
    z.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      // Slopes in [scale, k*scale] with the extremes hit often.
      const double u = rng.uniform();
      a[j] = scale * (u < 0.25 ? 1.0 : u < 0.5 ? k : rng.uniform(1.0, k));
      zhat[j] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 2.0);
    }
    const double f_hat = std::accumulate(zhat.begin(), zhat.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      z[j] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, std::max(1.0, k * f_hat));
    }
    const double b = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 2.0);
    const double f = rng.uniform(0.0, 1.5 * std::max(f_hat, 1e-3));
    out.max_beta_ck = std::max(out.max_beta_ck, beta_ck_ratio(a, b, zhat, z));
    out.max_beta_l = std::max(out.max_beta_l, beta_l_ratio(a, b, zhat, f));
    out.max_gamma_ck = std::max(out.max_gamma_ck, gamma_ratio(a, b, zhat, f));
  }
  return out;
}

SamplerResult analytic_maximizers(double k) {
  require_k(k, "analytic_maximizers");
  SamplerResult out;
  out.k = k;
  out.samples = 1;
  out.bound_beta_ck = k / 4.0;
  out.bound_gamma_ck = (k - 1.0) / (4.0 * k);
  const std::vector<double> a{k, 1.0};
  const std::vector<double> zhat{1.0, 0.0};
  out.max_beta_ck = beta_ck_ratio(a, 0.0, zhat, {0.0, k / 2.0});
  out.max_beta_l = beta_l_ratio(a, 0.0, zhat, 0.5);
  out.max_gamma_ck = gamma_ratio(a, 0.0, zhat, 0.5);
  return out;
}

std::vector<std::size_t> phi_closure_step(const Eigen::MatrixXd& reference,
                                          const std::vector<std::size_t>& roads) {
  std::vector<bool> in(static_cast<std::size_t>(reference.rows()), false);
  for (auto i : roads) in[i] = true;
  std::vector<bool> next = in;
  for (Eigen::Index j = 0; j < reference.cols(); ++j) {
    bool touches = false;
    for (auto i : roads) touches = touches || reference(static_cast<Eigen::Index>(i), j) > kSupportTol;
    if (!touches) continue;
    for (Eigen::Index i = 0; i < reference.rows(); ++i) {
      if (reference(i, j) > kSupportTol) next[static_cast<std::size_t>(i)] = true;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (next[i]) out.push_back(i);
  }
  return out;
}

PartitionDiagnostics partition_roads(const Network& net, const TollSchedule& tolls,
                                     const Routing& zhat, double tol) {
  const auto& meta = tolls.epsilon_metadata();
  if (!meta) throw InvalidArgument("partition_roads: toll schedule lacks epsilon metadata");
  require_feasible(net, zhat);
  const Eigen::MatrixXd& ref = meta->reference_flows;
  const Eigen::MatrixXd& z = zhat.edge_flows;
  const auto n = static_cast<std::size_t>(ref.rows());
  const Eigen::Index m = ref.cols();

  PartitionDiagnostics d;
  std::vector<bool> used(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    used[i] = (ref.row(static_cast<Eigen::Index>(i)).array() > kSupportTol).any();
    if (used[i]) d.used_roads.push_back(i);
  }
  d.standard_costs.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    d.standard_costs[static_cast<Eigen::Index>(i)] = standard_cost(net, tolls, z, i);
  }

  // Deviations: type j on road i now, but not in the reference routing.
  std::vector<std::pair<std::size_t, Eigen::Index>> deviations;
  std::vector<std::size_t> seed1, seed2;
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (z(static_cast<Eigen::Index>(i), j) > kSupportTol &&
          ref(static_cast<Eigen::Index>(i), j) <= kSupportTol) {
        deviations.emplace_back(i, j);
        if (used[i]) seed1.push_back(i);
        for (std::size_t r = 0; r < n; ++r) {
          if (ref(static_cast<Eigen::Index>(r), j) > kSupportTol) seed2.push_back(r);
        }
      }
    }
  }
  d.deviation = !deviations.empty();
  auto closure = [&](std::vector<std::size_t> set) {
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    std::size_t steps = 0;
    for (std::size_t it = 0; it < n; ++it) {
      auto next = phi_closure_step(ref, set);
      if (next == set) break;
      set = std::move(next);
      ++steps;
    }
    d.closure_steps = std::max(d.closure_steps, steps);
    return set;
  };
  d.i1 = closure(seed1);
  d.i2 = closure(seed2);
  for (auto i : d.used_roads) {
    const bool in1 = std::binary_search(d.i1.begin(), d.i1.end(), i);
    const bool in2 = std::binary_search(d.i2.begin(), d.i2.end(), i);
    if (in1 && in2) d.contradiction = true;
    if (!in1 && !in2) d.i3.push_back(i);
  }

  d.c_low = kInf;
  d.c_high = -kInf;
  for (auto i : d.used_roads) {
    d.c_low = std::min(d.c_low, d.standard_costs[static_cast<Eigen::Index>(i)]);
    d.c_high = std::max(d.c_high, d.standard_costs[static_cast<Eigen::Index>(i)]);
  }
  if (d.used_roads.empty()) d.c_low = d.c_high = 0.0;

  // Reference standard cost is mu on every used road.
  for (auto i : d.i1) {
    if (d.standard_costs[static_cast<Eigen::Index>(i)] < meta->mu - tol) d.greater_flow_holds = false;
  }
  for (auto i : d.i2) {
    if (d.standard_costs[static_cast<Eigen::Index>(i)] > meta->mu + tol) d.lesser_flow_holds = false;
  }

  if (d.deviation && wardrop_check(net, tolls, zhat).is_equilibrium()) {
    bool holds = std::abs(d.c_high - (d.c_low + meta->epsilon)) <= tol;
    for (const auto& [i, j] : deviations) {
      if (used[i] && std::abs(d.standard_costs[static_cast<Eigen::Index>(i)] - d.c_low) > tol) holds = false;
      for (std::size_t r = 0; r < n; ++r) {
        if (ref(static_cast<Eigen::Index>(r), j) > kSupportTol &&
            std::abs(d.standard_costs[static_cast<Eigen::Index>(r)] - (d.c_low + meta->epsilon)) > tol) {
          holds = false;
        }
      }
    }
    d.relative_costs_holds = holds;
  }
  return d;
}

std::string to_string(BoundName name) {
  switch (name) {
    case BoundName::LambdaUntolled: return "lambda_untolled";
    case BoundName::Anonymous: return "anonymous";
    case BoundName::None: return "none";
  }
  return "none";
}

PoAReport poa_report(const Network& net, const TollSchedule& tolls, BoundName bound) {
  PoAReport rep;
  const auto opt = solve_optimal(net, SolveMode::Exact);
  rep.optimal = opt.routing;
  rep.optimal_cost = opt.cost;
  const auto worst = worst_equilibrium(net, tolls);
  rep.worst = worst.routing;
  rep.worst_eq_cost = worst.cost;
  rep.tolls = tolls;
  rep.k = degree_of_asymmetry(net);
  if (rep.optimal_cost > 0.0) {
    rep.empirical_poa = rep.worst_eq_cost / rep.optimal_cost;
  } else {
    rep.empirical_poa = rep.worst_eq_cost > 0.0 ? kInf : 1.0;
  }
  rep.bound_name = is_unbounded(rep.k) ? BoundName::None : bound;
  switch (rep.bound_name) {
    case BoundName::LambdaUntolled: rep.bound_value = lambda_bound(rep.k); break;
    case BoundName::Anonymous: rep.bound_value = anonymous_bound(rep.k); break;
    case BoundName::None: rep.bound_value = kInf; break;
  }
  if (rep.bound_name != BoundName::None) {
    const double scale = std::max(1.0, std::abs(rep.optimal_cost));
    rep.satisfied = rep.worst_eq_cost <= rep.bound_value * rep.optimal_cost + 1e-6 * scale;
  }
  return rep;
}

PoAReport poa_report(const Network& net, TollScheme scheme, const EpsilonTollParams& params) {
  const auto opt = solve_optimal(net, SolveMode::Exact);
  Routing reference = opt.routing;
  if (scheme == TollScheme::Epsilon) reference = make_acyclic(net, reference);
  const TollSchedule tolls = build_tolls(net, scheme, reference, params);
  const BoundName bound = scheme == TollScheme::None        ? BoundName::LambdaUntolled
                          : scheme == TollScheme::Anonymous ? BoundName::Anonymous
                                                            : BoundName::None;
  return poa_report(net, tolls, bound);
}

}  // namespace mixtoll
