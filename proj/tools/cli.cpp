#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "mixtoll/analysis.hpp"
#include "mixtoll/equilibrium.hpp"
#include "mixtoll/fixtures.hpp"
#include "mixtoll/optimal.hpp"
#include "mixtoll/scenario.hpp"
#include "mixtoll/tolling.hpp"

namespace mixtoll::cli {

namespace {

struct Common {
  std::string scenario;
  std::string out;
  std::string format = "csv";
  double tol = kEquilibriumTol;
  std::uint64_t seed = 1;
};

struct TollFlags {
  std::string scheme;
  std::string tolls_file;
  std::optional<double> epsilon, mu, big_p;
};

ScenarioFile resolve_scenario(const std::string& name) {
  if (name.empty()) throw InvalidArgument("--scenario: required");
  if (std::filesystem::exists(name)) return load_scenario(name);
  std::string stem = name;
  if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json") stem.resize(stem.size() - 5);
  if (auto s = fixtures::bundled_scenario(std::filesystem::path(stem).filename().string())) return *s;
  throw Error("cannot open scenario '" + name + "' (not a file or bundled scenario)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& text, const Common& c, std::ostream& out) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw Error("cannot write " + c.out);
  f << text;
}

EpsilonTollParams epsilon_params(const TollFlags& t) { return {t.mu, t.epsilon, t.big_p}; }

/// Schedule chosen by --tolls, then --scheme, then the scenario's own tolls.
TollSchedule resolve_tolls(const ScenarioFile& s, const TollFlags& t, TollScheme* scheme_out) {
  if (scheme_out) *scheme_out = TollScheme::None;
  if (!t.tolls_file.empty()) return parse_tolls(read_file(t.tolls_file), s.network);
  if (t.scheme.empty() && s.tolls) return *s.tolls;
  const TollScheme scheme = parse_toll_scheme(t.scheme.empty() ? "none" : t.scheme);
  if (scheme_out) *scheme_out = scheme;
  if (scheme == TollScheme::None) return TollSchedule::zero(s.network);
  Routing reference = solve_optimal(s.network).routing;
  if (scheme == TollScheme::Epsilon) reference = make_acyclic(s.network, reference);
  return build_tolls(s.network, scheme, reference, epsilon_params(t));
}

Cell idx(std::size_t v) { return static_cast<std::int64_t>(v); }

void add_flows(Report& r, const std::vector<Cell>& prefix, const Network& net, const Routing& z) {
  for (Eigen::Index i = 0; i < z.edge_flows.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.edge_flows.cols(); ++j) {
      auto row = prefix;
      row.insert(row.end(), {Cell{"flow"}, idx(static_cast<std::size_t>(i)), idx(static_cast<std::size_t>(j)),
                             Cell{z.edge_flows(i, j)}});
      r.rows.push_back(std::move(row));
    }
  }
  if (!net.is_parallel()) {
    for (std::size_t k = 0; k < z.path_flows.size(); ++k) {
      for (Eigen::Index p = 0; p < z.path_flows[k].size(); ++p) {
        auto row = prefix;
        row.insert(row.end(), {Cell{"path_flow"}, idx(k), idx(static_cast<std::size_t>(p)),
                               Cell{z.path_flows[k][p]}});
        r.rows.push_back(std::move(row));
      }
    }
  }
}

std::vector<Cell> scalar(const std::vector<Cell>& prefix, const std::string& name, Cell value) {
  auto row = prefix;
  row.insert(row.end(), {Cell{name}, Cell{""}, Cell{""}, std::move(value)});
  return row;
}

int cmd_optimal(const Common& c, const std::string& mode, std::size_t restarts, std::ostream& out) {
  const auto s = resolve_scenario(c.scenario);
  HeuristicOptions h;
  h.seed = c.seed;
  h.restarts = restarts;
  SolveMode m;
  if (mode == "exact") {
    m = SolveMode::Exact;
  } else if (mode == "heuristic") {
    m = SolveMode::Heuristic;
  } else {
    throw InvalidArgument("--mode: must be exact or heuristic");
  }
  const auto res = solve_optimal(s.network, m, h);
  Report r{{"quantity", "index", "subindex", "value"}, {}};
  r.rows.push_back(scalar({}, "cost", res.cost));
  r.rows.push_back(scalar({}, "method", res.method == SolveMethod::Enumeration ? "enumeration" : "multistart"));
  if (res.method == SolveMethod::Enumeration) {
    r.rows.push_back(scalar({}, "candidates_examined", idx(res.candidates_examined)));
    for (std::size_t k = 0; k < res.support_pattern.size(); ++k) {
      r.rows.push_back({Cell{"support_mask"}, idx(k), Cell{""}, idx(res.support_pattern[k])});
      r.rows.push_back({Cell{"multiplier"}, idx(k), Cell{""}, res.multipliers[k]});
    }
  }
  if (res.gap_estimate) r.rows.push_back(scalar({}, "gap_estimate", *res.gap_estimate));
  add_flows(r, {}, s.network, res.routing);
  emit(write_report(r, parse_report_format(c.format)), c, out);
  return 0;
}

int cmd_equilibria(const Common& c, const TollFlags& t, std::ostream& out) {
  const auto s = resolve_scenario(c.scenario);
  const TollSchedule tolls = resolve_tolls(s, t, nullptr);
  EnumerationOptions opts;
  opts.tol = c.tol;
  const auto set = enumerate_equilibria(s.network, tolls, opts);
  Report r{{"equilibrium", "quantity", "index", "subindex", "value"}, {}};
  r.rows.push_back({Cell{""}, Cell{"exhaustive"}, Cell{""}, Cell{""}, Cell{set.exhaustive}});
  r.rows.push_back({Cell{""}, Cell{"count"}, Cell{""}, Cell{""}, idx(set.equilibria.size())});
  for (std::size_t e = 0; e < set.equilibria.size(); ++e) {
    const auto& eq = set.equilibria[e];
    const std::vector<Cell> pre{idx(e)};
    r.rows.push_back(scalar(pre, "cost", eq.cost));
    r.rows.push_back(scalar(pre, "degenerate", eq.degenerate));
    r.rows.push_back(scalar(pre, "interior", eq.interior));
    r.rows.push_back(scalar(pre, "residual", eq.certificate.residual));
    for (std::size_t k = 0; k < eq.certificate.common_costs.size(); ++k) {
      r.rows.push_back({idx(e), Cell{"common_cost"}, idx(k), Cell{""}, eq.certificate.common_costs[k]});
    }
    add_flows(r, pre, s.network, eq.routing);
  }
  emit(write_report(r, parse_report_format(c.format)), c, out);
  return 0;
}

int cmd_toll(const Common& c, const TollFlags& t, std::ostream& out) {
  const auto s = resolve_scenario(c.scenario);
  TollFlags flags = t;
  if (flags.scheme.empty()) flags.scheme = "differentiated";
  emit(serialize_tolls(resolve_tolls(s, flags, nullptr)), c, out);
  return 0;
}

Report poa_table(const PoAReport& p, const std::string& scheme) {
  return Report{{"scheme", "optimal_cost", "worst_eq_cost", "empirical_poa", "k", "bound_name",
                 "bound_value", "satisfied"},
                {{scheme, p.optimal_cost, p.worst_eq_cost, p.empirical_poa, p.k,
                  to_string(p.bound_name), p.bound_value, p.satisfied}}};
}

int cmd_poa(const Common& c, const TollFlags& t, std::ostream& out) {
  const auto s = resolve_scenario(c.scenario);
  PoAReport p;
  std::string label;
  if (t.tolls_file.empty()) {
    const TollScheme scheme = parse_toll_scheme(t.scheme.empty() ? "none" : t.scheme);
    p = poa_report(s.network, scheme, epsilon_params(t));
    label = to_string(scheme);
  } else {
    p = poa_report(s.network, parse_tolls(read_file(t.tolls_file), s.network), BoundName::None);
    label = "file";
  }
  emit(write_report(poa_table(p, label), parse_report_format(c.format)), c, out);
  return p.satisfied ? 0 : 1;
}

Report examples_table(double k) {
  if (!(k >= 1.0)) throw InvalidArgument("--k: must be at least 1");
  Report r{{"example", "quantity", "computed", "formula", "abs_error"}, {}};
  auto add = [&](const char* ex, const char* q, double computed, double formula) {
    r.rows.push_back({ex, q, computed, formula, std::abs(computed - formula)});
  };
  const double s = std::sqrt(k);
  {
    const Network net = fixtures::example_a(k);
    const auto opt = solve_optimal(net);
    const auto worst = worst_equilibrium(net, TollSchedule::zero(net));
    const auto anon = anonymous_tolls(net, opt.routing);
    const auto worst_anon = worst_equilibrium(net, anon);
    add("a", "optimal_cost", opt.cost, 2.0);
    add("a", "worst_untolled_cost", worst.cost, 2.0 * k);
    add("a", "untolled_poa", worst.cost / opt.cost, k);
    add("a", "anonymous_toll_road1", anon(0, 0), 1.0);
    add("a", "anonymous_toll_road2", anon(1, 0), 1.0);
    add("a", "worst_anonymous_cost", worst_anon.cost, 2.0 * k);
  }
  {
    const Network net = fixtures::example_b(k);
    const auto opt = solve_optimal(net);
    const auto worst = worst_equilibrium(net, TollSchedule::zero(net));
    const auto anon = anonymous_tolls(net, opt.routing);
    const auto worst_anon = worst_equilibrium(net, anon);
    Eigen::MatrixXd half = Eigen::MatrixXd::Zero(2, 2);
    half.row(1).setConstant(0.5);
    const auto worst_half = worst_equilibrium(net, TollSchedule(half));
    add("b", "optimal_cost", opt.cost, 1.0 / s + 1.0 / (s + 1.0));
    add("b", "worst_untolled_cost", worst.cost, 1.0 + 1.0 / s);
    add("b", "anonymous_toll_road1", anon(0, 0), 0.0);
    add("b", "anonymous_toll_road2", anon(1, 0), 1.0 / (s + 1.0));
    add("b", "worst_anonymous_cost", worst_anon.cost, 1.0 + 1.0 / (s + 1.0));
    add("b", "worst_half_toll_cost", worst_half.cost, 1.0 + (3.0 * s - 1.0) / (4.0 * k));
  }
  return r;
}

struct ValidateFlags {
  std::size_t instances = 100;
  std::size_t n = 3;
  std::size_t m = 2;
  std::optional<double> target_k;
};

/// Every applicable theorem inequality on one generated instance.
std::vector<Cell> validate_instance(std::size_t index, std::uint64_t seed, const ValidateFlags& v,
                                    bool* pass) {
  InstanceGenSpec spec;
  spec.seed = seed;
  spec.n = v.n;
  spec.m = v.m;
  spec.target_k = v.target_k;
  const Network net = generate_instance(spec);
  const auto opt = solve_optimal(net);
  const double k = degree_of_asymmetry(net);
  const double scale = std::max(1.0, opt.cost);

  const auto untolled = enumerate_equilibria(net, TollSchedule::zero(net));
  double worst_untolled = 0.0;
  bool aggregation_ok = true;
  for (const auto& eq : untolled.equilibria) {
    worst_untolled = std::max(worst_untolled, eq.cost);
    aggregation_ok = aggregation_ok && verify_aggregation(net, eq.routing, opt.routing).all_hold();
  }
  worst_untolled = std::max(worst_untolled, worst_equilibrium(net, untolled, TollSchedule::zero(net)).cost);
  const bool lambda_ok = worst_untolled <= lambda_bound(k) * opt.cost + 1e-6 * scale;

  const auto anon = anonymous_tolls(net, opt.routing);
  const auto anon_set = enumerate_equilibria(net, anon);
  const double worst_anon = worst_equilibrium(net, anon_set, anon).cost;
  const bool anon_ok = worst_anon <= anonymous_bound(k) * opt.cost + 1e-6 * scale;

  const auto diff = differentiated_tolls(net, opt.routing);
  bool diff_ok = true;
  for (const auto& eq : enumerate_equilibria(net, diff).equilibria) {
    diff_ok = diff_ok && std::abs(eq.cost - opt.cost) <= 1e-6 * scale;
  }

  const Routing acyclic = make_acyclic(net, opt.routing);
  const auto eps = epsilon_differentiated_tolls(net, acyclic);
  const auto eps_set = enumerate_equilibria(net, eps);
  const bool eps_ok = eps_set.equilibria.size() == 1 &&
                      (eps_set.equilibria.front().routing.edge_flows - acyclic.edge_flows)
                              .cwiseAbs()
                              .maxCoeff() <= 1e-6;

  *pass = lambda_ok && anon_ok && diff_ok && eps_ok && aggregation_ok;
  return {idx(index), static_cast<std::int64_t>(seed), k, opt.cost, worst_untolled / opt.cost,
          lambda_bound(k), worst_anon / opt.cost, anonymous_bound(k), diff_ok, eps_ok,
          aggregation_ok, *pass ? "pass" : "fail"};
}

int cmd_validate(const Common& c, const ValidateFlags& v, std::ostream& out) {
  if (v.instances == 0) throw InvalidArgument("--instances: must be at least 1");
  Report r{{"instance", "seed", "k", "optimal_cost", "untolled_ratio", "lambda_bound", "anonymous_ratio",
            "anonymous_bound", "differentiated_optimal", "epsilon_unique", "aggregation", "result"},
           {}};
  bool all = true;
  for (std::size_t i = 0; i < v.instances; ++i) {
    bool pass = false;
    r.rows.push_back(validate_instance(i, c.seed + i, v, &pass));
    all = all && pass;
  }
  emit(write_report(r, parse_report_format(c.format)), c, out);
  return all ? 0 : 1;
}

}  // namespace

Report bounds_table(double k_min, double k_max, double k_step) {
  if (!(k_step > 0.0)) throw InvalidArgument("--k-step: must be positive");
  if (k_max < k_min) throw InvalidArgument("--k-max: must be at least --k-min");
  Report r{{"k", "lambda_untolled", "anonymous_upper", "lower_a", "lower_b",
            "lower_anonymous_unrestricted"},
           {}};
  const auto count = static_cast<std::size_t>(std::floor((k_max - k_min) / k_step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double k = k_min + static_cast<double>(i) * k_step;
    const auto lb = lower_bound_curves(k);
    r.rows.push_back({k, lambda_bound(k), anonymous_bound(k), lb.untolled_a, lb.untolled_b,
                      lb.anonymous_unrestricted_ratio});
  }
  return r;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multitype congestion games: optimal routing, equilibria, tolls and PoA bounds",
               "mixtoll"};
  app.require_subcommand(1);
  Common common;
  TollFlags tolls;
  auto add_common = [&](CLI::App* sub, bool scenario) {
    if (scenario) sub->add_option("--scenario", common.scenario, "scenario file or bundled name")->required();
    sub->add_option("--out", common.out, "output path (stdout when omitted)");
    sub->add_option("--format", common.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--tol", common.tol, "equilibrium tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "random seed");
  };
  auto add_toll = [&](CLI::App* sub) {
    sub->add_option("--scheme", tolls.scheme, "differentiated|anonymous|epsilon|marginal|none")
        ->check(CLI::IsMember({"differentiated", "anonymous", "epsilon", "marginal", "none"}));
    sub->add_option("--tolls", tolls.tolls_file, "tolls file");
    sub->add_option("--epsilon", tolls.epsilon, "epsilon-toll offset");
    sub->add_option("--mu", tolls.mu, "epsilon-toll base level");
    sub->add_option("--big-p", tolls.big_p, "toll on roads unused by the optimum");
  };

  auto* optimal = app.add_subcommand("optimal", "socially optimal routing");
  add_common(optimal, true);
  std::string mode = "exact";
  std::size_t restarts = 64;
  optimal->add_option("--mode", mode, "exact or heuristic")->check(CLI::IsMember({"exact", "heuristic"}));
  optimal->add_option("--restarts", restarts, "heuristic restarts");

  auto* equilibria = app.add_subcommand("equilibria", "enumerate Wardrop equilibria");
  add_common(equilibria, true);
  add_toll(equilibria);

  auto* toll = app.add_subcommand("toll", "write a toll schedule");
  add_common(toll, true);
  add_toll(toll);

  auto* poa = app.add_subcommand("poa", "empirical price of anarchy against the applicable bound");
  add_common(poa, true);
  add_toll(poa);

  auto* reproduce = app.add_subcommand("reproduce", "bound curves or the worked examples");
  add_common(reproduce, false);
  std::string target;
  double k_min = 1.0, k_max = 4.0, k_step = 0.05, k = 4.0;
  reproduce->add_option("--target", target, "bounds or examples")
      ->required()
      ->check(CLI::IsMember({"bounds", "examples"}));
  reproduce->add_option("--k-min", k_min, "first k of the bounds sweep");
  reproduce->add_option("--k-max", k_max, "last k of the bounds sweep");
  reproduce->add_option("--k-step", k_step, "k increment of the bounds sweep");
  reproduce->add_option("--k", k, "degree of asymmetry for the examples table");

  auto* validate = app.add_subcommand("validate", "seeded bound-validation campaign");
  add_common(validate, false);
  ValidateFlags vflags;
  double target_k = 0.0;
  validate->add_option("--instances", vflags.instances, "number of generated instances");
  validate->add_option("--n", vflags.n, "roads per instance");
  validate->add_option("--m", vflags.m, "vehicle types per instance");
  auto* target_k_opt = validate->add_option("--target-k", target_k, "cap on the degree of asymmetry");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (optimal->parsed()) return cmd_optimal(common, mode, restarts, out);
    if (equilibria->parsed()) return cmd_equilibria(common, tolls, out);
    if (toll->parsed()) return cmd_toll(common, tolls, out);
    if (poa->parsed()) return cmd_poa(common, tolls, out);
    if (reproduce->parsed()) {
      const Report r = target == "bounds" ? bounds_table(k_min, k_max, k_step) : examples_table(k);
      emit(write_report(r, parse_report_format(common.format)), common, out);
      return 0;
    }
    if (validate->parsed()) {
      if (target_k_opt->count() > 0) vflags.target_k = target_k;
      return cmd_validate(common, vflags, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mixtoll::cli
