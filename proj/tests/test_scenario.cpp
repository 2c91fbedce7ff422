#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "mixtoll/analysis.hpp"
#include "mixtoll/fixtures.hpp"
#include "mixtoll/optimal.hpp"
#include "mixtoll/scenario.hpp"
#include "mixtoll/tolling.hpp"

using namespace mixtoll;

namespace {

const char* kExampleA = R"({
  "schema_version": 1,
  "name": "two roads",
  "network": {
    "kind": "parallel",
    "types": ["cars", "trucks"],
    "roads": [{"slopes": [2, 1], "intercept": 0}, {"slopes": [1, 2], "intercept": 0}],
    "demands": [1, 1]
  }
})";

}  // namespace

TEST_CASE("parse a parallel scenario") {
  const ScenarioFile s = parse_scenario(kExampleA);
  CHECK(s.name == "two roads");
  CHECK(s.network.num_roads() == 2);
  CHECK(s.network.num_types() == 2);
  CHECK(s.network.road(0).slopes == std::vector<double>{2, 1});
  CHECK(s.network.demands() == std::vector<double>{1, 1});
  CHECK(s.network.types() == std::vector<std::string>{"cars", "trucks"});
  CHECK(degree_of_asymmetry(s.network) == doctest::Approx(2.0));
}

TEST_CASE("parse errors name the field") {
  const std::string empty_roads = R"({"schema_version": 1, "name": "x", "network": {"kind": "parallel",
    "types": ["a"], "roads": [], "demands": [1]}})";
  try {
    parse_scenario(empty_roads);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("roads") != std::string::npos);
  }
  const std::string bad_slopes = R"({"schema_version": 1, "name": "x", "network": {"kind": "parallel",
    "types": ["a", "b"], "roads": [{"slopes": [1], "intercept": 0}], "demands": [1, 1]}})";
  CHECK_THROWS_AS(parse_scenario(bad_slopes), Error);
  CHECK_THROWS_AS(parse_scenario("{not json"), Error);
  const std::string negative = R"({"schema_version": 1, "name": "x", "network": {"kind": "parallel",
    "types": ["a"], "roads": [{"slopes": [-1], "intercept": 0}], "demands": [1]}})";
  CHECK_THROWS_AS(parse_scenario(negative), Error);
}

TEST_CASE("scenario round trip") {
  for (const auto& name : fixtures::bundled_names()) {
    CAPTURE(name);
    ScenarioFile s = *fixtures::bundled_scenario(name);
    const auto opt = solve_optimal(s.network);
    s.routings.push_back({"optimal", opt.routing});
    s.tolls = differentiated_tolls(s.network, opt.routing);
    const ScenarioFile back = parse_scenario(serialize_scenario(s));
    CHECK(back == s);
  }
}

TEST_CASE("epsilon tolls round trip with their metadata") {
  const Network net = fixtures::example_a(2.0);
  const auto opt = solve_optimal(net);
  const TollSchedule t = epsilon_differentiated_tolls(net, make_acyclic(net, opt.routing));
  const TollSchedule back = parse_tolls(serialize_tolls(t), net);
  CHECK(back.tolls() == t.tolls());
  REQUIRE(back.epsilon_metadata().has_value());
  CHECK(back.epsilon_metadata()->mu == t.epsilon_metadata()->mu);
  CHECK(back.epsilon_metadata()->big_p == t.epsilon_metadata()->big_p);
  CHECK(back.epsilon_metadata()->reference_flows == t.epsilon_metadata()->reference_flows);
}

TEST_CASE("tolls file with the wrong shape is rejected") {
  const Network net = fixtures::example_a(2.0);
  CHECK_THROWS_AS(parse_tolls(R"({"tolls": [[1, 2, 3]]})", net), Error);
}

TEST_CASE("instance generation is deterministic") {
  InstanceGenSpec spec;
  spec.seed = 42;
  spec.n = 3;
  spec.m = 2;
  const Network a = generate_instance(spec);
  const Network b = generate_instance(spec);
  CHECK(a == b);
  spec.seed = 43;
  const Network c = generate_instance(spec);
  CHECK(c.road(0).slopes != a.road(0).slopes);
  for (std::size_t i = 0; i < a.num_roads(); ++i) {
    for (double s : a.road(i).slopes) {
      CHECK(s >= 0.5);
      CHECK(s <= 2.0);
    }
  }
}

TEST_CASE("instance generation respects target_k") {
  for (double t : {1.0, 1.5, 3.0}) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      InstanceGenSpec spec;
      spec.seed = seed;
      spec.n = 3;
      spec.m = 3;
      spec.slope_range = {0.1, 10.0};
      spec.target_k = t;
      CHECK(degree_of_asymmetry(generate_instance(spec)) <= t);
    }
  }
}

TEST_CASE("csv and json reports") {
  Report r;
  r.columns = {"k", "lambda"};
  r.rows.push_back({2.0, 2.0});
  CHECK(write_report(r, ReportFormat::Csv) == "k,lambda\n2,2\n");
  Report empty;
  empty.columns = {"a", "b"};
  CHECK(write_report(empty, ReportFormat::Csv) == "a,b\n");
  CHECK(write_report(empty, ReportFormat::Json).find('[') != std::string::npos);
  Report mixed;
  mixed.columns = {"name", "count", "ok", "value"};
  mixed.rows.push_back({std::string("x"), std::int64_t{3}, true, 1.0 / 3.0});
  CHECK(write_report(mixed, ReportFormat::Csv) == "name,count,ok,value\nx,3,true,0.333333333333\n");
  const std::string json = write_report(mixed, ReportFormat::Json);
  CHECK(json.find("\"name\"") != std::string::npos);
  CHECK(json.find("0.333333333333") != std::string::npos);
}

TEST_CASE("number formatting") {
  CHECK(format_number(4.0 / 3.0) == "1.33333333333");
  CHECK(format_number(1e-20) == "1e-20");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("bounds sweep survives a csv round trip at 12 digits") {
  Report r;
  r.columns = {"k", "lambda"};
  for (int s = 0; s <= 60; ++s) {
    const double k = 1.0 + 0.05 * s;
    r.rows.push_back({k, lambda_bound(k)});
  }
  const std::string csv = write_report(r, ReportFormat::Csv);
  std::size_t pos = csv.find('\n') + 1;
  for (int s = 0; s <= 60; ++s) {
    const std::size_t comma = csv.find(',', pos);
    const std::size_t end = csv.find('\n', comma);
    const double k = std::stod(csv.substr(pos, comma - pos));
    const double v = std::stod(csv.substr(comma + 1, end - comma - 1));
    CHECK(std::abs(v - lambda_bound(k)) <= 1e-11 * v);
    pos = end + 1;
  }
}

TEST_CASE("report format names") {
  CHECK(parse_report_format("csv") == ReportFormat::Csv);
  CHECK(parse_report_format("json") == ReportFormat::Json);
  CHECK_THROWS_AS(parse_report_format("xml"), Error);
}

TEST_CASE("bundled scenario files match the built-in fixtures") {
  const std::filesystem::path dir = std::filesystem::path(MIXTOLL_SOURCE_DIR) / "data" / "scenarios";
  for (const auto& name : fixtures::bundled_names()) {
    CAPTURE(name);
    const ScenarioFile file = load_scenario(dir / (name + ".json"));
    CHECK(file == *fixtures::bundled_scenario(name));
  }
}
