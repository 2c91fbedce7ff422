#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mixtoll/fixtures.hpp"
#include "mixtoll/scenario.hpp"

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mixtoll::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mixtoll_cli_test_" + name);
}

}  // namespace

TEST_CASE("cli: poa on a bundled scenario") {
  const auto r = run({"poa", "--scenario", "example_a_k2", "--scheme", "none"});
  CHECK(r.code == 0);
  CHECK(r.out == "scheme,optimal_cost,worst_eq_cost,empirical_poa,k,bound_name,bound_value,satisfied\n"
                 "none,2,4,2,2,lambda_untolled,2,true\n");
}

TEST_CASE("cli: reproduce bounds at a single k") {
  const auto r = run({"reproduce", "--target", "bounds", "--k-min", "1", "--k-max", "1", "--k-step", "1"});
  CHECK(r.code == 0);
  CHECK(r.out == "k,lambda_untolled,anonymous_upper,lower_a,lower_b,lower_anonymous_unrestricted\n"
                 "1,1.33333333333,1,1,1.33333333333,1\n");
}

TEST_CASE("cli: reproduce examples has no error") {
  const auto r = run({"reproduce", "--target", "examples", "--k", "4"});
  CHECK(r.code == 0);
  CHECK(r.out.find("b,worst_half_toll_cost,1.3125,1.3125,0\n") != std::string::npos);
  CHECK(r.out.find("b,optimal_cost,0.833333333333,0.833333333333,0\n") != std::string::npos);
}

TEST_CASE("cli: validate campaign") {
  const auto r = run({"validate", "--instances", "100", "--n", "3", "--m", "2", "--target-k", "2", "--seed", "7"});
  CHECK(r.code == 0);
  std::size_t rows = 0, passes = 0;
  for (std::size_t pos = 0; (pos = r.out.find('\n', pos)) != std::string::npos; ++pos) ++rows;
  for (std::size_t pos = 0; (pos = r.out.find(",pass\n", pos)) != std::string::npos; ++pos) ++passes;
  CHECK(rows == 101);
  CHECK(passes == 100);
}

TEST_CASE("cli: outputs are deterministic") {
  for (const std::vector<std::string>& args :
       {std::vector<std::string>{"optimal", "--scenario", "general_two_od", "--mode", "heuristic", "--seed", "3"},
        std::vector<std::string>{"equilibria", "--scenario", "example_b_k4", "--format", "json"},
        std::vector<std::string>{"validate", "--instances", "5", "--seed", "11"}}) {
    CHECK(run(args).out == run(args).out);
  }
}

TEST_CASE("cli: toll file round trip into poa") {
  const auto path = temp_path("tolls.json");
  const auto t = run({"toll", "--scenario", "example_b_k4", "--scheme", "anonymous", "--out", path.string()});
  REQUIRE(t.code == 0);
  const auto p = run({"poa", "--scenario", "example_b_k4", "--tolls", path.string()});
  CHECK(p.code == 0);
  CHECK(p.out.find(",1.33333333333,") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("cli: scenario files on disk") {
  const auto path = temp_path("scenario.json");
  {
    std::ofstream f(path);
    f << mixtoll::serialize_scenario(*mixtoll::fixtures::bundled_scenario("pigou"));
  }
  const auto r = run({"optimal", "--scenario", path.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("cost,,,0.75\n") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("cli: exit codes") {
  CHECK(run({}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"poa", "--scenario", "example_a_k2", "--unknown-flag"}).code == 2);
  CHECK(run({"poa", "--scenario", "example_a_k2", "--format", "xml"}).code == 2);
  CHECK(run({"poa"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  const auto missing = run({"poa", "--scenario", "no_such_scenario"});
  CHECK(missing.code == 1);
  CHECK_FALSE(missing.err.empty());
  CHECK(run({"toll", "--scenario", "general_two_od", "--scheme", "epsilon"}).code == 1);
  CHECK(run({"reproduce", "--target", "bounds", "--k-min", "0.5"}).code == 1);
}
