#include "mixtoll/fixtures.hpp"

#include <cmath>
#include <cstdio>

namespace mixtoll::fixtures {

Network example_a(double k) {
  return Network::parallel({"1", "2"}, {{{k, 1.0}, 0.0}, {{1.0, k}, 0.0}}, {1.0, 1.0});
}

Network example_b(double k) {
  const double s = std::sqrt(k);
  return Network::parallel({"1", "2"}, {{{0.0, 0.0}, 1.0}, {{k / (s + 1.0), 1.0 / (s + 1.0)}, 0.0}},
                           {1.0 / s, 1.0});
}

Network pigou() {
  return Network::parallel({"1"}, {{{0.0}, 1.0}, {{1.0}, 0.0}}, {1.0});
}

Network general_two_od() {
  // 0->1, 0->2, 1->3, 2->3, 1->2
  std::vector<AffineLatency> edges{
      {{1.0, 2.0}, 0.0}, {{1.5, 1.0}, 0.5}, {{2.0, 1.0}, 0.5}, {{1.0, 1.0}, 0.0}, {{0.5, 1.5}, 0.25}};
  std::vector<std::pair<std::size_t, std::size_t>> endpoints{{0, 1}, {0, 2}, {1, 3}, {2, 3}, {1, 2}};
  std::vector<OdDemand> od{{0, 0, 3, 1.0}, {1, 1, 3, 0.8}};
  return Network::general({"1", "2"}, 4, std::move(edges), std::move(endpoints), std::move(od));
}

std::vector<std::string> bundled_names() {
  return {"example_a_k1.5", "example_a_k2", "example_a_k3", "example_a_k4",
          "example_b_k4",   "pigou",        "general_two_od"};
}

std::optional<ScenarioFile> bundled_scenario(const std::string& name) {
  auto wrap = [&](Network net) { return ScenarioFile{kSchemaVersion, name, std::move(net), std::nullopt, {}}; };
  if (name == "pigou") return wrap(pigou());
  if (name == "general_two_od") return wrap(general_two_od());
  double k = 0.0;
  char tail = 0;
  if (std::sscanf(name.c_str(), "example_a_k%lf%c", &k, &tail) == 1) {
    for (const auto& known : bundled_names()) {
      if (known == name) return wrap(example_a(k));
    }
  }
  if (name == "example_b_k4") return wrap(example_b(4.0));
  return std::nullopt;
}

}  // namespace mixtoll::fixtures
