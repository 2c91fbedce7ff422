#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mixtoll/model.hpp"

namespace mixtoll {

inline constexpr int kSchemaVersion = 1;

struct NamedRouting {
  std::string name;
  Routing routing;
};

struct ScenarioFile {
  int schema_version = kSchemaVersion;
  std::string name;
  Network network;
  std::optional<TollSchedule> tolls;
  std::vector<NamedRouting> routings;

  bool operator==(const ScenarioFile& other) const;
};

/// Parses and validates a JSON scenario. Errors name the offending field.
ScenarioFile parse_scenario(const std::string& text);
/// Pretty-printed JSON; doubles are written with round-trip precision.
std::string serialize_scenario(const ScenarioFile& scenario);

ScenarioFile load_scenario(const std::filesystem::path& path);

/// Tolls document: {"tolls": n x m matrix} plus optional epsilon metadata.
TollSchedule parse_tolls(const std::string& text, const Network& net);
std::string serialize_tolls(const TollSchedule& tolls);

struct InstanceGenSpec {
  std::uint64_t seed = 1;
  std::size_t n = 2;
  std::size_t m = 2;
  std::pair<double, double> slope_range{0.5, 2.0};
  std::pair<double, double> intercept_range{0.0, 1.0};
  std::pair<double, double> demand_range{0.5, 1.5};
  std::optional<double> target_k;
};

/// Parallel network drawn from a std::mt19937_64 stream seeded with spec.seed.
/// Per road: m slopes, then the intercept; then m demands. Each uniform
/// double uses the top 53 bits of one engine output. When a road's slope
/// ratio r exceeds target_k its slopes are compressed toward the minimum by
/// s <- min * (s/min)^(log target_k / log r).
Network generate_instance(const InstanceGenSpec& spec);

/// Rectangular result table.
using Cell = std::variant<double, std::int64_t, std::string, bool>;
struct Report {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

enum class ReportFormat { Csv, Json };
ReportFormat parse_report_format(const std::string& name);

/// Numbers use 12 significant digits. CSV always has a header row; JSON is an
/// array of objects keyed by column.
std::string write_report(const Report& report, ReportFormat format);

/// %.12g, with "inf"/"-inf"/"nan" for non-finite values.
std::string format_number(double value);

}  // namespace mixtoll
