#include "mixtoll/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace mixtoll {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& field, const std::string& reason) {
  throw InvalidArgument(field + ": " + reason);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) schema_error(where + key, "missing");
  return obj.at(key);
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) schema_error(field, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(field, "must be finite");
  return d;
}

double as_nonnegative(const json& v, const std::string& field) {
  const double d = as_number(v, field);
  if (d < 0.0) schema_error(field, "must be nonnegative");
  return d;
}

std::size_t as_index(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    schema_error(field, "must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

const json& as_array(const json& v, const std::string& field) {
  if (!v.is_array()) schema_error(field, "must be an array");
  return v;
}

std::vector<double> number_list(const json& v, const std::string& field, bool nonnegative) {
  std::vector<double> out;
  std::size_t idx = 0;
  for (const auto& x : as_array(v, field)) {
    const std::string where = field + "[" + std::to_string(idx++) + "]";
    out.push_back(nonnegative ? as_nonnegative(x, where) : as_number(x, where));
  }
  return out;
}

Eigen::MatrixXd matrix(const json& v, const std::string& field, Eigen::Index rows, Eigen::Index cols) {
  as_array(v, field);
  if (static_cast<Eigen::Index>(v.size()) != rows) {
    throw DimensionMismatch(field + ": expected " + std::to_string(rows) + " rows, got " +
                            std::to_string(v.size()));
  }
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string where = field + "[" + std::to_string(r) + "]";
    const auto row = number_list(v[static_cast<std::size_t>(r)], where, true);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw DimensionMismatch(where + ": expected " + std::to_string(cols) + " entries, got " +
                              std::to_string(row.size()));
    }
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

AffineLatency latency_from(const json& v, const std::string& where) {
  AffineLatency l;
  l.slopes = number_list(require(v, "slopes", where + "."), where + ".slopes", true);
  l.intercept = v.contains("intercept") ? as_nonnegative(v.at("intercept"), where + ".intercept") : 0.0;
  return l;
}

std::vector<std::string> type_labels(const json& net) {
  std::vector<std::string> types;
  std::size_t idx = 0;
  for (const auto& t : as_array(require(net, "types", "network."), "network.types")) {
    if (!t.is_string()) schema_error("network.types[" + std::to_string(idx) + "]", "must be a string");
    types.push_back(t.get<std::string>());
    ++idx;
  }
  return types;
}

Network network_from(const json& net) {
  const std::string kind = require(net, "kind", "network.").get<std::string>();
  if (kind == "parallel") {
    auto types = type_labels(net);
    std::vector<AffineLatency> roads;
    std::size_t idx = 0;
    for (const auto& r : as_array(require(net, "roads", "network."), "roads")) {
      roads.push_back(latency_from(r, "roads[" + std::to_string(idx++) + "]"));
    }
    auto demands = number_list(require(net, "demands", "network."), "demands", true);
    return Network::parallel(std::move(types), std::move(roads), std::move(demands));
  }
  if (kind == "general") {
    auto types = type_labels(net);
    const std::size_t nodes = as_index(require(net, "nodes", "network."), "network.nodes");
    std::vector<AffineLatency> edges;
    std::vector<std::pair<std::size_t, std::size_t>> endpoints;
    std::size_t idx = 0;
    for (const auto& e : as_array(require(net, "edges", "network."), "edges")) {
      const std::string where = "edges[" + std::to_string(idx++) + "]";
      edges.push_back(latency_from(e, where));
      endpoints.emplace_back(as_index(require(e, "from", where + "."), where + ".from"),
                             as_index(require(e, "to", where + "."), where + ".to"));
    }
    std::vector<OdDemand> od;
    std::vector<std::vector<std::vector<std::size_t>>> paths;
    idx = 0;
    for (const auto& o : as_array(require(net, "od", "network."), "od")) {
      const std::string where = "od[" + std::to_string(idx++) + "]";
      OdDemand d;
      d.type = as_index(require(o, "type", where + "."), where + ".type");
      d.origin = as_index(require(o, "origin", where + "."), where + ".origin");
      d.destination = as_index(require(o, "destination", where + "."), where + ".destination");
      d.demand = as_nonnegative(require(o, "demand", where + "."), where + ".demand");
      od.push_back(d);
      std::vector<std::vector<std::size_t>> list;
      if (o.contains("paths")) {
        std::size_t p = 0;
        for (const auto& path : as_array(o.at("paths"), where + ".paths")) {
          const std::string pw = where + ".paths[" + std::to_string(p++) + "]";
          std::vector<std::size_t> edges_of;
          for (const auto& e : as_array(path, pw)) edges_of.push_back(as_index(e, pw));
          list.push_back(std::move(edges_of));
        }
      }
      paths.push_back(std::move(list));
    }
    return Network::general(std::move(types), nodes, std::move(edges), std::move(endpoints),
                            std::move(od), std::move(paths));
  }
  schema_error("network.kind", "must be \"parallel\" or \"general\"");
}

json network_json(const Network& net) {
  json out;
  out["kind"] = net.is_parallel() ? "parallel" : "general";
  out["types"] = net.types();
  if (net.is_parallel()) {
    json roads = json::array();
    for (const auto& r : net.roads()) roads.push_back({{"slopes", r.slopes}, {"intercept", r.intercept}});
    out["roads"] = roads;
    out["demands"] = net.demands();
    return out;
  }
  out["nodes"] = net.node_count();
  json edges = json::array();
  for (std::size_t e = 0; e < net.num_roads(); ++e) {
    const auto& r = net.road(e);
    edges.push_back({{"from", net.endpoints()[e].first},
                     {"to", net.endpoints()[e].second},
                     {"slopes", r.slopes},
                     {"intercept", r.intercept}});
  }
  out["edges"] = edges;
  json od = json::array();
  for (std::size_t k = 0; k < net.od_demands().size(); ++k) {
    const auto& d = net.od_demands()[k];
    od.push_back({{"type", d.type},
                  {"origin", d.origin},
                  {"destination", d.destination},
                  {"demand", d.demand},
                  {"paths", net.commodities()[k].paths}});
  }
  out["od"] = od;
  return out;
}

TollSchedule tolls_from(const json& v, const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.num_roads());
  const auto m = static_cast<Eigen::Index>(net.num_types());
  Eigen::MatrixXd tau = matrix(require(v, "tolls", ""), "tolls", n, m);
  std::optional<EpsilonTollMetadata> meta;
  if (v.contains("epsilon_metadata")) {
    const auto& e = v.at("epsilon_metadata");
    EpsilonTollMetadata md;
    md.reference_flows = matrix(require(e, "reference_flows", "epsilon_metadata."),
                                "epsilon_metadata.reference_flows", n, m);
    md.mu = as_nonnegative(require(e, "mu", "epsilon_metadata."), "epsilon_metadata.mu");
    md.epsilon = as_nonnegative(require(e, "epsilon", "epsilon_metadata."), "epsilon_metadata.epsilon");
    md.big_p = as_nonnegative(require(e, "big_p", "epsilon_metadata."), "epsilon_metadata.big_p");
    meta = md;
  }
  return TollSchedule(std::move(tau), std::move(meta));
}

json tolls_json(const TollSchedule& t) {
  json out;
  out["tolls"] = matrix_json(t.tolls());
  if (const auto& md = t.epsilon_metadata()) {
    out["epsilon_metadata"] = {{"reference_flows", matrix_json(md->reference_flows)},
                               {"mu", md->mu},
                               {"epsilon", md->epsilon},
                               {"big_p", md->big_p}};
  }
  return out;
}

Routing routing_from(const json& v, const Network& net, const std::string& where) {
  if (net.is_parallel() || !v.contains("path_flows")) {
    const Eigen::MatrixXd z = matrix(require(v, "edge_flows", where + "."), where + ".edge_flows",
                                     static_cast<Eigen::Index>(net.num_roads()),
                                     static_cast<Eigen::Index>(net.num_types()));
    if (!net.is_parallel()) schema_error(where + ".path_flows", "required for general networks");
    Routing r = make_parallel_routing(net, z);
    require_feasible(net, r);
    return r;
  }
  const auto& pf = as_array(v.at("path_flows"), where + ".path_flows");
  if (pf.size() != net.commodities().size()) {
    throw DimensionMismatch(where + ".path_flows: expected one list per od entry");
  }
  std::vector<double> flat;
  for (std::size_t k = 0; k < pf.size(); ++k) {
    const auto list = number_list(pf[k], where + ".path_flows[" + std::to_string(k) + "]", true);
    if (list.size() != net.commodities()[k].paths.size()) {
      throw DimensionMismatch(where + ".path_flows[" + std::to_string(k) + "]: wrong path count");
    }
    flat.insert(flat.end(), list.begin(), list.end());
  }
  Routing r = make_path_routing(net, Eigen::Map<const Eigen::VectorXd>(flat.data(),
                                                                         static_cast<Eigen::Index>(flat.size())));
  require_feasible(net, r);
  return r;
}

json routing_json(const Routing& r, const Network& net) {
  json out;
  out["edge_flows"] = matrix_json(r.edge_flows);
  if (!net.is_parallel()) {
    json pf = json::array();
    for (const auto& p : r.path_flows) pf.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    out["path_flows"] = pf;
  }
  return out;
}

bool same_tolls(const TollSchedule& a, const TollSchedule& b) {
  if (a.tolls() != b.tolls()) return false;
  const auto& ma = a.epsilon_metadata();
  const auto& mb = b.epsilon_metadata();
  if (ma.has_value() != mb.has_value()) return false;
  if (!ma) return true;
  return ma->reference_flows == mb->reference_flows && ma->mu == mb->mu &&
         ma->epsilon == mb->epsilon && ma->big_p == mb->big_p;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("document: malformed JSON (") + e.what() + ")");
  }
}

}  // namespace

bool ScenarioFile::operator==(const ScenarioFile& o) const {
  if (schema_version != o.schema_version || name != o.name || !(network == o.network)) return false;
  if (tolls.has_value() != o.tolls.has_value()) return false;
  if (tolls && !same_tolls(*tolls, *o.tolls)) return false;
  if (routings.size() != o.routings.size()) return false;
  for (std::size_t i = 0; i < routings.size(); ++i) {
    const auto& a = routings[i];
    const auto& b = o.routings[i];
    if (a.name != b.name || a.routing.edge_flows != b.routing.edge_flows) return false;
    if (a.routing.path_flows.size() != b.routing.path_flows.size()) return false;
    for (std::size_t k = 0; k < a.routing.path_flows.size(); ++k) {
      if (a.routing.path_flows[k] != b.routing.path_flows[k]) return false;
    }
  }
  return true;
}

ScenarioFile parse_scenario(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) schema_error("document", "must be a JSON object");
  const json& version = require(doc, "schema_version", "");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    schema_error("schema_version", "unsupported (expected 1)");
  }
  try {
    ScenarioFile s{kSchemaVersion, doc.value("name", std::string{}),
                   network_from(require(doc, "network", "")), std::nullopt, {}};
    if (doc.contains("tolls")) s.tolls = tolls_from(doc, s.network);
    if (doc.contains("routings")) {
      const auto& rs = doc.at("routings");
      if (!rs.is_object()) schema_error("routings", "must be an object keyed by name");
      for (auto it = rs.begin(); it != rs.end(); ++it) {
        s.routings.push_back({it.key(), routing_from(it.value(), s.network, "routings." + it.key())});
      }
    }
    return s;
  } catch (const json::type_error& e) {
    throw InvalidArgument(std::string("document: wrong value type (") + e.what() + ")");
  }
}

std::string serialize_scenario(const ScenarioFile& s) {
  json doc;
  doc["schema_version"] = s.schema_version;
  doc["name"] = s.name;
  doc["network"] = network_json(s.network);
  if (s.tolls) {
    const json t = tolls_json(*s.tolls);
    for (auto it = t.begin(); it != t.end(); ++it) doc[it.key()] = it.value();
  }
  if (!s.routings.empty()) {
    json rs = json::object();
    for (const auto& r : s.routings) rs[r.name] = routing_json(r.routing, s.network);
    doc["routings"] = rs;
  }
  return doc.dump(2) + "\n";
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

TollSchedule parse_tolls(const std::string& text, const Network& net) {
  const json doc = parse_json(text);
  try {
    return tolls_from(doc, net);
  } catch (const json::type_error& e) {
    throw InvalidArgument(std::string("tolls: wrong value type (") + e.what() + ")");
  }
}

std::string serialize_tolls(const TollSchedule& tolls) { return tolls_json(tolls).dump(2) + "\n"; }

Network generate_instance(const InstanceGenSpec& spec) {
  auto check_range = [](const std::pair<double, double>& r, const char* name, bool positive) {
    if (!std::isfinite(r.first) || !std::isfinite(r.second) || r.first > r.second || r.first < 0.0) {
      schema_error(name, "need finite 0 <= lo <= hi");
    }
    if (positive && r.first <= 0.0) schema_error(name, "lower bound must be positive");
  };
  if (spec.n == 0) schema_error("n", "must be at least 1");
  if (spec.m == 0) schema_error("m", "must be at least 1");
  check_range(spec.slope_range, "slope_range", true);
  check_range(spec.intercept_range, "intercept_range", false);
  check_range(spec.demand_range, "demand_range", false);
  if (spec.target_k && !(*spec.target_k >= 1.0)) schema_error("target_k", "must be at least 1");

  std::mt19937_64 engine(spec.seed);
  auto draw = [&](const std::pair<double, double>& r) {
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    return r.first + (r.second - r.first) * u;
  };
  std::vector<AffineLatency> roads(spec.n);
  for (auto& road : roads) {
    for (std::size_t j = 0; j < spec.m; ++j) road.slopes.push_back(draw(spec.slope_range));
    road.intercept = draw(spec.intercept_range);
    if (spec.target_k) {
      const double lo = *std::min_element(road.slopes.begin(), road.slopes.end());
      const double hi = *std::max_element(road.slopes.begin(), road.slopes.end());
      const double ratio = hi / lo;
      if (ratio > *spec.target_k) {
        const double power = std::log(*spec.target_k) / std::log(ratio);
        for (double& s : road.slopes) s = lo * std::pow(s / lo, power);
        // Rounding may leave the ratio a few ulps above target_k.
        for (double& s : road.slopes) {
          while (s / lo > *spec.target_k) s = std::nextafter(s, 0.0);
        }
      }
    }
  }
  std::vector<double> demands;
  for (std::size_t j = 0; j < spec.m; ++j) demands.push_back(draw(spec.demand_range));
  std::vector<std::string> types;
  for (std::size_t j = 0; j < spec.m; ++j) types.push_back(std::to_string(j + 1));
  return Network::parallel(std::move(types), std::move(roads), std::move(demands));
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw InvalidArgument("format: must be csv or json");
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

std::string write_report(const Report& report, ReportFormat format) {
  for (const auto& row : report.rows) {
    if (row.size() != report.columns.size()) throw DimensionMismatch("report: ragged row");
  }
  auto cell_text = [](const Cell& c) -> std::string {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    if (const auto* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
    return std::get<std::string>(c);
  };
  std::string out;
  if (format == ReportFormat::Csv) {
    auto escape = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    };
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
      out += (c ? "," : "") + escape(report.columns[c]);
    }
    out += "\n";
    for (const auto& row : report.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + escape(cell_text(row[c]));
      out += "\n";
    }
    return out;
  }
  out = "[";
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    out += r ? ",\n  {" : "\n  {";
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
      out += (c ? ", " : "") + json(report.columns[c]).dump() + ": ";
      const Cell& cell = report.rows[r][c];
      const auto* d = std::get_if<double>(&cell);
      if (std::holds_alternative<std::string>(cell) || (d && !std::isfinite(*d))) {
        out += json(cell_text(cell)).dump();
      } else {
        out += cell_text(cell);
      }
    }
    out += "}";
  }
  out += report.rows.empty() ? "]\n" : "\n]\n";
  return out;
}

}  // namespace mixtoll
