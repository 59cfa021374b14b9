#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotlab/cost.hpp"
#include "rotlab/errors.hpp"
#include "rotlab/measure.hpp"

namespace rotlab {

using json = nlohmann::ordered_json;

// p in [1, inf]: numbers pass through, "inf" (or a non-finite number) maps to
// the infinite order.
inline double order_from_json(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "Inf" || s == "infinity") return kInf;
    fail(errc::config_invalid, "unrecognized order: " + s);
  }
  require(j.is_number(), errc::config_invalid, "order must be a number or \"inf\"");
  return j.get<double>();
}

inline json order_to_json(double p) {
  if (is_inf(p)) return json("inf");
  return json(p);
}

// Measure file: {"metric": "euclidean"|"explicit", "points": [[coords]...] or
// labels, "dist": optional matrix, "weights": [...]}
inline DiscreteMeasure measure_from_json(const json& j) {
  require(j.contains("metric") && j.contains("weights"), errc::config_invalid,
          "measure file needs 'metric' and 'weights'");
  const std::string metric = j.at("metric").get<std::string>();
  const auto weights = j.at("weights").get<std::vector<double>>();
  if (metric == "euclidean") {
    require(j.contains("points"), errc::config_invalid, "euclidean measure needs 'points'");
    std::vector<std::vector<double>> coords;
    for (const auto& pt : j.at("points")) {
      if (pt.is_number())
        coords.push_back({pt.get<double>()});
      else
        coords.push_back(pt.get<std::vector<double>>());
    }
    return DiscreteMeasure(make_space(MetricSpace::euclidean(std::move(coords))), weights);
  }
  if (metric == "explicit") {
    require(j.contains("dist"), errc::config_invalid, "explicit measure needs 'dist'");
    const auto dist = j.at("dist").get<std::vector<std::vector<double>>>();
    return DiscreteMeasure(make_space(MetricSpace::from_matrix(dist)), weights);
  }
  fail(errc::config_invalid, "metric must be 'euclidean' or 'explicit'");
}

inline json measure_to_json(const DiscreteMeasure& mu) {
  json j;
  if (mu.space().is_euclidean()) {
    j["metric"] = "euclidean";
    json pts = json::array();
    for (std::size_t i = 0; i < mu.size(); ++i) pts.push_back(mu.space().coords(i));
    j["points"] = std::move(pts);
  } else {
    j["metric"] = "explicit";
    json labels = json::array(), dist = json::array();
    for (std::size_t i = 0; i < mu.size(); ++i) {
      labels.push_back(std::to_string(i));
      json row = json::array();
      for (std::size_t k = 0; k < mu.size(); ++k) row.push_back(mu.space().dist(i, k));
      dist.push_back(std::move(row));
    }
    j["points"] = std::move(labels);
    j["dist"] = std::move(dist);
  }
  j["weights"] = mu.weights();
  return j;
}

namespace detail {

inline void flatten_tensor(const json& node, std::vector<double>& out) {
  if (node.is_array()) {
    for (const auto& child : node) flatten_tensor(child, out);
  } else {
    out.push_back(node.get<double>());
  }
}

}  // namespace detail

// Cost file: {"kind": "tensor"|"sqeuclidean"|"power", "values": nested array,
// "p": number, "epsilon": number}. Epsilon is applied as c/epsilon inside the
// solver; read it with cost_epsilon_from_json.
inline CostSpec cost_from_json(const json& j, const std::vector<DiscreteMeasure>& mus) {
  require(j.contains("kind"), errc::config_invalid, "cost file needs 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  std::vector<SpacePtr> factors;
  for (const auto& m : mus) factors.push_back(m.space_ptr());
  ProductSpace space(std::move(factors));
  if (kind == "tensor") {
    require(j.contains("values"), errc::config_invalid, "tensor cost needs 'values'");
    std::vector<double> values;
    detail::flatten_tensor(j.at("values"), values);
    return CostSpec(std::move(space), std::move(values));
  }
  if (kind == "sqeuclidean") return CostSpec::sqeuclidean(std::move(space));
  if (kind == "power") {
    require(j.contains("p"), errc::config_invalid, "power cost needs 'p'");
    return CostSpec::power_cost(std::move(space), j.at("p").get<double>());
  }
  fail(errc::config_invalid, "cost kind must be tensor, sqeuclidean or power");
}

inline double cost_epsilon_from_json(const json& j) {
  if (!j.contains("epsilon")) return 1.0;
  const double eps = j.at("epsilon").get<double>();
  require(eps > 0.0, errc::config_invalid, "epsilon must be positive");
  return eps;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::bad_input, "cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), errc::bad_input, "cannot open " + path + " for writing");
  out << text;
}

}  // namespace rotlab
