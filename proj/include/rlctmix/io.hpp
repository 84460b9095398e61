#pragma once

// JSON forms of the domain types.
//
// Dataset:  {"L":3,"M":2,"n":2,"seed":7,
//            "truth":{"weights":[1.0],"components":[[0.2,0.3,0.5]]},
//            "observations":[[2,0,0],[0,1,1]]}
// `truth` is optional.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rlctmix/domain.hpp"

namespace rlctmix {

using Json = nlohmann::json;

inline Json to_json(const MixtureParams& w) {
  Json comps = Json::array();
  for (const auto& c : w.components()) comps.push_back(c.probs());
  return Json{{"weights", w.weights()}, {"components", comps}};
}

inline MixtureParams mixture_from_json(const Json& j) {
  std::vector<SimplexVector> comps;
  for (const auto& c : j.at("components")) comps.emplace_back(c.get<std::vector<double>>());
  return MixtureParams(j.at("weights").get<std::vector<double>>(), std::move(comps));
}

inline Json to_json(const Dataset& d) {
  Json obs = Json::array();
  for (const auto& x : d.observations) obs.push_back(x.counts());
  Json j{{"L", d.L}, {"M", d.M}, {"n", d.observations.size()}, {"seed", d.seed}};
  if (d.truth) j["truth"] = to_json(*d.truth);
  j["observations"] = std::move(obs);
  return j;
}

inline Dataset dataset_from_json(const Json& j) {
  Dataset d;
  d.L = j.at("L").get<int>();
  d.M = j.at("M").get<int>();
  d.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("truth") && !j.at("truth").is_null()) d.truth = mixture_from_json(j.at("truth"));
  for (const auto& row : j.at("observations")) d.observations.emplace_back(row.get<std::vector<int>>());
  if (j.contains("n") && j.at("n").get<std::size_t>() != d.observations.size())
    throw DimensionError("dataset: n does not match the number of observations");
  d.validate();
  return d;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return Json::parse(in);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

inline Dataset read_dataset(const std::string& path) { return dataset_from_json(read_json_file(path)); }

inline void write_dataset(const std::string& path, const Dataset& d) {
  write_text_file(path, to_json(d).dump(2) + "\n");
}

}  // namespace rlctmix
