#include "avabc/observation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "avabc/error.hpp"

namespace avabc {

using nlohmann::json;

void Observation::validate(std::size_t statistics_dim) const {
  if (statistics.size() != statistics_dim) {
    throw Error("observation for '" + simulator + "' has " + std::to_string(statistics.size()) +
                " statistics, simulator expects " + std::to_string(statistics_dim));
  }
  for (double s : statistics) {
    if (!std::isfinite(s)) throw Error("observation statistics must be finite");
  }
}

std::string observation_to_json(const Observation& obs) {
  json j;
  j["format"] = kObservationFormat;
  j["simulator"] = obs.simulator;
  j["statistics"] = obs.statistics;
  if (!obs.raw.empty()) j["raw_series"] = obs.raw;
  json p;
  p["kind"] = obs.provenance.kind == Provenance::Kind::kSynthetic ? "synthetic" : "fixed";
  if (obs.provenance.kind == Provenance::Kind::kSynthetic) {
    p["theta_star"] = obs.provenance.theta_star;
    p["seed"] = obs.provenance.seed;
  }
  if (!obs.provenance.note.empty()) p["note"] = obs.provenance.note;
  j["provenance"] = p;
  return j.dump(2) + "\n";
}

Observation observation_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("observation: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != kObservationFormat) {
      throw Error(std::string("observation: field 'format' must be \"") + kObservationFormat + "\"");
    }
    Observation obs;
    obs.simulator = j.at("simulator").get<std::string>();
    obs.statistics = j.at("statistics").get<std::vector<double>>();
    if (j.contains("raw_series")) obs.raw = j.at("raw_series").get<std::vector<double>>();
    const json p = j.value("provenance", json::object());
    const auto kind = p.value("kind", std::string("fixed"));
    if (kind == "synthetic") {
      obs.provenance.kind = Provenance::Kind::kSynthetic;
      obs.provenance.theta_star = p.at("theta_star").get<std::vector<double>>();
      obs.provenance.seed = p.at("seed").get<std::uint64_t>();
    } else if (kind == "fixed") {
      obs.provenance.kind = Provenance::Kind::kFixed;
    } else {
      throw Error("observation: provenance.kind must be 'fixed' or 'synthetic'");
    }
    obs.provenance.note = p.value("note", std::string());
    return obs;
  } catch (const json::exception& e) {
    throw Error(std::string("observation: ") + e.what());
  }
}

void save_observation(const Observation& obs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write observation file " + path.string());
  out << observation_to_json(obs);
}

Observation load_observation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read observation file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return observation_from_json(ss.str());
}

}  // namespace avabc
