#pragma once

// Observed summary statistics and their on-disk JSON form:
//
//   {
//     "format": "avabc-observation/1",
//     "simulator": "blowfly",
//     "statistics": [ ... ],            // length = simulator statistics_dim
//     "raw_series": [ ... ],            // optional
//     "provenance": {                   // optional, defaults to fixed
//       "kind": "synthetic",            // or "fixed"
//       "theta_star": [ ... ],          // synthetic only
//       "seed": 20160501,               // synthetic only
//       "note": "..."                   // optional
//     }
//   }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace avabc {

inline constexpr const char* kObservationFormat = "avabc-observation/1";

struct Provenance {
  enum class Kind { kFixed, kSynthetic };
  Kind kind = Kind::kFixed;
  std::vector<double> theta_star;
  std::uint64_t seed = 0;
  std::string note;
};

struct Observation {
  std::string simulator;
  std::vector<double> statistics;
  std::vector<double> raw;
  Provenance provenance;

  /// Throws unless statistics has `statistics_dim` finite entries.
  void validate(std::size_t statistics_dim) const;
};

std::string observation_to_json(const Observation& obs);
Observation observation_from_json(const std::string& text);

void save_observation(const Observation& obs, const std::filesystem::path& path);
Observation load_observation(const std::filesystem::path& path);

}  // namespace avabc
