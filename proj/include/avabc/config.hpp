#pragma once

// Experiment configuration documents and the three built-in presets.
//
// A config is one JSON object. Every field is optional except where a preset
// cannot supply it; unknown keys are rejected. See README.md for the full
// field reference.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avabc/engine.hpp"

namespace avabc {

inline constexpr const char* kConfigFormat = "avabc-config/1";

struct SimulatorSpec {
  std::string name = "bernoulli";
  std::size_t trials = 100;  // bernoulli M
  std::size_t samples = 15;  // exponential M
  std::size_t horizon = 180;  // blowfly T
  std::size_t lag = 14;  // blowfly tau
  double initial_population = 100.0;  // blowfly history N_t, t <= tau
  std::vector<double> peak_threshold_multiples{1.0, 1.5};  // of the observed series mean
  std::size_t dim = 1;  // linear_gaussian
  double noise_std = 1.0;  // linear_gaussian
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 1;
  SimulatorSpec simulator;
  Observation observation;
  /// Where the observation was read from, if it came from a file. Resolved
  /// configs inline the observation and leave this empty.
  std::string observation_file;
  Prior prior = Prior::beta(1.0, 1.0);
  FamilyKind family = FamilyKind::kKumaraswamy;
  std::vector<double> family_params{1.0, 1.0};  // constrained scale
  std::optional<RandomInit> random_init;
  EstimatorKind estimator = EstimatorKind::kPathwise;
  std::size_t samples = 10;
  std::size_t simulations = 10;
  std::size_t latent_samples = 1;
  std::size_t kl_samples = kDefaultKlSamples;
  EpsilonPolicy epsilon = EpsilonPolicy::bernoulli_analytic();
  OptimizerSpec optimizer;
  std::size_t max_iters = 1000;
  ConvergenceSpec convergence;
  bool stop_on_convergence = true;
  std::size_t cv_window = 100;
  std::size_t max_consecutive_failures = 50;
  bool reinitialize_on_failure = false;
};

/// Configuration problems, with the offending field path and, when the
/// source text is known, its line. what() reads "SOURCE:LINE: field 'F': MESSAGE".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::string field, std::size_t line = 0, std::string source = "config");
  const std::string& message() const { return message_; }
  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }

 private:
  std::string message_;
  std::string field_;
  std::size_t line_;
};

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

/// Directory holding committed data files (the blowfly observation). Taken
/// from AVABC_DATA_DIR when set, else the source tree's data/.
std::filesystem::path data_dir();

std::string config_to_json(const ExperimentConfig& config);
/// Relative observation paths are resolved against `base_dir`.
ExperimentConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

std::shared_ptr<const Simulator> make_simulator(const ExperimentConfig& config);
RunConfig to_run_config(const ExperimentConfig& config);

}  // namespace avabc
