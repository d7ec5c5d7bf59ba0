#pragma once

// Command-line front end and the artifact writers behind it.
//
//   avabc run [PRESET] [--preset P | --config FILE] [overrides] [--out DIR]
//   avabc compare [PRESET] [--against ESTIMATOR] [overrides] [--out DIR]
//   avabc posterior-check RUN_DIR [--draws N] [--out FILE]
//   avabc emit-plotdata RUN_DIR [--out DIR]
//
// Exit codes: 0 converged (or success), 2 iteration budget spent, 1 error.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avabc/config.hpp"
#include "avabc/engine.hpp"

namespace avabc {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxIters = 2;

/// Root for output directories when --out is not given: $AVABC_OUTPUT_ROOT,
/// else ./runs.
std::filesystem::path default_output_root();

/// Field-wise command-line overrides applied on top of a preset or config.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> estimator;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> simulations;
  std::optional<std::size_t> latent_samples;
  std::optional<std::size_t> max_iters;
  std::optional<std::string> optimizer;
};

void apply_overrides(ExperimentConfig& config, const Overrides& o);

int exit_code(Termination t);

// Run artifacts -------------------------------------------------------------

/// iter, bound, smoothed, grad_norm, sim_failures, failed, phi_*, grad_*.
/// Wall time is left out so that equal seeds give byte-identical files.
void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path);
void write_trace_json(const RunTrace& trace, const std::filesystem::path& path);
void write_final_posterior(const RunTrace& trace, const ExperimentConfig& config, const std::filesystem::path& path);
/// All four run artifacts into `dir`.
void write_run_artifacts(const RunTrace& trace, const ExperimentConfig& config, const std::filesystem::path& dir);

/// Run a config and write its artifacts; returns the exit code.
int execute_run(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// Comparison ------------------------------------------------------------------

inline constexpr std::size_t kHistogramRepeats = 100;

/// Runs `config` against a copy using `against`; writes compare.json,
/// gradient_hist_pathwise.csv, gradient_hist_score.csv and both runs'
/// artifacts under a/ and b/.
CompareReport execute_compare(const ExperimentConfig& config, EstimatorKind against,
                              const std::filesystem::path& out_dir, std::size_t n_repeats = kHistogramRepeats);

// Posterior check -------------------------------------------------------------

/// Exact posterior where one exists: Beta(alpha + k, beta + M - k) for the
/// Bernoulli problem and Gamma(shape + M, rate + M ybar) for the exponential.
std::optional<Prior> posterior_oracle(const ExperimentConfig& config);

struct KlEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo KL(q || p) from `draws` samples of q.
KlEstimate monte_carlo_kl(const VariationalFamily& q, const Prior& p, std::size_t draws, std::uint64_t seed);

struct PosteriorCheck {
  std::vector<double> fitted_mean, fitted_std, oracle_mean, oracle_std;
  KlEstimate kl;
  std::size_t draws = 0;
};

PosteriorCheck posterior_check(const VariationalFamily& q, const Prior& oracle, std::size_t draws,
                               std::uint64_t seed);

/// Reads config_resolved.json and final_posterior.json from a run directory.
struct RunArtifacts {
  ExperimentConfig config;
  VariationalFamily family = VariationalFamily::kumaraswamy(1.0, 1.0);
};
RunArtifacts load_run_artifacts(const std::filesystem::path& run_dir);

// Plot data -------------------------------------------------------------------

inline constexpr std::size_t kDensityGridPoints = 512;
inline constexpr std::size_t kSeriesReplicates = 100;

/// Grid over the support of component `d` of q: midpoints of (0,1) for
/// Kumaraswamy, otherwise a linear grid covering q's bulk.
std::vector<double> density_grid(const VariationalFamily& q, std::size_t d, std::size_t points = kDensityGridPoints);
/// Marginal density of component d of q at x.
double marginal_density(const VariationalFamily& q, std::size_t d, double x);

struct SeriesBand {
  std::vector<double> mean, p10, p90;
};

/// Trajectories re-simulated at theta, noise from the kReplicate substreams.
SeriesBand simulate_series_band(const BlowflySimulator& sim, std::span<const double> theta, std::uint64_t seed,
                                std::size_t replicates = kSeriesReplicates);

/// Linear-interpolation percentile (0..100) of unsorted values.
double percentile(std::vector<double> values, double pct);

/// lower_bound.csv, posterior_density.csv and, for blowfly runs,
/// blowfly_series.csv.
void emit_plotdata(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

// Synthetic observations ------------------------------------------------------

/// Blowfly observation simulated at theta_star with noise from the
/// (kObservation, 0, 0) substream of `seed`; peak thresholds are the
/// configured multiples of the simulated series' own mean.
Observation synthesize_blowfly_observation(const SimulatorSpec& spec, std::span<const double> theta_star,
                                           std::uint64_t seed);

/// Full command line; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace avabc
