#pragma once

// Outer optimization loop: evaluate the bound and its gradient with fresh
// base randomness, take one adaptive step, record, repeat until the smoothed
// bound stops moving or the iteration budget is spent.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avabc/distributions.hpp"
#include "avabc/estimators.hpp"
#include "avabc/optim.hpp"

namespace avabc {

struct ConvergenceSpec {
  std::size_t window = 50;  // W
  double threshold = 1e-3;  // rho
  double smoothing = 0.9;  // EMA factor on the raw bound
};

/// Uniform random initialization of the constrained variational parameters,
/// drawn once per run from the run's stream.
struct RandomInit {
  double low = 0.0;
  double high = 1.0;
};

struct RunConfig {
  std::string name;
  BoundProblem problem;
  VariationalFamily init = VariationalFamily::kumaraswamy(1.0, 1.0);
  std::optional<RandomInit> random_init;
  EstimatorKind estimator = EstimatorKind::kPathwise;
  /// K > 1 averages the per-sample term over K independent noise groups
  /// (the latent bound with no latent variables); pathwise only.
  std::size_t latent_samples = 1;
  OptimizerSpec optimizer;
  std::size_t max_iters = 1000;
  ConvergenceSpec convergence;
  bool stop_on_convergence = true;
  std::uint64_t seed = 0;
  std::size_t cv_window = 100;  // score-function control-variate window (samples); 0 disables
  std::size_t max_consecutive_failures = 50;
  /// Score-function compatibility: on a failed evaluation restart from the
  /// initial parameters instead of only skipping the step.
  bool reinitialize_on_failure = false;

  void validate() const;
};

struct IterationRecord {
  std::size_t iter = 0;
  double bound = 0.0;  // raw estimate (penalty on failure)
  double smoothed = 0.0;  // EMA over successful evaluations
  std::vector<double> phi;  // parameters the bound was evaluated at
  std::vector<double> grad;
  double grad_norm = 0.0;
  double wall_time = 0.0;  // seconds since run start
  std::size_t sim_failures = 0;
  bool failed = false;
  std::vector<double> mean_statistics;
};

enum class Termination { kConverged, kMaxIters, kAborted };

std::string to_string(Termination t);

struct RunTrace {
  FamilyKind family = FamilyKind::kKumaraswamy;
  std::vector<IterationRecord> records;
  std::vector<double> initial_phi;
  std::vector<double> final_phi;
  std::optional<std::size_t> convergence_iteration;
  Termination termination = Termination::kMaxIters;
  std::string diagnostic;

  VariationalFamily final_family() const { return VariationalFamily::from_phi(family, final_phi); }
  std::vector<double> smoothed() const;
};

/// |mean(last W/2) - mean(first W/2)| < rho (1 + |mean(first W/2)|).
bool converged(std::span<const double> window, double rho);

/// Initial family after applying the random initialization, if any.
VariationalFamily initial_family(const RunConfig& config);

RunTrace run(const RunConfig& config);

struct ProfileEntry {
  EstimatorKind estimator;
  std::string at;  // which run's final phi: "a" or "b"
  std::size_t samples;  // S = L
  VarianceProfile profile;
};

struct CompareReport {
  RunTrace a;
  RunTrace b;
  bool identical_traces = false;
  std::vector<ProfileEntry> profiles;
  /// convergence iteration of b / convergence iteration of a, with a run
  /// that never converged counted at its last iteration.
  double convergence_ratio = 0.0;
};

/// Throws unless the two configs differ at most in the estimator kind.
void check_comparable(const RunConfig& a, const RunConfig& b);

CompareReport compare_runs(const RunConfig& a, const RunConfig& b, std::span<const std::size_t> profile_sizes,
                           std::size_t n_repeats);

bool traces_identical(const RunTrace& x, const RunTrace& y);

}  // namespace avabc
