#pragma once

// Gaussian epsilon-kernel and the Monte-Carlo ABC log-likelihood
//   log (1/L) sum_l N(y | f(theta, u_l), eps^2)
// evaluated with a log-sum-exp for stability.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avabc/autodiff.hpp"
#include "avabc/observation.hpp"
#include "avabc/simulators.hpp"

namespace avabc {

enum class EpsilonKind { kFixed, kSimulationScaled, kBernoulliAnalytic };

std::string to_string(EpsilonKind kind);
EpsilonKind epsilon_kind_from_string(const std::string& name);

/// Kernel bandwidth rule.
///   fixed:              configured value, scalar (broadcast) or one per statistic
///   simulation_scaled:  std(x) / sqrt(M) of each simulation's raw output x
///   bernoulli_analytic: sqrt(theta (1 - theta))
/// Derived bandwidths are scalars broadcast over all statistics.
struct EpsilonPolicy {
  EpsilonKind kind = EpsilonKind::kFixed;
  std::vector<double> value{1.0};

  static EpsilonPolicy fixed(double eps);
  static EpsilonPolicy fixed(std::vector<double> eps);
  static EpsilonPolicy simulation_scaled();
  static EpsilonPolicy bernoulli_analytic();

  void validate(std::size_t statistics_dim) const;
};

/// Value of the bandwidth for one simulation. `raw` is needed for
/// simulation_scaled, `theta` for bernoulli_analytic.
std::vector<double> select_epsilon(const EpsilonPolicy& policy, std::span<const double> raw,
                                   std::span<const double> theta, std::size_t statistics_dim);

/// Same rule recorded on the tape so the bandwidth is differentiated along
/// with the rest of the bound.
std::vector<Var> select_epsilon(const EpsilonPolicy& policy, std::span<const Var> raw, std::span<const Var> theta,
                                std::size_t statistics_dim, Tape& tape);

/// sum_i [ -0.5 ((y_i - x_i) / eps_i)^2 - log(eps_i sqrt(2 pi)) ]
Var gaussian_kernel_log(std::span<const double> y, std::span<const Var> x, std::span<const Var> eps);
double gaussian_kernel_log(std::span<const double> y, std::span<const double> x, std::span<const double> eps);

/// Bound value substituted when every simulation of a batch failed.
inline constexpr double kFailurePenalty = -1e10;

struct AbcLogLik {
  Var value;
  std::size_t s_count = 1;
  std::size_t l_count = 0;  // successful simulations used
  std::size_t failures = 0;  // dropped simulations
  bool failed = false;  // all L simulations failed; value is the penalty
  std::vector<double> epsilon_used;  // mean bandwidth over successful draws
  std::vector<double> mean_statistics;  // mean simulated statistics over successful draws
};

using SimulateFn = std::function<SimOutput(std::span<const double> u)>;

/// Core estimator over an arbitrary deterministic simulation closure.
/// Failed draws (SimulationFailure) are dropped and L renormalized.
AbcLogLik abc_loglik(const SimulateFn& simulate, std::size_t statistics_dim, std::span<const Var> theta,
                     const Observation& y, std::span<const std::vector<double>> u_draws, const EpsilonPolicy& eps);

AbcLogLik abc_loglik(const Simulator& sim, std::span<const Var> theta, const Observation& y,
                     std::span<const std::vector<double>> u_draws, const EpsilonPolicy& eps);

}  // namespace avabc
