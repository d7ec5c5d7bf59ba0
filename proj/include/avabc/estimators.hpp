#pragma once

// Estimators of the ABC variational lower bound
//
//   L(phi) ~= (1/S) sum_s log (1/L) sum_l K_eps(y, f(g(phi, nu_s), u_sl)) - KL(q_phi || p)
//
// and of its gradient:
//   pathwise        backward() through g, the simulator and the kernel
//   score_function  (1/S) sum_s grad log q(theta_s) (log p(y, theta_s) - log q(theta_s) - a)
//
// Draw keys are shared between the two, so with the same RngStream and
// iteration both estimators see identical nu and u.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avabc/abc.hpp"
#include "avabc/autodiff.hpp"
#include "avabc/distributions.hpp"
#include "avabc/observation.hpp"
#include "avabc/rng.hpp"
#include "avabc/simulators.hpp"

namespace avabc {

enum class EstimatorKind { kPathwise, kScoreFunction };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct BoundProblem {
  std::shared_ptr<const Simulator> simulator;
  Observation observation;
  Prior prior;
  EpsilonPolicy epsilon;
  std::size_t samples = 10;  // S
  std::size_t simulations = 10;  // L
  std::size_t kl_samples = kDefaultKlSamples;

  void validate(const VariationalFamily& q) const;
};

struct GradientEstimate {
  std::vector<double> grad;
  double bound_value = 0.0;
  EstimatorKind kind = EstimatorKind::kPathwise;
  std::size_t S = 0;
  std::size_t L = 0;
  /// S x dim rows whose average is grad (only when requested).
  std::vector<std::vector<double>> per_sample_grads;
  std::size_t sim_failures = 0;  // dropped simulations
  bool failed = false;  // some sample lost all L simulations; bound holds the penalty
  std::vector<double> mean_statistics;  // simulated statistics averaged over s and l
};

/// The bound as a tape expression, for callers that need the Var itself.
struct BoundExpression {
  Var bound;
  std::vector<Var> sample_terms;  // per-s log-likelihood terms
  Var kl;
  std::size_t sim_failures = 0;
  bool failed = false;
  std::vector<double> mean_statistics;
};

/// Record the pathwise bound on `tape` with phi given as tape variables.
/// Draws: nu_s = (kVariational, iteration, s), u_sl = (kSimulatorNoise, iteration, s*L + l).
BoundExpression build_pathwise_bound(Tape& tape, const VariationalFamily& q, std::span<const Var> phi,
                                     const BoundProblem& problem, const RngStream& rng, std::uint64_t iteration);

GradientEstimate pathwise_bound(const VariationalFamily& q, const BoundProblem& problem, const RngStream& rng,
                                std::uint64_t iteration, bool per_sample = false);

// ---------------------------------------------------------------------------
// Control variates for the score-function estimator.

struct CvPair {
  std::vector<double> f;  // h * (log p - log q)
  std::vector<double> h;  // grad log q
};

struct ControlVariateState {
  std::size_t capacity = 100;  // window length in samples; 0 disables the control variate
  std::deque<CvPair> window;
  std::vector<double> a_hat;

  double scale(std::size_t d) const { return d < a_hat.size() ? a_hat[d] : 0.0; }
};

/// Append pairs, trim to capacity and refit a_d = Cov(f_d, h_d) / Var(h_d)
/// (0 when the window has fewer than two pairs or Var(h_d) = 0).
ControlVariateState update_control_variate(ControlVariateState cv, std::span<const CvPair> pairs);

struct ScoreFunctionEstimate {
  GradientEstimate estimate;
  std::vector<CvPair> pairs;
};

/// theta_s reuse the reparameterized sampler but are treated as constants.
/// The returned bound is (1/S) sum_s (log p(y, theta_s) - log q(theta_s)).
ScoreFunctionEstimate score_function_bound(const VariationalFamily& q, const BoundProblem& problem,
                                           const ControlVariateState& cv, const RngStream& rng,
                                           std::uint64_t iteration);

/// Dispatch on kind; the score-function branch uses `cv` when given.
GradientEstimate estimate_gradient(EstimatorKind kind, const VariationalFamily& q, const BoundProblem& problem,
                                   const RngStream& rng, std::uint64_t iteration, bool per_sample = false,
                                   const ControlVariateState* cv = nullptr);

// ---------------------------------------------------------------------------
// Latent variables per datapoint.

struct LatentProblem {
  std::shared_ptr<const LatentSimulator> simulator;
  Observation observation;
  Prior theta_prior;
  std::optional<Prior> latent_prior;  // required when latent_dim > 0
  EpsilonPolicy epsilon;
  std::size_t samples = 10;  // S
  std::size_t latent_samples = 1;  // K
  std::size_t simulations = 10;  // L
  std::size_t kl_samples = kDefaultKlSamples;
  /// true: w_k shared by all s (the bound's display); false: fresh w per (s, k).
  bool shared_latent_draws = true;
};

/// (1/S)(1/K) sum_s sum_k log (1/L) sum_l K(y, f(g(phi,nu_s), h(xi,w_k), u_skl))
///   - KL(q_phi || p(theta)) - KL(q_xi || p(z)).
/// Gradient layout: phi parameters followed by xi parameters.
/// Draws: u_skl = (kSimulatorNoise, iteration, (s*K + k)*L + l); with K = 1 and
/// no latents this is the same stream layout as pathwise_bound.
GradientEstimate latent_pathwise_bound(const VariationalFamily& q_theta, const std::optional<VariationalFamily>& q_z,
                                       const LatentProblem& problem, const RngStream& rng, std::uint64_t iteration);

BoundExpression build_latent_bound(Tape& tape, const VariationalFamily& q_theta, std::span<const Var> phi,
                                   const std::optional<VariationalFamily>& q_z, std::span<const Var> xi,
                                   const LatentProblem& problem, const RngStream& rng, std::uint64_t iteration);

// ---------------------------------------------------------------------------

struct VarianceProfile {
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased, per dimension
  std::vector<std::vector<double>> samples;  // n_repeats x dim
};

/// Stream tag separating profile draws from a run's own draws.
inline constexpr std::uint64_t kProfileStreamTag = 0xC0FFEE;

/// n_repeats independent gradient estimates at frozen phi. Score-function
/// estimates are naive (no control variate) unless `cv` is given.
VarianceProfile gradient_variance_profile(EstimatorKind kind, const VariationalFamily& q, const BoundProblem& problem,
                                          const RngStream& rng, std::size_t n_repeats,
                                          const ControlVariateState* cv = nullptr);

}  // namespace avabc
