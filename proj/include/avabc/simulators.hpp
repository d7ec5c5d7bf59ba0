#pragma once

// Deterministic simulators x = f(theta, u): all randomness enters through the
// noise vector u, whose distribution is declared by noise_spec(). Outputs are
// recorded on the tape of theta, so statistics are differentiable in theta.

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "avabc/autodiff.hpp"
#include "avabc/error.hpp"
#include "avabc/rng.hpp"

namespace avabc {

enum class NoiseKind { kStandardNormal, kUniform };

struct NoiseBlock {
  NoiseKind kind;
  std::size_t count;
};

/// Non-finite trajectory or otherwise unusable simulation output. The ABC
/// likelihood drops such draws instead of aborting.
class SimulationFailure : public Error {
 public:
  SimulationFailure(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct SimOutput {
  std::vector<Var> statistics;
  /// Raw simulated data (samples or time series) behind the statistics.
  std::vector<Var> raw;
};

std::size_t noise_dim(std::span<const NoiseBlock> spec);
std::vector<double> draw_noise(std::span<const NoiseBlock> spec, Engine& eng);

class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual std::string name() const = 0;
  virtual std::size_t theta_dim() const = 0;
  virtual std::vector<NoiseBlock> noise_spec() const = 0;
  virtual std::size_t statistics_dim() const = 0;
  virtual SimOutput simulate(std::span<const Var> theta, std::span<const double> u) const = 0;

  std::size_t noise_dim() const;
  std::vector<double> draw_noise(Engine& eng) const;

  /// Plain-value evaluation on a scratch tape.
  std::vector<double> statistics(std::span<const double> theta, std::span<const double> u) const;
  std::vector<double> raw(std::span<const double> theta, std::span<const double> u) const;

 protected:
  void check_inputs(std::span<const Var> theta, std::span<const double> u) const;
};

/// Normal approximation to Binomial(M, theta): x = M theta + sqrt(M theta (1 - theta)) u.
class BernoulliSimulator final : public Simulator {
 public:
  explicit BernoulliSimulator(std::size_t trials = 100);

  std::string name() const override { return "bernoulli"; }
  std::size_t theta_dim() const override { return 1; }
  std::vector<NoiseBlock> noise_spec() const override { return {{NoiseKind::kStandardNormal, 1}}; }
  std::size_t statistics_dim() const override { return 1; }
  SimOutput simulate(std::span<const Var> theta, std::span<const double> u) const override;

  std::size_t trials() const { return trials_; }

 private:
  std::size_t trials_;
};

/// M exponential draws x_m = -log(1 - u_m) / lambda; statistic is their mean.
class ExponentialSimulator final : public Simulator {
 public:
  explicit ExponentialSimulator(std::size_t samples = 15);

  std::string name() const override { return "exponential"; }
  std::size_t theta_dim() const override { return 1; }
  std::vector<NoiseBlock> noise_spec() const override { return {{NoiseKind::kUniform, samples_}}; }
  std::size_t statistics_dim() const override { return 1; }
  SimOutput simulate(std::span<const Var> theta, std::span<const double> u) const override;

  std::size_t samples() const { return samples_; }

 private:
  std::size_t samples_;
};

struct BlowflyConfig {
  std::size_t horizon = 180;  // T, number of simulated days returned
  std::size_t lag = 14;  // tau
  double initial_population = 100.0;  // N_t for t <= tau
  /// Absolute peak thresholds. Presets derive them from the observed series
  /// mean (1.0x and 1.5x).
  std::array<double, 2> peak_thresholds{1.0, 1.5};
};

/// Default multiples of the observed series mean used as peak thresholds.
inline constexpr std::array<double, 2> kPeakThresholdMultiples{1.0, 1.5};

/// Discretized blowfly population model
///   N_{t+1} = P N_{t-tau} exp(-N_{t-tau} / N0) e_t + N_t exp(-delta eps_t)
/// with theta = (log P, log delta, log N0, log sigma_d, log sigma_p).
///
/// The unit-mean Gamma noises are replaced by moment-matched log-normals,
/// e = exp(s u - s^2/2) with s^2 = log(1 + sigma^2), which keep mean 1 and
/// variance sigma^2 while staying a smooth transform of u ~ N(0,1).
/// u holds T draws for e_t followed by T draws for eps_t.
class BlowflySimulator final : public Simulator {
 public:
  explicit BlowflySimulator(BlowflyConfig config = {});

  std::string name() const override { return "blowfly"; }
  std::size_t theta_dim() const override { return 5; }
  std::vector<NoiseBlock> noise_spec() const override {
    return {{NoiseKind::kStandardNormal, 2 * config_.horizon}};
  }
  std::size_t statistics_dim() const override { return 10; }
  SimOutput simulate(std::span<const Var> theta, std::span<const double> u) const override;

  const BlowflyConfig& config() const { return config_; }

  /// The population series only (length T).
  std::vector<Var> trajectory(std::span<const Var> theta, std::span<const double> u) const;

 private:
  BlowflyConfig config_;
};

/// Linear-Gaussian simulator x_i = theta_i + noise_std * u_i, used as the
/// conjugate toy problem.
class LinearGaussianSimulator final : public Simulator {
 public:
  LinearGaussianSimulator(std::size_t dim, double noise_std);

  std::string name() const override { return "linear_gaussian"; }
  std::size_t theta_dim() const override { return dim_; }
  std::vector<NoiseBlock> noise_spec() const override { return {{NoiseKind::kStandardNormal, dim_}}; }
  std::size_t statistics_dim() const override { return dim_; }
  SimOutput simulate(std::span<const Var> theta, std::span<const double> u) const override;

  double noise_std() const { return noise_std_; }

 private:
  std::size_t dim_;
  double noise_std_;
};

/// Means of the four quarters of the stably sorted values, quarter k spanning
/// sorted indices [floor(k N / 4), floor((k+1) N / 4)). Needs N >= 4.
std::array<Var, 4> quartile_means(std::span<const Var> values);

/// Number of strict local maxima above `threshold` (interior points only).
std::size_t count_peaks(std::span<const double> series, double threshold);

/// The ten blowfly statistics: quartile means of the series values, quartile
/// means of the first differences, and peak counts for the two thresholds.
/// Peak counts are recorded as constants (their theta-gradient is zero).
std::vector<Var> blowfly_statistics(std::span<const Var> series, const std::array<double, 2>& thresholds);
std::vector<double> blowfly_statistics(std::span<const double> series, const std::array<double, 2>& thresholds);

/// Simulator with per-datapoint latent variables z: x = f(theta, z, u).
class LatentSimulator {
 public:
  virtual ~LatentSimulator() = default;

  virtual std::string name() const = 0;
  virtual std::size_t theta_dim() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual std::vector<NoiseBlock> noise_spec() const = 0;
  virtual std::size_t statistics_dim() const = 0;
  virtual SimOutput simulate(std::span<const Var> theta, std::span<const Var> z, std::span<const double> u) const = 0;
};

/// A plain simulator seen as a latent one with no latent variables.
class NoLatent final : public LatentSimulator {
 public:
  explicit NoLatent(std::shared_ptr<const Simulator> sim) : sim_(std::move(sim)) {}

  std::string name() const override { return sim_->name(); }
  std::size_t theta_dim() const override { return sim_->theta_dim(); }
  std::size_t latent_dim() const override { return 0; }
  std::vector<NoiseBlock> noise_spec() const override { return sim_->noise_spec(); }
  std::size_t statistics_dim() const override { return sim_->statistics_dim(); }
  SimOutput simulate(std::span<const Var> theta, std::span<const Var> z, std::span<const double> u) const override;

  const Simulator& base() const { return *sim_; }

 private:
  std::shared_ptr<const Simulator> sim_;
};

/// x_n = theta + z_n + noise_std * u_n for n = 1..N datapoints.
class AdditiveLatentToy final : public LatentSimulator {
 public:
  AdditiveLatentToy(std::size_t datapoints, double noise_std);

  std::string name() const override { return "additive_latent_toy"; }
  std::size_t theta_dim() const override { return 1; }
  std::size_t latent_dim() const override { return datapoints_; }
  std::vector<NoiseBlock> noise_spec() const override { return {{NoiseKind::kStandardNormal, datapoints_}}; }
  std::size_t statistics_dim() const override { return datapoints_; }
  SimOutput simulate(std::span<const Var> theta, std::span<const Var> z, std::span<const double> u) const override;

 private:
  std::size_t datapoints_;
  double noise_std_;
};

}  // namespace avabc
