#include "avabc/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace avabc {

std::size_t noise_dim(std::span<const NoiseBlock> spec) {
  std::size_t n = 0;
  for (const auto& b : spec) n += b.count;
  return n;
}

std::vector<double> draw_noise(std::span<const NoiseBlock> spec, Engine& eng) {
  std::vector<double> u;
  u.reserve(noise_dim(spec));
  for (const auto& b : spec) {
    const auto block = b.kind == NoiseKind::kUniform ? open_uniforms(eng, b.count) : standard_normals(eng, b.count);
    u.insert(u.end(), block.begin(), block.end());
  }
  return u;
}

std::size_t Simulator::noise_dim() const {
  const auto spec = noise_spec();
  return avabc::noise_dim(spec);
}

std::vector<double> Simulator::draw_noise(Engine& eng) const {
  const auto spec = noise_spec();
  return avabc::draw_noise(spec, eng);
}

std::vector<double> Simulator::statistics(std::span<const double> theta, std::span<const double> u) const {
  Tape tape;
  std::vector<Var> th;
  for (double t : theta) th.push_back(tape.constant(t));
  return values(simulate(th, u).statistics);
}

std::vector<double> Simulator::raw(std::span<const double> theta, std::span<const double> u) const {
  Tape tape;
  std::vector<Var> th;
  for (double t : theta) th.push_back(tape.constant(t));
  return values(simulate(th, u).raw);
}

void Simulator::check_inputs(std::span<const Var> theta, std::span<const double> u) const {
  if (theta.size() != theta_dim()) {
    throw Error(name() + ": expected " + std::to_string(theta_dim()) + " parameters, got " + std::to_string(theta.size()));
  }
  if (u.size() != noise_dim()) {
    throw Error(name() + ": expected " + std::to_string(noise_dim()) + " noise values, got " + std::to_string(u.size()));
  }
}

// ---------------------------------------------------------------------------

BernoulliSimulator::BernoulliSimulator(std::size_t trials) : trials_(trials) {
  if (trials_ == 0) throw Error("bernoulli: M must be >= 1");
}

SimOutput BernoulliSimulator::simulate(std::span<const Var> theta, std::span<const double> u) const {
  check_inputs(theta, u);
  const Var& p = theta[0];
  if (!(p.value() > 0.0 && p.value() < 1.0)) {
    std::ostringstream os;
    os << "bernoulli: theta=" << p.value() << " outside the open unit interval";
    throw Error(os.str());
  }
  const double m = static_cast<double>(trials_);
  const Var x = m * p + sqrt(m * (p * (1.0 - p))) * u[0];
  return {{x}, {x}};
}

// ---------------------------------------------------------------------------

ExponentialSimulator::ExponentialSimulator(std::size_t samples) : samples_(samples) {
  if (samples_ == 0) throw Error("exponential: M must be >= 1");
}

SimOutput ExponentialSimulator::simulate(std::span<const Var> theta, std::span<const double> u) const {
  check_inputs(theta, u);
  const Var& rate = theta[0];
  if (!(rate.value() > 0.0)) {
    std::ostringstream os;
    os << "exponential: rate=" << rate.value() << " must be > 0";
    throw Error(os.str());
  }
  const Var scale = 1.0 / rate;
  std::vector<Var> xs;
  xs.reserve(samples_);
  for (double um : u) xs.push_back(-std::log1p(-um) * scale);
  Var xbar = mean(xs);
  return {{xbar}, std::move(xs)};
}

// ---------------------------------------------------------------------------

BlowflySimulator::BlowflySimulator(BlowflyConfig config) : config_(config) {
  if (config_.lag < 1 || config_.horizon <= config_.lag) throw Error("blowfly: need T > tau >= 1");
  if (!(config_.initial_population > 0.0)) throw Error("blowfly: initial population must be > 0");
  if (config_.horizon < 8) throw Error("blowfly: horizon must be >= 8 for the statistics");
}

std::vector<Var> BlowflySimulator::trajectory(std::span<const Var> theta, std::span<const double> u) const {
  check_inputs(theta, u);
  Tape& tape = *theta[0].tape();
  const std::size_t T = config_.horizon;
  const std::size_t tau = config_.lag;

  const Var P = exp(theta[0]);
  const Var delta = exp(theta[1]);
  const Var inv_n0 = exp(-theta[2]);
  // Log-normal surrogate scales: s^2 = log(1 + sigma^2).
  const Var s2_d = log1p(exp(2.0 * theta[3]));
  const Var s2_p = log1p(exp(2.0 * theta[4]));
  const Var s_d = sqrt(s2_d);
  const Var s_p = sqrt(s2_p);
  const Var half_s2_d = 0.5 * s2_d;
  const Var half_s2_p = 0.5 * s2_p;

  std::vector<Var> n;
  n.reserve(tau + 1 + T);
  const Var init = tape.constant(config_.initial_population);
  for (std::size_t i = 0; i <= tau; ++i) n.push_back(init);

  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = tau + k;
    const Var& lagged = n[t - tau];
    const Var e_t = exp(s_p * u[k] - half_s2_p);
    const Var eps_t = exp(s_d * u[T + k] - half_s2_d);
    const Var births = P * lagged * exp(-(lagged * inv_n0)) * e_t;
    const Var survivors = n[t] * exp(-(delta * eps_t));
    Var next = births + survivors;
    if (!std::isfinite(next.value())) {
      std::ostringstream os;
      os << "blowfly: non-finite population at t=" << (k + 1);
      throw SimulationFailure(os.str(), k + 1);
    }
    n.push_back(next);
  }
  return {n.begin() + static_cast<std::ptrdiff_t>(tau + 1), n.end()};
}

SimOutput BlowflySimulator::simulate(std::span<const Var> theta, std::span<const double> u) const {
  auto series = trajectory(theta, u);
  auto stats = blowfly_statistics(series, config_.peak_thresholds);
  return {std::move(stats), std::move(series)};
}

// ---------------------------------------------------------------------------

LinearGaussianSimulator::LinearGaussianSimulator(std::size_t dim, double noise_std) : dim_(dim), noise_std_(noise_std) {
  if (dim_ == 0) throw Error("linear_gaussian: dimension must be >= 1");
  if (!(noise_std_ >= 0.0)) throw Error("linear_gaussian: noise std must be >= 0");
}

SimOutput LinearGaussianSimulator::simulate(std::span<const Var> theta, std::span<const double> u) const {
  check_inputs(theta, u);
  std::vector<Var> x;
  x.reserve(dim_);
  for (std::size_t i = 0; i < dim_; ++i) x.push_back(theta[i] + noise_std_ * u[i]);
  return {x, x};
}

// ---------------------------------------------------------------------------
// Statistics

std::array<Var, 4> quartile_means(std::span<const Var> values) {
  const std::size_t n = values.size();
  if (n < 4) throw Error("quartile_means: need at least 4 values");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a].value() < values[b].value(); });
  std::array<Var, 4> out;
  std::vector<Var> part;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t lo = k * n / 4;
    const std::size_t hi = (k + 1) * n / 4;
    part.clear();
    for (std::size_t i = lo; i < hi; ++i) part.push_back(values[order[i]]);
    out[k] = mean(part);
  }
  return out;
}

std::size_t count_peaks(std::span<const double> series, double threshold) {
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < series.size(); ++i) {
    if (series[i] > series[i - 1] && series[i] > series[i + 1] && series[i] > threshold) ++count;
  }
  return count;
}

std::vector<Var> blowfly_statistics(std::span<const Var> series, const std::array<double, 2>& thresholds) {
  if (series.size() < 8) {
    throw Error("blowfly_statistics: series length " + std::to_string(series.size()) + " < 8");
  }
  Tape& tape = *series[0].tape();
  std::vector<Var> stats;
  stats.reserve(10);
  for (const Var& q : quartile_means(series)) stats.push_back(q);

  std::vector<Var> diffs;
  diffs.reserve(series.size() - 1);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) diffs.push_back(series[i + 1] - series[i]);
  for (const Var& q : quartile_means(diffs)) stats.push_back(q);

  const auto raw = values(series);
  for (double h : thresholds) stats.push_back(tape.constant(static_cast<double>(count_peaks(raw, h))));
  return stats;
}

std::vector<double> blowfly_statistics(std::span<const double> series, const std::array<double, 2>& thresholds) {
  Tape tape;
  std::vector<Var> s;
  s.reserve(series.size());
  for (double x : series) s.push_back(tape.constant(x));
  return values(blowfly_statistics(s, thresholds));
}

// ---------------------------------------------------------------------------
// Latent simulators

SimOutput NoLatent::simulate(std::span<const Var> theta, std::span<const Var> z, std::span<const double> u) const {
  if (!z.empty()) throw Error(name() + ": no latent variables expected");
  return sim_->simulate(theta, u);
}

AdditiveLatentToy::AdditiveLatentToy(std::size_t datapoints, double noise_std)
    : datapoints_(datapoints), noise_std_(noise_std) {
  if (datapoints_ == 0) throw Error("additive_latent_toy: need at least one datapoint");
}

SimOutput AdditiveLatentToy::simulate(std::span<const Var> theta, std::span<const Var> z,
                                      std::span<const double> u) const {
  if (theta.size() != 1 || z.size() != datapoints_ || u.size() != datapoints_) {
    throw Error("additive_latent_toy: dimension mismatch");
  }
  std::vector<Var> x;
  x.reserve(datapoints_);
  for (std::size_t n = 0; n < datapoints_; ++n) x.push_back(theta[0] + z[n] + noise_std_ * u[n]);
  return {x, x};
}

}  // namespace avabc
