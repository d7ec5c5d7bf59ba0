#pragma once

// Shared helpers for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "avabc/estimators.hpp"

namespace avabc::testing {

/// Central differences of f at x with step h per coordinate.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              const std::vector<double>& x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto lo = x, hi = x;
    lo[i] -= h;
    hi[i] += h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||b||, floor).
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), floor);
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double standard_error = 0.0;
};

inline Moments moments(std::span<const double> xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= n - 1.0;
  m.standard_error = std::sqrt(m.variance / n);
  return m;
}

inline std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t d) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[d]);
  return out;
}

/// Conjugate toy: x = theta + noise_std u, Gaussian prior, Gaussian q, fixed
/// epsilon and L = 1, where the bound's expectation is available in closed form.
struct ConjugateToy {
  std::vector<double> y;
  std::vector<double> prior_mean, prior_std;
  double noise_std = 1.0;
  double epsilon = 1.5;

  BoundProblem problem(std::size_t samples) const {
    BoundProblem p;
    p.simulator = std::make_shared<LinearGaussianSimulator>(y.size(), noise_std);
    p.observation.simulator = "linear_gaussian";
    p.observation.statistics = y;
    p.prior = Prior::diagonal_gaussian(prior_mean, prior_std);
    p.epsilon = EpsilonPolicy::fixed(epsilon);
    p.samples = samples;
    p.simulations = 1;
    return p;
  }

  /// d/d(mu_i) and d/d(log s_i) of
  ///   E_q[log N(y | theta + noise, eps^2)] - KL(N(mu, s^2) || N(m0, s0^2)).
  std::vector<double> gradient(const VariationalFamily& q) const {
    const auto c = q.constrained();
    const std::size_t d = y.size();
    std::vector<double> g(2 * d);
    const double e2 = epsilon * epsilon;
    for (std::size_t i = 0; i < d; ++i) {
      const double mu = c[i], s = c[d + i], s0 = prior_std[i];
      g[i] = (y[i] - mu) / e2 - (mu - prior_mean[i]) / (s0 * s0);
      g[d + i] = -s * s / e2 - s * s / (s0 * s0) + 1.0;
    }
    return g;
  }
};

}  // namespace avabc::testing
