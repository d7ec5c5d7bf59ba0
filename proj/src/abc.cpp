#include "avabc/abc.hpp"

#include <cmath>
#include <sstream>

namespace avabc {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

std::vector<double> broadcast(std::span<const double> v, std::size_t n) {
  if (v.size() == n) return {v.begin(), v.end()};
  return std::vector<double>(n, v.front());
}

[[noreturn]] void degenerate_epsilon(double eps) {
  std::ostringstream os;
  os << "select_epsilon: bandwidth " << eps << " is not positive (degenerate simulation output)";
  throw Error(os.str());
}

}  // namespace

std::string to_string(EpsilonKind kind) {
  switch (kind) {
    case EpsilonKind::kFixed: return "fixed";
    case EpsilonKind::kSimulationScaled: return "simulation_scaled";
    case EpsilonKind::kBernoulliAnalytic: return "bernoulli_analytic";
  }
  return "?";
}

EpsilonKind epsilon_kind_from_string(const std::string& name) {
  if (name == "fixed") return EpsilonKind::kFixed;
  if (name == "simulation_scaled") return EpsilonKind::kSimulationScaled;
  if (name == "bernoulli_analytic") return EpsilonKind::kBernoulliAnalytic;
  throw Error("unknown epsilon policy '" + name + "'");
}

EpsilonPolicy EpsilonPolicy::fixed(double eps) { return fixed(std::vector<double>{eps}); }

EpsilonPolicy EpsilonPolicy::fixed(std::vector<double> eps) {
  EpsilonPolicy p{EpsilonKind::kFixed, std::move(eps)};
  if (p.value.empty()) throw Error("fixed epsilon needs at least one value");
  for (double e : p.value) {
    if (!(e > 0.0) || !std::isfinite(e)) throw Error("fixed epsilon must be > 0");
  }
  return p;
}

EpsilonPolicy EpsilonPolicy::simulation_scaled() { return {EpsilonKind::kSimulationScaled, {}}; }
EpsilonPolicy EpsilonPolicy::bernoulli_analytic() { return {EpsilonKind::kBernoulliAnalytic, {}}; }

void EpsilonPolicy::validate(std::size_t statistics_dim) const {
  if (kind != EpsilonKind::kFixed) return;
  if (value.size() != 1 && value.size() != statistics_dim) {
    throw Error("fixed epsilon has " + std::to_string(value.size()) + " entries, expected 1 or " +
                std::to_string(statistics_dim));
  }
  for (double e : value) {
    if (!(e > 0.0) || !std::isfinite(e)) throw Error("fixed epsilon must be > 0");
  }
}

std::vector<double> select_epsilon(const EpsilonPolicy& policy, std::span<const double> raw,
                                   std::span<const double> theta, std::size_t statistics_dim) {
  switch (policy.kind) {
    case EpsilonKind::kFixed:
      policy.validate(statistics_dim);
      return broadcast(policy.value, statistics_dim);
    case EpsilonKind::kSimulationScaled: {
      const std::size_t m = raw.size();
      if (m < 2) throw Error("select_epsilon: simulation_scaled needs M >= 2 raw values");
      // Same operation order as the taped rule below, so both agree bitwise.
      double mu = 0.0;
      for (double x : raw) mu += x;
      mu *= 1.0 / static_cast<double>(m);
      double ss = 0.0;
      for (double x : raw) ss += (x - mu) * (x - mu);
      const double eps = std::sqrt(ss * (1.0 / (static_cast<double>(m - 1) * static_cast<double>(m))));
      if (!(eps > 0.0)) degenerate_epsilon(eps);
      return std::vector<double>(statistics_dim, eps);
    }
    case EpsilonKind::kBernoulliAnalytic: {
      if (theta.size() != 1) throw Error("select_epsilon: bernoulli_analytic needs a scalar theta");
      const double p = theta[0];
      if (!(p > 0.0 && p < 1.0)) throw Error("select_epsilon: bernoulli_analytic needs 0 < theta < 1");
      return std::vector<double>(statistics_dim, std::sqrt(p * (1.0 - p)));
    }
  }
  throw Error("unknown epsilon policy");
}

std::vector<Var> select_epsilon(const EpsilonPolicy& policy, std::span<const Var> raw, std::span<const Var> theta,
                                std::size_t statistics_dim, Tape& tape) {
  switch (policy.kind) {
    case EpsilonKind::kFixed: {
      const auto v = select_epsilon(policy, {}, {}, statistics_dim);
      std::vector<Var> out;
      out.reserve(v.size());
      for (double e : v) out.push_back(tape.constant(e));
      return out;
    }
    case EpsilonKind::kSimulationScaled: {
      const std::size_t m = raw.size();
      if (m < 2) throw Error("select_epsilon: simulation_scaled needs M >= 2 raw values");
      const Var mu = mean(raw);
      std::vector<Var> dev2;
      dev2.reserve(m);
      for (const Var& x : raw) dev2.push_back(square(x - mu));
      const double scale = 1.0 / (static_cast<double>(m - 1) * static_cast<double>(m));
      const Var var_of_mean = sum(dev2) * scale;
      if (!(var_of_mean.value() > 0.0)) degenerate_epsilon(var_of_mean.value());
      return std::vector<Var>(statistics_dim, sqrt(var_of_mean));
    }
    case EpsilonKind::kBernoulliAnalytic: {
      if (theta.size() != 1) throw Error("select_epsilon: bernoulli_analytic needs a scalar theta");
      const Var& p = theta[0];
      if (!(p.value() > 0.0 && p.value() < 1.0)) throw Error("select_epsilon: bernoulli_analytic needs 0 < theta < 1");
      return std::vector<Var>(statistics_dim, sqrt(p * (1.0 - p)));
    }
  }
  throw Error("unknown epsilon policy");
}

Var gaussian_kernel_log(std::span<const double> y, std::span<const Var> x, std::span<const Var> eps) {
  if (y.size() != x.size() || x.size() != eps.size() || x.empty()) {
    throw Error("gaussian_kernel_log: dimension mismatch");
  }
  std::vector<Var> terms;
  terms.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(eps[i].value() > 0.0)) throw Error("gaussian_kernel_log: epsilon must be > 0");
    const Var z = (y[i] - x[i]) / eps[i];
    terms.push_back(-0.5 * square(z) - log(eps[i]) - kHalfLog2Pi);
  }
  return terms.size() == 1 ? terms.front() : sum(terms);
}

double gaussian_kernel_log(std::span<const double> y, std::span<const double> x, std::span<const double> eps) {
  if (y.size() != x.size() || x.size() != eps.size() || x.empty()) {
    throw Error("gaussian_kernel_log: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(eps[i] > 0.0)) throw Error("gaussian_kernel_log: epsilon must be > 0");
    const double z = (y[i] - x[i]) / eps[i];
    total += -0.5 * z * z - std::log(eps[i]) - kHalfLog2Pi;
  }
  return total;
}

AbcLogLik abc_loglik(const SimulateFn& simulate, std::size_t statistics_dim, std::span<const Var> theta,
                     const Observation& y, std::span<const std::vector<double>> u_draws, const EpsilonPolicy& eps) {
  if (u_draws.empty()) throw Error("abc_loglik: need L >= 1 simulations");
  if (theta.empty()) throw Error("abc_loglik: empty theta");
  y.validate(statistics_dim);
  Tape& tape = *theta[0].tape();

  AbcLogLik out;
  out.epsilon_used.assign(statistics_dim, 0.0);
  out.mean_statistics.assign(statistics_dim, 0.0);
  std::vector<Var> terms;
  terms.reserve(u_draws.size());
  for (const auto& u : u_draws) {
    SimOutput sim;
    try {
      sim = simulate(u);
    } catch (const SimulationFailure&) {
      ++out.failures;
      continue;
    }
    if (sim.statistics.size() != statistics_dim) {
      throw Error("abc_loglik: simulator returned " + std::to_string(sim.statistics.size()) + " statistics, expected " +
                  std::to_string(statistics_dim));
    }
    const auto e = select_epsilon(eps, sim.raw, theta, statistics_dim, tape);
    terms.push_back(gaussian_kernel_log(y.statistics, sim.statistics, e));
    for (std::size_t i = 0; i < statistics_dim; ++i) {
      out.epsilon_used[i] += e[i].value();
      out.mean_statistics[i] += sim.statistics[i].value();
    }
  }
  out.l_count = terms.size();
  if (terms.empty()) {
    out.failed = true;
    out.value = tape.constant(kFailurePenalty);
    return out;
  }
  const double inv_l = 1.0 / static_cast<double>(terms.size());
  for (std::size_t i = 0; i < statistics_dim; ++i) {
    out.epsilon_used[i] *= inv_l;
    out.mean_statistics[i] *= inv_l;
  }
  out.value = terms.size() == 1 ? terms.front() : log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
  return out;
}

AbcLogLik abc_loglik(const Simulator& sim, std::span<const Var> theta, const Observation& y,
                     std::span<const std::vector<double>> u_draws, const EpsilonPolicy& eps) {
  return abc_loglik([&](std::span<const double> u) { return sim.simulate(theta, u); }, sim.statistics_dim(), theta, y,
                    u_draws, eps);
}

}  // namespace avabc
