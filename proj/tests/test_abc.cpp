#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "avabc/abc.hpp"
#include "support.hpp"

using namespace avabc;
using doctest::Approx;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::vector<std::vector<double>> draw_u(const Simulator& sim, std::uint64_t seed, std::size_t L) {
  RngStream rng(seed);
  std::vector<std::vector<double>> u;
  for (std::size_t l = 0; l < L; ++l) {
    Engine eng = rng.substream(DrawKind::kSimulatorNoise, 0, l);
    u.push_back(sim.draw_noise(eng));
  }
  return u;
}

Observation obs(const std::string& sim, std::vector<double> stats) {
  Observation o;
  o.simulator = sim;
  o.statistics = std::move(stats);
  return o;
}

// Plain multivariate normal log-density with diagonal covariance.
double mvn_log_density(const std::vector<double>& y, const std::vector<double>& x, const std::vector<double>& sd) {
  double acc = -0.5 * static_cast<double>(y.size()) * kLog2Pi;
  for (std::size_t i = 0; i < y.size(); ++i) {
    acc -= std::log(sd[i]);
    acc -= 0.5 * std::pow((y[i] - x[i]) / sd[i], 2);
  }
  return acc;
}

}  // namespace

TEST_SUITE("abc") {
  TEST_CASE("gaussian kernel") {
    const std::vector<double> y{1.0, 2.0, 3.0};
    CHECK(gaussian_kernel_log(y, y, std::vector<double>(3, 1.0)) == Approx(-1.5 * kLog2Pi).epsilon(1e-15));
    const double eps = 0.37;
    CHECK(gaussian_kernel_log(std::vector<double>{eps}, std::vector<double>{0.0}, std::vector<double>{eps}) ==
          Approx(-0.5 - std::log(eps * std::sqrt(2 * std::numbers::pi))).epsilon(1e-15));

    RngStream rng(5);
    Engine eng = rng.substream(DrawKind::kReplicate, 0, 0);
    const auto a = standard_normals(eng, 10), b = standard_normals(eng, 10);
    std::vector<double> sd;
    for (double x : open_uniforms(eng, 10)) sd.push_back(0.5 + x);
    CHECK(std::abs(gaussian_kernel_log(a, b, sd) - mvn_log_density(a, b, sd)) < 1e-12);
  }

  TEST_CASE("abc log-likelihood reduces to the kernel for L = 1") {
    BernoulliSimulator sim(100);
    const auto y = obs("bernoulli", {70.0});
    const auto u = draw_u(sim, 1, 1);
    Tape t;
    std::vector<Var> th{t.lift(0.6)};
    const auto eps = EpsilonPolicy::fixed(2.0);
    const AbcLogLik ll = abc_loglik(sim, th, y, u, eps);
    const auto x = sim.statistics(std::vector<double>{0.6}, u[0]);
    CHECK(ll.value.value() == Approx(gaussian_kernel_log(y.statistics, x, std::vector<double>{2.0})).epsilon(1e-15));
    CHECK(ll.l_count == 1);

    std::vector<std::vector<double>> twice{u[0], u[0]};
    CHECK(abc_loglik(sim, th, y, twice, eps).value.value() == Approx(ll.value.value()).epsilon(1e-15));
  }

  TEST_CASE("bernoulli smoothed likelihood oracle") {
    // With the normal approximation the kernel average converges to
    // N(k | M theta, M theta (1 - theta) + eps^2).
    BernoulliSimulator sim(100);
    const double theta = 0.7, k = 70.0, eps = std::sqrt(theta * (1 - theta));
    const auto u = draw_u(sim, 17, 10000);
    std::vector<double> kernel;
    for (const auto& ul : u) {
      const auto x = sim.statistics(std::vector<double>{theta}, ul);
      kernel.push_back(std::exp(gaussian_kernel_log(std::vector<double>{k}, x, std::vector<double>{eps})));
    }
    const auto m = testing::moments(kernel);
    const double var = 100 * theta * (1 - theta) + eps * eps;
    const double oracle = std::exp(-0.5 * std::log(2 * std::numbers::pi * var));
    CHECK(std::abs(m.mean - oracle) < 3 * m.standard_error);

    Tape t;
    std::vector<Var> th{t.lift(theta)};
    const AbcLogLik ll = abc_loglik(sim, th, obs("bernoulli", {k}), u, EpsilonPolicy::bernoulli_analytic());
    CHECK(ll.value.value() == Approx(std::log(m.mean)).epsilon(1e-12));
  }

  TEST_CASE("failed simulations are dropped and renormalized") {
    LinearGaussianSimulator inner(1, 1.0);
    const auto u = draw_u(inner, 3, 4);
    Tape t;
    std::vector<Var> th{t.lift(0.2)};
    const auto y = obs("linear_gaussian", {0.5});
    std::size_t n = 0;
    SimulateFn sim = [&](std::span<const double> ul) -> SimOutput {
      if (n++ % 2 == 1) throw SimulationFailure("boom", 1);
      return inner.simulate(th, ul);
    };
    const auto eps = EpsilonPolicy::fixed(1.0);
    const AbcLogLik ll = abc_loglik(sim, 1, th, y, u, eps);
    CHECK(ll.failures == 2);
    CHECK(ll.l_count == 2);
    std::vector<std::vector<double>> kept{u[0], u[2]};
    CHECK(ll.value.value() == Approx(abc_loglik(inner, th, y, kept, eps).value.value()).epsilon(1e-15));

    SimulateFn dead = [](std::span<const double>) -> SimOutput { throw SimulationFailure("boom", 3); };
    const AbcLogLik f = abc_loglik(dead, 1, th, y, u, eps);
    CHECK(f.failed);
    CHECK(f.value.value() == kFailurePenalty);
  }

  TEST_CASE("epsilon selection") {
    CHECK(select_epsilon(EpsilonPolicy::bernoulli_analytic(), {}, std::vector<double>{0.5}, 1)[0] == 0.5);
    CHECK_THROWS(select_epsilon(EpsilonPolicy::simulation_scaled(), std::vector<double>(10, 2.0), {}, 1));
    RngStream rng(12);
    Engine eng = rng.substream(DrawKind::kReplicate, 0, 0);
    const auto x = standard_normals(eng, 10000);
    const double e = select_epsilon(EpsilonPolicy::simulation_scaled(), x, {}, 1)[0];
    CHECK(e == Approx(0.01).epsilon(0.03));
    const auto fixed = select_epsilon(EpsilonPolicy::fixed(0.3), {}, {}, 4);
    CHECK(fixed == std::vector<double>(4, 0.3));
    CHECK_THROWS(EpsilonPolicy::fixed(std::vector<double>{1.0, 2.0}).validate(3));
    CHECK_THROWS(EpsilonPolicy::fixed(-1.0));
    CHECK(to_string(epsilon_kind_from_string("simulation_scaled")) == "simulation_scaled");
  }

  TEST_CASE("taped epsilon matches the plain rule") {
    const std::vector<double> raw{0.3, 1.9, 0.7, 2.2, 1.1};
    Tape t;
    std::vector<Var> rv;
    for (double r : raw) rv.push_back(t.lift(r));
    std::vector<Var> th{t.lift(0.3)};
    CHECK(select_epsilon(EpsilonPolicy::simulation_scaled(), rv, th, 2, t)[1].value() ==
          select_epsilon(EpsilonPolicy::simulation_scaled(), raw, std::vector<double>{0.3}, 2)[1]);
    CHECK(select_epsilon(EpsilonPolicy::bernoulli_analytic(), rv, th, 1, t)[0].value() ==
          std::sqrt(0.3 * 0.7));
  }
}
