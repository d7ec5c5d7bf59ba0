#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "avabc/simulators.hpp"
#include "support.hpp"

using namespace avabc;
using doctest::Approx;

namespace {

// Independent statistic definitions: sort, split into quarters by index
// floor(kN/4), average; differences the same way; strict interior peaks.
std::vector<double> reference_statistics(const std::vector<double>& s, double h1, double h2) {
  auto quarters = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    const std::size_t n = v.size();
    for (std::size_t k = 0; k < 4; ++k) {
      double acc = 0.0;
      const std::size_t lo = k * n / 4, hi = (k + 1) * n / 4;
      for (std::size_t i = lo; i < hi; ++i) acc += v[i];
      out.push_back(acc / static_cast<double>(hi - lo));
    }
    return out;
  };
  std::vector<double> d;
  for (std::size_t i = 1; i < s.size(); ++i) d.push_back(s[i] - s[i - 1]);
  auto out = quarters(s);
  for (double x : quarters(d)) out.push_back(x);
  for (double h : {h1, h2}) {
    double peaks = 0;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) peaks += (s[i] > s[i - 1] && s[i] > s[i + 1] && s[i] > h);
    out.push_back(peaks);
  }
  return out;
}

std::vector<double> stats_grad_fd_check(const Simulator& sim, const std::vector<double>& theta,
                                        const std::vector<double>& u, const std::vector<double>& weights) {
  Tape t;
  std::vector<Var> th;
  for (double x : theta) th.push_back(t.lift(x));
  const auto out = sim.simulate(th, u);
  Var acc = t.constant(0.0);
  for (std::size_t i = 0; i < out.statistics.size(); ++i) acc = acc + weights[i] * out.statistics[i];
  return t.backward(acc).wrt(th);
}

}  // namespace

TEST_SUITE("simulators") {
  TEST_CASE("bernoulli normal approximation") {
    BernoulliSimulator sim(100);
    CHECK(sim.statistics(std::vector<double>{0.7}, std::vector<double>{0.0})[0] == Approx(70.0).epsilon(1e-14));
    CHECK(sim.statistics(std::vector<double>{0.5}, std::vector<double>{1.0})[0] == Approx(55.0).epsilon(1e-14));
    CHECK(sim.noise_dim() == 1);
    CHECK_THROWS(sim.statistics(std::vector<double>{0.5}, std::vector<double>{1.0, 2.0}));
  }

  TEST_CASE("exponential inverse CDF") {
    ExponentialSimulator one(1);
    CHECK(one.statistics(std::vector<double>{1.0}, std::vector<double>{1.0 - std::exp(-1.0)})[0] ==
          Approx(1.0).epsilon(1e-14));
    ExponentialSimulator sim(15);
    RngStream rng(2);
    Engine eng = rng.substream(DrawKind::kSimulatorNoise, 0, 0);
    const auto u = sim.draw_noise(eng);
    const double x1 = sim.statistics(std::vector<double>{1.0}, u)[0];
    const double x2 = sim.statistics(std::vector<double>{2.0}, u)[0];
    CHECK(x2 == Approx(x1 / 2.0).epsilon(1e-14));
    CHECK(sim.raw(std::vector<double>{1.0}, u).size() == 15);
  }

  TEST_CASE("exponential mean over many draws") {
    ExponentialSimulator sim(1);
    RngStream rng(4);
    std::vector<double> xs;
    for (std::uint64_t i = 0; i < 100000; ++i) {
      Engine eng = rng.substream(DrawKind::kSimulatorNoise, 0, i);
      xs.push_back(sim.statistics(std::vector<double>{1.0}, sim.draw_noise(eng))[0]);
    }
    const auto m = testing::moments(xs);
    CHECK(std::abs(m.mean - 1.0) < 3 * m.standard_error);
  }

  TEST_CASE("simulators are deterministic in (theta, u)") {
    BlowflySimulator sim;
    RngStream rng(9);
    Engine e1 = rng.substream(DrawKind::kSimulatorNoise, 3, 7);
    Engine e2 = rng.substream(DrawKind::kSimulatorNoise, 3, 7);
    const auto u1 = sim.draw_noise(e1), u2 = sim.draw_noise(e2);
    CHECK(u1 == u2);
    const std::vector<double> theta{2.0, -1.8, 6.0, -0.75, -0.5};
    CHECK(sim.statistics(theta, u1) == sim.statistics(theta, u2));
    CHECK(sim.statistics(theta, u1).size() == 10);
    CHECK(sim.raw(theta, u1).size() == 180);
  }

  TEST_CASE("blowfly with vanishing births decays by survival only") {
    BlowflyConfig cfg;
    cfg.horizon = 30;
    BlowflySimulator sim(cfg);
    RngStream rng(1);
    Engine eng = rng.substream(DrawKind::kSimulatorNoise, 0, 0);
    const auto u = sim.draw_noise(eng);
    const std::vector<double> theta{std::log(1e-12), std::log(0.2), 6.0, std::log(0.3), -0.5};
    const auto n = sim.raw(theta, u);
    const double s2 = std::log1p(0.09);
    double prev = cfg.initial_population;
    for (std::size_t k = 0; k < n.size(); ++k) {
      const double eps = std::exp(std::sqrt(s2) * u[cfg.horizon + k] - 0.5 * s2);
      CHECK(n[k] == Approx(prev * std::exp(-0.2 * eps)).epsilon(1e-9));
      prev = n[k];
    }
  }

  TEST_CASE("blowfly blow-up raises a structured failure") {
    BlowflyConfig cfg;
    cfg.horizon = 60;
    BlowflySimulator sim(cfg);
    std::vector<double> u(2 * cfg.horizon, 0.0);
    const std::vector<double> theta{300.0, -1.8, 300.0, -0.75, -0.5};
    CHECK_THROWS_AS(sim.statistics(theta, u), SimulationFailure);
    try {
      sim.statistics(theta, u);
    } catch (const SimulationFailure& f) {
      CHECK(f.step() >= 1);
      CHECK(f.step() <= cfg.horizon);
    }
  }

  TEST_CASE("blowfly statistics") {
    const std::array<double, 2> h{1.0, 2.0};
    const auto c = blowfly_statistics(std::vector<double>(20, 3.5), h);
    REQUIRE(c.size() == 10);
    for (int i = 0; i < 4; ++i) CHECK(c[i] == 3.5);
    for (int i = 4; i < 8; ++i) CHECK(c[i] == 0.0);
    CHECK(c[8] == 0.0);
    CHECK(c[9] == 0.0);

    Tape t;
    std::vector<Var> four{t.constant(3.0), t.constant(1.0), t.constant(4.0), t.constant(2.0)};
    const auto q = quartile_means(four);
    for (int i = 0; i < 4; ++i) CHECK(q[i].value() == i + 1.0);
    CHECK(count_peaks(std::vector<double>{0, 2, 0, 3, 3, 0, 5, 1}, 1.5) == 2);

    RngStream rng(21);
    Engine eng = rng.substream(DrawKind::kReplicate, 0, 0);
    const auto series = standard_normals(eng, 1000);
    const auto got = blowfly_statistics(series, {0.5, 1.2});
    const auto want = reference_statistics(series, 0.5, 1.2);
    for (std::size_t i = 0; i < 10; ++i) CHECK(got[i] == Approx(want[i]).epsilon(1e-12));
  }

  TEST_CASE("statistics gradients match finite differences") {
    const std::vector<double> w10{1, -0.5, 0.25, 2, 1, 1, -1, 0.5, 3, 3};
    struct Case {
      std::shared_ptr<Simulator> sim;
      std::vector<double> theta;
    };
    std::vector<Case> cases{{std::make_shared<BernoulliSimulator>(100), {0.63}},
                            {std::make_shared<ExponentialSimulator>(15), {1.4}},
                            {std::make_shared<BlowflySimulator>(), {2.0, -1.8, 6.0, -0.75, -0.5}},
                            {std::make_shared<LinearGaussianSimulator>(3, 0.7), {0.1, -0.2, 0.3}}};
    RngStream rng(8);
    for (const auto& c : cases) {
      Engine eng = rng.substream(DrawKind::kSimulatorNoise, 0, 0);
      const auto u = c.sim->draw_noise(eng);
      std::vector<double> w(w10.begin(), w10.begin() + static_cast<std::ptrdiff_t>(c.sim->statistics_dim()));
      const auto ad = stats_grad_fd_check(*c.sim, c.theta, u, w);
      auto f = [&](const std::vector<double>& th) {
        const auto s = c.sim->statistics(th, u);
        double acc = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) acc += w[i] * s[i];
        return acc;
      };
      CHECK(testing::relative_error(ad, testing::central_difference(f, c.theta, 1e-6)) < 1e-6);
    }
  }

  TEST_CASE("additive latent toy") {
    AdditiveLatentToy toy(3, 0.5);
    Tape t;
    std::vector<Var> th{t.lift(1.0)};
    std::vector<Var> z{t.lift(0.1), t.lift(0.2), t.lift(0.3)};
    const auto out = toy.simulate(th, z, std::vector<double>{2.0, 0.0, -2.0});
    CHECK(out.statistics[0].value() == Approx(2.1));
    CHECK(out.statistics[1].value() == Approx(1.2));
    CHECK(out.statistics[2].value() == Approx(0.3));
  }
}
