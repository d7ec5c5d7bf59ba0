#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "avabc/estimators.hpp"
#include "support.hpp"

using namespace avabc;
using doctest::Approx;

namespace {

BoundProblem bernoulli_problem() {
  BoundProblem p;
  p.simulator = std::make_shared<BernoulliSimulator>(100);
  p.observation.simulator = "bernoulli";
  p.observation.statistics = {70.0};
  p.prior = Prior::beta(1.0, 1.0);
  p.epsilon = EpsilonPolicy::bernoulli_analytic();
  return p;
}

BoundProblem exponential_problem() {
  BoundProblem p;
  p.simulator = std::make_shared<ExponentialSimulator>(15);
  p.observation.simulator = "exponential";
  p.observation.statistics = {1.0};
  p.prior = Prior::gamma(1.0, 1.0);
  p.epsilon = EpsilonPolicy::simulation_scaled();
  return p;
}

double bound_at(const VariationalFamily& q, const std::vector<double>& phi, const BoundProblem& p,
                const RngStream& rng, std::uint64_t iter) {
  return pathwise_bound(q.with_phi(phi), p, rng, iter).bound_value;
}

const testing::ConjugateToy kToy{{0.8, -0.4}, {0.0, 0.5}, {1.0, 2.0}, 1.0, 1.5};

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("pathwise gradients match common-random-number finite differences") {
    struct Case {
      BoundProblem problem;
      VariationalFamily q;
    };
    std::vector<Case> cases{{bernoulli_problem(), VariationalFamily::kumaraswamy(2.0, 1.5)},
                            {exponential_problem(), VariationalFamily::log_normal(0.1, 0.4)}};
    for (auto& c : cases) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RngStream rng(seed);
        Engine eng = rng.substream(DrawKind::kInit, 0, 0);
        auto phi = c.q.phi();
        for (double& x : phi) x += std::uniform_real_distribution<double>(-0.5, 0.5)(eng);
        const auto q = c.q.with_phi(phi);
        const auto est = pathwise_bound(q, c.problem, rng, 3);
        const auto fd = testing::central_difference(
            [&](const std::vector<double>& p) { return bound_at(q, p, c.problem, rng, 3); }, phi);
        CHECK(testing::relative_error(est.grad, fd) < 1e-5);
      }
    }
  }

  TEST_CASE("per-sample gradients average to the gradient") {
    const auto p = exponential_problem();
    const auto q = VariationalFamily::log_normal(0.2, 0.5);
    RngStream rng(4);
    const auto whole = pathwise_bound(q, p, rng, 1);
    const auto split = pathwise_bound(q, p, rng, 1, true);
    REQUIRE(split.per_sample_grads.size() == p.samples);
    for (std::size_t d = 0; d < 2; ++d) CHECK(split.grad[d] == Approx(whole.grad[d]).epsilon(1e-12));
    CHECK(split.bound_value == Approx(whole.bound_value).epsilon(1e-12));
  }

  TEST_CASE("q equal to the prior leaves only the expected log-likelihood") {
    auto p = kToy.problem(10);
    const auto q = VariationalFamily::diagonal_gaussian(kToy.prior_mean, kToy.prior_std);
    RngStream rng(2);
    Tape t;
    const auto phi = q.lift(t);
    const auto expr = build_pathwise_bound(t, q, phi, p, rng, 0);
    CHECK(expr.kl.value() == 0.0);
    double mean_term = 0.0;
    for (const Var& v : expr.sample_terms) mean_term += v.value();
    CHECK(expr.bound.value() == Approx(mean_term / 10.0).epsilon(1e-15));
  }

  TEST_CASE("both estimators see identical draws") {
    const auto p = bernoulli_problem();
    const auto q = VariationalFamily::kumaraswamy(3.0, 2.0);
    RngStream rng(6);
    const auto a = estimate_gradient(EstimatorKind::kPathwise, q, p, rng, 5);
    const auto b = estimate_gradient(EstimatorKind::kScoreFunction, q, p, rng, 5);
    CHECK(a.mean_statistics == b.mean_statistics);
  }

  TEST_CASE("score has zero mean") {
    auto p = kToy.problem(20000);
    const auto q = VariationalFamily::diagonal_gaussian({0.3, -0.1}, {0.6, 0.9});
    ControlVariateState none;
    none.capacity = 0;
    const auto sf = score_function_bound(q, p, none, RngStream(3), 0);
    for (std::size_t d = 0; d < 4; ++d) {
      std::vector<double> h;
      for (const auto& pr : sf.pairs) h.push_back(pr.h[d]);
      const auto m = testing::moments(h);
      CHECK(std::abs(m.mean) < 3.5 * m.standard_error);
    }
  }

  TEST_CASE("conjugate toy gradient means match the closed form") {
    auto p = kToy.problem(20000);
    const auto q = VariationalFamily::diagonal_gaussian({0.3, -0.1}, {0.6, 0.9});
    const auto oracle = kToy.gradient(q);
    for (auto kind : {EstimatorKind::kPathwise, EstimatorKind::kScoreFunction}) {
      const auto est = estimate_gradient(kind, q, p, RngStream(7), 0, true);
      for (std::size_t d = 0; d < 4; ++d) {
        const auto m = testing::moments(testing::column(est.per_sample_grads, d));
        CHECK(m.mean == Approx(est.grad[d]).epsilon(1e-9));
        CHECK(std::abs(m.mean - oracle[d]) < 3.5 * m.standard_error);
      }
    }
  }

  TEST_CASE("control variate fit") {
    ControlVariateState cv;
    std::vector<CvPair> pairs;
    for (double h : {0.5, -1.0, 2.0, 0.1}) pairs.push_back({{3.0 * h, -2.0 * h}, {h, h}});
    cv = update_control_variate(cv, pairs);
    CHECK(cv.a_hat[0] == Approx(3.0).epsilon(1e-12));
    CHECK(cv.a_hat[1] == Approx(-2.0).epsilon(1e-12));
    for (const auto& pr : pairs) CHECK(pr.f[0] - cv.a_hat[0] * pr.h[0] == Approx(0.0).scale(1.0));

    const auto single = update_control_variate(ControlVariateState{}, std::span(pairs).first(1));
    CHECK(single.scale(0) == 0.0);

    std::vector<CvPair> flat{{{1.0}, {2.0}}, {{3.0}, {2.0}}};
    CHECK(update_control_variate(ControlVariateState{}, flat).scale(0) == 0.0);

    ControlVariateState small;
    small.capacity = 3;
    small = update_control_variate(small, pairs);
    CHECK(small.window.size() == 3);

    RngStream rng(10);
    Engine eng = rng.substream(DrawKind::kReplicate, 0, 0);
    ControlVariateState indep;
    indep.capacity = 2000;
    std::vector<CvPair> noise;
    const auto f = standard_normals(eng, 2000), h = standard_normals(eng, 2000);
    for (std::size_t i = 0; i < 2000; ++i) noise.push_back({{f[i]}, {h[i]}});
    indep = update_control_variate(indep, noise);
    CHECK(std::abs(indep.a_hat[0]) < 3.0 / std::sqrt(2000.0));
  }

  TEST_CASE("control variate does not increase gradient variance") {
    auto p = kToy.problem(10);
    const auto q = VariationalFamily::diagonal_gaussian({0.3, -0.1}, {0.6, 0.9});
    RngStream rng(12);
    ControlVariateState cv;
    cv.capacity = 1000;
    for (std::uint64_t it = 0; it < 100; ++it) {
      cv = update_control_variate(cv, score_function_bound(q, p, cv, rng, 1000 + it).pairs);
    }
    const auto naive = gradient_variance_profile(EstimatorKind::kScoreFunction, q, p, rng, 200);
    const auto with_cv = gradient_variance_profile(EstimatorKind::kScoreFunction, q, p, rng, 200, &cv);
    for (std::size_t d = 0; d < 4; ++d) CHECK(with_cv.variance[d] < naive.variance[d] * 1.3);
    double total_naive = 0.0, total_cv = 0.0;
    for (std::size_t d = 0; d < 4; ++d) {
      total_naive += naive.variance[d];
      total_cv += with_cv.variance[d];
    }
    CHECK(total_cv < total_naive);
  }

  TEST_CASE("variance profile is reproducible and sized") {
    const auto p = bernoulli_problem();
    const auto q = VariationalFamily::kumaraswamy(5.0, 2.0);
    RngStream rng(1);
    const auto a = gradient_variance_profile(EstimatorKind::kPathwise, q, p, rng, 20);
    const auto b = gradient_variance_profile(EstimatorKind::kPathwise, q, p, rng, 20);
    CHECK(a.samples.size() == 20);
    CHECK(a.variance == b.variance);
    CHECK_THROWS(gradient_variance_profile(EstimatorKind::kPathwise, q, p, rng, 1));
  }

  TEST_CASE("degenerate latent bound is bit-identical to the base bound") {
    for (auto base : {bernoulli_problem(), exponential_problem()}) {
      LatentProblem lp;
      lp.simulator = std::make_shared<NoLatent>(base.simulator);
      lp.observation = base.observation;
      lp.theta_prior = base.prior;
      lp.epsilon = base.epsilon;
      lp.samples = base.samples;
      lp.simulations = base.simulations;
      const auto q = base.prior.kind == PriorKind::kBeta ? VariationalFamily::kumaraswamy(2.0, 2.0)
                                                         : VariationalFamily::log_normal(0.0, 0.5);
      RngStream rng(31);
      const auto a = pathwise_bound(q, base, rng, 4);
      const auto b = latent_pathwise_bound(q, std::nullopt, lp, rng, 4);
      CHECK(a.bound_value == b.bound_value);
      CHECK(a.grad == b.grad);
    }
  }

  TEST_CASE("latent KL vanishes when q(z) equals p(z)") {
    LatentProblem lp;
    lp.simulator = std::make_shared<AdditiveLatentToy>(2, 0.5);
    lp.observation.simulator = "additive_latent_toy";
    lp.observation.statistics = {0.4, 1.1};
    lp.theta_prior = Prior::diagonal_gaussian({0.0}, {1.0});
    lp.latent_prior = Prior::diagonal_gaussian({0.0, 0.0}, {0.5, 0.5});
    lp.epsilon = EpsilonPolicy::fixed(1.0);
    const auto qt = VariationalFamily::diagonal_gaussian({0.0}, {1.0});
    const auto qz = VariationalFamily::diagonal_gaussian({0.0, 0.0}, {0.5, 0.5});
    RngStream rng(2);
    Tape t;
    const auto phi = qt.lift(t);
    const auto xi = qz.lift(t);
    const auto expr = build_latent_bound(t, qt, phi, qz, xi, lp, rng, 0);
    double mean_term = 0.0;
    for (const Var& v : expr.sample_terms) mean_term += v.value();
    mean_term /= static_cast<double>(expr.sample_terms.size());
    CHECK(expr.bound.value() == Approx(mean_term).epsilon(1e-15));
  }

  TEST_CASE("latent toy gradients match finite differences") {
    LatentProblem lp;
    lp.simulator = std::make_shared<AdditiveLatentToy>(3, 0.5);
    lp.observation.simulator = "additive_latent_toy";
    lp.observation.statistics = {0.4, 1.1, -0.3};
    lp.theta_prior = Prior::diagonal_gaussian({0.0}, {1.0});
    lp.latent_prior = Prior::diagonal_gaussian({0.0, 0.0, 0.0}, {0.5, 0.5, 0.5});
    lp.epsilon = EpsilonPolicy::fixed(0.8);
    lp.latent_samples = 3;
    for (bool shared : {true, false}) {
      lp.shared_latent_draws = shared;
      const auto qt = VariationalFamily::diagonal_gaussian({0.2}, {0.7});
      const auto qz = VariationalFamily::diagonal_gaussian({0.1, -0.2, 0.3}, {0.4, 0.6, 0.5});
      RngStream rng(5);
      const auto est = latent_pathwise_bound(qt, qz, lp, rng, 2);
      std::vector<double> all = qt.phi();
      all.insert(all.end(), qz.phi().begin(), qz.phi().end());
      auto f = [&](const std::vector<double>& x) {
        const auto a = qt.with_phi({x.begin(), x.begin() + 2});
        const auto b = qz.with_phi({x.begin() + 2, x.end()});
        return latent_pathwise_bound(a, b, lp, rng, 2).bound_value;
      };
      CHECK(testing::relative_error(est.grad, testing::central_difference(f, all)) < 1e-5);
    }
  }

  TEST_CASE("invalid problems are rejected") {
    auto p = bernoulli_problem();
    p.samples = 0;
    CHECK_THROWS(pathwise_bound(VariationalFamily::kumaraswamy(1, 1), p, RngStream(1), 0));
    auto g = bernoulli_problem();
    CHECK_THROWS(pathwise_bound(VariationalFamily::log_normal(0, 1), g, RngStream(1), 0));
    CHECK(estimator_kind_from_string("score_function") == EstimatorKind::kScoreFunction);
    CHECK_THROWS(estimator_kind_from_string("reinforce"));
  }
}
