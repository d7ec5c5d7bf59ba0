#include <doctest.h>

#include <cmath>
#include <vector>

#include "avabc/optim.hpp"

using namespace avabc;
using doctest::Approx;

TEST_SUITE("optim") {
  TEST_CASE("zero gradient leaves phi unchanged") {
    for (auto spec : {OptimizerSpec::adam(), OptimizerSpec::adagrad()}) {
      OptimizerState s(spec, 2);
      const std::vector<double> phi{0.5, -1.0};
      CHECK(s.step(phi, std::vector<double>{0.0, 0.0}) == phi);
    }
  }

  TEST_CASE("first ADAM step is the learning rate times the sign") {
    OptimizerState s(OptimizerSpec::adam(0.01), 3);
    const std::vector<double> phi{0.0, 1.0, 2.0};
    const auto next = s.step(phi, std::vector<double>{3.0, -0.002, 1e4});
    CHECK(next[0] == Approx(0.01).epsilon(1e-6));
    CHECK(next[1] == Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(next[2] == Approx(2.01).epsilon(1e-6));
    OptimizerState d(OptimizerSpec::adam(0.01), 1);
    CHECK(d.step(std::vector<double>{0.0}, std::vector<double>{3.0}, false)[0] == Approx(-0.01).epsilon(1e-6));
  }

  TEST_CASE("ADAGRAD shrinks by the accumulated magnitude") {
    OptimizerState s(OptimizerSpec::adagrad(0.1), 1);
    const std::vector<double> g{1.0};
    const double x1 = s.step(std::vector<double>{0.0}, g)[0];
    const double x2 = s.step(std::vector<double>{x1}, g)[0];
    CHECK((x2 - x1) / x1 == Approx(std::sqrt(0.5)).epsilon(1e-7));
    CHECK(s.step_count() == 2);
  }

  TEST_CASE("steps are invariant to gradient scale") {
    for (auto spec : {OptimizerSpec::adam(0.05), OptimizerSpec::adagrad(0.05)}) {
      OptimizerState a(spec, 1), b(spec, 1);
      std::vector<double> pa{0.0}, pb{0.0};
      for (int i = 0; i < 20; ++i) {
        const double g = std::sin(0.7 * i) + 0.3;
        pa = a.step(pa, std::vector<double>{g});
        pb = b.step(pb, std::vector<double>{1e6 * g});
      }
      CHECK(pa[0] == Approx(pb[0]).epsilon(1e-6));
    }
  }

  TEST_CASE("ADAM climbs a concave quadratic") {
    OptimizerState s(OptimizerSpec::adam(0.05), 2);
    std::vector<double> phi{3.0, -2.0};
    for (int i = 0; i < 2000; ++i) {
      const std::vector<double> g{-(phi[0] - 1.0), -4.0 * (phi[1] + 0.5)};
      phi = s.step(phi, g);
    }
    CHECK(phi[0] == Approx(1.0).epsilon(1e-3));
    CHECK(phi[1] == Approx(-0.5).epsilon(1e-3));
  }

  TEST_CASE("non-finite gradients are rejected without touching the state") {
    OptimizerState s(OptimizerSpec::adam(), 2);
    CHECK_THROWS(s.step(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, NAN}));
    CHECK(s.step_count() == 0);
    CHECK(s.first_moment() == std::vector<double>{0.0, 0.0});
    CHECK_THROWS(s.step(std::vector<double>{0.0}, std::vector<double>{1.0, 1.0}));
  }

  TEST_CASE("identical state and inputs give identical output") {
    OptimizerState a(OptimizerSpec::adam(), 2), b(OptimizerSpec::adam(), 2);
    const std::vector<double> phi{0.1, 0.2}, g{0.3, -0.4};
    CHECK(a.step(phi, g) == b.step(phi, g));
  }

  TEST_CASE("spec validation and names") {
    OptimizerSpec bad = OptimizerSpec::adam();
    bad.learning_rate = 0.0;
    CHECK_THROWS(bad.validate());
    bad = OptimizerSpec::adam();
    bad.beta1 = 1.0;
    CHECK_THROWS(bad.validate());
    CHECK(optimizer_kind_from_string("adagrad") == OptimizerKind::kAdagrad);
    CHECK_THROWS(optimizer_kind_from_string("sgd"));
    CHECK(to_string(OptimizerKind::kAdam) == "adam");
  }
}
