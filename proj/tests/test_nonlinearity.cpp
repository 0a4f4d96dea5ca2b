#include <doctest.h>

#include <cmath>

#include "critfilt/error.hpp"
#include "critfilt/nonlinearity.hpp"
#include "support.hpp"

using namespace critfilt;
using namespace testing;

TEST_CASE("piecewise function values") {
  const auto f = builtin("paper_piecewise");
  CHECK(f.eval(-1.0) == doctest::Approx(-2.0));
  CHECK(f.eval(0.25) == 0.0);
  CHECK(f.eval(1.0) == doctest::Approx(0.25));
  CHECK(f.deriv(2.0) == doctest::Approx(3.0));
  CHECK(f.deriv(0.0) == 1.0);
  CHECK(f.deriv(0.3) == 0.0);
}

TEST_CASE("catalog entries") {
  const auto id = builtin("identity");
  CHECK(id.eval(1.7) == 1.7);
  CHECK(id.deriv(-3.0) == 1.0);
  const auto ex = builtin("exponential");
  CHECK(ex.eval(0.0) == 1.0);
  CHECK(ex.deriv(0.7) == ex.eval(0.7));
  CHECK_THROWS_AS(builtin("cubic"), ConfigError);
}

TEST_CASE("derivatives match central differences") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double h = 1e-6;
  SUBCASE("tanh at 100 points to 1e-8") {
    const auto f = builtin("tanh");
    for (int i = 0; i < 100; ++i) {
      const double x = u(rng);
      const double fd = (f.eval(x + h) - f.eval(x - h)) / (2 * h);
      CHECK(std::abs(fd - f.deriv(x)) < 1e-8);
    }
  }
  for (const char* label : {"identity", "exponential", "tanh", "paper_piecewise"}) {
    const auto f = builtin(label);
    int checked = 0;
    while (checked < 1000) {
      const double x = u(rng);
      if (std::abs(x) < 1e-3 || std::abs(x - 0.5) < 1e-3) continue;  // kinks of the piecewise function
      const double fd = (f.eval(x + h) - f.eval(x - h)) / (2 * h);
      const double d = f.deriv(x);
      CHECK(std::abs(fd - d) <= 1e-5 * std::max(std::abs(d), 1.0));
      CHECK(d >= 0.0);
      ++checked;
    }
  }
}

TEST_CASE("monotonicity on random ordered pairs") {
  Rng rng(12);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const char* label : {"identity", "exponential", "tanh", "paper_piecewise"}) {
    const auto f = builtin(label);
    for (int i = 0; i < 1000; ++i) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      CHECK(f.eval(a) <= f.eval(b));
    }
  }
}

TEST_CASE("custom piecewise polynomials") {
  const auto f = piecewise_polynomial("ramp", {0.0}, {{0.0}, {0.0, 2.0}});
  CHECK(f.eval(-1.0) == 0.0);
  CHECK(f.eval(1.5) == doctest::Approx(3.0));
  CHECK(f.deriv(1.5) == doctest::Approx(2.0));
  CHECK_THROWS_AS(piecewise_polynomial("down", {}, {{0.0, -1.0}}), ConfigError);
  CHECK_THROWS_AS(piecewise_polynomial("short", {0.0, 1.0}, {{0.0}}), ConfigError);
}

TEST_CASE("field application") {
  const auto g = Space::unit_grid({4});
  const Field x(g, {-1.0, 0.25, 1.0, 2.0});
  const auto f = builtin("paper_piecewise");
  const Field y = apply(f, x);
  const Field d = derivative(f, x);
  CHECK(y[0] == doctest::Approx(-2.0));
  CHECK(y[1] == 0.0);
  CHECK(y[2] == doctest::Approx(0.25));
  CHECK(d[3] == doctest::Approx(3.0));
}
