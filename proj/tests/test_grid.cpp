#include <doctest.h>

#include <complex>
#include <numbers>

#include "critfilt/error.hpp"
#include "critfilt/operators.hpp"
#include "support.hpp"

using namespace critfilt;
using namespace testing;

TEST_CASE("space invariants") {
  const auto g = Space::grid({4, 8}, {0.5, 0.25});
  CHECK(g->size() == 32);
  CHECK(g->total_volume() == doctest::Approx(4 * 0.5 * 8 * 0.25));
  const auto h = Space::harmonic_of(g);
  int zero_modes = 0;
  for (std::size_t i = 0; i < h->size(); ++i) {
    if (h->mode_magnitudes()[i] == 0.0) ++zero_modes;
    CHECK(h->mode_magnitudes()[i] == doctest::Approx(h->mode_magnitudes()[h->negated_index(i)]));
  }
  CHECK(zero_modes == 1);
  CHECK_THROWS_AS(Space::grid({0}, {1.0}), ContractError);
  CHECK_THROWS_AS(Space::grid({4}, {-1.0}), ContractError);
  CHECK_THROWS_AS(Space::data(0), ContractError);
}

TEST_CASE("constant field puts all power in the zero mode") {
  const auto g = Space::unit_grid({12});
  const Field h = harmonic_transform(Field::constant(g, 3.0));
  const auto m = h.modes();
  CHECK(std::abs(m[0] - std::complex<double>(3.0, 0.0)) < 1e-12);
  for (std::size_t k = 1; k < m.size(); ++k) CHECK(std::abs(m[k]) < 1e-12);
}

TEST_CASE("transform round trip on 64 pixels") {
  Rng rng(1);
  const auto g = Space::unit_grid({64});
  const Field x = random_field(g, rng);
  const Field back = adjoint_transform(harmonic_transform(x));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("single cosine has two modes matching a direct DFT sum") {
  const std::size_t n = 16;
  const int k0 = 3;
  const auto g = Space::unit_grid({n});
  Field x(g);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * std::numbers::pi * k0 * static_cast<double>(i) / n);
  const Field fx = harmonic_transform(x);
  const auto m = fx.modes();
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> direct = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      direct += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / n);
    direct *= 1.0 / n;
    CHECK(std::abs(m[k] - direct) < 1e-12);
    const bool expected = k == k0 || k == n - k0;
    CHECK((std::abs(m[k]) > 1e-6) == expected);
  }
}

TEST_CASE("inner product volume weighting") {
  const auto g = Space::grid({5, 3}, {0.2, 0.7});
  const auto one = Field::constant(g, 1.0);
  CHECK(inner(one, one) == doctest::Approx(g->total_volume()).epsilon(1e-14));

  const auto u = Space::unit_grid({16});
  Field c(u), s(u);
  for (std::size_t i = 0; i < 16; ++i) {
    c[i] = std::cos(2.0 * std::numbers::pi * 2 * i / 16.0);
    s[i] = std::sin(2.0 * std::numbers::pi * 2 * i / 16.0);
  }
  CHECK(std::abs(inner(c, s)) < 1e-12);

  Rng rng(2);
  const auto e = Space::grid({8}, {0.3});
  const Field a = random_field(e, rng), b = random_field(e, rng);
  double direct = 0.0;
  for (std::size_t i = 0; i < 8; ++i) direct += 0.3 * a[i] * b[i];
  CHECK(inner(a, b) == doctest::Approx(direct).epsilon(1e-14));
  CHECK_THROWS_AS(inner(a, Field(u)), ContractError);
}

TEST_CASE("adjointness, Parseval and reality in 1D and 2D") {
  Rng rng(3);
  for (const auto& g : {Space::grid({32}, {0.3}), Space::grid({8, 6}, {0.5, 1.5})}) {
    const auto map = harmonic_transform_map(g);
    CHECK(adjointness_error(map, rng) < 1e-12);
    const Field a = random_field(g, rng);
    const Field fa = harmonic_transform(a);
    CHECK(relative_error(inner(a, a), inner(fa, fa)) < 1e-12);

    const Field herm = harmonic_transform(random_field(g, rng));
    const auto full = adjoint_transform_complex(herm);
    double imag = 0.0, total = 0.0;
    for (const auto& z : full) {
      imag = std::max(imag, std::abs(z.imag()));
      total += std::norm(z);
    }
    CHECK(imag < 1e-12 * std::sqrt(total));
  }
}

TEST_CASE("white excitation statistics") {
  const auto g = Space::unit_grid({8});
  const auto h = Space::harmonic_of(g);
  Rng rng(4);
  const int draws = 100000;
  std::vector<std::complex<double>> mean(8), second(8);
  std::complex<double> cross = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Field draw = draw_white_excitation(h, rng);
    const auto m = draw.modes();
    for (std::size_t k = 0; k < 8; ++k) {
      mean[k] += m[k];
      second[k] += std::norm(m[k]);
    }
    cross += m[1] * std::conj(m[2]);
  }
  const double bound_mean = 5.0 / std::sqrt(double(draws));
  const double bound_var = 5.0 * std::sqrt(2.0 / draws);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(std::abs(mean[k] / double(draws)) < bound_mean);
    CHECK(std::abs(second[k].real() / draws - 1.0) < bound_var);
  }
  CHECK(std::abs(cross / double(draws)) < bound_var);

  // The position image of an excitation is real.
  const Field x = draw_white_excitation(h, rng);
  for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(x.modes()[k] - std::conj(x.modes()[h->negated_index(k)])) < 1e-12);
}

TEST_CASE("stream splitting is reproducible and distinct") {
  Rng a = split_stream(7, 1, 2), b = split_stream(7, 1, 2), c = split_stream(7, 1, 3);
  const auto x = a(), y = b(), z = c();
  CHECK(x == y);
  CHECK(x != z);
}
