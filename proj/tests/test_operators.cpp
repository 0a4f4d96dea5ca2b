#include <doctest.h>

#include <cmath>
#include <numbers>

#include "critfilt/error.hpp"
#include "critfilt/operators.hpp"
#include "support.hpp"

using namespace critfilt;
using namespace testing;

namespace {

BinningPtr binning_1d(std::size_t n, BinningScheme scheme = BinningScheme::distinct, std::size_t log_bins = 64) {
  return PowerBinning::build(Space::harmonic_of(Space::unit_grid({n})), {scheme, log_bins});
}

}  // namespace

TEST_CASE("binning invariants") {
  for (const auto& b : {binning_1d(32), binning_1d(64, BinningScheme::logarithmic, 12),
                        PowerBinning::build(Space::harmonic_of(Space::unit_grid({16, 16})))}) {
    const auto& h = *b->harmonic();
    CHECK(b->members()[0] == 1);
    CHECK(b->bin_of_pixel()[0] == 0);
    std::vector<std::size_t> counted(b->count(), 0);
    for (std::size_t i = 0; i < h.size(); ++i) {
      const auto bin = b->bin_of_pixel()[i];
      REQUIRE(bin < b->count());
      ++counted[bin];
      CHECK(h.mode_magnitudes()[i] >= b->edges()[bin]);
      CHECK(h.mode_magnitudes()[i] < b->edges()[bin + 1]);
    }
    for (std::size_t k = 0; k < b->count(); ++k) {
      CHECK(counted[k] == b->members()[k]);
      CHECK(b->rho()[k] > 0.0);
      CHECK(b->edges()[k] < b->edges()[k + 1]);
      if (k > 0) CHECK(b->kappa()[k] > b->kappa()[k - 1]);
    }
  }
  // 1D distinct: bins are the |k| rings 0..n/2.
  CHECK(binning_1d(32)->count() == 17);
}

TEST_CASE("power projection examples") {
  const auto b = binning_1d(8);
  const auto& h = b->harmonic();
  CHECK(b->count() == 5);

  Field c(h);
  for (auto& z : c.modes()) z = {2.5, 0.0};
  const Field pc = b->project(c);
  for (std::size_t k = 0; k < b->count(); ++k) CHECK(pc[k] == doctest::Approx(2.5));

  Field idx(h);
  for (std::size_t i = 0; i < h->size(); ++i) idx.modes()[i] = {double(b->bin_of_pixel()[i]), 0.0};
  const Field pi = b->project(idx);
  for (std::size_t k = 0; k < b->count(); ++k) CHECK(pi[k] == doctest::Approx(double(k)));

  // Explicit weighted average oracle on an 8-pixel space binned into 3 log bins.
  const auto b3 = binning_1d(8, BinningScheme::logarithmic, 2);
  REQUIRE(b3->count() == 3);
  Rng rng(5);
  const Field x = random_field(h, rng);
  const Field px = b3->project(x);
  for (std::size_t k = 0; k < 3; ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
      if (b3->bin_of_pixel()[i] == k) {
        num += h->weight(i) * x.modes()[i].real();
        den += h->weight(i);
      }
    CHECK(px[k] == doctest::Approx(num / den).epsilon(1e-14));
  }
}

TEST_CASE("power distribute and projection algebra") {
  const auto b = binning_1d(16);
  Rng rng(6);
  const Field all_ones = b->distribute(Field::constant(b->weighted_space(), 1.0));
  for (auto z : all_ones.modes()) CHECK(z == std::complex<double>(1.0, 0.0));

  const Field bins = random_field(b->weighted_space(), rng);
  const Field back = b->project(b->distribute(bins));
  for (std::size_t k = 0; k < b->count(); ++k) CHECK(back[k] == doctest::Approx(bins[k]).epsilon(1e-15));

  const auto p = power_projection_map(b);
  const auto ptp = p.adjoint() * p;
  const Field x = random_field(b->harmonic(), rng);
  const Field once = ptp.apply(x);
  const Field twice = ptp.apply(once);
  for (std::size_t i = 0; i < once.vector().size(); ++i) CHECK(std::abs(twice.vector()[i] - once.vector()[i]) < 1e-15 * (1.0 + std::abs(once.vector()[i])));
  CHECK(adjointness_error(p, rng) < 1e-12);
}

TEST_CASE("amplitude operator") {
  const auto b = binning_1d(16);
  const auto h = b->harmonic();
  Rng rng(7);
  const Field x = random_field(h, rng);

  const Field unit = amplitude_operator(LogSpectrum::flat(b, 1.0)).apply(x);
  const Field plain = adjoint_transform(x);
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(unit[i] == doctest::Approx(plain[i]).epsilon(1e-14));

  std::vector<double> ln2(b->count(), std::log(2.0));
  const Field doubled = amplitude_operator(LogSpectrum(b, ln2)).apply(x);
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(doubled[i] == doctest::Approx(2.0 * plain[i]).epsilon(1e-14));

  // A A^dagger = S against a dense construction of S from the DFT matrix.
  std::vector<double> alpha(b->count());
  std::normal_distribution<double> normal;
  for (auto& a : alpha) a = normal(rng);
  const LogSpectrum spec(b, alpha);
  const auto a = amplitude_operator(spec);
  CHECK(adjointness_error(a, rng) < 1e-12);
  const std::size_t n = 16;
  const double dv = 1.0 / n;
  const auto tau = spec.tau();
  // S(x, y) = sum_k dK e^{tau_k} e^{2 pi i k (x - y)/n} dV, acting as sum_y S(x, y) v(y).
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        s(i, j) += std::exp(tau[b->bin_of_pixel()[k]]) *
                   std::cos(2.0 * std::numbers::pi * double(k) * (double(i) - double(j)) / n) * dv;
  const Field v = random_field(b->harmonic()->partner(), rng);
  const Eigen::VectorXd expected = s * vec(v);
  const Eigen::VectorXd got = vec((a * a.adjoint()).apply(v));
  CHECK((got - expected).norm() / expected.norm() < 1e-10);
  const Eigen::VectorXd via_s = vec(signal_covariance(spec).apply(v));
  CHECK((via_s - expected).norm() / expected.norm() < 1e-10);
}

TEST_CASE("smoothness operator") {
  const auto b = binning_1d(64, BinningScheme::logarithmic, 10);
  const double sigma = 0.7;
  const SmoothnessOperator m(b, sigma);
  const auto kappa = b->kappa();
  const std::size_t n = b->count();

  std::vector<double> constant(n, 3.0), linear(n), quadratic(n);
  linear[0] = quadratic[0] = 11.0;  // zero-mode value is irrelevant
  const double c = 0.8;
  for (std::size_t k = 1; k < n; ++k) {
    const double y = std::log(kappa[k]);
    linear[k] = 2.0 - 1.5 * y;
    quadratic[k] = c * y * y - y + 4.0;
  }
  for (double v : m.apply(constant)) CHECK(std::abs(v) < 1e-9);
  for (double v : m.apply(linear)) CHECK(std::abs(v) < 1e-9);

  // Three-point stencil on unequal spacing is exact for quadratics: every row
  // sees 2c, weighted by the square root of its local spacing.
  double expected = 0.0;
  for (std::size_t j = 2; j + 1 < n; ++j) {
    const double lo = std::log(kappa[j]) - std::log(kappa[j - 1]);
    const double hi = std::log(kappa[j + 1]) - std::log(kappa[j]);
    expected += 0.5 * (lo + hi) * (2.0 * c) * (2.0 * c);
  }
  expected /= sigma * sigma;
  CHECK(m.quadratic(quadratic) == doctest::Approx(expected).epsilon(1e-9));

  // Zero-mode row and column vanish; symmetric positive semidefinite.
  const auto& mat = m.matrix();
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    CHECK(mat(0, i) == 0.0);
    CHECK(mat(i, 0) == 0.0);
  }
  CHECK((mat - mat.transpose()).norm() < 1e-12 * mat.norm());
  Rng rng(8);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    CHECK(m.quadratic(v) >= 0.0);
  }
  CHECK(adjointness_error(m.as_map(), rng) < 1e-12);
  CHECK_THROWS_AS(SmoothnessOperator(b, 0.0), ConfigError);
  CHECK_THROWS_AS(SmoothnessOperator(binning_1d(4), 1.0), ConfigError);
}

TEST_CASE("responses") {
  const auto g = Space::unit_grid({16});
  Rng rng(9);
  const Field x = random_field(g, rng);

  const auto all = mask_response(g, std::vector<bool>(16, true));
  const Field y = all.apply(x);
  for (std::size_t i = 0; i < 16; ++i) CHECK(y[i] == x[i]);

  std::vector<bool> keep(16, false);
  keep[2] = keep[5] = keep[11] = true;
  const auto mask = mask_response(g, keep);
  CHECK(mask.target()->size() == 3);
  const Field scattered = mask.adjoint_apply(Field(mask.target(), {1.0, 2.0, 3.0}));
  for (std::size_t i = 0; i < 16; ++i) {
    const double expected = i == 2 ? 1.0 : i == 5 ? 2.0 : i == 11 ? 3.0 : 0.0;
    CHECK(scattered[i] * g->pixel_volume() == doctest::Approx(expected));
  }
  CHECK(adjointness_error(mask, rng) < 1e-12);
  CHECK_THROWS_AS(mask_response(g, std::vector<bool>(16, false)), ContractError);

  // Sampling every mode is invertible: reconstruct the field from the (re, im) data.
  std::vector<std::size_t> modes(16);
  for (std::size_t i = 0; i < 16; ++i) modes[i] = i;
  const auto fs = fourier_sampling_response(g, modes);
  CHECK(adjointness_error(fs, rng) < 1e-12);
  const Field d = fs.apply(x);
  Field h(Space::harmonic_of(g));
  for (std::size_t i = 0; i < 16; ++i) h.modes()[i] = {d[2 * i], d[2 * i + 1]};
  const Field back = adjoint_transform(h);
  for (std::size_t i = 0; i < 16; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));
  CHECK_THROWS_AS(fourier_sampling_response(g, {}), ContractError);

  const auto g2 = Space::unit_grid({8, 8});
  const auto fs2 = fourier_sampling_response(g2, {0, 3, 9, 17, 40});
  CHECK(adjointness_error(fs2, rng) < 1e-12);
}

TEST_CASE("linear map algebra") {
  const auto g = Space::grid({12}, {0.4});
  Rng rng(10);
  std::vector<double> diag(12);
  for (auto& v : diag) v = std::abs(random_field(g, rng)[0]) + 0.1;
  const auto d = LinearMap::diagonal(g, diag);
  const auto f = harmonic_transform_map(g);
  const auto composite = f * d * f.adjoint() + LinearMap::identity(f.target()).scaled(2.0);
  CHECK(adjointness_error(composite, rng) < 1e-12);
  CHECK(adjointness_error(d, rng) < 1e-12);
  CHECK_THROWS_AS(d * f, ContractError);
}
