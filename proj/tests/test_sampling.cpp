#include <doctest.h>

#include <cmath>

#include "critfilt/error.hpp"
#include "critfilt/model.hpp"
#include "critfilt/sampling.hpp"
#include "support.hpp"

using namespace critfilt;
using namespace testing;

namespace {

struct Linear {
  SpacePtr grid;
  BinningPtr binning;
  MeasurementSetup setup;
  LogSpectrum spectrum;
  Field t;
};

/// 32-pixel masked identity instance with heterogeneous noise.
Linear linear_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 32;
  const auto grid = Space::unit_grid({n});
  const auto binning = PowerBinning::build(Space::harmonic_of(grid));
  std::vector<bool> keep(n);
  for (std::size_t i = 0; i < n; ++i) keep[i] = i % 4 != 3;
  const auto response = mask_response(grid, keep);
  std::vector<double> var(response.target()->size());
  std::uniform_real_distribution<double> u(0.05, 0.3);
  for (auto& v : var) v = u(rng);
  MeasurementSetup setup{response, builtin("identity"), NoiseModel::fixed(Field(response.target(), var))};
  std::vector<double> alpha(binning->count());
  for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] = -0.5 - 0.05 * double(k);
  LogSpectrum spectrum(binning, alpha);
  const Field t = 0.3 * hermitian_direction(binning->harmonic(), rng);
  return {grid, binning, setup, spectrum, t};
}

/// Raw covariance of u = F^dagger xi under G(xi - t, Xi).
Eigen::MatrixXd position_covariance(const Linear& in) {
  const auto fmap = harmonic_transform_map(in.grid);
  const Eigen::MatrixXd k = dense(fmap.adjoint() * excitation_curvature(in.t, in.setup, in.spectrum) * fmap);
  return k.inverse() * weights(in.grid).cwiseInverse().asDiagonal();
}

Eigen::MatrixXd positions(const SampleSet& set, const Field& t) {
  const auto grid = t.space()->partner();
  Eigen::MatrixXd u(long(grid->size()), long(set.size()));
  for (std::size_t j = 0; j < set.size(); ++j) u.col(long(j)) = vec(adjoint_transform(set.samples[j] - t));
  return u;
}

}  // namespace

TEST_CASE("null response gives white samples around t") {
  auto in = linear_instance(40);
  const MeasurementSetup null{LinearMap::zero(in.grid, in.setup.response.target()), in.setup.nonlinearity,
                              in.setup.noise};
  SamplingJob job{in.t, &null, in.spectrum, 4, 17, 3, {}};
  const SampleSet set = draw_sample_set(job);
  REQUIRE(set.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    Rng rng = split_stream(17, 3, j);
    const Field expected = in.t + draw_white_excitation(in.binning->harmonic(), rng);
    CHECK((vec(set.samples[j]) - vec(expected)).norm() < 1e-14 * vec(expected).norm());
  }
}

TEST_CASE("sample mean and covariance match the dense posterior") {
  auto in = linear_instance(41);
  const std::size_t count = 10000;
  SamplingJob job{in.t, &in.setup, in.spectrum, count, 5, 0, {}};
  job.options.cg = {1e-8, 1000};
  const SampleSet set = draw_sample_set(job);
  REQUIRE(set.size() == count);
  CHECK(set.solves == count);

  const Eigen::MatrixXd cov = position_covariance(in);
  const Eigen::MatrixXd u = positions(set, in.t);
  const Eigen::VectorXd mean = u.rowwise().mean();
  const Eigen::MatrixXd centered = u.colwise() - mean;
  const Eigen::MatrixXd emp = centered * centered.transpose() / double(count - 1);
  int mean_bad = 0, cov_bad = 0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (std::abs(mean(i)) > 5.0 * std::sqrt(cov(i, i) / double(count))) ++mean_bad;
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      const double bound = 5.0 * std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / double(count));
      if (std::abs(emp(i, j) - cov(i, j)) > bound) ++cov_bad;
    }
  }
  CHECK(mean_bad == 0);
  CHECK(cov_bad == 0);
}

TEST_CASE("sample sets: count, determinism, solve count") {
  auto in = linear_instance(42);
  SamplingJob job{in.t, &in.setup, in.spectrum, 1, 8, 2, {}};
  const SampleSet one = draw_sample_set(job);
  CHECK(one.size() == 1);
  CHECK(one.solves == 1);
  CHECK(one.samples[0].vector() == draw_posterior_sample(job, 0).vector());

  job.count = 6;
  const SampleSet a = draw_sample_set(job), b = draw_sample_set(job);
  REQUIRE(a.size() == 6);
  CHECK(a.solves == 6);
  for (std::size_t j = 0; j < 6; ++j) CHECK(a.samples[j].vector() == b.samples[j].vector());
  CHECK(a.samples[0].vector() != a.samples[1].vector());

  job.count = 0;
  CHECK_THROWS_AS(draw_sample_set(job), ConfigError);
  job.count = 1;
  job.setup = nullptr;
  CHECK_THROWS_AS(draw_sample_set(job), ContractError);
}

TEST_CASE("disjoint seeds give uncorrelated sample sets") {
  auto in = linear_instance(43);
  const std::size_t count = 4000;
  SamplingJob ja{in.t, &in.setup, in.spectrum, count, 100, 0, {}};
  SamplingJob jb = ja;
  jb.seed = 101;
  const Eigen::MatrixXd ua = positions(draw_sample_set(ja), in.t);
  const Eigen::MatrixXd ub = positions(draw_sample_set(jb), in.t);
  const Eigen::MatrixXd cov = position_covariance(in);
  const Eigen::MatrixXd cross = ua * ub.transpose() / double(count);
  int bad = 0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    for (Eigen::Index j = 0; j < cov.cols(); ++j)
      if (std::abs(cross(i, j)) > 5.0 * std::sqrt(cov(i, i) * cov(j, j) / double(count))) ++bad;
  CHECK(bad == 0);
}

TEST_CASE("antithetic pairs share one solve") {
  auto in = linear_instance(44);
  SamplingJob job{in.t, &in.setup, in.spectrum, 5, 9, 0, {}};
  job.options.antithetic = true;
  const SampleSet set = draw_sample_set(job);
  REQUIRE(set.size() == 5);
  CHECK(set.solves == 3);
  for (std::size_t p = 0; p + 1 < 5; p += 2) {
    const Eigen::VectorXd sum = vec(set.samples[p]) + vec(set.samples[p + 1]) - 2.0 * vec(in.t);
    CHECK(sum.norm() < 1e-12 * vec(in.t).norm());
  }
}

TEST_CASE("sampling propagates CG non-convergence") {
  auto in = linear_instance(45);
  SamplingJob job{in.t, &in.setup, in.spectrum, 1, 1, 0, {}};
  job.options.cg = {1e-14, 1};
  CHECK_THROWS_AS(draw_sample_set(job), ConvergenceError);
}
