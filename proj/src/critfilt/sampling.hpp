#pragma once

#include <cstdint>

#include "critfilt/harmonic.hpp"
#include "critfilt/model.hpp"
#include "critfilt/solvers.hpp"

namespace critfilt {

struct SamplingOptions {
  CGConfig cg{1e-6, 2000};
  /// Pairs samples as t +- (xi' - t'), one solve per pair.
  bool antithetic = false;
};

/// Samples around t from G(xi - t, Xi), with Xi built from the linearized
/// response at t.  Sample j of a job uses stream split_stream(seed, stream, j).
struct SamplingJob {
  Field t;
  const MeasurementSetup* setup = nullptr;
  LogSpectrum spectrum;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  SamplingOptions options;
};

/// xi' - t' for one prior draw xi' and mock noise n', where t' is the
/// posterior mean for the mock data R* xi' + n'.
Field draw_sample_residual(const LinearMap& curvature, const LinearMap& rstar,
                           std::span<const double> noise_variances, Rng& rng, const CGConfig& cg);

/// One sample xi* = t + xi' - t'.
Field draw_posterior_sample(const SamplingJob& job, std::size_t index);

SampleSet draw_sample_set(const SamplingJob& job);

}  // namespace critfilt
