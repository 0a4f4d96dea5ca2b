#include "critfilt/sampling.hpp"

#include "critfilt/error.hpp"

namespace critfilt {

Field draw_sample_residual(const LinearMap& curvature, const LinearMap& rstar,
                           std::span<const double> noise_variances, Rng& rng, const CGConfig& cg) {
  const Field prior = draw_white_excitation(rstar.domain(), rng);
  Field mock = rstar.apply(prior) + draw_gaussian(rstar.target(), noise_variances, rng);
  for (std::size_t i = 0; i < mock.size(); ++i) mock[i] /= noise_variances[i];
  Field mean;
  try {
    mean = conjugate_gradient(curvature, rstar.adjoint_apply(mock), cg);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("posterior sample: ") + e.what(), e.residual(), e.iterations());
  }
  return prior - mean;
}

namespace {

struct Prepared {
  LinearMap rstar;
  LinearMap curvature;
  std::vector<double> variances;
};

Prepared prepare(const SamplingJob& job) {
  if (!job.setup) throw ContractError("sampling job without measurement setup");
  if (job.count < 1) throw ConfigError("sample count must be >= 1");
  require_space(job.t.space(), job.spectrum.binning()->harmonic(), "sampling job excitation");
  return {linearized_response(job.t, *job.setup, job.spectrum),
          excitation_curvature(job.t, *job.setup, job.spectrum), job.setup->noise.variances()};
}

}  // namespace

Field draw_posterior_sample(const SamplingJob& job, std::size_t index) {
  const auto p = prepare(job);
  Rng rng = split_stream(job.seed, job.stream, index);
  return job.t + draw_sample_residual(p.curvature, p.rstar, p.variances, rng, job.options.cg);
}

SampleSet draw_sample_set(const SamplingJob& job) {
  const auto p = prepare(job);
  SampleSet set;
  set.samples.reserve(job.count);
  if (job.options.antithetic) {
    for (std::size_t pair = 0; set.size() < job.count; ++pair) {
      Rng rng = split_stream(job.seed, job.stream, pair);
      const Field r = draw_sample_residual(p.curvature, p.rstar, p.variances, rng, job.options.cg);
      ++set.solves;
      set.samples.push_back(job.t + r);
      if (set.size() < job.count) set.samples.push_back(job.t - r);
    }
    return set;
  }
  for (std::size_t j = 0; j < job.count; ++j) {
    Rng rng = split_stream(job.seed, job.stream, j);
    set.samples.push_back(job.t + draw_sample_residual(p.curvature, p.rstar, p.variances, rng, job.options.cg));
    ++set.solves;
  }
  return set;
}

}  // namespace critfilt
