#include "critfilt/inference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "critfilt/error.hpp"
#include "critfilt/harmonic.hpp"

namespace critfilt {

std::size_t SampleSchedule::at(std::size_t iteration) const {
  if (fixed > 0) return fixed;
  std::size_t count = initial;
  for (std::size_t done = double_every; done < iteration && count < cap; done += double_every) count *= 2;
  return std::min(count, cap);
}

void SampleSchedule::validate() const {
  if (fixed == 0 && (initial < 1 || cap < initial || double_every < 1))
    throw ConfigError("sample schedule needs 1 <= initial <= cap and double_every >= 1");
}

void InferenceConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
  if (!initial_tau && !(initial_power > 0.0)) throw ConfigError("initial power must be positive");
  if (!(convergence_tol > 0.0)) throw ConfigError("convergence tolerance must be positive");
  if (convergence_window < 1) throw ConfigError("convergence window must be >= 1");
  if (legacy_probes < 1) throw ConfigError("legacy probe count must be >= 1");
  excitation_newton.validate();
  amplitude_newton.validate();
  sampling.cg.validate();
  schedule.validate();
}

namespace {

using Clock = std::chrono::steady_clock;

LogSpectrum initial_spectrum(const BinningPtr& binning, const InferenceConfig& cfg) {
  if (cfg.initial_tau) {
    if (cfg.initial_tau->size() != binning->count())
      throw ConfigError("initial spectrum length does not match the binning");
    return LogSpectrum::from_tau(binning, *cfg.initial_tau);
  }
  return LogSpectrum::flat(binning, cfg.initial_power);
}

Field initial_excitation(const BinningPtr& binning, std::uint64_t seed) {
  Rng rng = split_stream(seed, 0, ~std::uint64_t{0});
  return 1e-3 * draw_white_excitation(binning->harmonic(), rng);
}

bool kl_settled(const RunHistory& history, const InferenceConfig& cfg) {
  const auto& r = history.records;
  if (r.size() < cfg.convergence_window + 1) return false;
  for (std::size_t i = r.size() - cfg.convergence_window; i < r.size(); ++i) {
    const double previous = r[i - 1].kl;
    if (std::abs(r[i].kl - previous) >= cfg.convergence_tol * std::abs(previous)) return false;
  }
  return true;
}

void validate_inputs(const Field& data, const MeasurementSetup& setup, const BinningPtr& binning) {
  require(binning != nullptr, "inference needs a binning");
  setup.validate(binning->harmonic()->partner());
  require_space(data.space(), setup.response.target(), "data");
  if (!data.all_finite()) throw ConfigError("data contains non-finite values");
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

PosteriorState finish_state(Field t, LogSpectrum spectrum, const MeasurementSetup& setup) {
  PosteriorState state{std::move(t), std::move(spectrum), std::nullopt, std::nullopt};
  if (setup.noise.is_estimated()) state.noise_eta = setup.noise.estimate().eta;
  state.curvature = excitation_curvature(state.t, setup, state.spectrum);
  return state;
}

}  // namespace

InferenceResult run_inference(const Field& data, MeasurementSetup setup, const BinningPtr& binning,
                              const InferenceConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  validate_inputs(data, setup, binning);
  const SmoothnessOperator smoothness(binning, cfg.sigma);

  RunHistory history;
  SampleSet drawn;
  LogSpectrum spectrum = initial_spectrum(binning, cfg);
  Field t = initial_excitation(binning, cfg.seed);

  for (std::size_t it = 1; it <= cfg.outer_iterations; ++it) {
    const auto start = Clock::now();
    IterationRecord rec;
    rec.iteration = it;
    const char* stage = "excitation update";
    try {
      const Objective excitation{
          [&](const Field& xi) { return hamiltonian_value(xi, setup, spectrum, data); },
          [&](const Field& xi) { return hamiltonian_gradient_excitation(xi, setup, spectrum, data); },
          [&](const Field& xi) { return excitation_curvature(xi, setup, spectrum); },
          {}};
      NewtonResult nx;
      try {
        nx = relaxed_newton(excitation, t, cfg.excitation_newton);
      } catch (const StallError& e) {
        t = e.snapshot().x;
        throw;
      }
      t = nx.x;
      rec.hamiltonian = nx.value;
      rec.excitation_grad_norm = nx.grad_norm;
      rec.excitation_steps = nx.steps;

      const SamplingJob job{t, &setup, spectrum, cfg.schedule.at(it), cfg.seed, it, cfg.sampling};
      stage = "sampling";
      drawn = draw_sample_set(job);
      rec.samples = drawn.size();
      rec.kl = kl_estimate(drawn, setup, spectrum, data, smoothness);

      if (cfg.update_spectrum) {
        stage = "spectrum update";
        auto at = [&](const Field& a) { return LogSpectrum(binning, a.vector()); };
        std::optional<AmplitudeCurvature> system;
        const Objective amplitude{
            [&](const Field& a) { return kl_estimate(drawn, setup, at(a), data, smoothness); },
            [&](const Field& a) { return kl_gradient_amplitude(drawn, setup, at(a), data, smoothness); },
            [&](const Field& a) {
              system.emplace(kl_curvature_amplitude(drawn, setup, at(a), smoothness));
              return system->curvature;
            },
            [&](const Field&) { return system->preconditioner; }};
        NewtonResult na;
        try {
          na = relaxed_newton(amplitude, spectrum.alpha_field(), cfg.amplitude_newton);
        } catch (const StallError& e) {
          spectrum = at(e.snapshot().x);
          throw;
        }
        spectrum = at(na.x);
        rec.spectrum_grad_norm = na.grad_norm;
        rec.spectrum_steps = na.steps;
      }

      if (setup.noise.is_estimated()) {
        stage = "noise update";
        rec.noise_grad_norm = norm(kl_gradient_noise(drawn, setup, spectrum, data));
        setup.noise.set_eta(update_noise_eta(drawn, setup, spectrum, data));
      }
    } catch (const StallError& e) {
      history.failure = "iteration " + std::to_string(it) + ", " + stage + ": " + e.what();
    } catch (const ConvergenceError& e) {
      history.failure = "iteration " + std::to_string(it) + ", " + stage + ": " + e.what();
    } catch (const NumericError& e) {
      history.failure = "iteration " + std::to_string(it) + ", " + stage + ": " + e.what();
    }
    if (history.failure) break;

    rec.wall_time = seconds_since(start);
    history.records.push_back(rec);
    if (observer) observer(rec);
    history.converged = kl_settled(history, cfg);
    if (history.converged && cfg.stop_on_convergence) break;
  }
  return {finish_state(std::move(t), std::move(spectrum), setup), std::move(history), std::move(drawn)};
}

Field wiener_excitation(const Field& data, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                        const CGConfig& cg) {
  const Field origin(spectrum.binning()->harmonic());
  const auto rstar = linearized_response(origin, setup, spectrum);
  Field weighted = data;
  const auto var = setup.noise.variances();
  for (std::size_t i = 0; i < weighted.size(); ++i) weighted[i] /= var[i];
  return conjugate_gradient(excitation_curvature(origin, setup, spectrum), rstar.adjoint_apply(weighted), cg);
}

std::vector<double> solve_cf_spectrum(std::span<const double> binned_power, std::span<const double> start,
                                      const PowerBinning& binning, const SmoothnessOperator& smoothness) {
  const std::size_t n = binning.count();
  if (binned_power.size() != n || start.size() != n) throw ContractError("solve_cf_spectrum: length mismatch");
  for (std::size_t b = 0; b < n; ++b)
    if (!(binned_power[b] > 0.0)) throw NumericError("binned power must be positive", b);

  const Eigen::Map<const Eigen::VectorXd> q(binned_power.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd members(n);
  for (std::size_t b = 0; b < n; ++b) members[b] = static_cast<double>(binning.members()[b]);
  const Eigen::MatrixXd& m = smoothness.matrix();

  auto energy = [&](const Eigen::VectorXd& tau) {
    return 0.5 * q.dot((-tau).array().exp().matrix()) + 0.5 * members.dot(tau) + 0.5 * tau.dot(m * tau);
  };

  Eigen::VectorXd tau = Eigen::Map<const Eigen::VectorXd>(start.data(), static_cast<Eigen::Index>(n));
  double value = energy(tau);
  for (int step = 0; step < 200; ++step) {
    const Eigen::VectorXd w = 0.5 * q.cwiseProduct((-tau).array().exp().matrix());
    const Eigen::VectorXd grad = -w + 0.5 * members + m * tau;
    Eigen::MatrixXd hess = m;
    hess.diagonal() += w;
    const Eigen::VectorXd dx = hess.ldlt().solve(grad);
    const double decrement = grad.dot(dx);
    if (!(decrement > 1e-14 * (1.0 + std::abs(value)))) break;
    double lambda = 1.0;
    while (true) {
      const Eigen::VectorXd trial = tau - lambda * dx;
      const double v = energy(trial);
      if (std::isfinite(v) && v <= value) {
        tau = trial;
        value = v;
        break;
      }
      lambda *= 0.5;
      if (lambda < 1e-12) return {tau.data(), tau.data() + n};
    }
  }
  return {tau.data(), tau.data() + n};
}

InferenceResult run_legacy_inference(const Field& data, const MeasurementSetup& setup,
                                     const BinningPtr& binning, const InferenceConfig& cfg,
                                     const IterationObserver& observer) {
  cfg.validate();
  validate_inputs(data, setup, binning);
  if (setup.nonlinearity.label != "identity")
    throw ConfigError("legacy critical filter needs the identity nonlinearity");
  if (setup.noise.is_estimated()) throw ConfigError("legacy critical filter needs fixed noise");
  const SmoothnessOperator smoothness(binning, cfg.sigma);
  // Probe streams sit above any sample index of an iteration.
  constexpr std::uint64_t kProbeStream = std::uint64_t{1} << 32;

  RunHistory history;
  SampleSet drawn;
  LogSpectrum spectrum = initial_spectrum(binning, cfg);
  Field t = initial_excitation(binning, cfg.seed);
  const auto variances = setup.noise.variances();

  for (std::size_t it = 1; it <= cfg.outer_iterations; ++it) {
    const auto start = Clock::now();
    IterationRecord rec;
    rec.iteration = it;
    try {
      t = wiener_excitation(data, setup, spectrum, cfg.sampling.cg);
      rec.hamiltonian = hamiltonian_value(t, setup, spectrum, data);
      rec.excitation_grad_norm = norm(hamiltonian_gradient_excitation(t, setup, spectrum, data));

      const SamplingJob job{t, &setup, spectrum, cfg.schedule.at(it), cfg.seed, it, cfg.sampling};
      drawn = draw_sample_set(job);
      rec.samples = drawn.size();
      rec.kl = kl_estimate(drawn, setup, spectrum, data, smoothness);

      if (cfg.update_spectrum) {
        const auto rstar = linearized_response(t, setup, spectrum);
        const auto curvature = excitation_curvature(t, setup, spectrum);
        const auto amp = spectrum.pixel_amplitudes();
        std::vector<double> uncertainty(amp.size(), 0.0);
        for (std::size_t j = 0; j < cfg.legacy_probes; ++j) {
          Rng rng = split_stream(cfg.seed, it, kProbeStream + j);
          const Field r = draw_sample_residual(curvature, rstar, variances, rng, cfg.sampling.cg);
          const auto modes = r.modes();
          for (std::size_t k = 0; k < amp.size(); ++k) uncertainty[k] += std::norm(modes[k]) * amp[k] * amp[k];
        }
        for (auto& u : uncertainty) u /= static_cast<double>(cfg.legacy_probes);
        const auto binned_uncertainty = binning->integrate(uncertainty);
        const Field m = amplitude_operator(spectrum).apply(t);
        const auto tau = spectrum.tau();
        rec.spectrum_grad_norm =
            norm(Field(binning->parameter_space(),
                       legacy_cf_fixed_point(m, binned_uncertainty, tau, *binning, smoothness)));
        auto total = binned_signal_power(m, *binning);
        for (std::size_t b = 0; b < total.size(); ++b) total[b] += binned_uncertainty[b];
        spectrum = LogSpectrum::from_tau(binning, solve_cf_spectrum(total, tau, *binning, smoothness));
        rec.spectrum_steps = 1;
      }
    } catch (const ConvergenceError& e) {
      history.failure = "iteration " + std::to_string(it) + ": " + e.what();
    } catch (const NumericError& e) {
      history.failure = "iteration " + std::to_string(it) + ": " + e.what();
    }
    if (history.failure) break;

    rec.wall_time = seconds_since(start);
    history.records.push_back(rec);
    if (observer) observer(rec);
    history.converged = kl_settled(history, cfg);
    if (history.converged && cfg.stop_on_convergence) break;
  }
  return {finish_state(std::move(t), std::move(spectrum), setup), std::move(history), std::move(drawn)};
}

double reference_kl(const Field& data, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                    const InferenceConfig& cfg, std::size_t iteration) {
  validate_inputs(data, setup, spectrum.binning());
  const SmoothnessOperator smoothness(spectrum.binning(), cfg.sigma);
  const Field t = wiener_excitation(data, setup, spectrum, cfg.sampling.cg);
  const SamplingJob job{t, &setup, spectrum, cfg.schedule.at(iteration), cfg.seed, iteration, cfg.sampling};
  return kl_estimate(draw_sample_set(job), setup, spectrum, data, smoothness);
}

PosteriorMoments posterior_moments(const Field& t, const SampleSet& samples, const LogSpectrum& spectrum,
                                   const LocalFunction& f) {
  if (samples.samples.empty()) throw ContractError("posterior_moments needs at least one sample");
  const auto amplitude = amplitude_operator(spectrum);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  const bool lognormal = f.label == "exponential";

  PosteriorMoments out;
  out.mean_signal = Field(amplitude.target());
  out.mean_nonlinear = Field(amplitude.target());
  out.variance = Field(amplitude.target());
  std::vector<Field> intensities;
  for (const auto& xi : samples.samples) {
    const Field s = amplitude.apply(xi);
    const Field deviation = amplitude.apply(xi - t);
    out.mean_signal.axpy(inv_n, s);
    out.mean_nonlinear.axpy(inv_n, apply(f, s));
    for (std::size_t i = 0; i < s.size(); ++i) out.variance[i] += deviation[i] * deviation[i] * inv_n;
    if (lognormal) intensities.push_back(apply(builtin("exponential"), s));
  }
  if (lognormal) {
    const Field& mean = out.mean_nonlinear;
    Field e(mean.space());
    for (const auto& x : intensities)
      for (std::size_t i = 0; i < e.size(); ++i) e[i] += (x[i] - mean[i]) * (x[i] - mean[i]) * inv_n;
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::sqrt(e[i]) / mean[i];
    out.relative_error = std::move(e);
  }
  return out;
}

}  // namespace critfilt
