#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "critfilt/model.hpp"
#include "critfilt/sampling.hpp"
#include "critfilt/solvers.hpp"

namespace critfilt {

/// Sample count per outer iteration: `initial`, doubled every `double_every`
/// iterations, capped at `cap`.
struct SampleSchedule {
  std::size_t initial = 3;
  std::size_t double_every = 10;
  std::size_t cap = 20;
  /// Overrides the schedule with a constant count when nonzero.
  std::size_t fixed = 0;

  std::size_t at(std::size_t iteration) const;
  void validate() const;
};

struct InferenceConfig {
  double sigma = 1.0;
  std::size_t outer_iterations = 100;
  NewtonConfig excitation_newton{};
  NewtonConfig amplitude_newton{1.0, 5, 1e-6, 0.5, {1e-4, 2000}};
  SamplingOptions sampling{};
  SampleSchedule schedule{};
  /// Flat initial power; ignored when initial_tau is set.
  double initial_power = 1.8e-2;
  std::optional<std::vector<double>> initial_tau;
  /// Keeps the spectrum at its initial value (pure excitation inference).
  bool update_spectrum = true;
  std::uint64_t seed = 0;
  double convergence_tol = 1e-4;
  std::size_t convergence_window = 5;
  /// When false the run always takes outer_iterations steps; `converged` is
  /// still reported.
  bool stop_on_convergence = true;
  /// Posterior draws used to estimate the binned uncertainty in the legacy loop.
  std::size_t legacy_probes = 16;

  void validate() const;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double kl = 0.0;
  double hamiltonian = 0.0;
  double excitation_grad_norm = 0.0;
  double spectrum_grad_norm = 0.0;
  std::optional<double> noise_grad_norm;
  std::size_t samples = 0;
  std::size_t excitation_steps = 0;
  std::size_t spectrum_steps = 0;
  double wall_time = 0.0;
};

struct RunHistory {
  std::vector<IterationRecord> records;
  bool converged = false;
  /// Set when a solver failed; the state is the last consistent one.
  std::optional<std::string> failure;
};

struct InferenceResult {
  PosteriorState state;
  RunHistory history;
  /// Samples of the final iteration (empty if no iteration ran).
  SampleSet samples;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Alternates Newton on the excitation, sampling, Newton on the log
/// amplitudes and, for estimated noise, the noise update.  The KL recorded
/// for an iteration is evaluated on its fresh samples before the spectrum
/// moves.
InferenceResult run_inference(const Field& data, MeasurementSetup setup, const BinningPtr& binning,
                              const InferenceConfig& cfg, const IterationObserver& observer = {});

/// Signal-space critical filter: Wiener mean at the current spectrum, then
/// the spectrum solving the uncertainty-corrected fixed point.  Records the
/// same KL as run_inference on the same sample streams.  Linear response only.
InferenceResult run_legacy_inference(const Field& data, const MeasurementSetup& setup,
                                     const BinningPtr& binning, const InferenceConfig& cfg,
                                     const IterationObserver& observer = {});

/// Minimizer of 1/2 sum Q e^-tau + 1/2 sum n tau + 1/2 tau^T M tau, i.e. the
/// root of legacy_cf_fixed_point for binned total power Q.
std::vector<double> solve_cf_spectrum(std::span<const double> binned_power, std::span<const double> start,
                                      const PowerBinning& binning, const SmoothnessOperator& smoothness);

/// Excitation Wiener mean t = Xi (R* ^dagger N^-1 d) for a linear measurement.
Field wiener_excitation(const Field& data, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                        const CGConfig& cg);

/// KL at the Wiener mean for a fixed spectrum, evaluated on the sample
/// stream an inference run uses at `iteration`.
double reference_kl(const Field& data, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                    const InferenceConfig& cfg, std::size_t iteration);

struct PosteriorMoments {
  Field mean_signal;
  Field mean_nonlinear;
  Field variance;
  /// std(e^s) / mean(e^s); present for the exponential nonlinearity.
  std::optional<Field> relative_error;
};

PosteriorMoments posterior_moments(const Field& t, const SampleSet& samples, const LogSpectrum& spectrum,
                                   const LocalFunction& f);

}  // namespace critfilt
