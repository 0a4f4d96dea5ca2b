#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "critfilt/binning.hpp"
#include "critfilt/linear_map.hpp"
#include "critfilt/nonlinearity.hpp"
#include "critfilt/operators.hpp"

namespace critfilt {

/// Noise covariance diag(e^eta) with an inverse-gamma prior (shape beta - 1,
/// scale q) on every variance.
struct EstimatedNoise {
  Field eta;
  double beta = 2.0000002;
  double q = 2e-5;
};

class NoiseModel {
 public:
  static NoiseModel fixed(Field variances);
  static NoiseModel estimated(EstimatedNoise noise);

  bool is_estimated() const { return std::holds_alternative<EstimatedNoise>(model_); }
  const SpacePtr& space() const;
  std::vector<double> variances() const;
  const EstimatedNoise& estimate() const;
  void set_eta(Field eta);

 private:
  explicit NoiseModel(std::variant<Field, EstimatedNoise> model) : model_(std::move(model)) {}
  std::variant<Field, EstimatedNoise> model_;
};

/// d = R f(s) + n with n ~ G(n, N).
struct MeasurementSetup {
  LinearMap response;
  LocalFunction nonlinearity;
  NoiseModel noise;

  void validate(const SpacePtr& grid) const;
};

/// Excitation samples drawn around a posterior mean.
struct SampleSet {
  std::vector<Field> samples;
  /// Conjugate gradient solves spent drawing them.
  std::size_t solves = 0;
  std::size_t size() const { return samples.size(); }
};

/// Approximate posterior G(xi - t, Xi) delta(alpha - alpha*), with the noise
/// log-variances when they are inferred.
struct PosteriorState {
  Field t;
  LogSpectrum spectrum;
  std::optional<Field> noise_eta;
  /// Xi^{-1} at t, set once the excitation has been optimized.
  std::optional<LinearMap> curvature;
};

/// Everything a likelihood evaluation needs besides the parameters.
struct Residual {
  Field signal;       ///< s = A xi
  Field derivative;   ///< f'(s)
  Field residual;     ///< d - R f(s)
};

Residual evaluate_residual(const Field& xi, const LinearMap& amplitude, const MeasurementSetup& setup,
                           const Field& data, bool need_derivative);

/// Noise prior and normalization terms sum(1/2 eta + (beta - 1) eta + q e^-eta).
double noise_prior_energy(const EstimatedNoise& noise);

double hamiltonian_value(const Field& xi, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                         const Field& data);
Field hamiltonian_gradient_excitation(const Field& xi, const MeasurementSetup& setup,
                                      const LogSpectrum& spectrum, const Field& data);
/// R* = R f'(A t) A, harmonic excitation -> data.
LinearMap linearized_response(const Field& t, const MeasurementSetup& setup, const LogSpectrum& spectrum);
/// Xi^{-1} = R*^dagger N^{-1} R* + 1 (the f'' term is dropped).
LinearMap excitation_curvature(const Field& t, const MeasurementSetup& setup, const LogSpectrum& spectrum);

/// Sample mean of the likelihood energy plus 2 alpha^dagger (Delta^dagger Delta / sigma^2) alpha,
/// plus the noise terms when the noise is estimated.
double kl_estimate(const SampleSet& samples, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                   const Field& data, const SmoothnessOperator& smoothness);
/// Partial derivatives of kl_estimate with respect to alpha (Euclidean bin space).
Field kl_gradient_amplitude(const SampleSet& samples, const MeasurementSetup& setup,
                            const LogSpectrum& spectrum, const Field& data,
                            const SmoothnessOperator& smoothness);
struct AmplitudeCurvature {
  /// Gauss-Newton curvature of kl_estimate in alpha plus a relative 1e-8 ridge.
  LinearMap curvature;
  /// Dense inverse of the smoothness term plus the estimated likelihood diagonal.
  LinearMap preconditioner;
};

AmplitudeCurvature kl_curvature_amplitude(const SampleSet& samples, const MeasurementSetup& setup,
                                          const LogSpectrum& spectrum, const SmoothnessOperator& smoothness);

/// ln of the empirical data variance on every datum, the starting noise estimate.
Field initial_noise_eta(const Field& data);

/// Per-datum sample mean of squared residuals.
std::vector<double> mean_squared_residual(const SampleSet& samples, const MeasurementSetup& setup,
                                          const LogSpectrum& spectrum, const Field& data);
/// d KL / d eta per datum.  Requires estimated noise.
Field kl_gradient_noise(const SampleSet& samples, const MeasurementSetup& setup,
                        const LogSpectrum& spectrum, const Field& data);
/// Minimizes the eta terms of the KL per datum with scalar Newton iterations.
Field update_noise_eta(const SampleSet& samples, const MeasurementSetup& setup,
                       const LogSpectrum& spectrum, const Field& data);

// Legacy signal-space critical filter (signal m, log power tau).

/// 1/2 (d - R f(m))^T N^-1 (...) + 1/2 n^T tau + 1/2 m^T F^T diag(P^T e^-tau) F m
/// + 1/2 tau^T (Delta^T Delta / sigma^2) tau, where n counts the modes per bin.
double legacy_hamiltonian_value(const Field& m, std::span<const double> tau, const MeasurementSetup& setup,
                                const Field& data, const SmoothnessOperator& smoothness);
/// Per-bin volume-weighted sum of |F m|^2.
std::vector<double> binned_signal_power(const Field& m, const PowerBinning& binning);
/// Gradient of the legacy Hamiltonian in tau at s = m.
std::vector<double> legacy_hamiltonian_tau_gradient(const Field& m, std::span<const double> tau,
                                                    const PowerBinning& binning,
                                                    const SmoothnessOperator& smoothness);
/// Critical filter condition with the binned posterior uncertainty of F m added.
std::vector<double> legacy_cf_fixed_point(const Field& m, std::span<const double> binned_uncertainty,
                                          std::span<const double> tau, const PowerBinning& binning,
                                          const SmoothnessOperator& smoothness);

}  // namespace critfilt
