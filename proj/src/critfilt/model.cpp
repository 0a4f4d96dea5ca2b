#include "critfilt/model.hpp"

#include <algorithm>
#include <cmath>

#include "critfilt/error.hpp"
#include "critfilt/harmonic.hpp"

namespace critfilt {

NoiseModel NoiseModel::fixed(Field variances) {
  for (std::size_t i = 0; i < variances.size(); ++i)
    if (!(variances[i] > 0.0) || !std::isfinite(variances[i]))
      throw ConfigError("noise variances must be strictly positive");
  return NoiseModel(std::move(variances));
}

NoiseModel NoiseModel::estimated(EstimatedNoise noise) {
  if (!(noise.beta > 1.0)) throw ConfigError("noise prior beta must exceed 1");
  if (!(noise.q > 0.0)) throw ConfigError("noise prior q must be positive");
  if (!noise.eta.all_finite()) throw ConfigError("noise log-variances must be finite");
  return NoiseModel(std::move(noise));
}

const SpacePtr& NoiseModel::space() const {
  if (auto* f = std::get_if<Field>(&model_)) return f->space();
  return std::get<EstimatedNoise>(model_).eta.space();
}

std::vector<double> NoiseModel::variances() const {
  if (auto* f = std::get_if<Field>(&model_)) return f->vector();
  std::vector<double> v = std::get<EstimatedNoise>(model_).eta.vector();
  for (auto& x : v) x = std::exp(x);
  return v;
}

const EstimatedNoise& NoiseModel::estimate() const {
  if (!is_estimated()) throw ContractError("noise is fixed, not estimated");
  return std::get<EstimatedNoise>(model_);
}

void NoiseModel::set_eta(Field eta) {
  if (!is_estimated()) throw ContractError("noise is fixed, not estimated");
  auto& est = std::get<EstimatedNoise>(model_);
  require_space(eta.space(), est.eta.space(), "set_eta");
  est.eta = std::move(eta);
}

void MeasurementSetup::validate(const SpacePtr& grid) const {
  require_space(response.domain(), grid, "response domain");
  require_space(noise.space(), response.target(), "noise space");
  if (!nonlinearity.eval || !nonlinearity.deriv) throw ConfigError("nonlinearity is not set");
}

namespace {

void check_finite(const Field& f, const char* what) {
  const auto v = f.scalars();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) throw NumericError(std::string("non-finite value in ") + what, i);
}

Field inverse_noise_times(const MeasurementSetup& setup, const Field& r) {
  const auto var = setup.noise.variances();
  Field out = r;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= var[i];
  return out;
}

double weighted_square(const Field& r, const std::vector<double>& var) {
  double e = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) e += r[i] * r[i] / var[i];
  return e;
}

// Per-sample quantities for the amplitude derivatives.
struct SampleTerms {
  Field z;           // amp * xi, harmonic
  Field derivative;  // f'(A xi)
};

std::vector<double> real_product(const Field& a, const Field& b) {
  const auto x = a.modes();
  const auto y = b.modes();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
  return out;
}

}  // namespace

Residual evaluate_residual(const Field& xi, const LinearMap& amplitude, const MeasurementSetup& setup,
                           const Field& data, bool need_derivative) {
  require_space(data.space(), setup.response.target(), "data space");
  Residual out;
  out.signal = amplitude.apply(xi);
  check_finite(out.signal, "signal A xi");
  Field fs = apply(setup.nonlinearity, out.signal);
  check_finite(fs, "f(A xi)");
  out.residual = data - setup.response.apply(fs);
  if (need_derivative) out.derivative = derivative(setup.nonlinearity, out.signal);
  return out;
}

double noise_prior_energy(const EstimatedNoise& noise) {
  double e = 0.0;
  for (std::size_t i = 0; i < noise.eta.size(); ++i) {
    const double eta = noise.eta[i];
    e += (0.5 + noise.beta - 1.0) * eta + noise.q * std::exp(-eta);
  }
  return e;
}

double hamiltonian_value(const Field& xi, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                         const Field& data) {
  const auto amplitude = amplitude_operator(spectrum);
  const auto res = evaluate_residual(xi, amplitude, setup, data, false);
  double value = 0.5 * weighted_square(res.residual, setup.noise.variances()) + 0.5 * inner(xi, xi);
  if (setup.noise.is_estimated()) value += noise_prior_energy(setup.noise.estimate());
  return value;
}

Field hamiltonian_gradient_excitation(const Field& xi, const MeasurementSetup& setup,
                                      const LogSpectrum& spectrum, const Field& data) {
  const auto amplitude = amplitude_operator(spectrum);
  const auto res = evaluate_residual(xi, amplitude, setup, data, true);
  Field pulled = setup.response.adjoint_apply(inverse_noise_times(setup, res.residual));
  pulled = hadamard(pulled, res.derivative.scalars());
  Field g = amplitude.adjoint_apply(pulled);
  g *= -1.0;
  g += xi;
  return g;
}

LinearMap linearized_response(const Field& t, const MeasurementSetup& setup, const LogSpectrum& spectrum) {
  const auto amplitude = amplitude_operator(spectrum);
  const Field s = amplitude.apply(t);
  check_finite(s, "signal A t");
  const Field fprime = derivative(setup.nonlinearity, s);
  return setup.response * LinearMap::diagonal(s.space(), fprime.vector()) * amplitude;
}

LinearMap excitation_curvature(const Field& t, const MeasurementSetup& setup, const LogSpectrum& spectrum) {
  const auto rstar = linearized_response(t, setup, spectrum);
  std::vector<double> inv_var = setup.noise.variances();
  for (auto& v : inv_var) v = 1.0 / v;
  const auto noise_inv = LinearMap::diagonal(rstar.target(), std::move(inv_var));
  return rstar.adjoint() * noise_inv * rstar + LinearMap::identity(rstar.domain());
}

double kl_estimate(const SampleSet& samples, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                   const Field& data, const SmoothnessOperator& smoothness) {
  if (samples.samples.empty()) throw ContractError("kl_estimate needs at least one sample");
  const auto amplitude = amplitude_operator(spectrum);
  const auto var = setup.noise.variances();
  double likelihood = 0.0;
  for (const auto& xi : samples.samples) {
    const auto res = evaluate_residual(xi, amplitude, setup, data, false);
    likelihood += 0.5 * weighted_square(res.residual, var);
  }
  likelihood /= static_cast<double>(samples.size());
  double value = likelihood + 2.0 * smoothness.quadratic(spectrum.alpha());
  if (setup.noise.is_estimated()) value += noise_prior_energy(setup.noise.estimate());
  return value;
}

Field kl_gradient_amplitude(const SampleSet& samples, const MeasurementSetup& setup,
                            const LogSpectrum& spectrum, const Field& data,
                            const SmoothnessOperator& smoothness) {
  if (samples.samples.empty()) throw ContractError("kl_gradient_amplitude needs at least one sample");
  const auto& binning = *spectrum.binning();
  const auto amp = spectrum.pixel_amplitudes();
  const auto amplitude = amplitude_operator(spectrum);
  std::vector<double> grad(binning.count(), 0.0);
  for (const auto& xi : samples.samples) {
    const auto res = evaluate_residual(xi, amplitude, setup, data, true);
    Field pulled = setup.response.adjoint_apply(inverse_noise_times(setup, res.residual));
    pulled = hadamard(pulled, res.derivative.scalars());
    const auto per_pixel = real_product(hadamard(xi, amp), harmonic_transform(pulled));
    const auto per_bin = binning.integrate(per_pixel);
    for (std::size_t b = 0; b < grad.size(); ++b) grad[b] -= per_bin[b];
  }
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  const auto smooth = smoothness.apply(spectrum.alpha());
  for (std::size_t b = 0; b < grad.size(); ++b) grad[b] = grad[b] * inv_n + 4.0 * smooth[b];
  return Field(binning.parameter_space(), std::move(grad));
}

AmplitudeCurvature kl_curvature_amplitude(const SampleSet& samples, const MeasurementSetup& setup,
                                          const LogSpectrum& spectrum, const SmoothnessOperator& smoothness) {
  if (samples.samples.empty()) throw ContractError("kl_curvature_amplitude needs at least one sample");
  auto binning = spectrum.binning();
  const auto amp = spectrum.pixel_amplitudes();
  const auto amplitude = amplitude_operator(spectrum);

  auto terms = std::make_shared<std::vector<SampleTerms>>();
  for (const auto& xi : samples.samples) {
    const Field s = amplitude.apply(xi);
    check_finite(s, "signal A xi");
    terms->push_back({hadamard(xi, amp), derivative(setup.nonlinearity, s)});
  }
  std::vector<double> inv_var = setup.noise.variances();
  for (auto& v : inv_var) v = 1.0 / v;
  auto inv_noise = std::make_shared<const std::vector<double>>(std::move(inv_var));
  auto response = std::make_shared<const LinearMap>(setup.response);
  auto smooth = std::make_shared<const SmoothnessOperator>(smoothness);
  const auto space = binning->parameter_space();

  auto likelihood = [terms, inv_noise, response, binning, space](const Field& v) {
    const auto spread = binning->broadcast(v.scalars());
    std::vector<double> acc(binning->count(), 0.0);
    for (const auto& term : *terms) {
      Field js = adjoint_transform(hadamard(term.z, spread));
      js = hadamard(js, term.derivative.scalars());
      Field jv = response->apply(js);
      for (std::size_t i = 0; i < jv.size(); ++i) jv[i] *= (*inv_noise)[i];
      Field back = hadamard(response->adjoint_apply(jv), term.derivative.scalars());
      const auto per_bin = binning->integrate(real_product(term.z, harmonic_transform(back)));
      for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += per_bin[b];
    }
    const double inv_n = 1.0 / static_cast<double>(terms->size());
    for (auto& a : acc) a *= inv_n;
    return Field(space, std::move(acc));
  };

  // Ridge: 1e-8 of the largest diagonal entry, estimated with Rademacher probes.
  constexpr int kProbes = 4;
  Rng rng = split_stream(0x9e3779b97f4a7c15ull, binning->count());
  std::bernoulli_distribution coin;
  std::vector<double> diag(binning->count(), 0.0);
  for (int p = 0; p < kProbes; ++p) {
    Field z(space);
    for (std::size_t b = 0; b < z.size(); ++b) z[b] = coin(rng) ? 1.0 : -1.0;
    const Field cz = likelihood(z);
    for (std::size_t b = 0; b < z.size(); ++b) diag[b] += z[b] * cz[b] / kProbes;
  }
  double largest = 0.0;
  for (std::size_t b = 0; b < diag.size(); ++b)
    largest = std::max(largest, std::max(diag[b], 0.0) + 4.0 * smooth->matrix()(b, b));
  const double ridge = 1e-8 * (largest > 0.0 ? largest : 1.0);

  auto act = [likelihood, smooth, ridge, space](const Field& v) {
    Field out = likelihood(v);
    const auto sv = smooth->apply(v.scalars());
    for (std::size_t b = 0; b < out.size(); ++b) out[b] += 4.0 * sv[b] + ridge * v[b];
    return out;
  };
  // The smoothness term dominates on finely spaced bins and makes plain CG stall.
  Eigen::MatrixXd approx = 4.0 * smooth->matrix();
  for (std::size_t b = 0; b < diag.size(); ++b) approx(b, b) += std::max(diag[b], 0.0) + ridge;
  auto factor = std::make_shared<const Eigen::LDLT<Eigen::MatrixXd>>(approx);
  if (factor->info() != Eigen::Success || !factor->isPositive())
    throw NumericError("amplitude preconditioner factorization failed");
  auto solve = [factor, space](const Field& v) {
    const Eigen::VectorXd x = factor->solve(Eigen::Map<const Eigen::VectorXd>(v.vector().data(), static_cast<Eigen::Index>(v.size())));
    return Field(space, std::vector<double>(x.data(), x.data() + x.size()));
  };
  return {LinearMap{space, space, act, act}, LinearMap{space, space, solve, solve}};
}

Field initial_noise_eta(const Field& data) {
  const auto d = data.scalars();
  if (d.empty()) throw ConfigError("empty data");
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d.size());
  if (!(var > 0.0)) throw ConfigError("data variance is zero; cannot initialize the noise estimate");
  return Field::constant(data.space(), std::log(var));
}

std::vector<double> mean_squared_residual(const SampleSet& samples, const MeasurementSetup& setup,
                                          const LogSpectrum& spectrum, const Field& data) {
  if (samples.samples.empty()) throw ContractError("mean_squared_residual needs at least one sample");
  const auto amplitude = amplitude_operator(spectrum);
  std::vector<double> r2(data.size(), 0.0);
  for (const auto& xi : samples.samples) {
    const auto res = evaluate_residual(xi, amplitude, setup, data, false);
    for (std::size_t i = 0; i < r2.size(); ++i) r2[i] += res.residual[i] * res.residual[i];
  }
  for (auto& v : r2) v /= static_cast<double>(samples.size());
  return r2;
}

Field kl_gradient_noise(const SampleSet& samples, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                        const Field& data) {
  const auto& noise = setup.noise.estimate();
  const auto r2 = mean_squared_residual(samples, setup, spectrum, data);
  Field g(noise.eta.space());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double inv = std::exp(-noise.eta[i]);
    g[i] = -0.5 * r2[i] * inv + 0.5 + (noise.beta - 1.0) - noise.q * inv;
  }
  return g;
}

Field update_noise_eta(const SampleSet& samples, const MeasurementSetup& setup, const LogSpectrum& spectrum,
                       const Field& data) {
  const auto& noise = setup.noise.estimate();
  const auto r2 = mean_squared_residual(samples, setup, spectrum, data);
  const double slope = noise.beta - 0.5;
  Field eta = noise.eta;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    // phi(eta) = c e^-eta + slope eta is convex; Newton on phi' converges
    // monotonically once it has undershot the root.
    const double c = 0.5 * r2[i] + noise.q;
    double x = eta[i];
    for (int it = 0; it < 200; ++it) {
      const double curvature = c * std::exp(-x);
      const double step = (slope - curvature) / curvature;
      x -= step;
      if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(x))) break;
    }
    eta[i] = x;
  }
  return eta;
}

std::vector<double> binned_signal_power(const Field& m, const PowerBinning& binning) {
  const Field h = harmonic_transform(m);
  require_space(h.space(), binning.harmonic(), "binned_signal_power");
  const auto modes = h.modes();
  std::vector<double> power(modes.size());
  for (std::size_t i = 0; i < power.size(); ++i) power[i] = std::norm(modes[i]);
  return binning.integrate(power);
}

double legacy_hamiltonian_value(const Field& m, std::span<const double> tau, const MeasurementSetup& setup,
                                const Field& data, const SmoothnessOperator& smoothness) {
  require_space(data.space(), setup.response.target(), "data space");
  check_finite(m, "signal m");
  const Field fm = apply(setup.nonlinearity, m);
  const Field r = data - setup.response.apply(fm);
  const auto& binning = *smoothness.binning();
  if (tau.size() != binning.count()) throw ContractError("legacy_hamiltonian_value: tau length mismatch");
  const auto power = binned_signal_power(m, binning);
  const auto members = binning.members();
  double value = 0.5 * weighted_square(r, setup.noise.variances()) + 0.5 * smoothness.quadratic(tau);
  for (std::size_t b = 0; b < tau.size(); ++b)
    value += 0.5 * static_cast<double>(members[b]) * tau[b] + 0.5 * power[b] * std::exp(-tau[b]);
  return value;
}

std::vector<double> legacy_hamiltonian_tau_gradient(const Field& m, std::span<const double> tau,
                                                    const PowerBinning& binning,
                                                    const SmoothnessOperator& smoothness) {
  const std::vector<double> zero(binning.count(), 0.0);
  return legacy_cf_fixed_point(m, zero, tau, binning, smoothness);
}

std::vector<double> legacy_cf_fixed_point(const Field& m, std::span<const double> binned_uncertainty,
                                          std::span<const double> tau, const PowerBinning& binning,
                                          const SmoothnessOperator& smoothness) {
  if (binned_uncertainty.size() != binning.count() || tau.size() != binning.count())
    throw ContractError("legacy_cf_fixed_point: bin vector length mismatch");
  const auto q = binned_signal_power(m, binning);
  const auto smooth = smoothness.apply(tau);
  const auto members = binning.members();
  std::vector<double> out(tau.size());
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b] = -0.5 * (q[b] + binned_uncertainty[b]) * std::exp(-tau[b]) +
             0.5 * static_cast<double>(members[b]) + smooth[b];
  return out;
}

}  // namespace critfilt
