#include "critfilt/operators.hpp"

#include <cmath>

#include "critfilt/error.hpp"
#include "critfilt/harmonic.hpp"

namespace critfilt {

LinearMap harmonic_transform_map(const SpacePtr& grid) {
  require(grid && grid->kind() == SpaceKind::position, "transform map needs a position grid");
  return {grid, Space::harmonic_of(grid), [](const Field& x) { return harmonic_transform(x); },
          [](const Field& h) { return adjoint_transform(h); }};
}

LinearMap power_projection_map(const BinningPtr& binning) {
  return {binning->harmonic(), binning->weighted_space(),
          [binning](const Field& h) { return binning->project(h); },
          [binning](const Field& b) { return binning->distribute(b); }};
}

LinearMap amplitude_operator(const LogSpectrum& spectrum) {
  const auto& harmonic = spectrum.binning()->harmonic();
  auto amp = std::make_shared<const std::vector<double>>(spectrum.pixel_amplitudes());
  return {harmonic, harmonic->partner(),
          [amp](const Field& xi) { return adjoint_transform(hadamard(xi, *amp)); },
          [amp](const Field& s) { return hadamard(harmonic_transform(s), *amp); }};
}

LinearMap signal_covariance(const LogSpectrum& spectrum) {
  const auto& grid = spectrum.binning()->harmonic()->partner();
  auto power = std::make_shared<const std::vector<double>>(
      spectrum.binning()->broadcast(spectrum.power()));
  auto act = [power](const Field& s) { return adjoint_transform(hadamard(harmonic_transform(s), *power)); };
  return {grid, grid, act, act};
}

SmoothnessOperator::SmoothnessOperator(const BinningPtr& binning, double sigma)
    : binning_(binning), sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("smoothness sigma must be positive");
  const std::size_t bins = binning->count();
  if (bins < 4) throw ConfigError("smoothness prior needs at least 3 nonzero-mode bins");
  const auto kappa = binning->kappa();
  std::vector<double> y(bins, 0.0);
  for (std::size_t b = 1; b < bins; ++b) y[b] = std::log(kappa[b]);

  // Bin 0 is the zero mode, infinitely far away on the ln|k| axis.
  stencil_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bins - 3), static_cast<Eigen::Index>(bins));
  for (std::size_t j = 2; j + 1 < bins; ++j) {
    const double lo = y[j] - y[j - 1];
    const double hi = y[j + 1] - y[j];
    const double scale = std::sqrt(0.5 * (lo + hi)) * 2.0 / (lo + hi);
    const auto row = static_cast<Eigen::Index>(j - 2);
    stencil_(row, static_cast<Eigen::Index>(j - 1)) = scale / lo;
    stencil_(row, static_cast<Eigen::Index>(j)) = -scale * (1.0 / lo + 1.0 / hi);
    stencil_(row, static_cast<Eigen::Index>(j + 1)) = scale / hi;
  }
  matrix_ = stencil_.transpose() * stencil_ / (sigma * sigma);
}

std::vector<double> SmoothnessOperator::apply(std::span<const double> tau) const {
  require(tau.size() == static_cast<std::size_t>(matrix_.rows()), "smoothness: length mismatch");
  Eigen::Map<const Eigen::VectorXd> t(tau.data(), static_cast<Eigen::Index>(tau.size()));
  Eigen::VectorXd r = matrix_ * t;
  return {r.data(), r.data() + r.size()};
}

double SmoothnessOperator::quadratic(std::span<const double> tau) const {
  require(tau.size() == static_cast<std::size_t>(matrix_.rows()), "smoothness: length mismatch");
  Eigen::Map<const Eigen::VectorXd> t(tau.data(), static_cast<Eigen::Index>(tau.size()));
  return (stencil_ * t).squaredNorm() / (sigma_ * sigma_);
}

LinearMap SmoothnessOperator::as_map() const {
  auto self = std::make_shared<const SmoothnessOperator>(*this);
  auto space = binning_->parameter_space();
  auto act = [self, space](const Field& x) { return Field(space, self->apply(x.scalars())); };
  return {space, space, act, act};
}

LinearMap mask_response(const SpacePtr& grid, const std::vector<bool>& keep) {
  require(grid && grid->kind() == SpaceKind::position, "mask_response needs a position grid");
  if (keep.size() != grid->size()) throw ContractError("mask size does not match grid");
  auto kept = std::make_shared<std::vector<std::size_t>>();
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) kept->push_back(i);
  if (kept->empty()) throw ContractError("mask keeps no pixels");
  auto data = Space::data(kept->size());
  const double inv_dv = 1.0 / grid->pixel_volume();
  return {grid, data,
          [kept, data](const Field& s) {
            Field d(data);
            for (std::size_t i = 0; i < kept->size(); ++i) d[i] = s[(*kept)[i]];
            return d;
          },
          [kept, grid, inv_dv](const Field& d) {
            Field s(grid);
            for (std::size_t i = 0; i < kept->size(); ++i) s[(*kept)[i]] = d[i] * inv_dv;
            return s;
          }};
}

LinearMap fourier_sampling_response(const SpacePtr& grid, const std::vector<std::size_t>& modes) {
  require(grid && grid->kind() == SpaceKind::position, "fourier_sampling needs a position grid");
  if (modes.empty()) throw ContractError("fourier sampling needs at least one mode");
  for (auto m : modes)
    if (m >= grid->size()) throw ContractError("sampled mode index out of range");
  auto harmonic = Space::harmonic_of(grid);
  auto data = Space::data(2 * modes.size());
  auto list = std::make_shared<const std::vector<std::size_t>>(modes);
  const double inv_dk = 1.0 / harmonic->pixel_volume();
  return {grid, data,
          [list, data](const Field& s) {
            const auto h = harmonic_transform(s);
            const auto m = h.modes();
            Field d(data);
            for (std::size_t i = 0; i < list->size(); ++i) {
              d[2 * i] = m[(*list)[i]].real();
              d[2 * i + 1] = m[(*list)[i]].imag();
            }
            return d;
          },
          [list, harmonic, inv_dk](const Field& d) {
            Field h(harmonic);
            auto m = h.modes();
            for (std::size_t i = 0; i < list->size(); ++i)
              m[(*list)[i]] += std::complex<double>(d[2 * i], d[2 * i + 1]) * inv_dk;
            return adjoint_transform(h);
          }};
}

}  // namespace critfilt
