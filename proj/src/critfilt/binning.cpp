#include "critfilt/binning.hpp"

#include <algorithm>
#include <cmath>

#include "critfilt/error.hpp"

namespace critfilt {

namespace {

// Relative tolerance under which two |k| values count as the same ring.
constexpr double kRingTolerance = 1e-9;

std::vector<double> distinct_magnitudes(const std::vector<double>& mags) {
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> unique;
  for (double m : sorted) {
    if (unique.empty() || m > unique.back() * (1.0 + kRingTolerance))
      unique.push_back(m);
  }
  return unique;
}

}  // namespace

BinningPtr PowerBinning::build(const SpacePtr& harmonic, const BinningOptions& options) {
  require(harmonic && harmonic->kind() == SpaceKind::harmonic, "binning needs a harmonic space");
  const auto& mags = harmonic->mode_magnitudes();
  auto scheme = options.scheme;
  if (scheme == BinningScheme::automatic)
    scheme = harmonic->shape().size() == 1 ? BinningScheme::distinct : BinningScheme::logarithmic;

  const auto unique = distinct_magnitudes(mags);
  std::vector<double> edges{0.0};
  if (unique.size() > 1) {
    const double kmin = unique[1];
    const double kmax = unique.back();
    if (scheme == BinningScheme::distinct) {
      for (std::size_t i = 1; i < unique.size(); ++i) edges.push_back(0.5 * (unique[i - 1] + unique[i]));
      edges.push_back(kmax * (1.0 + 1e-6));
    } else {
      if (options.log_bins < 1) throw ConfigError("log binning needs at least one bin");
      const double lo = std::log(kmin) - 1e-9;
      const double hi = std::log(kmax) + 1e-9;
      edges.push_back(0.5 * kmin);
      for (std::size_t j = 1; j <= options.log_bins; ++j)
        edges.push_back(std::exp(lo + (hi - lo) * static_cast<double>(j) / options.log_bins));
    }
  } else {
    edges.push_back(1.0);
  }

  // Assign pixels, then drop empty bins by merging their edges away.
  std::vector<std::size_t> raw(mags.size());
  std::vector<std::size_t> raw_count(edges.size() - 1, 0);
  for (std::size_t p = 0; p < mags.size(); ++p) {
    auto it = std::upper_bound(edges.begin(), edges.end(), mags[p]);
    std::size_t b = static_cast<std::size_t>(it - edges.begin());
    b = std::clamp<std::size_t>(b, 1, edges.size() - 1) - 1;
    raw[p] = b;
    ++raw_count[b];
  }
  std::vector<std::size_t> remap(raw_count.size(), 0);
  std::vector<double> kept_edges{edges.front()};
  std::size_t next = 0;
  for (std::size_t b = 0; b < raw_count.size(); ++b) {
    if (raw_count[b] == 0) continue;
    remap[b] = next++;
    kept_edges.push_back(edges[b + 1]);
  }

  auto result = std::shared_ptr<PowerBinning>(new PowerBinning());
  result->harmonic_ = harmonic;
  result->edges_ = std::move(kept_edges);
  result->bin_of_pixel_.resize(mags.size());
  result->rho_.assign(next, 0.0);
  result->members_.assign(next, 0);
  result->kappa_.assign(next, 0.0);
  for (std::size_t p = 0; p < mags.size(); ++p) {
    const std::size_t b = remap[raw[p]];
    result->bin_of_pixel_[p] = b;
    result->rho_[b] += harmonic->weight(p);
    result->members_[b] += 1;
    result->kappa_[b] += mags[p] * harmonic->weight(p);
  }
  for (std::size_t b = 0; b < next; ++b) result->kappa_[b] /= result->rho_[b];
  if (result->members_[0] != 1) throw Error("zero mode is not a singleton bin");
  result->parameter_space_ = Space::bins(next);
  result->weighted_space_ = Space::weighted_bins(result->rho_);
  return result;
}

std::vector<double> PowerBinning::integrate(std::span<const double> per_pixel) const {
  require(per_pixel.size() == bin_of_pixel_.size(), "per-pixel size mismatch");
  std::vector<double> out(count(), 0.0);
  for (std::size_t p = 0; p < per_pixel.size(); ++p)
    out[bin_of_pixel_[p]] += per_pixel[p] * harmonic_->weight(p);
  return out;
}

std::vector<double> PowerBinning::average(std::span<const double> per_pixel) const {
  auto out = integrate(per_pixel);
  for (std::size_t b = 0; b < out.size(); ++b) out[b] /= rho_[b];
  return out;
}

std::vector<double> PowerBinning::broadcast(std::span<const double> per_bin) const {
  require(per_bin.size() == count(), "bin vector length mismatch");
  std::vector<double> out(bin_of_pixel_.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = per_bin[bin_of_pixel_[p]];
  return out;
}

Field PowerBinning::project(const Field& h) const {
  require_space(h.space(), harmonic_, "power_project");
  std::vector<double> re(h.size());
  const auto m = h.modes();
  for (std::size_t p = 0; p < re.size(); ++p) re[p] = m[p].real();
  return Field(weighted_space_, average(re));
}

Field PowerBinning::distribute(const Field& b) const {
  if (b.size() != count() || b.space()->kind() != SpaceKind::bins)
    throw ContractError("power_distribute: bin vector length mismatch");
  auto values = broadcast(b.scalars());
  Field out(harmonic_);
  auto m = out.modes();
  for (std::size_t p = 0; p < values.size(); ++p) m[p] = values[p];
  return out;
}

nlohmann::json PowerBinning::to_json() const {
  return {{"edges", edges_}, {"rho", rho_}, {"kappa", kappa_}, {"members", members_}};
}

LogSpectrum::LogSpectrum(BinningPtr binning, std::vector<double> alpha)
    : binning_(std::move(binning)), alpha_(std::move(alpha)) {
  require(binning_ != nullptr, "spectrum needs a binning");
  if (alpha_.size() != binning_->count()) throw ContractError("spectrum length does not match binning");
}

LogSpectrum LogSpectrum::from_tau(BinningPtr binning, std::span<const double> tau) {
  std::vector<double> alpha(tau.begin(), tau.end());
  for (auto& a : alpha) a *= 0.5;
  return {std::move(binning), std::move(alpha)};
}

LogSpectrum LogSpectrum::from_power(BinningPtr binning, std::span<const double> power) {
  std::vector<double> alpha(power.size());
  for (std::size_t i = 0; i < power.size(); ++i) {
    if (!(power[i] > 0.0)) throw ConfigError("power spectrum values must be positive");
    alpha[i] = 0.5 * std::log(power[i]);
  }
  return {std::move(binning), std::move(alpha)};
}

LogSpectrum LogSpectrum::flat(BinningPtr binning, double power) {
  std::vector<double> p(binning->count(), power);
  return from_power(std::move(binning), p);
}

std::vector<double> LogSpectrum::tau() const {
  std::vector<double> t(alpha_);
  for (auto& v : t) v *= 2.0;
  return t;
}

std::vector<double> LogSpectrum::power() const {
  std::vector<double> p(alpha_);
  for (auto& v : p) v = std::exp(2.0 * v);
  return p;
}

std::vector<double> LogSpectrum::pixel_amplitudes() const {
  std::vector<double> amp(alpha_);
  for (auto& v : amp) v = std::exp(v);
  return binning_->broadcast(amp);
}

Field LogSpectrum::alpha_field() const { return Field(binning_->parameter_space(), alpha_); }

}  // namespace critfilt
