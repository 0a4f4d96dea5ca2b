#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "critfilt/field.hpp"

namespace critfilt {

enum class BinningScheme {
  automatic,    ///< distinct for 1D, logarithmic for 2D
  distinct,     ///< one bin per distinct |k|
  logarithmic,  ///< log-spaced edges; empty bins removed
};

struct BinningOptions {
  BinningScheme scheme = BinningScheme::automatic;
  std::size_t log_bins = 64;
};

/// Isotropic binning of a harmonic space.  Bin 0 always holds exactly the
/// zero mode; bins are ordered by increasing |k|.
class PowerBinning {
 public:
  static std::shared_ptr<const PowerBinning> build(const SpacePtr& harmonic,
                                                   const BinningOptions& options = {});

  const SpacePtr& harmonic() const { return harmonic_; }
  std::size_t count() const { return rho_.size(); }
  std::span<const std::size_t> bin_of_pixel() const { return bin_of_pixel_; }
  /// Summed volume weights of member pixels.
  std::span<const double> rho() const { return rho_; }
  /// Number of member pixels.
  std::span<const std::size_t> members() const { return members_; }
  /// Mean |k| of member pixels.
  std::span<const double> kappa() const { return kappa_; }
  /// count()+1 strictly increasing boundaries; bin b covers [edges[b], edges[b+1]).
  std::span<const double> edges() const { return edges_; }

  /// Euclidean bin space, used for spectral parameters.
  const SpacePtr& parameter_space() const { return parameter_space_; }
  /// Bin space weighted by rho, in which distribute() is the adjoint of project().
  const SpacePtr& weighted_space() const { return weighted_space_; }

  /// Volume-weighted bin average of the real part of a harmonic field.
  Field project(const Field& harmonic) const;
  /// Broadcast of bin values onto member pixels (real harmonic field).
  Field distribute(const Field& bins) const;

  std::vector<double> average(std::span<const double> per_pixel) const;
  /// Volume-weighted per-bin sum, the Euclidean adjoint of broadcast().
  std::vector<double> integrate(std::span<const double> per_pixel) const;
  std::vector<double> broadcast(std::span<const double> per_bin) const;

  nlohmann::json to_json() const;

 private:
  PowerBinning() = default;

  SpacePtr harmonic_;
  std::vector<std::size_t> bin_of_pixel_;
  std::vector<double> rho_;
  std::vector<std::size_t> members_;
  std::vector<double> kappa_;
  std::vector<double> edges_;
  SpacePtr parameter_space_;
  SpacePtr weighted_space_;
};

using BinningPtr = std::shared_ptr<const PowerBinning>;

/// Logarithmic amplitude spectrum alpha, with tau = 2 alpha and p = e^tau.
class LogSpectrum {
 public:
  LogSpectrum(BinningPtr binning, std::vector<double> alpha);
  static LogSpectrum from_tau(BinningPtr binning, std::span<const double> tau);
  static LogSpectrum from_power(BinningPtr binning, std::span<const double> power);
  static LogSpectrum flat(BinningPtr binning, double power);

  const BinningPtr& binning() const { return binning_; }
  std::span<const double> alpha() const { return alpha_; }
  std::vector<double> tau() const;
  std::vector<double> power() const;
  /// e^alpha broadcast to every harmonic pixel.
  std::vector<double> pixel_amplitudes() const;
  Field alpha_field() const;

 private:
  BinningPtr binning_;
  std::vector<double> alpha_;
};

}  // namespace critfilt
