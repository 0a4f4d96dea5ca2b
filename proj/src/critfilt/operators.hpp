#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "critfilt/binning.hpp"
#include "critfilt/linear_map.hpp"

namespace critfilt {

/// Unitary transform position -> harmonic as a map.
LinearMap harmonic_transform_map(const SpacePtr& grid);

/// Power projection P (bin average) into the rho-weighted bin space; its
/// adjoint there is the plain broadcast P^dagger.
LinearMap power_projection_map(const BinningPtr& binning);

/// A = F^dagger diag(P^dagger e^alpha): harmonic excitation -> position signal.
LinearMap amplitude_operator(const LogSpectrum& spectrum);

/// S = F^dagger diag(P^dagger e^tau) F on position space.
LinearMap signal_covariance(const LogSpectrum& spectrum);

/// Smoothness curvature (1/sigma^2) Delta^dagger Delta on the Euclidean bin
/// space.  Delta is the second derivative over ln|k| on the nonzero-mode bins,
/// with rows only at interior bins (free boundaries) and each row weighted by
/// the square root of its local ln|k| spacing so that the quadratic form
/// approximates the integral of the squared curvature.
class SmoothnessOperator {
 public:
  SmoothnessOperator(const BinningPtr& binning, double sigma);

  double sigma() const { return sigma_; }
  const BinningPtr& binning() const { return binning_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  /// Delta itself (rows: interior nonzero-mode bins, columns: all bins).
  const Eigen::MatrixXd& stencil() const { return stencil_; }

  std::vector<double> apply(std::span<const double> tau) const;
  /// tau^dagger (1/sigma^2) Delta^dagger Delta tau
  double quadratic(std::span<const double> tau) const;
  LinearMap as_map() const;

 private:
  BinningPtr binning_;
  double sigma_;
  Eigen::MatrixXd stencil_;
  Eigen::MatrixXd matrix_;
};

/// Restriction of a position field to the kept pixels (point samples).
LinearMap mask_response(const SpacePtr& grid, const std::vector<bool>& keep);

/// Harmonic transform followed by restriction to the listed modes, emitting
/// (re, im) pairs into a data space of length 2 * modes.size().
LinearMap fourier_sampling_response(const SpacePtr& grid, const std::vector<std::size_t>& modes);

}  // namespace critfilt
