#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "critfilt/binning.hpp"
#include "critfilt/field.hpp"
#include "critfilt/harmonic.hpp"
#include "critfilt/linear_map.hpp"

namespace testing {

using namespace critfilt;

inline Field random_field(const SpacePtr& space, Rng& rng) {
  std::normal_distribution<double> normal;
  Field f(space);
  for (auto& v : f.scalars()) v = normal(rng);
  return f;
}

/// Raw matrix of a map acting on scalar arrays (columns = images of unit scalars).
inline Eigen::MatrixXd dense(const LinearMap& map) {
  const auto cols = materialize(map);
  const auto rows = static_cast<Eigen::Index>(map.target()->scalar_count());
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, static_cast<Eigen::Index>(j)) = cols[j][static_cast<std::size_t>(i)];
  return m;
}

/// Per-scalar inner-product weights of a space.
inline Eigen::VectorXd weights(const SpacePtr& space) {
  const std::size_t per = space->is_complex() ? 2 : 1;
  Eigen::VectorXd w(static_cast<Eigen::Index>(space->scalar_count()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = space->weight(static_cast<std::size_t>(i) / per);
  return w;
}

inline Eigen::VectorXd vec(const Field& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.vector().data(), static_cast<Eigen::Index>(f.vector().size()));
}

inline Field field(const SpacePtr& space, const Eigen::VectorXd& v) {
  return Field(space, std::vector<double>(v.data(), v.data() + v.size()));
}

/// max over random pairs of |<Lx, y> - <x, L^dagger y>| / (|<Lx, y>| + |<x, L^dagger y>|)
inline double adjointness_error(const LinearMap& map, Rng& rng, int pairs = 10) {
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const Field x = random_field(map.domain(), rng);
    const Field y = random_field(map.target(), rng);
    const double a = inner(map.apply(x), y);
    const double b = inner(x, map.adjoint_apply(y));
    worst = std::max(worst, std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-300));
  }
  return worst;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Central difference of f along v at x.
inline double directional_fd(const std::function<double(const Field&)>& f, const Field& x, const Field& v, double h) {
  Field plus = x;
  plus.axpy(h, v);
  Field minus = x;
  minus.axpy(-h, v);
  return (f(plus) - f(minus)) / (2.0 * h);
}

/// Euclidean pairing of a gradient with a direction (gradients are partial derivatives
/// of raw scalar arrays).
inline double euclidean(const Field& a, const Field& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.vector().size(); ++i) s += a.vector()[i] * b.vector()[i];
  return s;
}

/// Direction preserving the Hermitian symmetry of harmonic excitations.
inline Field hermitian_direction(const SpacePtr& harmonic, Rng& rng) {
  return harmonic_transform(draw_white(harmonic->partner(), rng));
}

}  // namespace testing

namespace testing {

/// Dense S for a 1D grid of n pixels with pixel size dx: S(x, y) = sum_k dK p_k e^{2 pi i k (x-y)/n} dV.
inline Eigen::MatrixXd dense_covariance_1d(const critfilt::PowerBinning& binning, std::span<const double> tau,
                                           std::size_t n, double dx) {
  const double dv = dx, dk = 1.0 / (n * dx);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
            dk * std::exp(tau[binning.bin_of_pixel()[k]]) *
            std::cos(2.0 * 3.14159265358979323846 * double(k) * (double(i) - double(j)) / double(n)) * dv;
  return s;
}

/// Posterior mean m = D j for raw response R (data x pixels), noise variances and
/// raw prior covariance S, with pixel volume dv.
inline Eigen::VectorXd dense_wiener(const Eigen::MatrixXd& r, const Eigen::VectorXd& noise_var,
                                    const Eigen::MatrixXd& s, double dv, const Eigen::VectorXd& d) {
  const Eigen::MatrixXd ninv = noise_var.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd dinv = r.transpose() * ninv * r / dv + s.inverse();
  const Eigen::VectorXd j = r.transpose() * ninv * d / dv;
  return dinv.ldlt().solve(j);
}

}  // namespace testing
