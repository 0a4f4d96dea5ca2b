#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "critfilt/field.hpp"

namespace critfilt {

using Rng = std::mt19937_64;

/// Independent generator for stream (a, b) of a job seed.  Identical
/// arguments always reproduce the same stream.
Rng split_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Volume-normalized unitary DFT: (F x)(k) = dV sum_x x e^{-2 pi i k.x}.
Field harmonic_transform(const Field& position);
/// Adjoint (= inverse) transform, keeping the real part.
Field adjoint_transform(const Field& harmonic);
/// Adjoint transform without discarding imaginary parts.
std::vector<std::complex<double>> adjoint_transform_complex(const Field& harmonic);

/// White excitation with identity covariance under the harmonic inner product.
/// The result is Hermitian-symmetric so its position-space image is real.
Field draw_white_excitation(const SpacePtr& harmonic, Rng& rng);
/// Real white field with identity covariance under the space's inner product.
Field draw_white(const SpacePtr& space, Rng& rng);
/// Independent Gaussian per entry with the given variances (unweighted).
Field draw_gaussian(const SpacePtr& space, std::span<const double> variances, Rng& rng);

}  // namespace critfilt
