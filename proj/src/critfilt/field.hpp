#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace critfilt {

enum class SpaceKind { position, harmonic, data, bins };

class Space;
using SpacePtr = std::shared_ptr<const Space>;

/// Descriptor of a discretized domain.
///
/// Position spaces are periodic regular grids in one or two dimensions.  The
/// harmonic partner of a grid has pixel size 1/(n dx) per axis, so both carry a
/// volume weight per pixel and the transform between them is unitary.  Data
/// spaces use unit weights.  Bin spaces carry either unit weights or an
/// explicit weight per bin.
class Space {
 public:
  static SpacePtr grid(std::vector<std::size_t> shape, std::vector<double> pixel_size);
  /// Grid with unit total volume, i.e. pixel size 1/n on every axis.
  static SpacePtr unit_grid(std::vector<std::size_t> shape);
  static SpacePtr harmonic_of(const SpacePtr& grid);
  static SpacePtr data(std::size_t length);
  static SpacePtr bins(std::size_t count);
  static SpacePtr weighted_bins(std::vector<double> weights);

  SpaceKind kind() const { return kind_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& pixel_size() const { return pixel_size_; }
  std::size_t size() const { return size_; }
  /// Number of doubles stored per field; harmonic fields are complex.
  std::size_t scalar_count() const { return kind_ == SpaceKind::harmonic ? 2 * size_ : size_; }
  bool is_complex() const { return kind_ == SpaceKind::harmonic; }

  /// Weight of one pixel in inner products (uniform spaces only).
  double pixel_volume() const { return pixel_volume_; }
  double weight(std::size_t pixel) const {
    return weights_.empty() ? pixel_volume_ : weights_[pixel];
  }
  bool uniform() const { return weights_.empty(); }
  double total_volume() const;

  /// |k| for every harmonic pixel, row-major.
  const std::vector<double>& mode_magnitudes() const { return mode_magnitudes_; }
  /// Flat index of the pixel holding mode -k.
  std::size_t negated_index(std::size_t pixel) const;
  /// Signed integer frequency of a harmonic pixel along an axis.
  long signed_mode(std::size_t pixel, std::size_t axis) const;
  /// The position grid a harmonic space was derived from.
  const SpacePtr& partner() const { return partner_; }

  bool operator==(const Space& other) const;

 private:
  Space() = default;

  SpaceKind kind_ = SpaceKind::data;
  std::vector<std::size_t> shape_;
  std::vector<double> pixel_size_;
  std::size_t size_ = 0;
  double pixel_volume_ = 1.0;
  std::vector<double> weights_;
  std::vector<double> mode_magnitudes_;
  SpacePtr partner_;
};

bool same_space(const SpacePtr& a, const SpacePtr& b);
void require_space(const SpacePtr& actual, const SpacePtr& expected, const char* what);

/// Values attached to a space.  Harmonic values are stored as interleaved
/// (re, im) pairs so that vector arithmetic is uniform over all spaces.
class Field {
 public:
  Field() = default;
  explicit Field(SpacePtr space);
  Field(SpacePtr space, std::vector<double> scalars);

  static Field constant(SpacePtr space, double value);
  static Field from_modes(SpacePtr space, std::span<const std::complex<double>> modes);

  const SpacePtr& space() const { return space_; }
  std::size_t size() const { return space_ ? space_->size() : 0; }

  std::span<const double> scalars() const { return values_; }
  std::span<double> scalars() { return values_; }
  const std::vector<double>& vector() const { return values_; }

  std::span<const std::complex<double>> modes() const;
  std::span<std::complex<double>> modes();

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double factor);
  /// this += factor * other
  Field& axpy(double factor, const Field& other);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double f, Field a) { return a *= f; }
  friend Field operator*(Field a, double f) { return a *= f; }
  Field operator-() const;

  bool all_finite() const;

 private:
  SpacePtr space_;
  std::vector<double> values_;
};

/// Real part of the volume-weighted scalar product.
double inner(const Field& a, const Field& b);
double norm(const Field& a);
/// Pointwise product of two real fields, or of a harmonic field with a real
/// per-pixel weight (given as a field on the same space with zero imaginary
/// parts ignored).
Field hadamard(const Field& a, std::span<const double> per_pixel);

}  // namespace critfilt
