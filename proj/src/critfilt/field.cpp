#include "critfilt/field.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "critfilt/error.hpp"

namespace critfilt {

namespace {

long signed_index(std::size_t j, std::size_t n) {
  return j <= n / 2 ? static_cast<long>(j) : static_cast<long>(j) - static_cast<long>(n);
}

}  // namespace

SpacePtr Space::grid(std::vector<std::size_t> shape, std::vector<double> pixel_size) {
  if (shape.empty() || shape.size() > 2) throw ContractError("grid must have one or two axes");
  if (pixel_size.size() != shape.size()) throw ContractError("pixel_size must match shape");
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] < 1) throw ContractError("pixel counts must be >= 1");
    if (!(pixel_size[i] > 0.0) || !std::isfinite(pixel_size[i]))
      throw ContractError("pixel sizes must be positive");
  }
  auto s = std::shared_ptr<Space>(new Space());
  s->kind_ = SpaceKind::position;
  s->size_ = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  s->pixel_volume_ = std::accumulate(pixel_size.begin(), pixel_size.end(), 1.0, std::multiplies<>());
  s->shape_ = std::move(shape);
  s->pixel_size_ = std::move(pixel_size);
  return s;
}

SpacePtr Space::unit_grid(std::vector<std::size_t> shape) {
  std::vector<double> sizes;
  for (auto n : shape) sizes.push_back(n > 0 ? 1.0 / static_cast<double>(n) : 1.0);
  return grid(std::move(shape), std::move(sizes));
}

SpacePtr Space::harmonic_of(const SpacePtr& grid) {
  require(grid && grid->kind() == SpaceKind::position, "harmonic_of needs a position grid");
  // Transforms ask for the harmonic partner on every call; share descriptors.
  static std::mutex mutex;
  static std::map<std::pair<std::vector<std::size_t>, std::vector<double>>, std::weak_ptr<const Space>>
      cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(grid->shape_, grid->pixel_size_);
  if (auto it = cache.find(key); it != cache.end()) {
    if (auto hit = it->second.lock()) return hit;
  }
  auto s = std::shared_ptr<Space>(new Space());
  s->kind_ = SpaceKind::harmonic;
  s->shape_ = grid->shape_;
  s->size_ = grid->size_;
  for (std::size_t i = 0; i < grid->shape_.size(); ++i)
    s->pixel_size_.push_back(1.0 / (static_cast<double>(grid->shape_[i]) * grid->pixel_size_[i]));
  s->pixel_volume_ = 1.0 / grid->total_volume();
  s->partner_ = grid;

  s->mode_magnitudes_.resize(s->size_);
  for (std::size_t p = 0; p < s->size_; ++p) {
    double k2 = 0.0;
    for (std::size_t a = 0; a < s->shape_.size(); ++a) {
      const double k = static_cast<double>(s->signed_mode(p, a)) * s->pixel_size_[a];
      k2 += k * k;
    }
    s->mode_magnitudes_[p] = std::sqrt(k2);
  }
  cache[key] = s;
  return s;
}

SpacePtr Space::data(std::size_t length) {
  if (length < 1) throw ContractError("data space needs at least one entry");
  auto s = std::shared_ptr<Space>(new Space());
  s->kind_ = SpaceKind::data;
  s->shape_ = {length};
  s->size_ = length;
  return s;
}

SpacePtr Space::bins(std::size_t count) {
  if (count < 1) throw ContractError("bin space needs at least one bin");
  auto s = std::shared_ptr<Space>(new Space());
  s->kind_ = SpaceKind::bins;
  s->shape_ = {count};
  s->size_ = count;
  return s;
}

SpacePtr Space::weighted_bins(std::vector<double> weights) {
  if (weights.empty()) throw ContractError("bin space needs at least one bin");
  auto s = std::shared_ptr<Space>(new Space());
  s->kind_ = SpaceKind::bins;
  s->shape_ = {weights.size()};
  s->size_ = weights.size();
  s->weights_ = std::move(weights);
  return s;
}

double Space::total_volume() const {
  if (!weights_.empty()) return std::accumulate(weights_.begin(), weights_.end(), 0.0);
  return pixel_volume_ * static_cast<double>(size_);
}

long Space::signed_mode(std::size_t pixel, std::size_t axis) const {
  std::size_t index = pixel;
  for (std::size_t a = shape_.size(); a-- > axis + 1;) index /= shape_[a];
  return signed_index(index % shape_[axis], shape_[axis]);
}

std::size_t Space::negated_index(std::size_t pixel) const {
  std::size_t result = 0;
  std::size_t stride = 1;
  std::size_t rest = pixel;
  for (std::size_t a = shape_.size(); a-- > 0;) {
    const std::size_t n = shape_[a];
    const std::size_t j = rest % n;
    rest /= n;
    result += ((n - j) % n) * stride;
    stride *= n;
  }
  return result;
}

bool Space::operator==(const Space& o) const {
  return kind_ == o.kind_ && shape_ == o.shape_ && pixel_size_ == o.pixel_size_ &&
         pixel_volume_ == o.pixel_volume_ && weights_ == o.weights_;
}

bool same_space(const SpacePtr& a, const SpacePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

void require_space(const SpacePtr& actual, const SpacePtr& expected, const char* what) {
  if (!same_space(actual, expected)) throw ContractError(std::string("space mismatch in ") + what);
}

Field::Field(SpacePtr space) : space_(std::move(space)) {
  require(space_ != nullptr, "field needs a space");
  values_.assign(space_->scalar_count(), 0.0);
}

Field::Field(SpacePtr space, std::vector<double> scalars)
    : space_(std::move(space)), values_(std::move(scalars)) {
  require(space_ != nullptr, "field needs a space");
  if (values_.size() != space_->scalar_count())
    throw ContractError("field value count does not match its space");
}

Field Field::constant(SpacePtr space, double value) {
  Field f(std::move(space));
  if (f.space_->is_complex()) {
    for (auto& m : f.modes()) m = value;
  } else {
    std::fill(f.values_.begin(), f.values_.end(), value);
  }
  return f;
}

Field Field::from_modes(SpacePtr space, std::span<const std::complex<double>> modes) {
  require(space && space->is_complex(), "from_modes needs a harmonic space");
  require(modes.size() == space->size(), "mode count does not match space");
  Field f(std::move(space));
  std::copy(modes.begin(), modes.end(), f.modes().begin());
  return f;
}

std::span<const std::complex<double>> Field::modes() const {
  require(space_ && space_->is_complex(), "modes() needs a harmonic field");
  return {reinterpret_cast<const std::complex<double>*>(values_.data()), space_->size()};
}

std::span<std::complex<double>> Field::modes() {
  require(space_ && space_->is_complex(), "modes() needs a harmonic field");
  return {reinterpret_cast<std::complex<double>*>(values_.data()), space_->size()};
}

Field& Field::operator+=(const Field& other) { return axpy(1.0, other); }

Field& Field::operator-=(const Field& other) { return axpy(-1.0, other); }

Field& Field::operator*=(double factor) {
  for (auto& v : values_) v *= factor;
  return *this;
}

Field& Field::axpy(double factor, const Field& other) {
  require_space(other.space_, space_, "field arithmetic");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += factor * other.values_[i];
  return *this;
}

Field Field::operator-() const {
  Field r = *this;
  r *= -1.0;
  return r;
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double inner(const Field& a, const Field& b) {
  require_space(a.space(), b.space(), "inner product");
  const Space& s = *a.space();
  const auto x = a.scalars();
  const auto y = b.scalars();
  if (s.uniform()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += x[i] * y[i];
    return sum * s.pixel_volume();
  }
  const std::size_t per = s.is_complex() ? 2 : 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x[i] * y[i] * s.weight(i / per);
  return sum;
}

double norm(const Field& a) { return std::sqrt(inner(a, a)); }

Field hadamard(const Field& a, std::span<const double> per_pixel) {
  require(per_pixel.size() == a.size(), "pointwise factor size mismatch");
  Field r = a;
  auto v = r.scalars();
  if (a.space()->is_complex()) {
    for (std::size_t p = 0; p < per_pixel.size(); ++p) {
      v[2 * p] *= per_pixel[p];
      v[2 * p + 1] *= per_pixel[p];
    }
  } else {
    for (std::size_t p = 0; p < per_pixel.size(); ++p) v[p] *= per_pixel[p];
  }
  return r;
}

}  // namespace critfilt
