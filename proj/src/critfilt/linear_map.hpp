#pragma once

#include <functional>
#include <vector>

#include "critfilt/field.hpp"

namespace critfilt {

/// Linear operator between two spaces, given by its action and the action of
/// its adjoint with respect to the spaces' inner products.
class LinearMap {
 public:
  using Action = std::function<Field(const Field&)>;

  LinearMap(SpacePtr domain, SpacePtr target, Action forward, Action adjoint);

  const SpacePtr& domain() const { return domain_; }
  const SpacePtr& target() const { return target_; }

  Field apply(const Field& x) const;
  Field adjoint_apply(const Field& y) const;
  Field operator()(const Field& x) const { return apply(x); }

  LinearMap adjoint() const;
  LinearMap scaled(double factor) const;
  /// Composition: (a * b)(x) = a(b(x)).
  friend LinearMap operator*(const LinearMap& a, const LinearMap& b);
  friend LinearMap operator+(const LinearMap& a, const LinearMap& b);

  static LinearMap identity(const SpacePtr& space);
  static LinearMap zero(const SpacePtr& domain, const SpacePtr& target);
  /// Real diagonal, one entry per pixel (complex pixels are scaled as a whole).
  static LinearMap diagonal(const SpacePtr& space, std::vector<double> entries);

 private:
  SpacePtr domain_;
  SpacePtr target_;
  Action forward_;
  Action adjoint_;
};

/// Images of the canonical scalar basis vectors, one column per domain scalar.
std::vector<std::vector<double>> materialize(const LinearMap& map);

}  // namespace critfilt
