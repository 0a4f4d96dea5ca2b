#include "critfilt/linear_map.hpp"

#include "critfilt/error.hpp"

namespace critfilt {

LinearMap::LinearMap(SpacePtr domain, SpacePtr target, Action forward, Action adjoint)
    : domain_(std::move(domain)),
      target_(std::move(target)),
      forward_(std::move(forward)),
      adjoint_(std::move(adjoint)) {
  require(domain_ && target_, "linear map needs domain and target");
}

Field LinearMap::apply(const Field& x) const {
  require_space(x.space(), domain_, "LinearMap::apply");
  return forward_(x);
}

Field LinearMap::adjoint_apply(const Field& y) const {
  require_space(y.space(), target_, "LinearMap::adjoint_apply");
  return adjoint_(y);
}

LinearMap LinearMap::adjoint() const { return {target_, domain_, adjoint_, forward_}; }

LinearMap LinearMap::scaled(double factor) const {
  auto f = forward_;
  auto a = adjoint_;
  return {domain_, target_, [f, factor](const Field& x) { return factor * f(x); },
          [a, factor](const Field& y) { return factor * a(y); }};
}

LinearMap operator*(const LinearMap& a, const LinearMap& b) {
  require_space(b.target_, a.domain_, "operator composition");
  return {b.domain_, a.target_,
          [a, b](const Field& x) { return a.forward_(b.forward_(x)); },
          [a, b](const Field& y) { return b.adjoint_(a.adjoint_(y)); }};
}

LinearMap operator+(const LinearMap& a, const LinearMap& b) {
  require_space(a.domain_, b.domain_, "operator sum");
  require_space(a.target_, b.target_, "operator sum");
  return {a.domain_, a.target_,
          [a, b](const Field& x) { return a.forward_(x) + b.forward_(x); },
          [a, b](const Field& y) { return a.adjoint_(y) + b.adjoint_(y); }};
}

LinearMap LinearMap::identity(const SpacePtr& space) {
  auto id = [](const Field& x) { return x; };
  return {space, space, id, id};
}

LinearMap LinearMap::zero(const SpacePtr& domain, const SpacePtr& target) {
  return {domain, target, [target](const Field&) { return Field(target); },
          [domain](const Field&) { return Field(domain); }};
}

LinearMap LinearMap::diagonal(const SpacePtr& space, std::vector<double> entries) {
  require(entries.size() == space->size(), "diagonal size mismatch");
  auto shared = std::make_shared<const std::vector<double>>(std::move(entries));
  auto act = [shared](const Field& x) { return hadamard(x, *shared); };
  return {space, space, act, act};
}

std::vector<std::vector<double>> materialize(const LinearMap& map) {
  const std::size_t n = map.domain()->scalar_count();
  std::vector<std::vector<double>> columns;
  columns.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    Field e(map.domain());
    e[j] = 1.0;
    auto y = map.apply(e);
    columns.emplace_back(y.vector());
  }
  return columns;
}

}  // namespace critfilt
