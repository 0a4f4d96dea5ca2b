#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "critfilt/error.hpp"
#include "critfilt/linear_map.hpp"

namespace critfilt {

struct CGConfig {
  double rel_tol = 1e-6;
  std::size_t max_iter = 2000;
  void validate() const;
};

struct CGStats {
  std::size_t iterations = 0;
  /// Relative residual after every iteration, starting with the initial one.
  std::vector<double> residuals;
};

/// Solves op x = source for symmetric positive definite op.  The conjugate
/// gradient iterates are passed through minimal-residual smoothing, so the
/// reported residual norm never increases.  An optional SPD preconditioner
/// approximates op^{-1}.  Throws ConvergenceError after max_iter iterations.
Field conjugate_gradient(const LinearMap& op, const Field& source, const CGConfig& cfg,
                         CGStats* stats = nullptr, const LinearMap* preconditioner = nullptr);

struct NewtonConfig {
  double step_damping = 1.0;
  std::size_t max_steps = 20;
  double grad_tol = 1e-6;
  double line_search_shrink = 0.5;
  /// Curvature solves are inexact.
  CGConfig cg{1e-4, 2000};
  void validate() const;
};

struct Objective {
  std::function<double(const Field&)> value;
  std::function<Field(const Field&)> gradient;
  std::function<LinearMap(const Field&)> curvature;
  /// Optional approximation of the inverse curvature.
  std::function<LinearMap(const Field&)> preconditioner;
};

struct NewtonRecord {
  std::size_t step = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  double step_length = 0.0;
};

struct NewtonResult {
  Field x;
  double value = 0.0;
  double grad_norm = 0.0;
  std::size_t steps = 0;
  bool converged = false;
  std::vector<NewtonRecord> history;
};

/// The line search shrank the step below 1e-8 without decreasing the
/// objective.  Carries the last accepted point.
class StallError : public Error {
 public:
  StallError(NewtonResult snapshot)
      : Error("Newton line search stalled"), snapshot_(std::move(snapshot)) {}
  const NewtonResult& snapshot() const { return snapshot_; }

 private:
  NewtonResult snapshot_;
};

/// Damped Newton: x <- x - lambda C(x)^{-1} grad(x), halving lambda from
/// step_damping until the objective decreases.  Stops once the gradient norm
/// is below grad_tol, when the predicted decrease is below the floating point
/// resolution of the objective, or after max_steps.
NewtonResult relaxed_newton(const Objective& objective, Field start, const NewtonConfig& cfg);

}  // namespace critfilt
