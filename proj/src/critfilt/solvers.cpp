#include "critfilt/solvers.hpp"

#include <cmath>
#include <limits>

namespace critfilt {

void CGConfig::validate() const {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw ConfigError("cg rel_tol must lie in (0, 1)");
  if (max_iter < 1) throw ConfigError("cg max_iter must be >= 1");
}

void NewtonConfig::validate() const {
  if (!(step_damping > 0.0 && step_damping <= 1.0)) throw ConfigError("newton step_damping must lie in (0, 1]");
  if (max_steps < 1) throw ConfigError("newton max_steps must be >= 1");
  if (!(grad_tol > 0.0)) throw ConfigError("newton grad_tol must be positive");
  if (!(line_search_shrink > 0.0 && line_search_shrink < 1.0))
    throw ConfigError("newton line_search_shrink must lie in (0, 1)");
  cg.validate();
}

Field conjugate_gradient(const LinearMap& op, const Field& source, const CGConfig& cfg, CGStats* stats,
                         const LinearMap* preconditioner) {
  require_space(op.domain(), op.target(), "conjugate_gradient (operator must be square)");
  require_space(source.space(), op.target(), "conjugate_gradient source");
  if (preconditioner) {
    require_space(preconditioner->domain(), op.domain(), "conjugate_gradient preconditioner");
    require_space(preconditioner->target(), op.domain(), "conjugate_gradient preconditioner");
  }
  cfg.validate();
  auto precondition = [&](const Field& r) { return preconditioner ? preconditioner->apply(r) : r; };

  Field x(source.space());
  const double source_norm = norm(source);
  if (stats) {
    stats->iterations = 0;
    stats->residuals.assign(1, source_norm > 0.0 ? 1.0 : 0.0);
  }
  if (source_norm == 0.0) return x;

  Field r = source;
  Field z = precondition(r);
  Field p = z;
  double rz = inner(r, z);
  // Minimal-residual smoothing: s is the smoothed residual of iterate y.
  Field y = x;
  Field s = r;
  double smoothed = 1.0;

  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    const Field q = op.apply(p);
    const double pq = inner(p, q);
    if (!(pq > 0.0)) throw NumericError("conjugate_gradient: operator is not positive definite along the search direction");
    const double a = rz / pq;
    x.axpy(a, p);
    r.axpy(-a, q);

    Field u = r - s;
    const double uu = inner(u, u);
    if (uu > 0.0) {
      const double eta = -inner(s, u) / uu;
      s.axpy(eta, u);
      Field dx = x - y;
      y.axpy(eta, dx);
    }
    smoothed = norm(s) / source_norm;
    if (stats) {
      stats->iterations = it;
      stats->residuals.push_back(smoothed);
    }
    if (smoothed <= cfg.rel_tol) return y;

    z = precondition(r);
    const double rz_next = inner(r, z);
    if (rz_next == 0.0 && norm(r) == 0.0) return x;
    if (!(rz_next > 0.0)) throw NumericError("conjugate_gradient: preconditioner is not positive definite");
    p *= rz_next / rz;
    p += z;
    rz = rz_next;
  }
  throw ConvergenceError("conjugate_gradient did not converge", smoothed, cfg.max_iter);
}

NewtonResult relaxed_newton(const Objective& objective, Field start, const NewtonConfig& cfg) {
  cfg.validate();
  NewtonResult result;
  result.x = std::move(start);
  result.value = objective.value(result.x);

  for (std::size_t step = 0;; ++step) {
    const Field g = objective.gradient(result.x);
    result.grad_norm = norm(g);
    result.steps = step;
    if (result.history.empty()) result.history.push_back({step, result.value, result.grad_norm, 0.0});
    else result.history.back().grad_norm = result.grad_norm;

    if (result.grad_norm <= cfg.grad_tol) {
      result.converged = true;
      return result;
    }
    if (step == cfg.max_steps) return result;

    const LinearMap curvature = objective.curvature(result.x);
    std::optional<LinearMap> preconditioner;
    if (objective.preconditioner) preconditioner = objective.preconditioner(result.x);
    const Field dx = conjugate_gradient(curvature, g, cfg.cg, nullptr, preconditioner ? &*preconditioner : nullptr);
    const double slope = inner(g, dx);
    const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(result.value);
    if (!(slope > 0.0) || 0.5 * slope <= resolution) {
      // Newton direction predicts no representable decrease.
      result.converged = true;
      return result;
    }

    double lambda = cfg.step_damping;
    while (true) {
      Field trial = result.x;
      trial.axpy(-lambda, dx);
      double value = std::numeric_limits<double>::infinity();
      try {
        value = objective.value(trial);
      } catch (const NumericError&) {
      }
      if (std::isfinite(value) && value <= result.value) {
        result.x = std::move(trial);
        result.value = value;
        break;
      }
      lambda *= cfg.line_search_shrink;
      if (lambda < 1e-8) throw StallError(result);
    }
    result.history.push_back({step + 1, result.value, 0.0, lambda});
  }
}

}  // namespace critfilt
