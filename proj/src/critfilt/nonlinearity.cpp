#include "critfilt/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "critfilt/error.hpp"

namespace critfilt {

namespace {

struct Piecewise {
  std::vector<double> breaks;
  std::vector<std::vector<double>> coeffs;

  std::size_t segment(double x) const {
    return static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin());
  }

  static double poly(const std::vector<double>& c, double x) {
    double r = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
    return r;
  }

  static double poly_deriv(const std::vector<double>& c, double x) {
    double r = 0.0;
    for (std::size_t j = c.size(); j-- > 1;) r = r * x + static_cast<double>(j) * c[j];
    return r;
  }

  double eval(double x) const { return poly(coeffs[segment(x)], x); }

  double deriv(double x) const {
    const std::size_t seg = segment(x);
    if (seg > 0 && x == breaks[seg - 1]) {
      const double left = poly(coeffs[seg - 1], x);
      const double right = poly(coeffs[seg], x);
      if (left != right) return 1.0;
    }
    return poly_deriv(coeffs[seg], x);
  }
};

}  // namespace

LocalFunction piecewise_polynomial(std::string label, std::vector<double> breakpoints,
                                   std::vector<std::vector<double>> coefficients) {
  if (coefficients.size() != breakpoints.size() + 1)
    throw ConfigError("piecewise function needs one more coefficient list than breakpoints");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end()) ||
      std::adjacent_find(breakpoints.begin(), breakpoints.end()) != breakpoints.end())
    throw ConfigError("piecewise breakpoints must be strictly increasing");
  for (const auto& c : coefficients)
    if (c.empty()) throw ConfigError("piecewise segment without coefficients");

  auto pw = std::make_shared<const Piecewise>(Piecewise{std::move(breakpoints), std::move(coefficients)});

  // Spot-check monotonicity around and between the breakpoints.
  double lo = -10.0;
  double hi = 10.0;
  if (!pw->breaks.empty()) {
    lo = std::min(lo, pw->breaks.front() - 10.0);
    hi = std::max(hi, pw->breaks.back() + 10.0);
  }
  constexpr int kChecks = 4001;
  double previous = pw->eval(lo);
  for (int i = 1; i < kChecks; ++i) {
    const double x = lo + (hi - lo) * i / (kChecks - 1);
    const double v = pw->eval(x);
    if (v < previous - 1e-12 * std::max(1.0, std::abs(previous)))
      throw ConfigError("piecewise function '" + label + "' is not monotonically non-decreasing");
    previous = v;
  }

  return {std::move(label), [pw](double x) { return pw->eval(x); }, [pw](double x) { return pw->deriv(x); }};
}

LocalFunction builtin(const std::string& label) {
  if (label == "identity") return {label, [](double x) { return x; }, [](double) { return 1.0; }};
  if (label == "exponential")
    return {label, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }};
  if (label == "tanh") {
    return {label, [](double x) { return std::tanh(x); },
            [](double x) {
              const double t = std::tanh(x);
              return 1.0 - t * t;
            }};
  }
  if (label == "paper_piecewise") {
    // x - 1 below zero, flat zero on [0, 1/2), (x - 1/2)^2 above.
    return piecewise_polynomial(label, {0.0, 0.5}, {{-1.0, 1.0}, {0.0}, {0.25, -1.0, 1.0}});
  }
  throw ConfigError("unknown nonlinearity '" + label + "'");
}

Field apply(const LocalFunction& f, const Field& x) {
  require(!x.space()->is_complex(), "nonlinearity applies to real fields");
  Field out(x.space());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f.eval(x[i]);
  return out;
}

Field derivative(const LocalFunction& f, const Field& x) {
  require(!x.space()->is_complex(), "nonlinearity applies to real fields");
  Field out(x.space());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f.deriv(x[i]);
  return out;
}

}  // namespace critfilt
