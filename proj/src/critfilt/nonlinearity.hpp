#pragma once

#include <functional>
#include <string>
#include <vector>

#include "critfilt/field.hpp"

namespace critfilt {

/// Monotone pointwise function f with its derivative f'.
struct LocalFunction {
  std::string label;
  std::function<double(double)> eval;
  std::function<double(double)> deriv;
};

/// Catalog entries: identity, exponential, paper_piecewise, tanh.
LocalFunction builtin(const std::string& label);

/// Piecewise polynomial.  Segment i covers [breakpoints[i-1], breakpoints[i])
/// and evaluates sum_j coefficients[i][j] x^j; there is one more segment than
/// breakpoints.  Where the function jumps at a breakpoint the derivative there
/// is reported as 1.  Throws ConfigError if the result is not monotone.
LocalFunction piecewise_polynomial(std::string label, std::vector<double> breakpoints,
                                   std::vector<std::vector<double>> coefficients);

Field apply(const LocalFunction& f, const Field& x);
/// Pointwise f'(x); the diagonal of the linearized response.
Field derivative(const LocalFunction& f, const Field& x);

}  // namespace critfilt
