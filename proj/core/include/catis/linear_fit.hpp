#pragma once

#include <span>

namespace catis {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of y on x. Needs >= 2 points with >= 2 distinct
/// abscissae; R^2 is 1 when y has no spread.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace catis
