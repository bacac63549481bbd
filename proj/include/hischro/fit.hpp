#pragma once

#include <utility>
#include <vector>

namespace hischro {

struct LogLogFit {
    double slope = 0;
    double intercept = 0; ///< natural log of the prefactor
    double r_squared = 0;
    std::size_t used = 0; ///< points retained after the discard
};

/// Ordinary least squares of log y on log x after dropping the leading
/// discard_fraction of the points (in the given order). Needs at least six
/// retained points, all with positive coordinates.
LogLogFit loglog_fit(const std::vector<std::pair<double, double>>& points,
                     double discard_fraction = 0.0);

/// Least-squares line y = a + b x; returns {a, b, r^2}. At least two points.
struct LineFit {
    double intercept = 0;
    double slope = 0;
    double r_squared = 0;
};
LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y);

} // namespace hischro
