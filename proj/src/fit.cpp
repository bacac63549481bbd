#include "hischro/fit.hpp"

#include "hischro/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace hischro {

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DomainError("line fit needs at least two (x, y) pairs");
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, 0) = 1;
        A(i, 1) = x[i];
        b(i) = y[i];
    }
    const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    const double ss_res = (A * coef - b).squaredNorm();
    LineFit f;
    f.intercept = coef(0);
    f.slope = coef(1);
    // Constant data fits exactly; report r^2 = 1 rather than 0/0.
    f.r_squared = ss_tot > 0 ? std::clamp(1 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return f;
}

LogLogFit loglog_fit(const std::vector<std::pair<double, double>>& points, double discard_fraction)
{
    if (!(discard_fraction >= 0 && discard_fraction < 1))
        throw DomainError("discard fraction must lie in [0, 1)");
    const std::size_t skip = static_cast<std::size_t>(std::floor(discard_fraction * points.size()));
    if (points.size() < skip + 6)
        throw DomainError("log-log fit needs at least 6 retained points, got " +
                          std::to_string(points.size() > skip ? points.size() - skip : 0));
    std::vector<double> lx, ly;
    for (std::size_t i = skip; i < points.size(); ++i) {
        const auto [x, y] = points[i];
        if (!(x > 0) || !(y > 0))
            throw DomainError("log-log fit needs positive values");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    const LineFit line = least_squares_line(lx, ly);
    LogLogFit f;
    f.slope = line.slope;
    f.intercept = line.intercept;
    f.r_squared = line.r_squared;
    f.used = lx.size();
    return f;
}

} // namespace hischro
