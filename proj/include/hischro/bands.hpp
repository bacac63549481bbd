#pragma once

#include <Eigen/Core>

#include <cmath>

namespace hischro {

/// C^4 smoothstep u^5 (126 - 420u + 540u^2 - 315u^3 + 70u^4) on [0,1].
inline double smoothstep(double u)
{
    if (u <= 0)
        return 0;
    if (u >= 1)
        return 1;
    const double u2 = u * u;
    return u2 * u2 * u * (126 + u * (-420 + u * (540 + u * (-315 + u * 70))));
}

/// Mother bump: 1 on |x| <= 1, 0 on |x| >= 2, 1 - smoothstep(|x| - 1) between.
inline double mother_bump(double x)
{
    return 1.0 - smoothstep(std::abs(x) - 1.0);
}

/// Littlewood-Paley piece chi_N(r) = chi(r / 2^(N+1)) - chi(r / 2^N),
/// supported on [2^N, 2^(N+2)].
struct DyadicBand {
    int N = 0;

    double lower() const { return std::ldexp(1.0, N); }
    double upper() const { return std::ldexp(1.0, N + 2); }
    double operator()(double r) const
    {
        return mother_bump(std::ldexp(r, -(N + 1))) - mother_bump(std::ldexp(r, -N));
    }
};

/// Smooth angular partition of unity: theta^j(xi) = g_j / sum_k g_k where
/// g_j ramps from 0 at |xi_j|/|xi| = 1/sqrt(2d) to 1 at 1/sqrt(d).
struct AngularSector {
    int j = 0; ///< axis, 0-based
    int d = 1;

    template <typename Derived>
    double operator()(const Eigen::MatrixBase<Derived>& xi) const
    {
        const double r = xi.norm();
        if (r == 0)
            return 0;
        double sum = 0;
        double mine = 0;
        for (int k = 0; k < d; ++k) {
            const double g = weight(std::abs(xi(k)) / r);
            sum += g;
            if (k == j)
                mine = g;
        }
        return mine / sum;
    }

    double weight(double cosine) const
    {
        const double a = 1.0 / std::sqrt(2.0 * d);
        const double b = 1.0 / std::sqrt(double(d));
        if (d == 1)
            return 1.0;
        return smoothstep((cosine - a) / (b - a));
    }
};

} // namespace hischro
