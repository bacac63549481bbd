#pragma once

#include "hischro/error.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace hischro {

using Rational = boost::multiprecision::cpp_rational;

/// Taylor coefficient (2j-2)! / (j! (j-1)! 2^(2j-1)) of sqrt(1+x) - 1, exact.
Rational alpha_coefficient(int j);

template <typename Scalar>
Scalar to_scalar(const Rational& q)
{
    return static_cast<Scalar>(q);
}

/// Radial profile of the order-J expansion of the pseudo-relativistic
/// symbol (hbar = m = 1):
///
///   omega(r) = sum_{j=1..J} (-1)^(j+1) alpha(j) r^(2j) / c^(2j-2).
///
/// All derivatives are evaluated by Horner's rule in s = (r/c)^2 with the
/// powers of c applied last, so omega_c(r) = c^2 omega_1(r/c) holds to
/// rounding.
template <typename Scalar = double>
class DispersionSymbol {
public:
    DispersionSymbol(int J, Scalar c) : J_(J), c_(c)
    {
        if (J < 1)
            throw DomainError("expansion order J must be >= 1, got " + std::to_string(J));
        if (!(c >= Scalar(1)))
            throw DomainError("speed of light c must be >= 1");
        p0_.reserve(J);
        p1_.reserve(J);
        p2_.reserve(J);
        for (int j = 1; j <= J; ++j) {
            Rational a = alpha_coefficient(j);
            if (j % 2 == 0)
                a = -a;
            p0_.push_back(to_scalar<Scalar>(a));
            p1_.push_back(to_scalar<Scalar>(a * (2 * j)));
            p2_.push_back(to_scalar<Scalar>(a * (2 * j) * (2 * j - 1)));
            if (j >= 2)
                p3_.push_back(to_scalar<Scalar>(a * (2 * j) * (2 * j - 1) * (2 * j - 2)));
        }
    }

    int order() const { return J_; }
    Scalar speed() const { return c_; }
    bool odd() const { return J_ % 2 == 1; }

    Scalar operator()(Scalar r) const { return omega(r, 0); }

    /// omega or its first three derivatives at radius r >= 0.
    Scalar omega(Scalar r, int derivative = 0) const
    {
        const Scalar u = r / c_;
        const Scalar s = u * u;
        switch (derivative) {
        case 0: return c_ * c_ * (s * horner(p0_, s));
        case 1: return r * horner(p1_, s);
        case 2: return horner(p2_, s);
        case 3: return (r / (c_ * c_)) * horner(p3_, s);
        default:
            throw DomainError("derivative order must be in 0..3, got " + std::to_string(derivative));
        }
    }

    /// omega and omega' continued to complex radius (the symbol is a polynomial).
    std::complex<Scalar> omega(std::complex<Scalar> z, int derivative) const
    {
        const std::complex<Scalar> u = z / c_;
        const std::complex<Scalar> s = u * u;
        switch (derivative) {
        case 0: return c_ * c_ * (s * horner(p0_, s));
        case 1: return z * horner(p1_, s);
        default:
            throw DomainError("complex radius supports derivative 0 or 1");
        }
    }

    /// omega'(r)/r, evaluated without the division.
    Scalar slope_ratio(Scalar r) const
    {
        const Scalar u = r / c_;
        return horner(p1_, u * u);
    }

    /// omega'(c u)/(c u) and omega''(c u) as functions of u = r/c.
    Scalar normalized_slope_ratio(Scalar u) const { return horner(p1_, u * u); }
    Scalar normalized_curvature(Scalar u) const { return horner(p2_, u * u); }

private:
    template <typename T>
    static T horner(const std::vector<Scalar>& p, T s)
    {
        T acc(0);
        for (auto it = p.rbegin(); it != p.rend(); ++it)
            acc = acc * s + *it;
        return acc;
    }

    int J_;
    Scalar c_;
    std::vector<Scalar> p0_, p1_, p2_, p3_;
};

/// sqrt(c^4 + c^2 r^2) - c^2, written as c^2 s / (sqrt(1+s) + 1) with
/// s = (r/c)^2 so that small r loses no digits.
template <typename Scalar>
Scalar pseudo_symbol(Scalar c, Scalar r)
{
    using std::sqrt;
    const Scalar u = r / c;
    const Scalar s = u * u;
    return c * c * (s / (sqrt(Scalar(1) + s) + Scalar(1)));
}

/// alpha(J+1) c^(-2J) r^(2J+2); bounds |pseudo_symbol - omega_J| for r <= c.
template <typename Scalar = double>
Scalar taylor_remainder_bound(int J, Scalar c, Scalar r)
{
    if (J < 1)
        throw DomainError("expansion order J must be >= 1");
    const Scalar u = r / c;
    Scalar p = c * c;
    for (int k = 0; k < J + 1; ++k)
        p *= u * u;
    return to_scalar<Scalar>(alpha_coefficient(J + 1)) * p;
}

/// det of the Hessian of xi -> omega(|xi|) at any |xi| = r:
/// omega''(r) (omega'(r)/r)^(d-1).
template <typename Scalar>
Scalar hessian_determinant(const DispersionSymbol<Scalar>& sym, Scalar r, int d)
{
    if (d < 1)
        throw DomainError("dimension must be >= 1");
    if (!(r > Scalar(0)))
        throw DomainError("hessian_determinant needs r > 0; at the origin the Hessian is the identity");
    const Scalar a = sym.slope_ratio(r);
    Scalar det = sym.omega(r, 2);
    for (int k = 1; k < d; ++k)
        det *= a;
    return det;
}

/// Full Hessian matrix A I + B xi xi^T / |xi|^2 with A = omega'/r and
/// B = omega'' - A.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
hessian_matrix(const DispersionSymbol<Scalar>& sym,
               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& xi)
{
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index d = xi.size();
    const Scalar r = xi.norm();
    if (r == Scalar(0))
        return Mat::Identity(d, d) * sym.omega(Scalar(0), 2);
    const Scalar a = sym.slope_ratio(r);
    const Scalar b = sym.omega(r, 2) - a;
    return Mat::Identity(d, d) * a + (b / (r * r)) * (xi * xi.transpose());
}

/// Rank of the Hessian on the sphere |xi| = r, from the two radial factors.
template <typename Scalar>
int hessian_rank(const DispersionSymbol<Scalar>& sym, Scalar r, int d, Scalar tol = Scalar(-1))
{
    using std::abs;
    if (d < 1)
        throw DomainError("dimension must be >= 1");
    if (!(r > Scalar(0)))
        throw DomainError("hessian_rank needs r > 0");
    if (tol < Scalar(0))
        tol = Scalar(1e-9);
    const bool curved = abs(sym.omega(r, 2)) > tol;
    const bool sloped = abs(sym.slope_ratio(r)) > tol;
    if (curved && sloped)
        return d;
    if (sloped)
        return d - 1;
    if (curved)
        return 1;
    throw InconsistencyError("omega' and omega'' vanish together; tolerance too loose for this symbol");
}

struct DegenerateSpheres {
    double r1 = 0;    ///< zero of omega', in (c, 2c)
    double r2 = 0;    ///< zero of omega'', in (c/2, c)
    double delta = 0; ///< min(c - r2, r1 - c) / c
};

/// Bisection for the zeros of omega'' on (c/2, c) and omega' on (c, 2c).
/// Returns nothing for odd J, where neither derivative vanishes.
std::optional<DegenerateSpheres> find_degenerate_spheres(const DispersionSymbol<double>& sym);

/// What is sampled inside a region of frequency space.
enum class HessianQuantity {
    normalized_determinant, ///< |det H| / (1 + r/c)^((2J-2)d)
    determinant,            ///< |det H|
    axis_curvature,         ///< |d^2 Omega / d xi_j^2| on the sector of axis j
    transverse_determinant, ///< |det| of H with row/column j removed, on sector j
};

struct HessianReport {
    std::string region;
    double r_lo = 0;
    double r_hi = 0;
    bool sector_restricted = false;
    HessianQuantity quantity = HessianQuantity::normalized_determinant;
    double min_value = 0;
    double bound = 0;
    std::size_t samples = 0;
    bool pass = false;
};

struct SamplingSpec {
    double r_min_over_c = 1e-3;
    double r_max_over_c = 8.0;
    int points_per_band = 64;  ///< log-spaced radii per dyadic band
    int directions = 64;       ///< sample directions on the sphere (d >= 2)
    /// Annulus half-widths use delta_fraction * delta(J).
    double delta_fraction = 1.0 / 32;
    /// Floor for the normalized determinant; empty selects the built-in
    /// empirical value for (J, d).
    std::optional<double> floor;
};

/// Built-in floor for inf |det H| / (1 + r/c)^((2J-2)d), J <= 8, d <= 3.
double default_determinant_floor(int J, int d);

/// Region check used by verify_lower_bounds; exposed for ad-hoc regions.
HessianReport check_region(const DispersionSymbol<double>& sym, int d, double r_lo, double r_hi,
                           HessianQuantity quantity, double bound, const SamplingSpec& spec,
                           std::vector<double> extra_radii = {});

/// Odd J: one report on [r_min, r_max]. Even J: the r1 sector, r2 sector
/// and off-annulus reports, in that order.
std::vector<HessianReport> verify_lower_bounds(const DispersionSymbol<double>& sym, int d,
                                               const SamplingSpec& spec = {});

inline bool all_pass(const std::vector<HessianReport>& reports)
{
    for (const auto& r : reports)
        if (!r.pass)
            return false;
    return true;
}

std::string to_string(HessianQuantity q);

} // namespace hischro
