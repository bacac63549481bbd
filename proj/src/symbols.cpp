#include "hischro/symbols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hischro {

namespace {

using boost::multiprecision::cpp_int;

cpp_int factorial(int n)
{
    cpp_int f = 1;
    for (int k = 2; k <= n; ++k)
        f *= k;
    return f;
}

// Zero of f on (lo, hi) by bisection; f(lo) > 0 > f(hi) is required.
template <typename F>
double bisect(F f, double lo, double hi, const char* what)
{
    double flo = f(lo);
    double fhi = f(hi);
    if (!(flo > 0 && fhi < 0))
        throw InternalError(std::string("sign condition fails on the bracket for ") + what);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        const double fm = f(mid);
        if (fm > 0)
            lo = mid;
        else if (fm < 0)
            hi = mid;
        else
            return mid;
        if (hi - lo <= 1e-14 * lo)
            break;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> sample_radii(double lo, double hi, int per_band)
{
    std::vector<double> r;
    if (hi <= lo) {
        r.push_back(lo);
        return r;
    }
    const double bands = std::max(std::log2(hi / lo), 1.0);
    const int n = std::max(2, static_cast<int>(std::ceil(bands * per_band)) + 1);
    const double step = std::log(hi / lo) / (n - 1);
    for (int k = 0; k < n; ++k)
        r.push_back(lo * std::exp(step * k));
    r.back() = hi;
    return r;
}

// Unit directions on S^(d-1): equispaced circle for d = 2, Fibonacci
// lattice for d = 3.
std::vector<Eigen::VectorXd> sample_directions(int d, int count)
{
    std::vector<Eigen::VectorXd> dirs;
    if (d == 1) {
        dirs.emplace_back(Eigen::VectorXd::Ones(1));
        dirs.emplace_back(-Eigen::VectorXd::Ones(1));
        return dirs;
    }
    if (d == 2) {
        for (int k = 0; k < count; ++k) {
            const double a = 2 * std::numbers::pi * k / count;
            Eigen::VectorXd v(2);
            v << std::cos(a), std::sin(a);
            dirs.push_back(v);
        }
        return dirs;
    }
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / count;
        const double rho = std::sqrt(1.0 - z * z);
        Eigen::VectorXd v(d);
        v << rho * std::cos(golden * k), rho * std::sin(golden * k), z;
        dirs.push_back(v);
    }
    return dirs;
}

// Directions on the boundary of sector j, where xi_j^2/|xi|^2 = 1/(2d):
// the least favourable points for the sector quantities.
std::vector<Eigen::VectorXd> sector_edge_directions(int d, int j)
{
    std::vector<Eigen::VectorXd> dirs;
    if (d == 1)
        return dirs;
    const double uj = std::sqrt(1.0 / (2.0 * d));
    const double rest = std::sqrt((1.0 - uj * uj) / (d - 1));
    for (int sign = -1; sign <= 1; sign += 2) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(d, rest);
        v(j) = sign * uj;
        dirs.push_back(v);
        if (d == 3) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
            w(j) = sign * uj;
            w((j + 1) % d) = std::sqrt(1.0 - uj * uj);
            dirs.push_back(w);
        }
    }
    return dirs;
}

double delete_axis_determinant(const Eigen::MatrixXd& h, int j)
{
    const int d = static_cast<int>(h.rows());
    if (d == 1)
        return 1.0; // empty minor
    Eigen::MatrixXd m(d - 1, d - 1);
    for (int a = 0, ra = 0; a < d; ++a) {
        if (a == j)
            continue;
        for (int b = 0, rb = 0; b < d; ++b) {
            if (b == j)
                continue;
            m(ra, rb++) = h(a, b);
        }
        ++ra;
    }
    return m.determinant();
}

} // namespace

Rational alpha_coefficient(int j)
{
    if (j < 1)
        throw DomainError("alpha_coefficient needs j >= 1, got " + std::to_string(j));
    cpp_int num = factorial(2 * j - 2);
    cpp_int den = factorial(j) * factorial(j - 1);
    den <<= (2 * j - 1);
    return Rational(num, den);
}

std::optional<DegenerateSpheres> find_degenerate_spheres(const DispersionSymbol<double>& sym)
{
    if (sym.odd())
        return std::nullopt;
    const double c = sym.speed();
    const double u2 = bisect([&](double u) { return sym.normalized_curvature(u); }, 0.5, 1.0,
                             "omega'' on (c/2, c)");
    const double u1 = bisect([&](double u) { return sym.normalized_slope_ratio(u); }, 1.0, 2.0,
                             "omega' on (c, 2c)");
    DegenerateSpheres s;
    s.r1 = c * u1;
    s.r2 = c * u2;
    s.delta = std::min(1.0 - u2, u1 - 1.0);
    return s;
}

double default_determinant_floor(int J, int d)
{
    // Half the observed infimum of |det H| / (1 + r/c)^((2J-2)d) over
    // r in [1e-3 c, 8c], and for even J outside annuli of half-width
    // delta/32 around r1 and r2. The infimum does not depend on c.
    static const double table[8][3] = {
        {0.5, 0.5, 0.5},
        {2e-3, 2e-4, 3e-7},
        {3.5e-2, 2e-3, 1e-4},
        {2e-4, 2e-6, 2.5e-10},
        {2.5e-3, 1e-5, 2.5e-8},
        {1.5e-5, 1e-8, 1e-13},
        {1.5e-4, 4e-8, 7e-12},
        {1e-6, 7e-11, 4e-17},
    };
    if (J < 1 || J > 8 || d < 1 || d > 3)
        throw ConfigError("no built-in determinant floor for J=" + std::to_string(J) +
                          ", d=" + std::to_string(d) + "; set sampling.floor");
    return table[J - 1][d - 1];
}

std::string to_string(HessianQuantity q)
{
    switch (q) {
    case HessianQuantity::normalized_determinant: return "normalized_determinant";
    case HessianQuantity::determinant: return "determinant";
    case HessianQuantity::axis_curvature: return "axis_curvature";
    case HessianQuantity::transverse_determinant: return "transverse_determinant";
    }
    return "unknown";
}

HessianReport check_region(const DispersionSymbol<double>& sym, int d, double r_lo, double r_hi,
                           HessianQuantity quantity, double bound, const SamplingSpec& spec,
                           std::vector<double> extra_radii)
{
    if (d < 1 || d > 3)
        throw DomainError("dimension must be 1, 2 or 3");
    if (spec.points_per_band < 10)
        throw ConfigError("sampling.points_per_band must be >= 10 per dyadic band");
    if (!(r_lo > 0) || !(r_hi >= r_lo))
        throw DomainError("region needs 0 < r_lo <= r_hi");

    const double c = sym.speed();
    const int J = sym.order();
    std::vector<double> radii = sample_radii(r_lo, r_hi, spec.points_per_band);
    for (double r : extra_radii)
        if (r >= r_lo && r <= r_hi)
            radii.push_back(r);

    HessianReport rep;
    rep.r_lo = r_lo;
    rep.r_hi = r_hi;
    rep.quantity = quantity;
    rep.bound = bound;
    rep.min_value = std::numeric_limits<double>::infinity();
    rep.sector_restricted = quantity == HessianQuantity::axis_curvature ||
                            quantity == HessianQuantity::transverse_determinant;

    if (!rep.sector_restricted) {
        for (double r : radii) {
            double v = std::abs(hessian_determinant(sym, r, d));
            if (quantity == HessianQuantity::normalized_determinant)
                v /= std::pow(1.0 + r / c, (2.0 * J - 2.0) * d);
            rep.min_value = std::min(rep.min_value, v);
            ++rep.samples;
        }
    } else {
        const auto dirs = sample_directions(d, spec.directions);
        const double edge = 1.0 / std::sqrt(2.0 * d);
        for (int j = 0; j < d; ++j) {
            std::vector<Eigen::VectorXd> in_sector;
            for (const auto& e : dirs)
                if (std::abs(e(j)) >= edge)
                    in_sector.push_back(e);
            for (auto& e : sector_edge_directions(d, j))
                in_sector.push_back(e);
            for (double r : radii) {
                for (const auto& e : in_sector) {
                    const Eigen::VectorXd xi = r * e;
                    const Eigen::MatrixXd h = hessian_matrix<double>(sym, xi);
                    const double v = quantity == HessianQuantity::axis_curvature
                                         ? std::abs(h(j, j))
                                         : std::abs(delete_axis_determinant(h, j));
                    rep.min_value = std::min(rep.min_value, v);
                    ++rep.samples;
                }
            }
        }
    }
    rep.pass = rep.samples > 0 && rep.min_value >= bound;
    return rep;
}

std::vector<HessianReport> verify_lower_bounds(const DispersionSymbol<double>& sym, int d,
                                               const SamplingSpec& spec)
{
    if (spec.r_max_over_c < 8.0)
        throw ConfigError("sampling.r_max_over_c must be >= 8");
    if (!(spec.r_min_over_c > 0) || spec.r_min_over_c >= 1)
        throw ConfigError("sampling.r_min_over_c must lie in (0, 1)");
    if (!(spec.delta_fraction > 0) || spec.delta_fraction > 1)
        throw ConfigError("sampling.delta_fraction must lie in (0, 1]");

    const double c = sym.speed();
    const double lo = spec.r_min_over_c * c;
    const double hi = spec.r_max_over_c * c;
    const double floor = spec.floor.value_or(default_determinant_floor(sym.order(), d));
    std::vector<HessianReport> out;

    if (sym.odd()) {
        auto rep = check_region(sym, d, lo, hi, HessianQuantity::normalized_determinant, floor, spec);
        rep.region = "all radii";
        out.push_back(rep);
        return out;
    }

    const DegenerateSpheres s = *find_degenerate_spheres(sym);
    const double w = spec.delta_fraction * s.delta * c;
    const double sector_bound = 1.0 / (8.0 * d);

    auto r1 = check_region(sym, d, s.r1 - 2 * w, s.r1 + 2 * w, HessianQuantity::axis_curvature,
                           sector_bound, spec, {s.r1});
    r1.region = "r1 annulus, sector";
    out.push_back(r1);

    auto r2 = check_region(sym, d, s.r2 - 2 * w, s.r2 + 2 * w,
                           HessianQuantity::transverse_determinant, sector_bound, spec, {s.r2});
    r2.region = "r2 annulus, sector";
    out.push_back(r2);

    // Outside both annuli: three radial pieces.
    HessianReport off;
    off.region = "outside annuli";
    off.r_lo = lo;
    off.r_hi = hi;
    off.quantity = HessianQuantity::normalized_determinant;
    off.bound = floor;
    off.min_value = std::numeric_limits<double>::infinity();
    const double pieces[3][2] = {{lo, s.r2 - w}, {s.r2 + w, s.r1 - w}, {s.r1 + w, hi}};
    for (const auto& p : pieces) {
        auto rep = check_region(sym, d, p[0], p[1], HessianQuantity::normalized_determinant, floor,
                                spec);
        off.min_value = std::min(off.min_value, rep.min_value);
        off.samples += rep.samples;
    }
    off.pass = off.min_value >= floor;
    out.push_back(off);
    return out;
}

} // namespace hischro
