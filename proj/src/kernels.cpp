#include "hischro/kernels.hpp"

#include "hischro/fit.hpp"
#include "hischro/io.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace hischro {

namespace {

using Gauss16 = boost::math::quadrature::gauss<double, 16>;

// e^(-(r/scale)^8) is below 1e-18 beyond this multiple of the scale.
const double damping_reach = std::pow(std::log(1e18), 0.125);

double angular_weight(int d)
{
    const double two_pi = 2 * std::numbers::pi;
    switch (d) {
    case 1: return 2 / two_pi;
    case 2: return two_pi / (two_pi * two_pi);
    default: return 4 * std::numbers::pi / (two_pi * two_pi * two_pi);
    }
}

// J_0 at complex argument: power series (long double) for |z| <= 17,
// Hankel asymptotic series truncated at its smallest term beyond that.
// libm and Boost only cover real arguments.
// Needs Re z >= 0 (the asymptotic branch).
Complex bessel_j0(Complex z)
{
    if (std::abs(z) <= 17) {
        using CL = std::complex<long double>;
        const CL q = -CL(z) * CL(z) / 4.0L;
        CL term = 1, sum = 1;
        for (int k = 1; k < 80; ++k) {
            term *= q / static_cast<long double>(k * k);
            sum += term;
            if (std::abs(term) < 1e-21L * std::abs(sum))
                break;
        }
        return Complex(sum);
    }
    Complex p = 1, q = 0, term = 1;
    double last = 1;
    for (int k = 1; k < 60; ++k) {
        const double m = 2 * k - 1;
        term *= m * m / (8.0 * k) / z;
        if (std::abs(term) > last)
            break;
        last = std::abs(term);
        switch (k % 4) {
        case 1: q -= term; break; // odd orders alternate starting with -
        case 2: p -= term; break;
        case 3: q += term; break;
        default: p += term; break;
        }
    }
    const Complex chi = z - std::numbers::pi / 4;
    return std::sqrt(2.0 / (std::numbers::pi * z)) * (p * std::cos(chi) - q * std::sin(chi));
}

Complex average(int d, Complex x)
{
    switch (d) {
    case 1: return std::cos(x);
    case 2: return bessel_j0(x);
    default: return std::sin(x) / x;
    }
}

// Ray angle for the deformed tail; e^(-(z/L)^8) decays for |arg z| < pi/16.
const double ray_angle = std::numbers::pi / 20;

} // namespace

double damping_scale(const DispersionSymbol<double>& sym, double speed, double margin)
{
    const int J = sym.order();
    const double c = sym.speed();
    const double balance = std::pow(std::abs(speed) * std::pow(c, 2 * J - 2), 1.0 / (2 * J - 1));
    return margin * std::max(c, balance);
}

RadialKernel::RadialKernel(const DispersionSymbol<double>& sym, int d, double t,
                           const KernelCutoff& cutoff, double max_speed, const ResolutionSpec& res)
    : d_(d), t_(t), vmax_(max_speed)
{
    if (d < 1 || d > 3)
        throw DomainError("kernel dimension must be 1, 2 or 3");
    if (t == 0 || !std::isfinite(t))
        throw DomainError("kernel needs t != 0");
    if (!(max_speed >= 0))
        throw DomainError("speed bound must be nonnegative");
    if (res.points_per_oscillation < 32)
        throw ResolutionError("quadrature at " + format_double(res.points_per_oscillation) +
                              " points per oscillation is below the floor; use >= 32");

    std::vector<double> breaks;
    double hmax;
    std::function<double(double)> eta;
    double L = 0;
    bool ray = false;
    if (const auto* band = std::get_if<DyadicBand>(&cutoff)) {
        breaks = {band->lower(), 2 * band->lower(), band->upper()};
        hmax = band->lower() / 4;
        const DyadicBand b = *band;
        eta = [b](double r) { return b(r); };
    } else if (const auto* sum = std::get_if<BandSum>(&cutoff)) {
        if (sum->hi < sum->lo)
            throw DomainError("band sum needs lo <= hi");
        for (int N = sum->lo; N <= sum->hi + 2; ++N)
            breaks.push_back(std::ldexp(1.0, N));
        hmax = std::ldexp(1.0, sum->lo) / 4;
        const BandSum b = *sum;
        eta = [b](double r) { return b(r); };
    } else {
        L = std::get<Damping>(cutoff).scale;
        if (!(L > 0))
            throw DomainError("full kernel needs a positive damping scale");
        const double R = damping_reach * L;
        breaks = {0.0, R};
        if (res.deform_tail) {
            // Start of the tail where |omega'| >= max(2 v_max, c) with a fixed
            // sign all the way out: no stationary point for any |v| <= v_max.
            const double c = sym.speed();
            const double floor = std::max(2 * max_speed, c);
            const double sign = sym.omega(R, 1) >= 0 ? 1.0 : -1.0;
            const int steps = 4096;
            double rs = R;
            for (int i = steps; i >= 0; --i) {
                const double rr = c + (R - c) * i / steps;
                if (sign * sym.omega(rr, 1) < floor)
                    break;
                rs = rr;
            }
            if (rs < R) {
                breaks = {0.0, rs};
                ray = true;
            }
        }
        hmax = L / 16;
        eta = [L](double r) {
            const double u = r / L;
            const double u2 = u * u, u4 = u2 * u2;
            return std::exp(-u4 * u4);
        };
    }

    // Phase per panel so that 16 nodes give the requested density.
    const double panel_phase = 2 * std::numbers::pi * 16 / res.points_per_oscillation;
    const double at = std::abs(t);
    auto rate = [&](double r) { return at * (std::abs(sym.omega(r, 1)) + vmax_); };

    const auto& x = Gauss16::abscissa();
    const auto& gw = Gauss16::weights();
    std::vector<double> r;
    std::vector<Complex> w;
    const double pref = angular_weight(d);

    for (std::size_t piece = 0; piece + 1 < breaks.size(); ++piece) {
        const double end = breaks[piece + 1];
        double a = breaks[piece];
        while (a < end) {
            double h = std::min(hmax, end - a);
            for (int it = 0; it < 8; ++it) {
                const double k = std::max({rate(a), rate(a + 0.5 * h), rate(a + h)});
                const double hn = std::min({hmax, end - a, k > 0 ? panel_phase / k : hmax});
                if (hn >= 0.999 * h)
                    break;
                h = hn;
            }
            if (end - a - h < 1e-3 * h)
                h = end - a;
            const double mid = a + 0.5 * h, half = 0.5 * h;
            for (std::size_t i = 0; i < x.size(); ++i) {
                for (int sgn = -1; sgn <= 1; sgn += 2) {
                    if (x[i] == 0 && sgn > 0)
                        continue;
                    const double rr = mid + sgn * half * x[i];
                    const double amp = std::pow(rr, d - 1) * eta(rr) * gw[i] * half * pref;
                    r.push_back(rr);
                    w.push_back(std::polar(amp, -t * sym.omega(rr, 0)));
                }
            }
            if (r.size() > res.max_nodes)
                throw ResolutionError("kernel quadrature needs more than " +
                                      std::to_string(res.max_nodes) +
                                      " nodes; reduce t or the search range, or raise max_nodes");
            a += h;
        }
    }
    const auto n = static_cast<Eigen::Index>(r.size());
    r_ = Eigen::Map<const Eigen::ArrayXd>(r.data(), n);
    const Eigen::Map<const Eigen::ArrayXcd> wm(w.data(), n);
    wre_ = wm.real();
    wim_ = wm.imag();
    if (ray)
        build_ray(sym, breaks.back(), L, hmax, panel_phase, pref);
}

// The integrand is entire, so the tail [r_s, inf) may be replaced by the ray
// r_s + rho e^(-i s theta) with s = sign(t omega'(r_s)). Along it the phase
// factor decays like e^(-|t| rho sin(theta) (|omega'| - v)), and |omega'| >= 2 v_max
// keeps that rate positive for every admissible speed.
void RadialKernel::build_ray(const DispersionSymbol<double>& sym, double rs, double L,
                             double hmax, double panel_phase, double pref)
{
    const double at = std::abs(t_);
    const double s = (t_ * sym.omega(rs, 1) >= 0) ? 1.0 : -1.0;
    const Complex dir = std::polar(1.0, -s * ray_angle);
    auto log_envelope = [&](Complex z) {
        const Complex u4 = std::pow(z / L, 4);
        return (d_ - 1) * std::log(std::abs(z)) + t_ * sym.omega(z, 0).imag() -
               (u4 * u4).real() + at * vmax_ * std::abs(z.imag());
    };
    auto rate = [&](Complex z) { return at * (std::abs(sym.omega(z, 1)) + vmax_); };
    const double stop = std::max(log_envelope(rs), 0.0) + std::log(1e-18);

    const auto& x = Gauss16::abscissa();
    const auto& gw = Gauss16::weights();
    std::vector<Complex> zs, ws;
    double a = 0;
    for (int panel = 0;; ++panel) {
        if (panel > 200000)
            throw InternalError("deformed kernel tail did not decay");
        double h = hmax;
        for (int it = 0; it < 8; ++it) {
            const double k = std::max({rate(rs + a * dir), rate(rs + (a + 0.5 * h) * dir),
                                       rate(rs + (a + h) * dir)});
            const double hn = std::min(hmax, panel_phase / k);
            if (hn >= 0.999 * h)
                break;
            h = hn;
        }
        const double mid = a + 0.5 * h, half = 0.5 * h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                if (x[i] == 0 && sgn > 0)
                    continue;
                const Complex z = rs + (mid + sgn * half * x[i]) * dir;
                const Complex u4 = std::pow(z / L, 4);
                zs.push_back(z);
                ws.push_back(pref * gw[i] * half * dir * std::pow(z, d_ - 1) *
                             std::exp(-Complex(0, t_) * sym.omega(z, 0) - u4 * u4));
            }
        }
        a += h;
        if (log_envelope(rs + a * dir) < stop)
            break;
    }
    const auto n = static_cast<Eigen::Index>(zs.size());
    ray_z_ = Eigen::Map<const Eigen::ArrayXcd>(zs.data(), n);
    ray_w_ = Eigen::Map<const Eigen::ArrayXcd>(ws.data(), n);
}

Complex RadialKernel::operator()(double speed) const
{
    speed = std::abs(speed);
    if (speed > vmax_ * (1 + 1e-12))
        throw DomainError("speed " + format_double(speed) + " exceeds the quadrature's bound " +
                          format_double(vmax_));
    if (speed == 0)
        return Complex(wre_.sum(), wim_.sum()) + ray_w_.sum();
    const double k = t_ * speed;
    Complex tail = 0;
    for (Eigen::Index i = 0; i < ray_z_.size(); ++i)
        tail += ray_w_[i] * average(d_, std::abs(k) * ray_z_[i]);
    if (d_ == 2) {
        double re = 0, im = 0;
        for (Eigen::Index i = 0; i < r_.size(); ++i) {
            const double b = ::j0(k * r_[i]);
            re += wre_[i] * b;
            im += wim_[i] * b;
        }
        return Complex(re, im) + tail;
    }
    // Nodes are interior Gauss points, so k r > 0 and sin(x)/x is safe.
    const Eigen::ArrayXd a = d_ == 1 ? Eigen::ArrayXd((k * r_).cos())
                                     : Eigen::ArrayXd((k * r_).sin() / (k * r_));
    return Complex((wre_ * a).sum(), (wim_ * a).sum()) + tail;
}

Complex kernel_eval(const DispersionSymbol<double>& sym, double t, const Eigen::VectorXd& v,
                    const KernelCutoff& cutoff, const ResolutionSpec& res)
{
    const double speed = v.norm();
    RadialKernel k(sym, static_cast<int>(v.size()), t, cutoff, speed, res);
    return k(speed);
}

double search_speed_limit(const DispersionSymbol<double>& sym, const SearchCutoff& cutoff,
                          double margin)
{
    double lo = 0, hi = sym.speed();
    if (const auto* band = std::get_if<DyadicBand>(&cutoff)) {
        lo = band->lower();
        hi = band->upper();
    }
    double m = 0;
    const int n = 1024;
    for (int i = 0; i <= n; ++i)
        m = std::max(m, std::abs(sym.omega(lo + (hi - lo) * i / n, 1)));
    return margin * m;
}

SupResult kernel_sup_v(const DispersionSymbol<double>& sym, int d, double t,
                       const SearchCutoff& cutoff, const SearchSpec& spec)
{
    const double vmax = search_speed_limit(sym, cutoff, spec.margin);
    KernelCutoff kc;
    double width;
    if (const auto* band = std::get_if<DyadicBand>(&cutoff)) {
        kc = *band;
        width = band->upper() - band->lower();
    } else {
        kc = Damping{damping_scale(sym, vmax, std::get<FullKernel>(cutoff).margin)};
        width = sym.speed();
    }
    const RadialKernel kernel(sym, d, t, kc, vmax, spec.resolution);

    SupResult best;
    auto eval = [&](double v) {
        ++best.evaluations;
        return std::abs(kernel(v));
    };

    // Interference between stationary points oscillates in |v| with
    // period about 2 pi / (|t| width); sample a few points per period.
    const double periods = std::abs(t) * width * vmax / (2 * std::numbers::pi);
    const int m = std::clamp(static_cast<int>(std::ceil(4 * periods)), spec.min_coarse, spec.max_coarse);
    std::vector<double> vs(m + 1), fs(m + 1);
    int arg = 0;
    for (int i = 0; i <= m; ++i) {
        vs[i] = vmax * i / m;
        fs[i] = eval(vs[i]);
        if (fs[i] > fs[arg])
            arg = i;
    }
    best.value = fs[arg];
    best.speed = vs[arg];

    double a = vs[std::max(arg - 1, 0)], b = vs[std::min(arg + 1, m)];
    const double g = 0.5 * (std::sqrt(5.0) - 1);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    while (b - a > spec.rel_tol * std::max(vmax, 1e-300)) {
        if (f1 > f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(x2);
        }
    }
    for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}})
        if (f > best.value) {
            best.value = f;
            best.speed = x;
        }
    return best;
}

std::vector<double> log_spaced(double a, double b, int n)
{
    if (!(a > 0) || !(b > a) || n < 2)
        throw DomainError("log_spaced needs 0 < a < b and n >= 2");
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = a * std::pow(b / a, double(i) / (n - 1));
    out.back() = b;
    return out;
}

DecayFit fit_decay(std::vector<std::pair<double, double>> samples)
{
    if (samples.size() < 8)
        throw DomainError("decay fit needs at least 8 samples");
    for (const auto& [t, v] : samples)
        if (!(t > 0) || !(v > 0))
            throw DomainError("decay fit needs positive t and values");
    std::sort(samples.begin(), samples.end());
    if (samples.back().first < 10 * samples.front().first * (1 - 1e-12))
        throw DomainError("decay fit samples must span at least one decade in t");
    const LogLogFit f = loglog_fit(samples, 0.2);
    DecayFit out;
    out.slope = f.slope;
    out.prefactor = std::exp(f.intercept);
    out.r_squared = f.r_squared;
    out.t_min = samples[samples.size() - f.used].first;
    out.t_max = samples.back().first;
    return out;
}

std::vector<std::pair<double, double>> decay_samples(const DispersionSymbol<double>& sym, int d,
                                                     const std::vector<double>& ts,
                                                     const SearchCutoff& cutoff,
                                                     const SearchSpec& spec)
{
    std::vector<std::pair<double, double>> out;
    for (double t : ts)
        out.emplace_back(t, kernel_sup_v(sym, d, t, cutoff, spec).value);
    return out;
}

SearchCutoff BandPlacement::cutoff_for(double c) const
{
    if (full)
        return FullKernel{};
    const double N = std::log2(ratio * c);
    if (std::abs(N - std::round(N)) > 1e-9)
        throw ConfigError("band placement ratio * c = " + format_double(ratio * c) +
                          " is not a power of two");
    return DyadicBand{static_cast<int>(std::lround(N))};
}

ScalingFit fit_c_exponent(std::vector<std::pair<double, double>> points)
{
    if (points.size() < 2)
        throw DomainError("c-exponent fit needs at least two c values");
    std::sort(points.begin(), points.end());
    if (points.back().first < 4 * points.front().first)
        throw DomainError("c-grid must span at least a factor of 4");
    std::vector<double> x, y;
    for (const auto& [c, v] : points) {
        if (!(c > 0) || !(v > 0))
            throw DomainError("c-exponent fit needs positive values");
        x.push_back(std::log(c));
        y.push_back(std::log(v));
    }
    const LineFit line = least_squares_line(x, y);
    ScalingFit f;
    f.exponent = line.slope;
    f.r_squared = line.r_squared;
    f.points = std::move(points);
    return f;
}

ScalingFit prefactor_scaling(int J, const std::vector<double>& cs, int d,
                             const BandPlacement& placement, double t_fixed,
                             const SearchSpec& spec)
{
    std::vector<std::pair<double, double>> pts;
    for (double c : cs) {
        const DispersionSymbol<double> sym(J, c);
        pts.emplace_back(c, kernel_sup_v(sym, d, t_fixed, placement.cutoff_for(c), spec).value);
    }
    return fit_c_exponent(std::move(pts));
}

} // namespace hischro
