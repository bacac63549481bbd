#include "doctest.h"

#include "hischro/kernels.hpp"

#include <cmath>
#include <numbers>

using namespace hischro;

namespace {

constexpr double pi = std::numbers::pi;

// Cartesian midpoint rule for (2 pi)^-d \int e^(i t (v.xi - omega(|xi|))) chi(|xi|) dxi
// over the box |xi_i| <= R. The integrand is C^4 and vanishes at the box edge.
template <typename Cut>
Complex tensor_grid_kernel(const DispersionSymbol<double>& sym, double t, const Eigen::VectorXd& v,
                           Cut cut, double R, int n)
{
    const int d = static_cast<int>(v.size());
    const double h = 2 * R / n;
    std::vector<double> axis(n);
    for (int i = 0; i < n; ++i)
        axis[i] = -R + (i + 0.5) * h;
    Complex acc = 0;
    std::vector<int> idx(d, 0);
    while (true) {
        double r2 = 0, dot = 0;
        for (int a = 0; a < d; ++a) {
            r2 += axis[idx[a]] * axis[idx[a]];
            dot += v[a] * axis[idx[a]];
        }
        const double r = std::sqrt(r2);
        const double eta = cut(r);
        if (eta != 0)
            acc += eta * std::polar(1.0, t * (dot - sym.omega(r, 0)));
        int a = 0;
        while (a < d && ++idx[a] == n)
            idx[a++] = 0;
        if (a == d)
            break;
    }
    return acc * std::pow(h / (2 * pi), d);
}

Eigen::VectorXd vec(std::initializer_list<double> xs)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

} // namespace

TEST_CASE("band kernel matches a Cartesian tensor-grid sum")
{
    const DyadicBand band{-1}; // support [1/2, 2]
    const auto cut = [band](double r) { return band(r); };

    SUBCASE("d = 1")
    {
        const DispersionSymbol<double> sym(3, 1.0);
        const auto v = vec({0.6});
        const Complex ref = tensor_grid_kernel(sym, 1.3, v, cut, 2.0, 20000);
        CHECK(std::abs(kernel_eval(sym, 1.3, v, band) - ref) < 1e-10);
        CHECK(std::abs(kernel_eval(sym, 1.3, -v, band) - ref) < 1e-10);
    }
    SUBCASE("d = 2, rotated velocities")
    {
        const DispersionSymbol<double> sym(2, 2.0);
        const auto v = vec({0.4, -0.7});
        const Complex ref = tensor_grid_kernel(sym, 1.7, v, cut, 2.0, 1000);
        CHECK(std::abs(kernel_eval(sym, 1.7, v, band) - ref) < 1e-8);
        const double th = 0.9;
        Eigen::Matrix2d rot;
        rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        const Complex rotated = tensor_grid_kernel(sym, 1.7, rot * v, cut, 2.0, 1000);
        CHECK(std::abs(rotated - ref) < 1e-8);
    }
    SUBCASE("d = 3")
    {
        const DispersionSymbol<double> sym(3, 1.5);
        const auto v = vec({0.3, 0.2, -0.5});
        const Complex ref = tensor_grid_kernel(sym, 0.8, v, cut, 2.0, 128);
        CHECK(std::abs(kernel_eval(sym, 0.8, v, band) - ref) < 1e-6);
    }
}

TEST_CASE("free Schroedinger kernel has modulus (2 pi t)^(-1/2)")
{
    for (double c : {1.0, 3.0}) {
        const DispersionSymbol<double> sym(1, c);
        for (double t : {0.5, 1.0, 4.0, 10.0})
            for (double v : {0.0, 0.5, 3.0, 7.0}) {
                const Damping damp{damping_scale(sym, v, 16)};
                const double mod = std::abs(kernel_eval(sym, t, vec({v}), damp));
                CHECK(std::abs(mod * std::sqrt(2 * pi * t) - 1) < 1e-6);
            }
    }
    // Same value in the d = 2 reduction: |I| = 1 / (2 pi t).
    const DispersionSymbol<double> sym(1, 1.0);
    const double mod = std::abs(kernel_eval(sym, 2.0, vec({1.0, 0.5}), Damping{damping_scale(sym, 1.2, 16)}));
    CHECK(std::abs(mod * 4 * pi - 1) < 1e-6);
}

TEST_CASE("conjugation: I(-t, v) = conj I(t, v)")
{
    for (int J : {2, 3})
        for (int d : {1, 2, 3}) {
            const DispersionSymbol<double> sym(J, 2.0);
            Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 0.7);
            for (const KernelCutoff& cut : {KernelCutoff{DyadicBand{0}}, KernelCutoff{Damping{10.0}}}) {
                const Complex a = kernel_eval(sym, 1.1, v, cut);
                const Complex b = kernel_eval(sym, -1.1, v, cut);
                CHECK(std::abs(a - std::conj(b)) < 1e-12);
            }
        }
}

TEST_CASE("band additivity")
{
    for (int d : {1, 2, 3}) {
        const DispersionSymbol<double> sym(2, 2.0);
        const Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 0.9);
        Complex sum = 0;
        for (int N = -2; N <= 2; ++N)
            sum += kernel_eval(sym, 0.9, v, DyadicBand{N});
        CHECK(std::abs(sum - kernel_eval(sym, 0.9, v, BandSum{-2, 2})) < 1e-10);
    }
    CHECK_THROWS_AS(kernel_eval(DispersionSymbol<double>(2, 2.0), 1.0, vec({0.1}), BandSum{2, 1}),
                    DomainError);
}

TEST_CASE("doubling the quadrature density moves results by < 1e-8")
{
    ResolutionSpec fine;
    fine.points_per_oscillation = 64;
    for (int J : {2, 3})
        for (int d : {1, 2, 3}) {
            const DispersionSymbol<double> sym(J, 2.0);
            for (double t : {0.5, 4.0}) {
                RadialKernel band(sym, d, t, DyadicBand{1}, 10.0);
                RadialKernel band2(sym, d, t, DyadicBand{1}, 10.0, fine);
                RadialKernel full(sym, d, t, Damping{12.0}, 5.0);
                RadialKernel full2(sym, d, t, Damping{12.0}, 5.0, fine);
                for (double s : {0.0, 1.3, 4.9}) {
                    CHECK(std::abs(band(s) - band2(s)) < 1e-8);
                    CHECK(std::abs(full(s) - full2(s)) < 1e-8);
                }
            }
        }
}

TEST_CASE("deformed tail agrees with the real-axis quadrature")
{
    ResolutionSpec real_axis;
    real_axis.deform_tail = false;
    for (int J : {1, 2, 3, 4})
        for (int d : {1, 2, 3})
            for (double t : {0.7, -1.5}) {
                const DispersionSymbol<double> sym(J, 1.5);
                const double vmax = search_speed_limit(sym, FullKernel{}, 2);
                const Damping damp{damping_scale(sym, vmax)};
                RadialKernel fast(sym, d, t, damp, vmax);
                RadialKernel slow(sym, d, t, damp, vmax, real_axis);
                CHECK(fast.nodes() < slow.nodes());
                for (double f : {0.0, 0.1, 0.37, 0.8, 1.0})
                    CHECK(std::abs(fast(f * vmax) - slow(f * vmax)) < 1e-10);
            }
}

TEST_CASE("kernel errors")
{
    const DispersionSymbol<double> sym(3, 2.0);
    ResolutionSpec coarse;
    coarse.points_per_oscillation = 16;
    CHECK_THROWS_AS(kernel_eval(sym, 1.0, vec({0.5}), DyadicBand{0}, coarse), ResolutionError);
    CHECK_THROWS_AS(kernel_eval(sym, 0.0, vec({0.5}), DyadicBand{0}), DomainError);
    CHECK_THROWS_AS(kernel_eval(sym, 1.0, vec({0.5}), Damping{0.0}), DomainError);
    CHECK_THROWS_AS(kernel_eval(sym, 1.0, Eigen::VectorXd::Zero(4), DyadicBand{0}), DomainError);
    const RadialKernel k(sym, 1, 1.0, DyadicBand{0}, 2.0);
    CHECK_THROWS_AS(k(2.5), DomainError);
    ResolutionSpec tiny;
    tiny.max_nodes = 100;
    CHECK_THROWS_AS(kernel_eval(sym, 50.0, vec({0.5}), DyadicBand{2}, tiny), ResolutionError);
}

TEST_CASE("sup over v")
{
    SUBCASE("free kernel: sup equals the closed form")
    {
        const DispersionSymbol<double> sym(1, 1.0);
        const SupResult low = kernel_sup_v(sym, 1, 1.0, DyadicBand{-3});
        CHECK(low.value <= 1 / std::sqrt(2 * pi) + 1e-6);
        const SupResult full = kernel_sup_v(sym, 1, 1.0, FullKernel{16});
        CHECK(full.value == doctest::Approx(1 / std::sqrt(2 * pi)).epsilon(1e-6));
    }
    SUBCASE("search reaches the maximum of a dense scan")
    {
        for (int d : {1, 2}) {
            const DispersionSymbol<double> sym(2, 2.0);
            const double t = 3.0;
            const SupResult r = kernel_sup_v(sym, d, t, DyadicBand{0});
            const double vmax = search_speed_limit(sym, DyadicBand{0}, 2);
            CHECK(r.speed <= vmax);
            const RadialKernel k(sym, d, t, DyadicBand{0}, vmax);
            double dense = 0;
            for (int i = 0; i <= 4000; ++i)
                dense = std::max(dense, std::abs(k(vmax * i / 4000)));
            CHECK(r.value >= dense * (1 - 1e-6));
            CHECK(r.value <= dense * (1 + 1e-3));
        }
    }
    SUBCASE("search range")
    {
        const DispersionSymbol<double> sym(1, 1.0);
        // omega' = r, so the band [1, 4] gives 2 * 4.
        CHECK(search_speed_limit(sym, DyadicBand{0}, 2) == doctest::Approx(8.0));
        CHECK(search_speed_limit(sym, FullKernel{}, 2) == doctest::Approx(2.0));
    }
}

TEST_CASE("decay fits")
{
    SUBCASE("exact power law")
    {
        std::vector<std::pair<double, double>> s;
        for (double t : log_spaced(1, 20, 10))
            s.emplace_back(t, 3.0 * std::pow(t, -0.75));
        const DecayFit f = fit_decay(s);
        CHECK(f.slope == doctest::Approx(-0.75).epsilon(1e-12));
        CHECK(f.prefactor == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(f.r_squared == doctest::Approx(1.0));
        CHECK(f.t_max == doctest::Approx(20.0));
        CHECK(f.t_min > 1.0);
    }
    SUBCASE("rejects bad samples")
    {
        std::vector<std::pair<double, double>> s;
        for (double t : log_spaced(1, 20, 10))
            s.emplace_back(t, 1 / t);
        auto bad = s;
        bad[3].second = 0;
        CHECK_THROWS_AS(fit_decay(bad), DomainError);
        CHECK_THROWS_AS(fit_decay({s.begin(), s.begin() + 7}), DomainError);
        std::vector<std::pair<double, double>> narrow;
        for (double t : log_spaced(1, 5, 10))
            narrow.emplace_back(t, 1 / t);
        CHECK_THROWS_AS(fit_decay(narrow), DomainError);
    }
    SUBCASE("log_spaced")
    {
        const auto ts = log_spaced(0.5, 8, 5);
        CHECK(ts.front() == 0.5);
        CHECK(ts.back() == 8);
        CHECK(ts[2] == doctest::Approx(2.0));
        CHECK_THROWS_AS(log_spaced(0, 1, 4), DomainError);
    }
    SUBCASE("odd J = 3, d = 2 decays like 1/t")
    {
        const DispersionSymbol<double> sym(3, 2.0);
        const DecayFit f = fit_decay(decay_samples(sym, 2, log_spaced(1, 10, 10), FullKernel{}));
        CHECK(std::abs(f.slope + 1) < 0.1);
    }
}

TEST_CASE("prefactor scaling")
{
    SUBCASE("c-exponent of exact data")
    {
        const ScalingFit f = fit_c_exponent({{1, 2.0}, {2, 2.0 * std::sqrt(2.0)}, {4, 4.0}});
        CHECK(f.exponent == doctest::Approx(0.5));
        CHECK_THROWS_AS(fit_c_exponent({{1, 1.0}, {2, 1.0}}), DomainError);
        CHECK_THROWS_AS(fit_c_exponent({{1, 1.0}}), DomainError);
    }
    SUBCASE("band placement")
    {
        CHECK(std::get<DyadicBand>(BandPlacement{false, 0.5}.cutoff_for(8)).N == 2);
        CHECK(std::get<DyadicBand>(BandPlacement{false, 1.0 / 16}.cutoff_for(16)).N == 0);
        CHECK(std::holds_alternative<FullKernel>(BandPlacement{true}.cutoff_for(3)));
        CHECK_THROWS_AS((BandPlacement{false, 0.5}.cutoff_for(3)), ConfigError);
    }
    SUBCASE("odd J: constants independent of c")
    {
        const ScalingFit f = prefactor_scaling(3, {1, 2, 4, 8, 16}, 2, BandPlacement{true}, 2.0);
        CHECK(std::abs(f.exponent) < 0.2);
    }
}
