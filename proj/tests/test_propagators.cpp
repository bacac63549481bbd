#include "doctest.h"

#include "hischro/propagators.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace hischro;

namespace {

constexpr double pi = std::numbers::pi;

WaveField random_field(const Grid& g, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> N01;
    WaveField f(g);
    for (Eigen::Index i = 0; i < f.values().size(); ++i)
        f.values()(i) = Complex(N01(gen), N01(gen));
    return f;
}

double rel_diff(const WaveField& a, const WaveField& b)
{
    return (to_position(a) - to_position(b)).l2_norm() / to_position(b).l2_norm();
}

// Free Schroedinger evolution of e^(-|x|^2 / (2 w^2)).
Complex free_gaussian(double w, double t, double x2, int d)
{
    const Complex z(w * w, t);
    return std::pow(w * w / z, 0.5 * d) * std::exp(-x2 / (2.0 * z));
}

GaussianProfile gaussian(int d, double w)
{
    GaussianProfile p;
    p.width = w;
    p.center.assign(d, 0.0);
    p.modulation.assign(d, 0.0);
    return p;
}

} // namespace

TEST_CASE("linear flows are exact unitary multipliers")
{
    // Omega_max * t stays near 1e3 so phase rounding sits below 1e-12.
    const Grid g(1, 128, 10.0);
    const WaveField f = random_field(g, 11);
    for (const LinearFlow& flow : {LinearFlow(g, DispersionSymbol<double>(1, 2.0)),
                                   LinearFlow(g, DispersionSymbol<double>(3, 2.5)),
                                   LinearFlow(g, DispersionSymbol<double>(2, 2.5)),
                                   LinearFlow::pseudo_relativistic(g, 2.0)}) {
        const double t = 0.37, s = -0.21;
        CHECK((evolve(flow, f, 0.0).values() == f.values()).all());
        CHECK(std::abs(evolve(flow, f, t).l2_norm() / f.l2_norm() - 1) < 1e-12);
        CHECK(rel_diff(evolve(flow, evolve(flow, f, s), t), evolve(flow, f, t + s)) < 1e-12);
        CHECK(rel_diff(evolve(flow, evolve(flow, f, t), -t), f) < 1e-12);
        CHECK(rel_diff(project_band(evolve(flow, f, t), 1), evolve(flow, project_band(f, 1), t)) < 1e-12);
        const WaveField hat = evolve(flow, to_frequency(f), t);
        CHECK(!hat.in_position());
    }
    const LinearFlow a(g, DispersionSymbol<double>(3, 2.0));
    const LinearFlow b = LinearFlow::pseudo_relativistic(g, 2.0);
    CHECK(rel_diff(evolve(a, evolve(b, f, 0.3), 0.2), evolve(b, evolve(a, f, 0.2), 0.3)) < 1e-12);
}

TEST_CASE("flow pairing and symbols")
{
    const Grid g(1, 16, 10.0); // max frequency 2.5
    CHECK_THROWS_AS(LinearFlow(g, DispersionSymbol<double>(1, 1.0)), ResolutionError);
    const Grid fine(1, 256, 10.0);
    const LinearFlow flow(fine, DispersionSymbol<double>(2, 1.5));
    CHECK(flow.symbol(0.7) == DispersionSymbol<double>(2, 1.5).omega(0.7));
    CHECK(flow.order() == 2);
    CHECK(LinearFlow::pseudo_relativistic(fine, 1.5).kind() == FlowKind::pseudo_relativistic);
    CHECK_THROWS_AS(evolve(flow, WaveField(Grid(1, 256, 11.0)), 1.0), DomainError);
}

TEST_CASE("free Gaussian spreads per the closed form")
{
    for (int d : {1, 2}) {
        const Grid g(d, d == 1 ? 1024 : 256, d == 1 ? 40.0 : 24.0);
        const double w = 1.3;
        const WaveField f = synthesize_data(g, gaussian(d, w));
        const LinearFlow flow(g, DispersionSymbol<double>(1, 1.0));
        for (double t : {0.5, 2.0, -3.0}) {
            const WaveField u = evolve(flow, f, t);
            const Eigen::ArrayXd& x = g.position_modulus();
            double worst = 0;
            for (Eigen::Index i = 0; i < x.size(); ++i)
                worst = std::max(worst, std::abs(u.values()[i] - free_gaussian(w, t, x[i] * x[i], d)));
            CHECK(worst < 1e-8);
        }
    }
}

TEST_CASE("expansion remainder against a 100-digit oracle")
{
    // The oracle subtracts directly, so it needs digits to spare at small u.
    using Big = boost::multiprecision::cpp_bin_float_100;
    for (int J : {1, 2, 3, 5})
        for (double c : {1.0, 4.0, 16.0})
            for (double u : {1e-4, 0.01, 0.3, 0.49, 0.51, 0.9, 3.0}) {
                const double r = u * c;
                const DispersionSymbol<Big> sym(J, Big(c));
                const Big exact = pseudo_symbol(Big(c), Big(r)) - sym.omega(Big(r));
                const double got = expansion_remainder(J, c, r);
                const double tol = u < 0.8 ? 1e-14 : 1e-13;
                CHECK(std::abs(got - exact.convert_to<double>()) <= tol * std::abs(exact.convert_to<double>()));
            }
}

TEST_CASE("linear difference")
{
    const Grid g(1, 2048, 16.0);
    const WaveField psi0 = synthesize_data(g, gaussian(1, 1.0));

    SUBCASE("matches direct evolution of both flows")
    {
        const double T = 4;
        const auto res = linear_difference(psi0, 1, {2.0}, T, {16});
        const LinearFlow a = LinearFlow::pseudo_relativistic(g, 2.0);
        const LinearFlow b(g, DispersionSymbol<double>(1, 2.0));
        double sup = 0;
        for (int i = 1; i <= 16; ++i)
            sup = std::max(sup, (evolve(a, psi0, T * i / 16) - evolve(b, psi0, T * i / 16)).l2_norm());
        CHECK(res.rows[0].error == doctest::Approx(sup).epsilon(1e-10));
    }
    SUBCASE("zero at t = 0")
    {
        const LinearFlow a = LinearFlow::pseudo_relativistic(g, 4.0);
        const LinearFlow b(g, DispersionSymbol<double>(2, 4.0));
        CHECK((evolve(a, psi0, 0.0) - evolve(b, psi0, 0.0)).l2_norm() == 0.0);
    }
    SUBCASE("rate c^(-2J) for smooth data")
    {
        // Wide data keeps t (P - W) small, where the sine is still linear.
        const WaveField wide = synthesize_data(g, gaussian(1, 2.0));
        for (int J : {1, 3}) {
            const auto res = linear_difference(wide, J, {2, 4, 8, 16}, 4.0);
            REQUIRE(res.fit);
            CHECK(std::abs(res.fit->slope + 2 * J) < 0.2);
            CHECK(res.discarded == 0);
        }
    }
    SUBCASE("errors shrink as J grows")
    {
        double prev = 1e300;
        for (int J = 1; J <= 4; ++J) {
            const double e = linear_difference(psi0, J, {4.0}, 4.0).rows[0].error;
            CHECK(e < prev);
            prev = e;
        }
    }
    SUBCASE("rounding floor")
    {
        const auto res = linear_difference(psi0, 2, {4, 8}, 1.0, {8, 1.0});
        CHECK(res.discarded == 2);
        CHECK(!res.fit);
    }
    CHECK_THROWS_AS(linear_difference(psi0, 1, {64}, 1.0), ResolutionError);
}

TEST_CASE("Strichartz ratio")
{
    const Grid g(1, 2048, 64.0);
    const double w = 1.5;
    const WaveField psi0 = synthesize_data(g, gaussian(1, w));
    const LinearFlow flow(g, DispersionSymbol<double>(1, 1.0));
    const AdmissiblePair pair(8, 4, Admissibility::odd, 1);

    SUBCASE("free Gaussian: spacetime norm from the closed form")
    {
        // ||u(t)||_4^4 = (w^2/|z|)^2 sqrt(2 pi |z|^2 / (4 w^2)), |z|^2 = w^4 + t^2.
        const double T = 8, dt = 1.0 / 32;
        std::vector<double> v;
        for (int i = 0; i <= 256; ++i) {
            const double t = i * dt;
            const double z2 = w * w * w * w + t * t;
            v.push_back(std::pow(w * w * w * w / z2 * std::sqrt(2 * pi * z2 / (4 * w * w)), 0.25));
        }
        const StrichartzResult r = strichartz_ratio(psi0, flow, pair, T, dt);
        CHECK(r.samples == 257);
        CHECK(r.spacetime == doctest::Approx(time_norm(v, dt, 8)).epsilon(1e-9));
        CHECK(r.source == doctest::Approx(std::sqrt(w * std::sqrt(pi))).epsilon(1e-10));
    }
    SUBCASE("homogeneous in the data")
    {
        const double a = strichartz_ratio(psi0, flow, pair, 4, 0.125).ratio;
        const double b = strichartz_ratio(Complex(0, 3.5) * psi0, flow, pair, 4, 0.125).ratio;
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
    SUBCASE("even class uses the homogeneous source norm")
    {
        const LinearFlow even(g, DispersionSymbol<double>(2, 2.0));
        const AdmissiblePair ep(8, 8, Admissibility::even, 1);
        const StrichartzResult r = strichartz_ratio(psi0, even, ep, 4, 0.125);
        CHECK(r.source == doctest::Approx(sobolev_norm(psi0, 0.125, true)));
    }
    CHECK_THROWS_AS(strichartz_ratio(psi0, flow, pair, 1.0, 0.3), DomainError);
    CHECK_THROWS_AS(strichartz_ratio(psi0, flow, pair, 1.0, 0.25), DomainError);
    CHECK_THROWS_AS(strichartz_ratio(psi0, flow, AdmissiblePair(8, 4.0 / 3 * 2, Admissibility::odd, 2), 2, 0.125),
                    DomainError);
}

TEST_CASE("Duhamel term")
{
    const Grid g(1, 256, 16.0);
    const LinearFlow flow(g, DispersionSymbol<double>(3, 2.0));
    const WaveField h = synthesize_data(g, gaussian(1, 1.0));

    SUBCASE("zero forcing")
    {
        Trajectory F{0, 0.1, std::vector<WaveField>(5, WaveField(g))};
        for (const auto& d : inhomogeneous_apply(flow, F).frames)
            CHECK(d.l2_norm() == 0.0);
    }
    SUBCASE("F(s) = U(s) h gives t U(t) h")
    {
        Trajectory F{0, 0.05, {}};
        for (int i = 0; i <= 40; ++i)
            F.frames.push_back(evolve(flow, h, 0.05 * i));
        const Trajectory D = inhomogeneous_apply(flow, F);
        REQUIRE(D.frames.size() == 41);
        CHECK(D.frames[0].l2_norm() == 0.0);
        for (int i : {1, 17, 40}) {
            const double t = 0.05 * i;
            CHECK(rel_diff(D.frames[i], Complex(t) * evolve(flow, h, t)) < 1e-12);
        }
    }
    SUBCASE("second order in the time step")
    {
        // F(s) = cos(3s) h against a fine-step reference.
        auto run = [&](int n) {
            Trajectory F{0, 1.0 / n, {}};
            for (int i = 0; i <= n; ++i)
                F.frames.push_back(Complex(std::cos(3.0 * i / n)) * h);
            return inhomogeneous_apply(flow, F).frames.back();
        };
        const WaveField ref = run(1024);
        const double e1 = (run(16) - ref).l2_norm(), e2 = (run(32) - ref).l2_norm();
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
    }
    SUBCASE("retarded ratio")
    {
        Trajectory F{0, 0.1, {}};
        for (int i = 0; i <= 20; ++i)
            F.frames.push_back(evolve(flow, h, 0.1 * i));
        const AdmissiblePair p(8, 4, Admissibility::odd, 1);
        const RetardedResult r = retarded_ratio(flow, F, p, p);
        CHECK(r.ratio > 0);
        CHECK(std::isfinite(r.ratio));
        CHECK(r.forcing == doctest::Approx(spacetime_norm(F, 8.0 / 7, 4.0 / 3)));
    }
}
