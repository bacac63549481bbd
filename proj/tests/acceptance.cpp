// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Criterion ids on the command line restrict the run to those.
#include "hischro/harness.hpp"
#include "hischro/io.hpp"
#include "hischro/kernels.hpp"
#include "hischro/propagators.hpp"
#include "hischro/symbols.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

using namespace hischro;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

fs::path config_path(const std::string& name)
{
    return fs::path(HISCHRO_CONFIG_DIR) / name;
}

fs::path work_dir_path(const std::string& name)
{
    return fs::temp_directory_path() / "hischro_acceptance" / name;
}

fs::path work_dir(const std::string& name)
{
    const fs::path p = work_dir_path(name);
    fs::remove_all(p);
    return p;
}

RunManifest run_config(const std::string& file, const std::string& tag)
{
    ExperimentConfig cfg = load_config(config_path(file));
    cfg.out = work_dir(tag);
    return run(cfg);
}

// Verdicts with the given id across manifests; fails if none reported it.
Outcome verdicts_for(const std::string& id, const std::vector<RunManifest>& ms)
{
    Outcome o{true, ""};
    int seen = 0;
    for (const auto& m : ms)
        for (const auto& v : m.verdicts)
            if (v.id == id) {
                ++seen;
                o.pass = o.pass && v.pass;
                o.detail += (o.detail.empty() ? "" : " | ") + v.detail;
            }
    if (seen == 0)
        return {false, "no verdict reported"};
    return o;
}

// Power sums with exact coefficients, long double; independent of Horner.
long double omega_derivative(int J, long double c, long double r, int k)
{
    long double s = 0;
    for (int j = 1; j <= J; ++j) {
        const auto a = static_cast<long double>(alpha_coefficient(j));
        const long double sign = j % 2 == 1 ? 1 : -1;
        const int p = 2 * j;
        long double coef = 1;
        for (int i = 0; i < k; ++i)
            coef *= p - i;
        s += sign * a * coef * std::pow(r, static_cast<long double>(p - k)) / std::pow(c, static_cast<long double>(p - 2));
    }
    return s;
}

Outcome a1()
{
    double worst_ratio = infinity, worst_curv = infinity, worst_agree = 0;
    for (int J : {1, 3, 5})
        for (double c : {1.0, 2.0, 4.0, 8.0, 16.0}) {
            const DispersionSymbol<double> s(J, c);
            for (double r : log_spaced(1e-6 * c, 100 * c, 4000)) {
                const long double d1 = omega_derivative(J, c, r, 1), d2 = omega_derivative(J, c, r, 2);
                worst_ratio = std::min(worst_ratio, static_cast<double>(d1 / r));
                worst_curv = std::min(worst_curv, static_cast<double>(d2));
                worst_agree = std::max(worst_agree, std::abs(s.slope_ratio(r) - static_cast<double>(d1 / r)) /
                                                        static_cast<double>(d1 / r));
                worst_agree = std::max(worst_agree, std::abs(s.omega(r, 2) - static_cast<double>(d2)) /
                                                        std::abs(static_cast<double>(d2)));
            }
        }
    const bool pass = worst_ratio >= 0.5 - 1e-12 && worst_curv >= std::pow(2.0, -1.5) - 1e-12 && worst_agree < 1e-12;
    return {pass, "inf omega'/r = " + fmt(worst_ratio) + ", inf omega'' = " + fmt(worst_curv) +
                      ", library vs power sum " + fmt(worst_agree)};
}

Outcome a2()
{
    bool pass = true;
    double closed = 0, drift = 0, residual = 0;
    for (int J : {2, 4, 6}) {
        std::optional<std::pair<double, double>> first;
        for (double c : {1.0, 2.0, 4.0, 8.0}) {
            const auto sp = find_degenerate_spheres(DispersionSymbol<double>(J, c));
            if (!sp)
                return {false, "no spheres for J = " + std::to_string(J)};
            pass = pass && sp->r2 > c / 2 && sp->r2 < c && sp->r1 > c && sp->r1 < 2 * c;
            // Roots of the power sums, scaled by the derivative size nearby.
            residual = std::max(residual, static_cast<double>(std::abs(omega_derivative(J, c, sp->r1, 1)) / c));
            residual = std::max(residual, static_cast<double>(std::abs(omega_derivative(J, c, sp->r2, 2))));
            if (J == 2)
                closed = std::max({closed, std::abs(sp->r2 / (c * std::sqrt(2.0 / 3)) - 1),
                                   std::abs(sp->r1 / (c * std::sqrt(2.0)) - 1)});
            if (!first)
                first.emplace(sp->r1 / c, sp->r2 / c);
            else
                drift = std::max({drift, std::abs(sp->r1 / c / first->first - 1),
                                  std::abs(sp->r2 / c / first->second - 1)});
        }
    }
    pass = pass && closed <= 1e-10 && drift <= 1e-10 && residual < 1e-9;
    return {pass, "J=2 closed form " + fmt(closed) + ", r/c drift " + fmt(drift) + ", root residual " +
                      fmt(residual)};
}

long double big_omega(int J, long double c, const Eigen::Matrix<long double, Eigen::Dynamic, 1>& xi)
{
    return omega_derivative(J, c, xi.norm(), 0);
}

Outcome a3()
{
    using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    std::mt19937_64 gen(2024);
    std::normal_distribution<double> N01;
    std::uniform_real_distribution<double> U(std::log(0.05), std::log(4.0));
    double worst = 0;
    for (int J : {1, 2, 3})
        for (int d : {1, 2, 3})
            for (double c : {1.0, 4.0}) {
                const DispersionSymbol<double> s(J, c);
                for (int k = 0; k < 100; ++k) {
                    VecL xi(d);
                    for (int a = 0; a < d; ++a)
                        xi(a) = N01(gen);
                    xi *= static_cast<long double>(c * std::exp(U(gen))) / xi.norm();
                    auto H = [&](long double h) {
                        Eigen::MatrixXd m(d, d);
                        for (int a = 0; a < d; ++a)
                            for (int b = 0; b < d; ++b) {
                                VecL e = VecL::Zero(d), f = VecL::Zero(d);
                                e(a) = h;
                                f(b) = h;
                                m(a, b) = static_cast<double>(
                                    (big_omega(J, c, xi + e + f) - big_omega(J, c, xi + e - f) -
                                     big_omega(J, c, xi - e + f) + big_omega(J, c, xi - e - f)) /
                                    (4 * h * h));
                            }
                        return m;
                    };
                    const long double h = 1e-3L * std::max(1.0L, xi.norm());
                    const double fd = ((4 * H(h / 2) - H(h)) / 3).determinant();
                    const double an = hessian_determinant(s, static_cast<double>(xi.norm()), d);
                    worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1e-3));
                }
            }
    return {worst <= 1e-6, "worst relative error " + fmt(worst) + " over 1800 points"};
}

Outcome a6()
{
    const DispersionSymbol<double> sym(1, 1.0);
    double worst = 0;
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0})
        for (double v : {0.0, 0.5, 3.0, 7.0}) {
            Eigen::VectorXd vv(1);
            vv(0) = v;
            const double mod = std::abs(kernel_eval(sym, t, vv, Damping{damping_scale(sym, v, 16)}));
            worst = std::max(worst, std::abs(mod * std::sqrt(2 * pi * t) - 1));
        }
    return {worst <= 1e-6, "worst relative error " + fmt(worst) + " at 20 (t, v) points"};
}

Outcome a7()
{
    const Grid g(1, 128, 10.0);
    std::mt19937_64 gen(7);
    std::normal_distribution<double> N01;
    WaveField f(g);
    for (Eigen::Index i = 0; i < f.values().size(); ++i)
        f.values()(i) = Complex(N01(gen), N01(gen));
    auto rel = [](const WaveField& a, const WaveField& b) {
        return (to_position(a) - to_position(b)).l2_norm() / to_position(b).l2_norm();
    };
    double unitary = 0, group = 0, reversal = 0, band = 0;
    for (const LinearFlow& flow : {LinearFlow(g, DispersionSymbol<double>(1, 2.0)),
                                   LinearFlow(g, DispersionSymbol<double>(2, 2.5)),
                                   LinearFlow(g, DispersionSymbol<double>(3, 2.5)),
                                   LinearFlow::pseudo_relativistic(g, 2.0)}) {
        const double t = 0.37, s = -0.21;
        unitary = std::max(unitary, std::abs(evolve(flow, f, t).l2_norm() / f.l2_norm() - 1));
        group = std::max(group, rel(evolve(flow, evolve(flow, f, s), t), evolve(flow, f, t + s)));
        reversal = std::max(reversal, rel(evolve(flow, evolve(flow, f, t), -t), f));
        for (int N : {0, 1, 2})
            band = std::max(band, rel(project_band(evolve(flow, f, t), N), evolve(flow, project_band(f, N), t)));
    }

    // e^(-x^2 / (2 w^2)) under the free flow.
    const Grid wide(1, 1024, 40.0);
    const double w = 1.3;
    GaussianProfile p;
    p.width = w;
    const WaveField u0 = synthesize_data(wide, p);
    const LinearFlow free(wide, DispersionSymbol<double>(1, 1.0));
    double spread = 0;
    for (double t : {0.5, 2.0, -3.0}) {
        const WaveField u = evolve(free, u0, t);
        const Eigen::ArrayXd& x = wide.position_modulus();
        const Complex z(w * w, t);
        for (Eigen::Index i = 0; i < x.size(); ++i)
            spread = std::max(spread, std::abs(u.values()[i] - std::sqrt(w * w / z) * std::exp(-x[i] * x[i] / (2.0 * z))));
    }
    const bool pass = std::max({unitary, group, reversal, band}) <= 1e-12 && spread <= 1e-8;
    return {pass, "unitarity " + fmt(unitary) + ", group law " + fmt(group) + ", reversal " + fmt(reversal) +
                      ", band commutation " + fmt(band) + ", Gaussian spreading " + fmt(spread)};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome a13()
{
    // Manifests carry wall-clock times; every data file must match.
    std::size_t compared = 0;
    bool same = true;
    for (const char* file : {"symbol.json", "determinism.json"}) {
        const RunManifest a = run_config(file, std::string("det_a_") + file);
        const RunManifest b = run_config(file, std::string("det_b_") + file);
        const fs::path da = work_dir_path(std::string("det_a_") + file);
        const fs::path db = work_dir_path(std::string("det_b_") + file);
        same = same && a.files == b.files;
        for (const auto& f : a.files) {
            same = same && slurp(da / f) == slurp(db / f);
            ++compared;
        }
    }

    const Grid g(2, 32, 3.0);
    std::mt19937_64 gen(99);
    std::normal_distribution<double> N01;
    WaveField f(g, Representation::frequency);
    for (Eigen::Index i = 0; i < f.values().size(); ++i)
        f.values()(i) = Complex(N01(gen), N01(gen)) * std::pow(10.0, N01(gen) * 50);
    const fs::path path = work_dir("field") / "f.bin";
    write_field(path, f);
    const WaveField back = read_field(path);
    const bool lossless = back.grid() == g && back.representation() == f.representation() &&
                          std::memcmp(back.values().data(), f.values().data(),
                                      sizeof(Complex) * static_cast<std::size_t>(f.values().size())) == 0 &&
                          fs::file_size(path) == 4 + 4 + 8 + 4 + 16 * g.size();
    return {same && lossless, std::to_string(compared) + " files byte-identical across runs: " +
                                  (same ? "yes" : "no") + "; field round trip lossless: " + (lossless ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::string> only(argv + 1, argv + argc);
    std::map<std::string, RunManifest> runs;
    auto manifest = [&](const std::string& file) -> const RunManifest& {
        auto it = runs.find(file);
        if (it == runs.end())
            it = runs.emplace(file, run_config(file, file)).first;
        return it->second;
    };

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"A1", a1},
        {"A2", a2},
        {"A3", a3},
        {"A4", [&] { return verdicts_for("A4", {manifest("kernel_decay_odd.json")}); }},
        {"A5",
         [&] {
             return verdicts_for("A5", {manifest("kernel_decay_even_near.json"), manifest("kernel_decay_even_far.json")});
         }},
        {"A6", a6},
        {"A7", a7},
        {"A8", [&] { return verdicts_for("A8", {manifest("linear_approx.json")}); }},
        {"A9", [&] { return verdicts_for("A9", {manifest("strichartz.json")}); }},
        {"A10", [&] { return verdicts_for("A10", {manifest("hartree_conservation.json")}); }},
        {"A11", [&] { return verdicts_for("A11", {manifest("hartree_approx.json")}); }},
        {"A12", [&] { return verdicts_for("A12", {manifest("scatter.json")}); }},
        {"A13", a13},
    };

    int failures = 0, ran = 0;
    for (const auto& [id, check] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end())
            continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%-4s %s  %s  (%.1f s)\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), sec);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    if (ran == 0) {
        std::fprintf(stderr, "no criterion matches the arguments\n");
        return 2;
    }
    std::printf("%d of %d criteria pass\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}
