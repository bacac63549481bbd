#include "hischro/propagators.hpp"

#include "hischro/io.hpp"

#include <algorithm>
#include <cmath>

namespace hischro {

namespace {

// Coefficients (-1)^(j+1) alpha(j) for j = J+1 .. J+terms.
std::vector<double> tail_coefficients(int J, int terms)
{
    std::vector<double> a;
    for (int j = J + 1; j <= J + terms; ++j) {
        Rational q = alpha_coefficient(j);
        a.push_back(static_cast<double>(j % 2 == 0 ? Rational(-q) : q));
    }
    return a;
}

class Remainder {
public:
    Remainder(int J, double c) : sym_(J, c), tail_(tail_coefficients(J, 100)) {}

    double operator()(double r) const
    {
        const double c = sym_.speed();
        const double u = r / c;
        const double s = u * u;
        if (s >= 0.64)
            return pseudo_symbol(c, r) - sym_.omega(r, 0);
        // Tail of the binomial series; 0.64^100 is far below rounding.
        double acc = 0;
        for (auto it = tail_.rbegin(); it != tail_.rend(); ++it)
            acc = acc * s + *it;
        return c * c * std::pow(s, sym_.order() + 1) * acc;
    }

private:
    DispersionSymbol<double> sym_;
    std::vector<double> tail_;
};

Eigen::ArrayXcd phases(const Eigen::ArrayXd& omega, double t)
{
    return (omega * -t).unaryExpr([](double a) { return std::polar(1.0, a); });
}

std::size_t step_count(double T, double dt)
{
    if (!(T > 0) || !(dt > 0))
        throw DomainError("horizon and time step must be positive");
    const double k = T / dt;
    const double K = std::round(k);
    if (std::abs(k - K) > 1e-9 * std::max(1.0, k))
        throw DomainError("time step " + format_double(dt) + " does not divide T = " + format_double(T));
    if (K < 8)
        throw DomainError("need at least 8 time steps over the horizon");
    return static_cast<std::size_t>(K);
}

} // namespace

LinearFlow::LinearFlow(const Grid& grid, FlowKind kind, int J, double c)
    : grid_(grid), kind_(kind), J_(J), c_(c)
{
    if (!(c >= 1))
        throw DomainError("speed of light c must be >= 1");
    grid_.require_resolves(c);
    const auto& k = grid_.frequency_modulus();
    omega_.resize(k.size());
    if (kind == FlowKind::expansion) {
        const DispersionSymbol<double> sym(J, c);
        for (Eigen::Index i = 0; i < k.size(); ++i)
            omega_[i] = sym.omega(k[i], 0);
    } else {
        for (Eigen::Index i = 0; i < k.size(); ++i)
            omega_[i] = pseudo_symbol(c, k[i]);
    }
}

LinearFlow::LinearFlow(const Grid& grid, const DispersionSymbol<double>& sym)
    : LinearFlow(grid, FlowKind::expansion, sym.order(), sym.speed())
{
}

LinearFlow LinearFlow::pseudo_relativistic(const Grid& grid, double c)
{
    return LinearFlow(grid, FlowKind::pseudo_relativistic, 0, c);
}

double LinearFlow::symbol(double r) const
{
    if (kind_ == FlowKind::pseudo_relativistic)
        return pseudo_symbol(c_, r);
    return DispersionSymbol<double>(J_, c_).omega(r, 0);
}

void LinearFlow::apply(Eigen::ArrayXcd& freq, double t) const
{
    if (freq.size() != omega_.size())
        throw DomainError("field size does not match the flow's grid");
    if (t == 0)
        return;
    freq *= phases(omega_, t);
}

WaveField evolve(const LinearFlow& flow, const WaveField& f, double t)
{
    require_same_grid(flow.grid(), f.grid());
    if (t == 0)
        return f;
    WaveField g = to_frequency(f);
    flow.apply(g.values(), t);
    return f.in_position() ? to_position(std::move(g)) : g;
}

double expansion_remainder(int J, double c, double r)
{
    return Remainder(J, c)(r);
}

Eigen::ArrayXd expansion_remainder(int J, double c, const Eigen::ArrayXd& r)
{
    const Remainder rem(J, c);
    return r.unaryExpr([&](double x) { return rem(x); });
}

LinearDifferenceResult linear_difference(const WaveField& psi0, int J, const std::vector<double>& cs,
                                         double T, const LinearDifferenceSpec& spec)
{
    if (cs.empty())
        throw DomainError("linear_difference needs at least one c");
    if (!(T > 0))
        throw DomainError("horizon T must be positive");
    if (spec.time_samples < 1)
        throw DomainError("need at least one time sample");
    const Grid& g = psi0.grid();
    g.require_resolves(*std::max_element(cs.begin(), cs.end()));

    const WaveField hat = to_frequency(psi0);
    const Eigen::ArrayXd mass = hat.values().abs2() * g.frequency_cell_volume();
    const auto& k = g.frequency_modulus();

    LinearDifferenceResult out;
    out.J = J;
    out.T = T;
    for (double c : cs) {
        const Eigen::ArrayXd delta = expansion_remainder(J, c, k);
        LinearDifferenceRow row;
        row.c = c;
        // |e^(-itP) - e^(-itW)| = 2 |sin(t (P - W) / 2)|.
        for (int i = 1; i <= spec.time_samples; ++i) {
            const double t = T * i / spec.time_samples;
            const double e = std::sqrt((4 * (0.5 * t * delta).sin().square() * mass).sum());
            row.trace.push_back(e);
            if (e > row.error) {
                row.error = e;
                row.t_at_sup = t;
            }
        }
        out.rows.push_back(row);
    }

    std::vector<double> x, y;
    for (const auto& r : out.rows) {
        if (r.error < spec.floor) {
            ++out.discarded;
            continue;
        }
        x.push_back(std::log(r.c));
        y.push_back(std::log(r.error));
    }
    if (x.size() >= 2) {
        const LineFit line = least_squares_line(x, y);
        out.fit = LogLogFit{line.slope, line.intercept, line.r_squared, x.size()};
    }
    return out;
}

StrichartzResult strichartz_ratio(const WaveField& psi0, const LinearFlow& flow,
                                  const AdmissiblePair& pair, double T, double dt)
{
    require_same_grid(flow.grid(), psi0.grid());
    if (pair.dim() != psi0.grid().dim())
        throw DomainError("admissible pair dimension does not match the grid");
    const std::size_t K = step_count(T, dt);
    const WaveField hat = to_frequency(psi0);

    std::vector<double> values;
    values.reserve(K + 1);
    for (std::size_t i = 0; i <= K; ++i) {
        WaveField u = hat;
        flow.apply(u.values(), dt * static_cast<double>(i));
        values.push_back(lebesgue_norm(to_position(std::move(u)), pair.r()));
    }
    StrichartzResult out;
    out.samples = K + 1;
    out.spacetime = time_norm(values, dt, pair.q());
    out.source = pair.kind() == Admissibility::odd
                     ? psi0.l2_norm()
                     : sobolev_norm(hat, pair.source_regularity(), true);
    if (!(out.source > 0))
        throw DomainError("initial data has zero source norm");
    out.ratio = out.spacetime / out.source;
    return out;
}

Trajectory inhomogeneous_apply(const LinearFlow& flow, const Trajectory& forcing)
{
    if (forcing.frames.empty())
        throw DomainError("forcing trajectory is empty");
    if (forcing.frames.size() > 1 && !(forcing.dt > 0))
        throw DomainError("forcing trajectory needs dt > 0");
    for (const auto& f : forcing.frames)
        require_same_grid(flow.grid(), f.grid());

    Trajectory out;
    out.t0 = forcing.t0;
    out.dt = forcing.dt;
    const Grid& g = flow.grid();
    Eigen::ArrayXcd acc = Eigen::ArrayXcd::Zero(static_cast<Eigen::Index>(g.size()));
    Eigen::ArrayXcd prev;
    for (std::size_t i = 0; i < forcing.frames.size(); ++i) {
        const double t = forcing.t0 + forcing.dt * static_cast<double>(i);
        // G(s) = U(-s) F(s); D(t) = U(t) int G.
        Eigen::ArrayXcd G = to_frequency(forcing.frames[i]).values();
        flow.apply(G, -t);
        if (i > 0)
            acc += (0.5 * forcing.dt) * (prev + G);
        prev = std::move(G);
        WaveField d(g, acc, Representation::frequency);
        flow.apply(d.values(), t);
        out.frames.push_back(to_position(std::move(d)));
    }
    return out;
}

RetardedResult retarded_ratio(const LinearFlow& flow, const Trajectory& forcing,
                              const AdmissiblePair& pair, const AdmissiblePair& dual_pair)
{
    const Trajectory D = inhomogeneous_apply(flow, forcing);
    RetardedResult out;
    out.duhamel = spacetime_norm(D, pair);
    out.forcing = spacetime_norm(forcing, dual_pair.q_dual(), dual_pair.r_dual());
    if (!(out.forcing > 0))
        throw DomainError("forcing has zero dual norm");
    out.ratio = out.duhamel / out.forcing;
    return out;
}

} // namespace hischro
