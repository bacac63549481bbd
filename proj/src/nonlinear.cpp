#include "hischro/nonlinear.hpp"

#include "hischro/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hischro {

namespace {

constexpr double pi = std::numbers::pi;

// 4 pi / |xi|^2 under the 2/3 mask, zero at xi = 0.
Eigen::ArrayXd coulomb_multiplier(const Grid& g)
{
    const auto& k = g.frequency_modulus();
    const auto& mask = g.dealias_mask();
    Eigen::ArrayXd m(k.size());
    for (Eigen::Index i = 0; i < k.size(); ++i)
        m[i] = k[i] > 0 ? 4 * pi / (k[i] * k[i]) * mask[i] : 0.0;
    return m;
}

class Coulomb {
public:
    explicit Coulomb(const Grid& g) : g_(g), m_(coulomb_multiplier(g)) {}

    Eigen::ArrayXcd operator()(Eigen::ArrayXcd rho, double kappa) const
    {
        g_.forward(rho.data());
        rho *= m_ * kappa;
        g_.inverse(rho.data());
        return rho;
    }

    Eigen::ArrayXd real(const Eigen::ArrayXd& rho, double kappa) const
    {
        return (*this)(rho.cast<Complex>(), kappa).real();
    }

private:
    Grid g_;
    Eigen::ArrayXd m_;
};

void require_3d(const Grid& g)
{
    if (g.dim() != 3)
        throw DomainError("orbital systems live on 3-D grids, got d = " + std::to_string(g.dim()));
}

Eigen::ArrayXd density(const std::vector<WaveField>& orbitals)
{
    Eigen::ArrayXd rho = Eigen::ArrayXd::Zero(orbitals.front().values().size());
    for (const auto& f : orbitals)
        rho += f.values().abs2();
    return rho;
}

double high_fraction(const Grid& g, const Eigen::ArrayXcd& hat)
{
    const Eigen::ArrayXd a = hat.abs2();
    const double total = a.sum();
    if (!(total > 0))
        return 0;
    return ((1.0 - g.dealias_mask()) * a).sum() / total;
}

void check_aliasing(const Grid& g, const Eigen::ArrayXcd& hat)
{
    const double f = high_fraction(g, hat);
    if (f > aliasing_threshold)
        throw AliasingError("mass fraction " + format_double(f) + " above the 2/3 mask (threshold " +
                            format_double(aliasing_threshold) + ")");
}

// Position-space field through half a linear step; checks the spectrum on the way.
void linear_step(Eigen::ArrayXcd& values, const LinearFlow& flow, double h, bool check)
{
    const Grid& g = flow.grid();
    g.forward(values.data());
    if (check)
        check_aliasing(g, values);
    flow.apply(values, h);
    g.inverse(values.data());
}

// e^(-i theta) - 1 without cancellation at small theta.
Complex phase_minus_one(double theta)
{
    return Complex(0, -2 * std::sin(0.5 * theta)) * std::polar(1.0, -0.5 * theta);
}

Eigen::ArrayXd power_potential(const Grid& g, const Eigen::ArrayXcd& psi, double kappa, double nu)
{
    Eigen::ArrayXcd v = (kappa * psi.abs().pow(nu - 1)).cast<Complex>();
    if (kappa == 0)
        return Eigen::ArrayXd::Zero(psi.size());
    g.forward(v.data());
    v *= g.dealias_mask();
    g.inverse(v.data());
    return v.real();
}

// Exchange entries X(k, l) for k < l, packed row by row.
std::vector<Eigen::ArrayXcd> exchange_entries(const Coulomb& coulomb, const std::vector<WaveField>& orbs,
                                              double kappa)
{
    std::vector<Eigen::ArrayXcd> x;
    for (std::size_t k = 0; k < orbs.size(); ++k)
        for (std::size_t l = k + 1; l < orbs.size(); ++l)
            x.push_back(coulomb(orbs[l].values().conjugate() * orbs[k].values(), kappa));
    return x;
}

// psi(x) <- exp(-i tau M(x)) psi(x), M = V I - X off the diagonal.
void exchange_flow(const std::vector<WaveField>& in, std::vector<WaveField>& out, const Eigen::ArrayXd& V,
                   const std::vector<Eigen::ArrayXcd>& X, double tau)
{
    const std::size_t N = in.size();
    const Eigen::Index n = V.size();
    if (N == 2) {
        // M - V I = [[0, -x], [-conj x, 0]] squares to |x|^2 I.
        for (Eigen::Index i = 0; i < n; ++i) {
            const Complex x = X[0][i];
            const double a = std::abs(x);
            const double cs = std::cos(tau * a);
            const Complex isn = Complex(0, a > 0 ? std::sin(tau * a) / a : tau);
            const Complex p = std::polar(1.0, -tau * V[i]);
            const Complex u = in[0].values()[i], v = in[1].values()[i];
            out[0].values()[i] = p * (cs * u + isn * x * v);
            out[1].values()[i] = p * (cs * v + isn * std::conj(x) * u);
        }
        return;
    }
    const auto Ni = static_cast<Eigen::Index>(N);
    Eigen::MatrixXcd M(Ni, Ni);
    Eigen::VectorXcd v(Ni), w(Ni);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Ni);
    for (Eigen::Index i = 0; i < n; ++i) {
        M.setZero();
        std::size_t p = 0;
        for (std::size_t k = 0; k < N; ++k)
            for (std::size_t l = k + 1; l < N; ++l, ++p) {
                M(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = -X[p][i];
                M(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = -std::conj(X[p][i]);
            }
        for (std::size_t k = 0; k < N; ++k)
            v[static_cast<Eigen::Index>(k)] = in[k].values()[i];
        es.compute(M);
        w = es.eigenvectors().adjoint() * v;
        for (Eigen::Index j = 0; j < Ni; ++j)
            w[j] *= std::polar(1.0, -tau * es.eigenvalues()[j]);
        v = es.eigenvectors() * w;
        const Complex phase = std::polar(1.0, -tau * V[i]);
        for (std::size_t k = 0; k < N; ++k)
            out[k].values()[i] = phase * v[static_cast<Eigen::Index>(k)];
    }
}

std::size_t steps_for(double T, double dt)
{
    if (!(T > 0) || !(dt > 0))
        throw DomainError("horizon and time step must be positive");
    const double k = T / dt;
    const double K = std::round(k);
    if (K < 1 || std::abs(k - K) > 1e-9 * std::max(1.0, k))
        throw DomainError("time step " + format_double(dt) + " does not divide " + format_double(T));
    return static_cast<std::size_t>(K);
}

double kinetic(const WaveField& f, const LinearFlow& flow)
{
    const WaveField hat = to_frequency(f);
    return (flow.symbol_values() * hat.values().abs2()).sum() * flow.grid().frequency_cell_volume();
}

} // namespace

OrbitalSystem::OrbitalSystem(std::vector<WaveField> orbitals, double kappa, OrbitalModel model)
    : orbitals_(std::move(orbitals)), kappa_(kappa), model_(model)
{
    if (orbitals_.empty())
        throw DomainError("an orbital system needs at least one orbital");
    require_3d(orbitals_.front().grid());
    for (auto& f : orbitals_) {
        require_same_grid(orbitals_.front().grid(), f.grid());
        if (!f.in_position())
            f = to_position(std::move(f));
    }
    if (!(mass() > 0))
        throw DomainError("total mass must be positive");
    const double defect = orthogonality_defect();
    if (defect > 1e-10)
        throw DomainError("orbitals are not mutually orthogonal (defect " + format_double(defect) + ")");
}

double OrbitalSystem::mass() const
{
    double m = 0;
    for (const auto& f : orbitals_)
        m += f.values().abs2().sum();
    return m * grid().cell_volume();
}

double OrbitalSystem::orthogonality_defect() const
{
    double worst = 0;
    for (std::size_t k = 0; k < orbitals_.size(); ++k)
        for (std::size_t l = k + 1; l < orbitals_.size(); ++l) {
            const double nk = orbitals_[k].l2_norm();
            const double nl = orbitals_[l].l2_norm();
            if (nk == 0 || nl == 0)
                continue;
            worst = std::max(worst, std::abs(inner_product(orbitals_[k], orbitals_[l])) / (nk * nl));
        }
    return worst;
}

NLSState::NLSState(WaveField psi_, double kappa_, double nu_) : psi(std::move(psi_)), kappa(kappa_), nu(nu_)
{
    if (!(nu > 1))
        throw DomainError("power nu must exceed 1");
    if (!psi.in_position())
        psi = to_position(std::move(psi));
}

std::vector<WaveField> hermite_orbitals(const Grid& grid, int count, double width)
{
    require_3d(grid);
    if (count < 1 || count > 4)
        throw DomainError("hermite_orbitals supports 1 to 4 orbitals");
    if (!(width > 0))
        throw DomainError("width must be positive");
    const Eigen::ArrayXd k2 = grid.frequency_modulus().square();
    const Eigen::ArrayXd gauss = (-0.5 * width * width * k2).exp();
    std::vector<WaveField> out;
    for (int m = 0; m < count; ++m) {
        Eigen::ArrayXcd v(gauss.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            // i xi_m G^ is the transform of -x_m G / w^2 (up to periodisation).
            const auto flat = static_cast<std::size_t>(i);
            const auto idx = grid.unflatten(flat);
            // The Nyquist row has no mirror image; dropping it keeps parity exact.
            if (std::find(idx.begin(), idx.end(), grid.points_per_axis() / 2) != idx.end()) {
                v[i] = 0;
                continue;
            }
            const Complex factor = m > 0 ? Complex(0, grid.frequency_at(flat)[m - 1]) : 1.0;
            v[i] = factor * gauss[i];
        }
        WaveField f = to_position(WaveField(grid, std::move(v), Representation::frequency));
        f *= 1.0 / f.l2_norm();
        out.push_back(std::move(f));
    }
    return out;
}

Eigen::ArrayXd coulomb_potential(const Grid& grid, const Eigen::ArrayXd& rho, double kappa)
{
    require_3d(grid);
    return Coulomb(grid).real(rho, kappa);
}

Eigen::ArrayXcd coulomb_potential(const Grid& grid, const Eigen::ArrayXcd& rho, double kappa)
{
    require_3d(grid);
    return Coulomb(grid)(rho, kappa);
}

Eigen::ArrayXd hartree_potential(const OrbitalSystem& system)
{
    return coulomb_potential(system.grid(), density(system.orbitals()), system.kappa());
}

Eigen::ArrayXcd exchange_potential(const OrbitalSystem& system, std::size_t k, std::size_t l)
{
    const auto& o = system.orbitals();
    if (k >= o.size() || l >= o.size())
        throw DomainError("orbital index out of range");
    return coulomb_potential(system.grid(), Eigen::ArrayXcd(o[l].values().conjugate() * o[k].values()),
                             system.kappa());
}

WaveField fock_exchange(const OrbitalSystem& system, std::size_t k)
{
    if (system.model() != OrbitalModel::hartree_fock)
        throw DomainError("fock_exchange needs the hartree-fock model");
    if (k >= system.size())
        throw DomainError("orbital index out of range");
    WaveField out(system.grid());
    out.values().setZero();
    for (std::size_t l = 0; l < system.size(); ++l)
        if (l != k)
            out.values() += exchange_potential(system, k, l) * system.orbitals()[l].values();
    return out;
}

double energy(const OrbitalSystem& system, const LinearFlow& flow)
{
    require_same_grid(flow.grid(), system.grid());
    double kin = 0;
    for (const auto& f : system.orbitals())
        kin += kinetic(f, flow);
    const Eigen::ArrayXd rho = density(system.orbitals());
    double inter = (hartree_potential(system) * rho).sum();
    if (system.model() == OrbitalModel::hartree_fock)
        for (std::size_t k = 0; k < system.size(); ++k)
            inter -= (fock_exchange(system, k).values() * system.orbitals()[k].values().conjugate()).sum().real();
    return 0.5 * kin + 0.25 * inter * system.grid().cell_volume();
}

double energy(const NLSState& state, const LinearFlow& flow)
{
    require_same_grid(flow.grid(), state.psi.grid());
    const double pot = state.psi.values().abs().pow(state.nu + 1).sum() * state.psi.grid().cell_volume();
    return 0.5 * kinetic(state.psi, flow) + state.kappa / (state.nu + 1) * pot;
}

void strang_step(OrbitalSystem& system, const LinearFlow& flow, double dt)
{
    if (!(dt > 0))
        throw DomainError("time step must be positive");
    require_same_grid(flow.grid(), system.grid());
    auto& orbs = system.orbitals();
    const double kappa = system.kappa();
    if (kappa == 0) {
        for (auto& f : orbs)
            linear_step(f.values(), flow, dt, true);
        return;
    }
    for (auto& f : orbs)
        linear_step(f.values(), flow, 0.5 * dt, true);

    const Coulomb coulomb(system.grid());
    // The pointwise flow is unitary in orbital space, so the density and V are frozen.
    const Eigen::ArrayXd V = coulomb.real(density(orbs), kappa);
    if (system.model() == OrbitalModel::hartree || orbs.size() == 1) {
        const Eigen::ArrayXcd phase = (V * -dt).unaryExpr([](double a) { return std::polar(1.0, a); });
        for (auto& f : orbs)
            f.values() *= phase;
    } else {
        std::vector<WaveField> mid = orbs;
        exchange_flow(orbs, mid, V, exchange_entries(coulomb, orbs, kappa), 0.5 * dt);
        const auto X = exchange_entries(coulomb, mid, kappa);
        exchange_flow(std::vector<WaveField>(orbs), orbs, V, X, dt);
    }

    for (auto& f : orbs)
        linear_step(f.values(), flow, 0.5 * dt, false);
}

void strang_step(NLSState& state, const LinearFlow& flow, double dt)
{
    if (!(dt > 0))
        throw DomainError("time step must be positive");
    require_same_grid(flow.grid(), state.psi.grid());
    auto& v = state.psi.values();
    if (state.kappa == 0) {
        linear_step(v, flow, dt, true);
        return;
    }
    linear_step(v, flow, 0.5 * dt, true);
    const Eigen::ArrayXd V = power_potential(flow.grid(), v, state.kappa, state.nu);
    v *= (V * -dt).unaryExpr([](double a) { return std::polar(1.0, a); });
    linear_step(v, flow, 0.5 * dt, false);
}

double ConservedLedger::mass_drift() const
{
    double d = 0;
    for (const auto& r : rows)
        d = std::max(d, std::abs(r.mass - rows.front().mass));
    return d;
}

double ConservedLedger::energy_drift() const
{
    double d = 0;
    for (const auto& r : rows)
        d = std::max(d, std::abs(r.energy - rows.front().energy));
    return d;
}

double ConservedLedger::max_orthogonality_defect() const
{
    double d = 0;
    for (const auto& r : rows)
        d = std::max(d, r.orthogonality);
    return d;
}

OrbitalRun evolve_nonlinear(OrbitalSystem& system, const LinearFlow& flow, const EvolveSpec& spec)
{
    const std::size_t K = steps_for(spec.T, spec.dt);
    if (spec.sample_every < 1)
        throw DomainError("sample_every must be >= 1");
    OrbitalRun run;
    auto record = [&](std::size_t step) {
        const double t = spec.dt * static_cast<double>(step);
        run.ledger.rows.push_back({t, system.mass(), energy(system, flow), system.orthogonality_defect()});
        run.times.push_back(t);
        if (spec.keep_frames)
            run.frames.push_back(system.orbitals());
    };
    record(0);
    for (std::size_t s = 1; s <= K; ++s) {
        try {
            strang_step(system, flow, spec.dt);
        } catch (const AliasingError& e) {
            throw AliasingError(std::string(e.what()) + " (step " + std::to_string(s) + " of " +
                                std::to_string(K) + ")");
        }
        if (s % static_cast<std::size_t>(spec.sample_every) == 0 || s == K)
            record(s);
    }
    return run;
}

NLSRun evolve_nonlinear(NLSState& state, const LinearFlow& flow, const EvolveSpec& spec)
{
    const std::size_t K = steps_for(spec.T, spec.dt);
    if (spec.sample_every < 1)
        throw DomainError("sample_every must be >= 1");
    NLSRun run;
    run.trajectory.dt = spec.dt * spec.sample_every;
    auto record = [&](std::size_t step) {
        const double t = spec.dt * static_cast<double>(step);
        const double m = state.psi.values().abs2().sum() * state.psi.grid().cell_volume();
        run.ledger.rows.push_back({t, m, energy(state, flow), 0});
        if (spec.keep_frames)
            run.trajectory.frames.push_back(state.psi);
    };
    record(0);
    for (std::size_t s = 1; s <= K; ++s) {
        try {
            strang_step(state, flow, spec.dt);
        } catch (const AliasingError& e) {
            throw AliasingError(std::string(e.what()) + " (step " + std::to_string(s) + " of " +
                                std::to_string(K) + ")");
        }
        if (s % static_cast<std::size_t>(spec.sample_every) == 0 || s == K)
            record(s);
    }
    return run;
}

ErrorCurve approximation_curve(const OrbitalSystem& initial, int J, double c, const ApproximationSpec& spec)
{
    if (J < 1 || J % 2 == 0)
        throw DomainError("the approximation experiment needs odd J, got " + std::to_string(J));
    const std::size_t K = steps_for(spec.T, spec.dt);
    if (spec.sample_every < 1)
        throw DomainError("sample_every must be >= 1");
    const Grid& g = initial.grid();
    const LinearFlow pseudo = LinearFlow::pseudo_relativistic(g, c);
    const LinearFlow expansion = spec.identical_models ? pseudo
                                                       : LinearFlow(g, DispersionSymbol<double>(J, c));
    OrbitalSystem phi = initial;
    OrbitalSystem psi = initial;
    ErrorCurve curve;
    curve.c = c;
    auto record = [&](std::size_t step) {
        double e = 0;
        for (std::size_t k = 0; k < phi.size(); ++k)
            e = std::max(e, (phi.orbitals()[k] - psi.orbitals()[k]).l2_norm());
        curve.t.push_back(spec.dt * static_cast<double>(step));
        curve.error.push_back(e);
    };
    record(0);
    for (std::size_t s = 1; s <= K; ++s) {
        strang_step(phi, pseudo, spec.dt);
        strang_step(psi, expansion, spec.dt);
        if (s % static_cast<std::size_t>(spec.sample_every) == 0 || s == K)
            record(s);
    }
    return curve;
}

std::optional<EnvelopeFit> fit_envelope(const std::vector<ErrorCurve>& curves, double c_exponent)
{
    struct Pt {
        double logc, t, loge;
    };
    std::vector<Pt> pts;
    double tmax = 0;
    for (const auto& cv : curves)
        for (std::size_t i = 0; i < cv.t.size(); ++i)
            if (cv.error[i] > 0) {
                pts.push_back({std::log(cv.c), cv.t[i], std::log(cv.error[i])});
                tmax = std::max(tmax, cv.t[i]);
            }
    if (pts.empty())
        return std::nullopt;
    auto logA = [&](double B) {
        double a = -infinity;
        for (const auto& p : pts)
            a = std::max(a, p.loge - c_exponent * p.logc - B * p.t);
        return a;
    };
    auto gap = [&](double B) {
        const double a = logA(B);
        double s = 0;
        for (const auto& p : pts)
            s += a + c_exponent * p.logc + B * p.t - p.loge;
        return s;
    };
    const double Bmax = tmax > 0 ? 40.0 / tmax : 0.0;
    const int scan = 4000;
    double bestB = 0, best = gap(0);
    for (int i = 1; i <= scan; ++i) {
        const double B = Bmax * i / scan;
        const double v = gap(B);
        if (v < best) {
            best = v;
            bestB = B;
        }
    }
    EnvelopeFit fit;
    fit.B = bestB;
    // Nudge up by a few ulps so the envelope dominates after re-evaluation.
    fit.A = std::exp(logA(bestB)) * (1 + 1e-12);
    fit.c_exponent = c_exponent;
    if (!std::isfinite(fit.A) || !std::isfinite(fit.B))
        return std::nullopt;
    return fit;
}

ApproximationResult summarize_approximation(int J, std::vector<ErrorCurve> curves)
{
    ApproximationResult out;
    out.J = J;
    out.curves = std::move(curves);
    out.envelope = fit_envelope(out.curves, -static_cast<double>(J) / (2.0 * (J + 1)));
    std::vector<double> x, y;
    for (const auto& cv : out.curves) {
        for (std::size_t i = 1; i < cv.error.size(); ++i)
            if (cv.error[i] < cv.error[i - 1])
                out.time_monotonicity_violations.emplace_back(cv.c, cv.t[i]);
        if (!cv.error.empty() && cv.error.back() > 0) {
            x.push_back(std::log(cv.c));
            y.push_back(std::log(cv.error.back()));
        }
    }
    if (x.size() >= 2)
        out.c_slope = least_squares_line(x, y);
    return out;
}

ApproximationResult approximation_experiment(const OrbitalSystem& initial, int J, const std::vector<double>& cs,
                                             const ApproximationSpec& spec)
{
    if (cs.empty())
        throw DomainError("approximation_experiment needs at least one c");
    std::vector<ErrorCurve> curves;
    for (double c : cs)
        curves.push_back(approximation_curve(initial, J, c, spec));
    return summarize_approximation(J, std::move(curves));
}

ScatteringResult scattering_state(const NLSState& state, const LinearFlow& flow, const ScatteringSpec& spec)
{
    const Grid& g = state.psi.grid();
    require_same_grid(flow.grid(), g);
    if (flow.kind() != FlowKind::expansion || flow.order() % 2 == 0)
        throw DomainError("scattering needs an odd-order expansion flow");
    const int d = g.dim();
    if (!(state.nu > 1 + 4.0 / d) || (d >= 3 && !(state.nu < (d + 2.0) / (d - 2.0))))
        throw DomainError("power nu = " + format_double(state.nu) + " outside the H^1 scattering range for d = " +
                          std::to_string(d));
    const double h1 = sobolev_norm(state.psi, 1);
    if (h1 > spec.epsilon0 * (1 + 1e-12)) // data scaled to exactly epsilon0 may round just above it
        throw DomainError("initial H^1 norm " + format_double(h1) + " exceeds the small-data threshold " +
                          format_double(spec.epsilon0));
    if (spec.checkpoints.size() < 2)
        throw DomainError("need at least two checkpoints");
    std::vector<std::size_t> marks;
    for (std::size_t i = 0; i < spec.checkpoints.size(); ++i) {
        marks.push_back(steps_for(spec.checkpoints[i], spec.dt));
        if (i > 0 && marks[i] <= marks[i - 1])
            throw DomainError("checkpoints must increase");
    }

    const Eigen::ArrayXcd hat0 = to_frequency(state.psi).values();
    const Eigen::Index n = hat0.size();
    Eigen::ArrayXcd S = Eigen::ArrayXcd::Zero(n); // psi_+ - psi0, frequency space
    Eigen::ArrayXcd prev;
    ScatteringResult out{state.psi, {}, false, false};
    std::size_t next = 0;
    for (std::size_t s = 0; s < marks.back(); ++s) {
        const double tm = spec.dt * (static_cast<double>(s) + 0.5);
        Eigen::ArrayXcd w = hat0 + S;
        try {
            check_aliasing(g, w);
        } catch (const AliasingError& e) {
            throw AliasingError(std::string(e.what()) + " at t = " + format_double(tm));
        }
        flow.apply(w, tm);
        g.inverse(w.data());
        const Eigen::ArrayXd V = power_potential(g, w, state.kappa, state.nu);
        for (Eigen::Index i = 0; i < n; ++i)
            w[i] *= phase_minus_one(spec.dt * V[i]);
        g.forward(w.data());
        flow.apply(w, -tm);
        S += w;
        if (s + 1 == marks[next]) {
            if (next > 0) {
                const WaveField inc(g, S - prev, Representation::frequency);
                out.increments.push_back(sobolev_norm(inc, 1));
            }
            prev = S;
            ++next;
        }
    }

    out.decreasing = true;
    for (std::size_t i = 1; i < out.increments.size(); ++i)
        if (!(out.increments[i] < out.increments[i - 1]))
            out.decreasing = false;
    out.converged = out.increments.back() < spec.tolerance;

    Eigen::ArrayXcd delta = S;
    g.inverse(delta.data());
    out.psi_plus.values() += delta;
    return out;
}

} // namespace hischro
