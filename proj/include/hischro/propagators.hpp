#pragma once

#include "hischro/fields.hpp"
#include "hischro/fit.hpp"
#include "hischro/symbols.hpp"

#include <optional>
#include <vector>

namespace hischro {

enum class FlowKind { expansion, pseudo_relativistic };

/// Exact Fourier-multiplier flow e^(-it Omega(|xi|)) on a grid. Pairing
/// with a grid checks that the grid resolves 8c.
class LinearFlow {
public:
    /// Order-J expansion flow.
    LinearFlow(const Grid& grid, const DispersionSymbol<double>& sym);
    /// sqrt(c^4 + c^2 |xi|^2) - c^2.
    static LinearFlow pseudo_relativistic(const Grid& grid, double c);

    FlowKind kind() const { return kind_; }
    double speed() const { return c_; }
    int order() const { return J_; } ///< 0 for the pseudo-relativistic flow
    const Grid& grid() const { return grid_; }

    /// Omega at every frequency sample (FFT order).
    const Eigen::ArrayXd& symbol_values() const { return omega_; }
    double symbol(double r) const;

    /// freq *= e^(-it Omega) in place.
    void apply(Eigen::ArrayXcd& freq, double t) const;

private:
    LinearFlow(const Grid& grid, FlowKind kind, int J, double c);

    Grid grid_;
    FlowKind kind_;
    int J_;
    double c_;
    Eigen::ArrayXd omega_;
};

/// U(t) f; the result keeps f's representation.
WaveField evolve(const LinearFlow& flow, const WaveField& f, double t);

/// sqrt(c^4 + c^2 r^2) - c^2 - omega_J(r), without the cancellation of the
/// direct difference at small r/c.
double expansion_remainder(int J, double c, double r);
/// Same at every radius in r, with the coefficients built once.
Eigen::ArrayXd expansion_remainder(int J, double c, const Eigen::ArrayXd& r);

struct LinearDifferenceRow {
    double c = 0;
    double error = 0; ///< sup over the time samples of ||(U_pseudo - U_J) psi0||_2
    double t_at_sup = 0;
    std::vector<double> trace; ///< error at t = T i / samples, i = 1..samples
};

struct LinearDifferenceResult {
    int J = 0;
    double T = 0;
    std::vector<LinearDifferenceRow> rows;
    std::optional<LogLogFit> fit; ///< c-slope over rows above the floor, if >= 2 remain
    std::size_t discarded = 0;    ///< rows below the floor
};

struct LinearDifferenceSpec {
    int time_samples = 64;  ///< uniform samples of (0, T]
    double floor = 1e-12;   ///< errors below this are rounding and left out of the fit
};

/// Non-relativistic-limit difference for each c. The grid of psi0 must
/// resolve 8 max(c).
LinearDifferenceResult linear_difference(const WaveField& psi0, int J, const std::vector<double>& cs,
                                         double T, const LinearDifferenceSpec& spec = {});

struct StrichartzResult {
    double ratio = 0;
    double spacetime = 0; ///< ||U(t) psi0||_{L^q_t L^r_x} over [0, T]
    double source = 0;    ///< L^2 (odd class) or homogeneous H^s (even class)
    std::size_t samples = 0;
};

/// Finite-horizon Strichartz ratio; dt must divide T into at least 8 steps.
StrichartzResult strichartz_ratio(const WaveField& psi0, const LinearFlow& flow,
                                  const AdmissiblePair& pair, double T, double dt);

/// D(t_k) = int_{t_0}^{t_k} U(t_k - s) F(s) ds on F's time grid, trapezoid in s
/// with exact multipliers. Frames come back in position space.
Trajectory inhomogeneous_apply(const LinearFlow& flow, const Trajectory& forcing);

struct RetardedResult {
    double ratio = 0;
    double duhamel = 0; ///< ||D||_{L^q L^r}
    double forcing = 0; ///< ||F||_{L^q~' L^r~'}
};

/// ||D||_{L^q L^r} / ||F||_{L^q~' L^r~'} for the retarded Duhamel term.
RetardedResult retarded_ratio(const LinearFlow& flow, const Trajectory& forcing,
                              const AdmissiblePair& pair, const AdmissiblePair& dual_pair);

} // namespace hischro
