#pragma once

#include "hischro/fields.hpp"
#include "hischro/propagators.hpp"

#include <optional>
#include <vector>

namespace hischro {

enum class OrbitalModel { hartree, hartree_fock };

/// N orbitals on a shared 3-D grid, coupled through the Coulomb potential
/// and optionally the exchange term.
class OrbitalSystem {
public:
    /// Orbitals must be mutually orthogonal to 1e-10 (relative to their
    /// norms) with positive total mass.
    OrbitalSystem(std::vector<WaveField> orbitals, double kappa, OrbitalModel model);

    std::size_t size() const { return orbitals_.size(); }
    double kappa() const { return kappa_; }
    OrbitalModel model() const { return model_; }
    const Grid& grid() const { return orbitals_.front().grid(); }

    /// Position-space orbitals. Mutation skips the constructor checks.
    std::vector<WaveField>& orbitals() { return orbitals_; }
    const std::vector<WaveField>& orbitals() const { return orbitals_; }

    double mass() const;
    /// max over k != l of |<psi_k, psi_l>| / (||psi_k|| ||psi_l||).
    double orthogonality_defect() const;

private:
    std::vector<WaveField> orbitals_;
    double kappa_;
    OrbitalModel model_;
};

/// Single field with the power nonlinearity kappa |psi|^(nu-1) psi.
struct NLSState {
    NLSState(WaveField psi, double kappa, double nu);

    WaveField psi; ///< position space
    double kappa;
    double nu;
};

/// Orthogonal Hermite-Gaussian orbitals on a 3-D grid: the Gaussian, then
/// x_1, x_2, x_3 times it. Built from Fourier samples, so they are the
/// periodised profiles and stay smooth on small boxes. At most 4; each
/// normalised to unit mass.
std::vector<WaveField> hermite_orbitals(const Grid& grid, int count, double width);

/// kappa (|x|^-1 * rho) with the multiplier 4 pi / |xi|^2, the zero mode
/// removed and the 2/3 mask applied to rho.
Eigen::ArrayXd coulomb_potential(const Grid& grid, const Eigen::ArrayXd& rho, double kappa);
Eigen::ArrayXcd coulomb_potential(const Grid& grid, const Eigen::ArrayXcd& rho, double kappa);

/// kappa (|x|^-1 * sum_l |psi_l|^2), position samples.
Eigen::ArrayXd hartree_potential(const OrbitalSystem& system);

/// kappa (|x|^-1 * conj(psi_l) psi_k): the (k, l) entry of the exchange matrix.
Eigen::ArrayXcd exchange_potential(const OrbitalSystem& system, std::size_t k, std::size_t l);

/// sum_{l != k} kappa (|x|^-1 * conj(psi_l) psi_k) psi_l. Needs the
/// hartree_fock model.
WaveField fock_exchange(const OrbitalSystem& system, std::size_t k);

/// 1/2 sum_k <psi_k, Omega psi_k> + 1/4 sum_k <V psi_k - F_k, psi_k>, with
/// F_k = 0 for the Hartree model.
double energy(const OrbitalSystem& system, const LinearFlow& flow);
/// 1/2 <psi, Omega psi> + kappa / (nu + 1) int |psi|^(nu+1).
double energy(const NLSState& state, const LinearFlow& flow);

/// Fraction of the mass above the 2/3 mask beyond which a step throws
/// AliasingError.
inline constexpr double aliasing_threshold = 0.01;

/// Half linear step, nonlinear step, half linear step. The nonlinear step
/// uses the potential at the half-step state refined once at its own
/// midpoint; it is exact in time for a frozen potential.
void strang_step(OrbitalSystem& system, const LinearFlow& flow, double dt);
void strang_step(NLSState& state, const LinearFlow& flow, double dt);

struct LedgerRow {
    double t = 0;
    double mass = 0;
    double energy = 0;
    double orthogonality = 0; ///< 0 for a single field
};

struct ConservedLedger {
    std::vector<LedgerRow> rows;

    double mass_drift() const;   ///< max |M(t) - M(0)|
    double energy_drift() const; ///< max |E(t) - E(0)|
    double max_orthogonality_defect() const;
};

struct EvolveSpec {
    double T = 1;
    double dt = 0.01;
    int sample_every = 1;     ///< steps between ledger rows
    bool keep_frames = false; ///< store the state at every ledger row
};

struct OrbitalRun {
    ConservedLedger ledger;
    std::vector<double> times;
    std::vector<std::vector<WaveField>> frames;
};

struct NLSRun {
    ConservedLedger ledger;
    Trajectory trajectory; ///< filled when keep_frames
};

/// dt must divide T. The system is advanced in place.
OrbitalRun evolve_nonlinear(OrbitalSystem& system, const LinearFlow& flow, const EvolveSpec& spec);
NLSRun evolve_nonlinear(NLSState& state, const LinearFlow& flow, const EvolveSpec& spec);

struct ErrorCurve {
    double c = 0;
    std::vector<double> t;
    std::vector<double> error; ///< max_k ||phi_k(t) - psi_k(t)||_2
};

struct EnvelopeFit {
    double A = 0;
    double B = 0;
    double c_exponent = 0; ///< fixed: -J / (2 (J + 1))
};

struct ApproximationResult {
    int J = 0;
    std::vector<ErrorCurve> curves;
    std::optional<EnvelopeFit> envelope;
    std::optional<LineFit> c_slope; ///< log error vs log c at the last sample
    /// (c, t) pairs where the error decreased in t; reported, not fatal.
    std::vector<std::pair<double, double>> time_monotonicity_violations;
};

struct ApproximationSpec {
    double T = 2;
    double dt = 0.01;
    int sample_every = 10;
    /// Replace the order-J flow by the pseudo-relativistic one; the two
    /// runs must then coincide.
    bool identical_models = false;
};

/// Error between the pseudo-relativistic and the order-J systems started
/// from the same orbitals, for each c. J must be odd.
ErrorCurve approximation_curve(const OrbitalSystem& initial, int J, double c, const ApproximationSpec& spec);
ApproximationResult approximation_experiment(const OrbitalSystem& initial, int J, const std::vector<double>& cs,
                                             const ApproximationSpec& spec);
/// Assembles the fits from per-c curves (all with the same time samples).
ApproximationResult summarize_approximation(int J, std::vector<ErrorCurve> curves);

/// Smallest A, over a scan of B >= 0, with A c^p e^(Bt) >= every positive
/// measurement; B minimises the total log gap to the measurements.
std::optional<EnvelopeFit> fit_envelope(const std::vector<ErrorCurve>& curves, double c_exponent);

struct ScatteringSpec {
    double dt = 0.01;
    std::vector<double> checkpoints{1, 2, 4, 8, 16, 32, 64};
    double epsilon0 = 1e-2; ///< small-data threshold in H^1
    double tolerance = 1e-6;
};

struct ScatteringResult {
    WaveField psi_plus;             ///< at the last checkpoint, input representation
    std::vector<double> increments; ///< ||psi_+(T_{i+1}) - psi_+(T_i)||_{H^1}
    bool decreasing = false;
    bool converged = false; ///< last increment below the tolerance
};

/// psi_+(T) = U(-T) psi(T) at the checkpoints, accumulated in the
/// interaction picture so that kappa = 0 returns psi0 bit for bit. The
/// flow must have odd order; nu must exceed 1 + 4/d (and stay below
/// (d+2)/(d-2) when d >= 3).
ScatteringResult scattering_state(const NLSState& state, const LinearFlow& flow, const ScatteringSpec& spec);

} // namespace hischro
