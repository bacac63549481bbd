#pragma once

#include "hischro/bands.hpp"
#include "hischro/fields.hpp"
#include "hischro/symbols.hpp"

#include <Eigen/Core>

#include <complex>
#include <variant>
#include <vector>

namespace hischro {

/// Smooth high-frequency damping e^(-(|xi|/scale)^8) for the full kernel.
struct Damping {
    double scale = 0;
};

/// Sum of the bands lo..hi as a single cutoff.
struct BandSum {
    int lo = 0;
    int hi = 0;
    double operator()(double r) const
    {
        double s = 0;
        for (int N = lo; N <= hi; ++N)
            s += DyadicBand{N}(r);
        return s;
    }
};

using KernelCutoff = std::variant<DyadicBand, BandSum, Damping>;

/// Damping scale margin * max(c, (|v| c^(2J-2))^(1/(2J-1))).
double damping_scale(const DispersionSymbol<double>& sym, double speed, double margin = 4.0);

struct ResolutionSpec {
    /// Quadrature nodes per 2 pi of accumulated phase; at least 32.
    double points_per_oscillation = 32;
    std::size_t max_nodes = 150'000'000;
    /// Full kernel only: move the non-stationary tail onto a complex ray.
    /// Off, every node stays on the real axis (slow, used as an oracle).
    bool deform_tail = true;
};

/// Radial reduction of
///
///   I(t, v) = (2 pi)^(-d) \int e^(i t (v.xi - omega(|xi|))) eta(|xi|) dxi
///
/// to (2 pi)^(-d) |S^(d-1)| \int r^(d-1) A_d(t |v| r) e^(-i t omega(r)) eta(r) dr
/// with the exact spherical average A_1 = cos, A_2 = J_0, A_3 = sinc.
/// Panels of 16-point Gauss-Legendre nodes are sized from the local phase
/// rate |t| (|omega'(r)| + v_max), so one set of nodes serves every
/// |v| <= v_max. With damping, the tail beyond the last point where
/// |omega'| < max(2 v_max, c) is integrated along a complex ray instead.
class RadialKernel {
public:
    RadialKernel(const DispersionSymbol<double>& sym, int d, double t, const KernelCutoff& cutoff,
                 double max_speed, const ResolutionSpec& res = {});

    /// I(t, v) for any |v| <= max_speed.
    Complex operator()(double speed) const;

    std::size_t nodes() const { return static_cast<std::size_t>(r_.size() + ray_z_.size()); }
    double max_speed() const { return vmax_; }

private:
    int d_;
    double t_;
    double vmax_;
    Eigen::ArrayXd r_;
    Eigen::ArrayXd wre_, wim_;
    Eigen::ArrayXcd ray_z_, ray_w_; ///< deformed tail, empty unless used

    void build_ray(const DispersionSymbol<double>& sym, double rs, double L, double hmax,
                   double panel_phase, double pref);
};

/// Kernel value at (t, v); v has d components.
Complex kernel_eval(const DispersionSymbol<double>& sym, double t, const Eigen::VectorXd& v,
                    const KernelCutoff& cutoff, const ResolutionSpec& res = {});

/// Full kernel in a sup search: the damping scale follows the search range.
struct FullKernel {
    double margin = 4.0;
};

using SearchCutoff = std::variant<DyadicBand, FullKernel>;

struct SearchSpec {
    double margin = 2.0;  ///< search |v| <= margin * max |omega'| over the support
    int min_coarse = 16;  ///< coarse grid size before golden-section refinement
    int max_coarse = 2000;
    double rel_tol = 1e-4; ///< golden-section tolerance, relative to v_max
    ResolutionSpec resolution;
};

struct SupResult {
    double value = 0; ///< max |I(t, v)| found
    double speed = 0; ///< maximizing |v|
    std::size_t evaluations = 0;
};

/// Search range for |v|. Bands: margin * max |omega'| on [2^N, 2^(N+2)].
/// Full kernel: margin * max omega' on [0, c], the low-curvature region that
/// carries the largest stationary-phase contributions.
double search_speed_limit(const DispersionSymbol<double>& sym, const SearchCutoff& cutoff,
                          double margin);

/// max over |v| of |I(t, v)|: coarse grid then golden section (the kernel
/// is radial in v).
SupResult kernel_sup_v(const DispersionSymbol<double>& sym, int d, double t,
                       const SearchCutoff& cutoff, const SearchSpec& spec = {});

struct DecayFit {
    double slope = 0;
    double prefactor = 0;
    double r_squared = 0;
    double t_min = 0; ///< range actually used by the fit
    double t_max = 0;
};

/// Power-law fit of (t, value) samples: needs >= 8 positive samples spanning
/// a decade in t; the earliest fifth is discarded.
DecayFit fit_decay(std::vector<std::pair<double, double>> samples);

/// n log-spaced points on [a, b].
std::vector<double> log_spaced(double a, double b, int n);

/// sup_v |I| at each t.
std::vector<std::pair<double, double>> decay_samples(const DispersionSymbol<double>& sym, int d,
                                                     const std::vector<double>& ts,
                                                     const SearchCutoff& cutoff,
                                                     const SearchSpec& spec = {});

/// Where the band sits relative to c: N = log2(ratio * c), or the full kernel.
struct BandPlacement {
    bool full = false;
    double ratio = 0.5;
    SearchCutoff cutoff_for(double c) const;
};

struct ScalingFit {
    double exponent = 0;
    double r_squared = 0;
    std::vector<std::pair<double, double>> points; ///< (c, sup_v |I|)
};

/// c-exponent of sup_v |I(t_fixed)| over a c-grid (at least two values
/// spanning a factor >= 4).
ScalingFit prefactor_scaling(int J, const std::vector<double>& cs, int d,
                             const BandPlacement& placement, double t_fixed,
                             const SearchSpec& spec = {});

/// Exponent of c fitted to (c, value) pairs.
ScalingFit fit_c_exponent(std::vector<std::pair<double, double>> points);

} // namespace hischro
