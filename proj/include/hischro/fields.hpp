#pragma once

#include "hischro/bands.hpp"
#include "hischro/error.hpp"

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hischro {

using Complex = std::complex<double>;
inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Periodic lattice on [-L, L)^d with n points per axis, x_j = -L + j dx.
///
/// The Fourier transform approximates the unitary continuum transform
///
///   f^(xi) = (2 pi)^(-d/2) \int f(x) e^(-i x.xi) dx
///
/// by the Riemann sum over the lattice; frequencies xi = k pi / L are
/// stored in FFT order (k = 0, 1, ..., n/2 - 1, -n/2, ..., -1) per axis,
/// row-major with the last axis fastest. With these weights Plancherel
/// reads sum |f|^2 dx^d = sum |f^|^2 dxi^d.
class Grid {
public:
    Grid(int d, int n, double L);

    int dim() const { return d_; }
    int points_per_axis() const { return n_; }
    double half_width() const { return L_; }
    std::size_t size() const { return size_; }

    double spacing() const { return 2 * L_ / n_; }
    double frequency_spacing() const;
    /// pi n / (2L): the largest |xi_i| along one axis.
    double max_frequency() const;
    double cell_volume() const;
    double frequency_cell_volume() const;

    /// Coordinates along one axis: positions -L + j dx, frequencies in FFT order.
    Eigen::ArrayXd position_axis() const;
    Eigen::ArrayXd frequency_axis() const;

    /// |x| and |xi| at every flat index.
    const Eigen::ArrayXd& position_modulus() const;
    const Eigen::ArrayXd& frequency_modulus() const;
    /// 1 where every |k_i| < n/3, else 0.
    const Eigen::ArrayXd& dealias_mask() const;

    /// Multi-index of a flat index (last axis fastest).
    std::vector<int> unflatten(std::size_t flat) const;
    Eigen::VectorXd frequency_at(std::size_t flat) const;
    Eigen::VectorXd position_at(std::size_t flat) const;

    /// Throws ResolutionError unless max_frequency() >= 8c.
    void require_resolves(double c) const;

    /// In-place transforms on n^d contiguous samples, with the unitary
    /// normalisation and the lattice offset phase already applied.
    void forward(Complex* data) const;
    void inverse(Complex* data) const;

    bool operator==(const Grid& o) const { return d_ == o.d_ && n_ == o.n_ && L_ == o.L_; }
    bool operator!=(const Grid& o) const { return !(*this == o); }

private:
    struct Impl;
    int d_;
    int n_;
    double L_;
    std::size_t size_;
    std::shared_ptr<const Impl> impl_;
};

enum class Representation : std::uint32_t { position = 0, frequency = 1 };
enum class Direction { forward, inverse };

/// Complex samples on a grid, in position or frequency representation.
class WaveField {
public:
    explicit WaveField(Grid grid, Representation rep = Representation::position);
    WaveField(Grid grid, Eigen::ArrayXcd values, Representation rep);

    const Grid& grid() const { return grid_; }
    Representation representation() const { return rep_; }
    bool in_position() const { return rep_ == Representation::position; }

    Eigen::ArrayXcd& values() { return values_; }
    const Eigen::ArrayXcd& values() const { return values_; }

    /// L^2 norm, computed in whichever representation the field is in.
    double l2_norm() const;

    WaveField& operator+=(const WaveField& o);
    WaveField& operator-=(const WaveField& o);
    WaveField& operator*=(Complex s);

private:
    Grid grid_;
    Eigen::ArrayXcd values_;
    Representation rep_;
};

WaveField operator+(WaveField a, const WaveField& b);
WaveField operator-(WaveField a, const WaveField& b);
WaveField operator*(Complex s, WaveField a);

/// Unitary transform; the field must be in the source representation of
/// the direction (position for forward).
WaveField transform(const WaveField& f, Direction dir);
WaveField to_frequency(WaveField f);
WaveField to_position(WaveField f);

/// Throws DomainError unless both fields live on the same grid.
void require_same_grid(const Grid& a, const Grid& b);

/// Inner product <a, b> = sum conj(a) b dx^d (either representation).
Complex inner_product(const WaveField& a, const WaveField& b);

/// Multiplies the frequency samples by chi_N(|xi|); result keeps the
/// representation of the input.
WaveField project_band(const WaveField& f, int N);

/// Apply a radial Fourier multiplier m(|xi|).
template <typename F>
WaveField apply_radial_multiplier(const WaveField& f, F m)
{
    WaveField g = to_frequency(f);
    const auto& k = g.grid().frequency_modulus();
    for (Eigen::Index i = 0; i < k.size(); ++i)
        g.values()(i) *= m(k(i));
    return f.in_position() ? to_position(std::move(g)) : g;
}

/// Range of bands whose support meets the grid's nonzero frequencies.
std::pair<int, int> resolved_band_range(const Grid& g);

/// (sum |f|^p dx^d)^(1/p); p = infinity gives the max modulus.
double lebesgue_norm(const WaveField& f, double p);

/// l^2 norm of <xi>^s f^ (or |xi|^s f^ when homogeneous).
double sobolev_norm(const WaveField& f, double s, bool homogeneous = false);

enum class Admissibility { odd, even };

/// Strichartz exponent pair (q, r), validated against its class.
class AdmissiblePair {
public:
    AdmissiblePair(double q, double r, Admissibility kind, int d);

    double q() const { return q_; }
    double r() const { return r_; }
    Admissibility kind() const { return kind_; }
    int dim() const { return d_; }

    /// Regularity of the homogeneous Sobolev source norm: 0 for the odd
    /// class, 1/q (d = 1) or 2(d-1)/q (d >= 2) for the even class.
    double source_regularity() const;

    /// Dual exponents q', r'.
    double q_dual() const;
    double r_dual() const;

private:
    double q_, r_;
    Admissibility kind_;
    int d_;
};

/// Uniformly sampled trajectory t_k = t0 + k dt.
struct Trajectory {
    double t0 = 0;
    double dt = 0;
    std::vector<WaveField> frames;
};

/// Composite trapezoid in t of a sequence of nonnegative values raised to
/// the power q, then the q-th root; q = infinity is the maximum.
double time_norm(const std::vector<double>& values, double dt, double q);

/// L^q_t L^r_x norm of a trajectory over its horizon.
double spacetime_norm(const Trajectory& traj, double q, double r);
double spacetime_norm(const Trajectory& traj, const AdmissiblePair& pair);

struct GaussianProfile {
    double width = 1.0;
    std::vector<double> modulation; ///< wave vector k; empty means zero
    std::vector<double> center;     ///< empty means the origin
    double amplitude = 1.0;
};

struct RoughProfile {
    double sigma = 0.5;
    std::uint64_t seed = 0;
    double epsilon = 0.05;
};

using ProfileSpec = std::variant<GaussianProfile, RoughProfile>;

/// Initial data on the grid (position representation).
WaveField synthesize_data(const Grid& grid, const ProfileSpec& profile);

/// Binary snapshot: uint32 d, uint32 n, float64 L, uint32 representation,
/// then n^d (float64 re, float64 im) pairs, little-endian, row-major.
/// A JSON sidecar <path>.json carries the same header fields.
void write_field(const std::filesystem::path& path, const WaveField& f);
WaveField read_field(const std::filesystem::path& path);

} // namespace hischro
