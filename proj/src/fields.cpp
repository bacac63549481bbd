#include "hischro/fields.hpp"

#include "hischro/io.hpp"

#include <fftw3.h>
#include "json.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>

namespace hischro {

namespace {

std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

bool power_of_two(int n)
{
    return n > 0 && (n & (n - 1)) == 0;
}

} // namespace

struct Grid::Impl {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    Eigen::ArrayXd fwd_scale; // (-1)^(sum k) dx^d / (2 pi)^(d/2)
    Eigen::ArrayXd bwd_scale; // (-1)^(sum k) dxi^d / (2 pi)^(d/2)
    Eigen::ArrayXd kmod;
    Eigen::ArrayXd xmod;
    Eigen::ArrayXd mask;

    ~Impl()
    {
        std::lock_guard lock(planner_mutex());
        if (fwd)
            fftw_destroy_plan(fwd);
        if (bwd)
            fftw_destroy_plan(bwd);
    }
};

Grid::Grid(int d, int n, double L) : d_(d), n_(n), L_(L)
{
    if (d < 1 || d > 3)
        throw ConfigError("grid dimension must be 1, 2 or 3");
    if (!power_of_two(n) || n < 4)
        throw ConfigError("grid n must be a power of two >= 4, got " + std::to_string(n));
    if (!(L > 0) || !std::isfinite(L))
        throw ConfigError("grid half-width L must be positive");
    size_ = 1;
    for (int i = 0; i < d; ++i)
        size_ *= static_cast<std::size_t>(n);

    auto impl = std::make_shared<Impl>();
    {
        std::vector<int> dims(d, n);
        auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size_));
        std::lock_guard lock(planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        impl->fwd = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_FORWARD, flags);
        impl->bwd = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_BACKWARD, flags);
        fftw_free(buf);
        if (!impl->fwd || !impl->bwd)
            throw InternalError("FFTW planning failed");
    }

    const double dx = spacing();
    const double dk = frequency_spacing();
    const double norm = std::pow(2 * std::numbers::pi, -0.5 * d);
    const double fs = std::pow(dx, d) * norm;
    const double bs = std::pow(dk, d) * norm;
    impl->fwd_scale.resize(size_);
    impl->bwd_scale.resize(size_);
    impl->kmod.resize(size_);
    impl->xmod.resize(size_);
    impl->mask.resize(size_);
    const Eigen::ArrayXd kx = frequency_axis();
    const Eigen::ArrayXd xx = position_axis();
    std::vector<int> idx(d, 0);
    for (std::size_t flat = 0; flat < size_; ++flat) {
        int parity = 0;
        double k2 = 0, x2 = 0;
        bool low = true;
        for (int a = 0; a < d; ++a) {
            const int i = idx[a];
            parity += i;
            k2 += kx(i) * kx(i);
            x2 += xx(i) * xx(i);
            const int signed_k = i < n / 2 ? i : i - n;
            if (3 * std::abs(signed_k) >= n)
                low = false;
        }
        const double sign = (parity % 2) ? -1.0 : 1.0;
        impl->fwd_scale(flat) = sign * fs;
        impl->bwd_scale(flat) = sign * bs;
        impl->kmod(flat) = std::sqrt(k2);
        impl->xmod(flat) = std::sqrt(x2);
        impl->mask(flat) = low ? 1.0 : 0.0;
        for (int a = d - 1; a >= 0; --a) {
            if (++idx[a] < n)
                break;
            idx[a] = 0;
        }
    }
    impl_ = std::move(impl);
}

double Grid::frequency_spacing() const
{
    return std::numbers::pi / L_;
}

double Grid::max_frequency() const
{
    return std::numbers::pi * n_ / (2 * L_);
}

double Grid::cell_volume() const
{
    return std::pow(spacing(), d_);
}

double Grid::frequency_cell_volume() const
{
    return std::pow(frequency_spacing(), d_);
}

Eigen::ArrayXd Grid::position_axis() const
{
    Eigen::ArrayXd x(n_);
    for (int j = 0; j < n_; ++j)
        x(j) = -L_ + j * spacing();
    return x;
}

Eigen::ArrayXd Grid::frequency_axis() const
{
    Eigen::ArrayXd k(n_);
    for (int j = 0; j < n_; ++j)
        k(j) = (j < n_ / 2 ? j : j - n_) * frequency_spacing();
    return k;
}

const Eigen::ArrayXd& Grid::position_modulus() const
{
    return impl_->xmod;
}

const Eigen::ArrayXd& Grid::frequency_modulus() const
{
    return impl_->kmod;
}

const Eigen::ArrayXd& Grid::dealias_mask() const
{
    return impl_->mask;
}

std::vector<int> Grid::unflatten(std::size_t flat) const
{
    std::vector<int> idx(d_);
    for (int a = d_ - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % n_);
        flat /= n_;
    }
    return idx;
}

Eigen::VectorXd Grid::frequency_at(std::size_t flat) const
{
    const auto idx = unflatten(flat);
    Eigen::VectorXd k(d_);
    for (int a = 0; a < d_; ++a)
        k(a) = (idx[a] < n_ / 2 ? idx[a] : idx[a] - n_) * frequency_spacing();
    return k;
}

Eigen::VectorXd Grid::position_at(std::size_t flat) const
{
    const auto idx = unflatten(flat);
    Eigen::VectorXd x(d_);
    for (int a = 0; a < d_; ++a)
        x(a) = -L_ + idx[a] * spacing();
    return x;
}

void Grid::require_resolves(double c) const
{
    if (max_frequency() < 8 * c)
        throw ResolutionError("grid max frequency " + format_double(max_frequency()) +
                              " is below 8c = " + format_double(8 * c) +
                              "; increase n or decrease L (need n >= " +
                              std::to_string(static_cast<long>(std::ceil(16 * c * L_ / std::numbers::pi))) +
                              ")");
}

void Grid::forward(Complex* data) const
{
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(impl_->fwd, p, p);
    Eigen::Map<Eigen::ArrayXcd> v(data, static_cast<Eigen::Index>(size_));
    v *= impl_->fwd_scale;
}

void Grid::inverse(Complex* data) const
{
    Eigen::Map<Eigen::ArrayXcd> v(data, static_cast<Eigen::Index>(size_));
    v *= impl_->bwd_scale;
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(impl_->bwd, p, p);
}

// ---------------------------------------------------------------------------

WaveField::WaveField(Grid grid, Representation rep)
    : grid_(std::move(grid)), values_(Eigen::ArrayXcd::Zero(grid_.size())), rep_(rep)
{
}

WaveField::WaveField(Grid grid, Eigen::ArrayXcd values, Representation rep)
    : grid_(std::move(grid)), values_(std::move(values)), rep_(rep)
{
    if (static_cast<std::size_t>(values_.size()) != grid_.size())
        throw DomainError("field has " + std::to_string(values_.size()) + " samples, grid needs " +
                          std::to_string(grid_.size()));
}

double WaveField::l2_norm() const
{
    const double w = in_position() ? grid_.cell_volume() : grid_.frequency_cell_volume();
    return std::sqrt(values_.abs2().sum() * w);
}

void require_same_grid(const Grid& a, const Grid& b)
{
    if (a != b)
        throw DomainError("fields live on different grids");
}

WaveField& WaveField::operator+=(const WaveField& o)
{
    require_same_grid(grid_, o.grid_);
    if (rep_ != o.rep_)
        throw DomainError("adding fields in different representations");
    values_ += o.values_;
    return *this;
}

WaveField& WaveField::operator-=(const WaveField& o)
{
    require_same_grid(grid_, o.grid_);
    if (rep_ != o.rep_)
        throw DomainError("subtracting fields in different representations");
    values_ -= o.values_;
    return *this;
}

WaveField& WaveField::operator*=(Complex s)
{
    values_ *= s;
    return *this;
}

WaveField operator+(WaveField a, const WaveField& b)
{
    return a += b;
}

WaveField operator-(WaveField a, const WaveField& b)
{
    return a -= b;
}

WaveField operator*(Complex s, WaveField a)
{
    return a *= s;
}

WaveField transform(const WaveField& f, Direction dir)
{
    const Representation from =
        dir == Direction::forward ? Representation::position : Representation::frequency;
    if (f.representation() != from)
        throw DomainError(dir == Direction::forward ? "forward transform needs a position-space field"
                                                    : "inverse transform needs a frequency-space field");
    WaveField g = f;
    if (dir == Direction::forward) {
        f.grid().forward(g.values().data());
        return WaveField(f.grid(), std::move(g.values()), Representation::frequency);
    }
    f.grid().inverse(g.values().data());
    return WaveField(f.grid(), std::move(g.values()), Representation::position);
}

WaveField to_frequency(WaveField f)
{
    if (!f.in_position())
        return f;
    f.grid().forward(f.values().data());
    return WaveField(f.grid(), std::move(f.values()), Representation::frequency);
}

WaveField to_position(WaveField f)
{
    if (f.in_position())
        return f;
    f.grid().inverse(f.values().data());
    return WaveField(f.grid(), std::move(f.values()), Representation::position);
}

Complex inner_product(const WaveField& a, const WaveField& b)
{
    require_same_grid(a.grid(), b.grid());
    if (a.representation() != b.representation())
        return inner_product(to_frequency(a), to_frequency(b));
    const double w = a.in_position() ? a.grid().cell_volume() : a.grid().frequency_cell_volume();
    return (a.values().conjugate() * b.values()).sum() * w;
}

std::pair<int, int> resolved_band_range(const Grid& g)
{
    // chi_N lives on [2^N, 2^(N+2)]; keep every N whose support meets
    // [dxi, sqrt(d) xi_max]; together they sum to 1 on that range.
    const double kmin = g.frequency_spacing();
    const double kmax = g.max_frequency() * std::sqrt(double(g.dim()));
    const int lo = static_cast<int>(std::floor(std::log2(kmin))) - 2;
    const int hi = static_cast<int>(std::ceil(std::log2(kmax))) - 1;
    return {lo, hi};
}

WaveField project_band(const WaveField& f, int N)
{
    const DyadicBand band{N};
    const double kmax = f.grid().frequency_modulus().maxCoeff();
    if (band.lower() >= kmax)
        throw ResolutionError("band N=" + std::to_string(N) + " starts at |xi| = " +
                              format_double(band.lower()) + ", above the grid's largest frequency " +
                              format_double(kmax));
    return apply_radial_multiplier(f, band);
}

double lebesgue_norm(const WaveField& f, double p)
{
    if (!(p >= 1))
        throw DomainError("Lebesgue exponent must be >= 1");
    const WaveField g = to_position(f);
    const Eigen::ArrayXd a = g.values().abs();
    if (std::isinf(p))
        return a.size() ? a.maxCoeff() : 0.0;
    if (p == 2)
        return std::sqrt(a.square().sum() * g.grid().cell_volume());
    return std::pow(a.pow(p).sum() * g.grid().cell_volume(), 1.0 / p);
}

double sobolev_norm(const WaveField& f, double s, bool homogeneous)
{
    const WaveField g = to_frequency(f);
    const Eigen::ArrayXd& k = g.grid().frequency_modulus();
    const Eigen::ArrayXd a2 = g.values().abs2();
    if (homogeneous && s < 0) {
        const double total = a2.sum();
        if (a2(0) > 1e-28 * total)
            throw DomainError("homogeneous Sobolev norm with s < 0 needs a zero mean");
    }
    double sum = 0;
    for (Eigen::Index i = 0; i < a2.size(); ++i) {
        double w;
        if (homogeneous)
            w = (k(i) == 0) ? (s == 0 ? 1.0 : 0.0) : std::pow(k(i), 2 * s);
        else
            w = std::pow(1 + k(i) * k(i), s);
        sum += w * a2(i);
    }
    return std::sqrt(sum * g.grid().frequency_cell_volume());
}

// ---------------------------------------------------------------------------

AdmissiblePair::AdmissiblePair(double q, double r, Admissibility kind, int d)
    : q_(q), r_(r), kind_(kind), d_(d)
{
    if (d < 1)
        throw DomainError("dimension must be >= 1");
    if (!(q >= 2) || !(r >= 2))
        throw DomainError("admissible exponents must lie in [2, inf]");
    const double iq = std::isinf(q) ? 0.0 : 1.0 / q;
    const double ir = std::isinf(r) ? 0.0 : 1.0 / r;
    constexpr double tol = 1e-12;
    if (kind == Admissibility::odd) {
        if (std::abs(2 * iq + d * ir - 0.5 * d) > tol)
            throw DomainError("odd-admissible pairs satisfy 2/q + d/r = d/2");
        if (q == 2 && std::isinf(r) && d == 2)
            throw DomainError("(q, r) = (2, inf) is excluded in d = 2");
    } else {
        if (std::isinf(r))
            throw DomainError("even-admissible pairs need r < inf");
        const double lhs = d == 1 ? 3 * iq + ir : 2 * iq + ir;
        if (std::abs(lhs - 0.5) > tol)
            throw DomainError(d == 1 ? "even-admissible pairs in d = 1 satisfy 3/q + 1/r = 1/2"
                                     : "even-admissible pairs satisfy 2/q + 1/r = 1/2");
    }
}

double AdmissiblePair::source_regularity() const
{
    if (kind_ == Admissibility::odd)
        return 0;
    const double iq = std::isinf(q_) ? 0.0 : 1.0 / q_;
    return d_ == 1 ? iq : 2.0 * (d_ - 1) * iq;
}

double AdmissiblePair::q_dual() const
{
    return std::isinf(q_) ? 1.0 : q_ / (q_ - 1);
}

double AdmissiblePair::r_dual() const
{
    return std::isinf(r_) ? 1.0 : r_ / (r_ - 1);
}

double time_norm(const std::vector<double>& values, double dt, double q)
{
    if (values.empty())
        throw DomainError("time norm of an empty trajectory");
    if (std::isinf(q)) {
        double m = 0;
        for (double v : values)
            m = std::max(m, v);
        return m;
    }
    double sum = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = (i == 0 || i + 1 == values.size()) ? 0.5 : 1.0;
        sum += w * std::pow(values[i], q);
    }
    return std::pow(sum * dt, 1.0 / q);
}

double spacetime_norm(const Trajectory& traj, double q, double r)
{
    if (traj.frames.empty())
        throw DomainError("spacetime norm of an empty trajectory");
    std::vector<double> spatial;
    spatial.reserve(traj.frames.size());
    for (const auto& f : traj.frames)
        spatial.push_back(lebesgue_norm(f, r));
    return time_norm(spatial, traj.dt, q);
}

double spacetime_norm(const Trajectory& traj, const AdmissiblePair& pair)
{
    return spacetime_norm(traj, pair.q(), pair.r());
}

// ---------------------------------------------------------------------------

WaveField synthesize_data(const Grid& grid, const ProfileSpec& profile)
{
    const int d = grid.dim();
    if (const auto* g = std::get_if<GaussianProfile>(&profile)) {
        if (!(g->width >= 4 * grid.spacing()))
            throw ConfigError("gaussian width " + format_double(g->width) +
                              " is below 4 grid spacings (" + format_double(4 * grid.spacing()) + ")");
        if (!g->modulation.empty() && static_cast<int>(g->modulation.size()) != d)
            throw ConfigError("gaussian modulation must have d components");
        if (!g->center.empty() && static_cast<int>(g->center.size()) != d)
            throw ConfigError("gaussian center must have d components");
        Eigen::VectorXd k = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(d);
        for (int a = 0; a < d; ++a) {
            if (!g->modulation.empty())
                k(a) = g->modulation[a];
            if (!g->center.empty())
                x0(a) = g->center[a];
        }
        const double reach = grid.half_width() - x0.cwiseAbs().maxCoeff();
        if (reach * reach / (2 * g->width * g->width) < std::log(1e10))
            throw ConfigError("box too small: gaussian does not decay below 1e-10 at the boundary");
        WaveField f(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Eigen::VectorXd x = grid.position_at(i);
            const double r2 = (x - x0).squaredNorm();
            f.values()(i) = g->amplitude * std::exp(-r2 / (2 * g->width * g->width)) *
                            std::polar(1.0, k.dot(x));
        }
        return f;
    }
    const auto& rough = std::get<RoughProfile>(profile);
    if (!(rough.epsilon > 0))
        throw ConfigError("rough profile epsilon must be positive");
    std::mt19937_64 gen(rough.seed);
    WaveField f(grid, Representation::frequency);
    const Eigen::ArrayXd& k = grid.frequency_modulus();
    const double decay = 0.5 * d + rough.sigma + rough.epsilon;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        // 53 random bits mapped to [0, 1): identical on every platform.
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        const double mod = std::pow(1 + k(i) * k(i), -0.5 * decay);
        f.values()(i) = std::polar(mod, 2 * std::numbers::pi * u);
    }
    return to_position(std::move(f));
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::string& out, T v)
{
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos)
{
    if (pos + sizeof(T) > in.size())
        throw DomainError("field file truncated");
    unsigned char b[sizeof(T)];
    std::memcpy(b, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(b, b + sizeof(T));
    pos += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

} // namespace

void write_field(const std::filesystem::path& path, const WaveField& f)
{
    const Grid& g = f.grid();
    std::string bytes;
    bytes.reserve(20 + 16 * g.size());
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(g.dim()));
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(g.points_per_axis()));
    put_le<double>(bytes, g.half_width());
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(f.representation()));
    for (Eigen::Index i = 0; i < f.values().size(); ++i) {
        put_le<double>(bytes, f.values()(i).real());
        put_le<double>(bytes, f.values()(i).imag());
    }
    nlohmann::ordered_json side;
    side["format"] = "hischro-field";
    side["version"] = 1;
    side["d"] = g.dim();
    side["n"] = g.points_per_axis();
    side["L"] = g.half_width();
    side["representation"] = f.in_position() ? "position" : "frequency";
    side["header_bytes"] = 20;
    side["sample_layout"] = "float64 re, float64 im; little-endian; row-major, last axis fastest";
    side["samples"] = g.size();
    atomic_write(path, bytes);
    std::filesystem::path sidecar = path;
    sidecar += ".json";
    atomic_write(sidecar, side.dump(2) + "\n");
}

WaveField read_field(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    const auto d = get_le<std::uint32_t>(bytes, pos);
    const auto n = get_le<std::uint32_t>(bytes, pos);
    const auto L = get_le<double>(bytes, pos);
    const auto rep = get_le<std::uint32_t>(bytes, pos);
    if (rep > 1)
        throw DomainError("unknown representation flag in " + path.string());
    Grid g(static_cast<int>(d), static_cast<int>(n), L);
    Eigen::ArrayXcd v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double re = get_le<double>(bytes, pos);
        const double im = get_le<double>(bytes, pos);
        v(static_cast<Eigen::Index>(i)) = Complex(re, im);
    }
    if (pos != bytes.size())
        throw DomainError("trailing bytes in " + path.string());
    return WaveField(g, std::move(v), static_cast<Representation>(rep));
}

} // namespace hischro
