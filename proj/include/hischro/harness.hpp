#pragma once

#include "hischro/fields.hpp"
#include "hischro/kernels.hpp"
#include "hischro/nonlinear.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hischro {

inline constexpr const char* tool_version = "0.1.0";

enum class ExperimentKind { symbol, spheres, kernel_decay, linear_approx, strichartz, hartree_approx, scatter };

std::string to_string(ExperimentKind k);
/// Subcommand spelling ("kernel-decay", ...); throws ConfigError.
ExperimentKind parse_experiment_kind(const std::string& s);

struct GridSpec {
    int d = 1;
    int n = 0;
    double L = 0;
    Grid make() const { return Grid(d, n, L); }
};

struct PairSpec {
    double q = 0;
    double r = 0;
    Admissibility kind = Admissibility::odd;
};

struct TimeSampling {
    double t_min = 1;
    double t_max = 10;
    int count = 10;
};

struct OrbitalSpec {
    int count = 2;
    double width = 0.6;
    double kappa = 1;
    OrbitalModel model = OrbitalModel::hartree_fock;
};

enum class HartreeMode { approximation, conservation };

/// Parsed and validated experiment description. Fields that a kind does
/// not use keep their defaults.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::symbol;
    std::vector<int> J;
    std::vector<double> c;
    std::vector<int> dims;           ///< symbol Hessian oracle, kernel-decay
    std::optional<GridSpec> grid;
    std::optional<ProfileSpec> profile;
    double T = 0;                    ///< horizon (linear-approx, hartree-approx)
    std::vector<double> horizons;    ///< strichartz
    double dt = 0;
    int time_samples = 64;
    TimeSampling times;              ///< kernel-decay
    BandPlacement band{true, 0.5};
    double damping_margin = 4;
    std::vector<PairSpec> pairs;
    OrbitalSpec orbitals;
    HartreeMode mode = HartreeMode::approximation;
    int sample_every = 10;
    double nu = 6;
    double kappa = 1;                ///< scatter
    double h1_norm = 1e-2;
    double epsilon0 = 1e-2;
    double tolerance = 1e-6;
    std::vector<double> checkpoints{1, 2, 4, 8, 16, 32, 64};
    int samples = 4000;              ///< symbol positivity radii
    int hessian_points = 100;

    std::filesystem::path out = "results";
    std::uint64_t seed = 0;
    int jobs = 1;

    nlohmann::json source; ///< the document as read, echoed in the manifest
};

/// Validates every field and throws ConfigError listing all problems, each
/// prefixed with its JSON path (e.g. "$.J[1]").
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Verdict {
    std::string id; ///< acceptance criterion, e.g. "A4"
    bool pass = false;
    std::string detail;
};

struct StageTime {
    std::string name;
    double seconds = 0;
};

struct RunManifest {
    nlohmann::json config;
    std::string version = tool_version;
    std::vector<StageTime> stages;
    std::vector<Verdict> verdicts;
    std::vector<std::string> files; ///< written, relative to the output directory

    bool all_pass() const;
    nlohmann::json to_json() const;
};

/// Runs the experiment, writes its CSV/JSON files and manifest.json into
/// config.out. Nothing is written unless every stage completes; each file
/// is replaced atomically.
RunManifest run(const ExperimentConfig& config);

/// f(0..count-1) on up to `jobs` threads; indices are handed out one at a
/// time so uneven jobs balance. The first exception is rethrown after all
/// workers stop.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& f);

} // namespace hischro
