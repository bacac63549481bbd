// hischro <subcommand> --config <path> [--out <dir>] [--jobs <n>] [--seed <n>]
#include "hischro/error.hpp"
#include "hischro/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

constexpr int exit_pass = 0;
constexpr int exit_fail = 1;
constexpr int exit_config = 2;

int run_subcommand(const std::string& name, const std::string& config_path, const std::optional<std::string>& out,
                   const std::optional<int>& jobs, const std::optional<long long>& seed)
{
    using hischro::ConfigError;
    nlohmann::json doc;
    {
        std::ifstream in(config_path);
        if (!in)
            throw ConfigError("cannot read configuration " + config_path);
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(config_path + ": " + e.what());
        }
    }
    if (!doc.is_object())
        throw ConfigError("invalid configuration:\n  $: expected a JSON object");
    if (doc.contains("experiment") && doc["experiment"] != name)
        throw ConfigError("invalid configuration:\n  $.experiment: config is for " + doc["experiment"].dump() +
                          ", not " + name);
    doc["experiment"] = name;
    // Command-line values override the file and are validated with it.
    if (out)
        doc["out"] = *out;
    if (jobs)
        doc["jobs"] = *jobs;
    if (seed)
        doc["seed"] = *seed;

    const hischro::ExperimentConfig cfg = hischro::parse_config(doc);
    const hischro::RunManifest m = hischro::run(cfg);
    for (const auto& v : m.verdicts)
        std::cout << v.id << ' ' << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << '\n';
    std::cout << "wrote " << m.files.size() + 1 << " files to " << cfg.out.string() << '\n';
    return m.all_pass() ? exit_pass : exit_fail;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dispersion symbols, kernels and Schrodinger-type flows at desk scale"};
    app.set_version_flag("--version", std::string(hischro::tool_version));
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out;
    std::optional<int> jobs;
    std::optional<long long> seed;
    const char* names[] = {"symbol",     "spheres",        "kernel-decay", "linear-approx",
                           "strichartz", "hartree-approx", "scatter"};
    for (const char* n : names) {
        auto* sub = app.add_subcommand(n, std::string("run the ") + n + " experiment");
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out, "output directory (overrides the config)");
        sub->add_option("--jobs", jobs, "worker threads (overrides the config)");
        sub->add_option("--seed", seed, "random seed (overrides the config)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_pass : exit_config;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        return run_subcommand(name, config_path, out, jobs, seed);
    } catch (const hischro::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "hischro " << name << ": " << e.what() << '\n';
        return exit_fail;
    }
}
