// Command line driver. Each experiment kind is a subcommand that loads a
// JSON config, runs the sweep, and writes an index plus per-cell CSVs; the
// report subcommand summarizes a directory of such runs.
//
// Exit codes: 0 success, 1 invariant failure in at least one cell,
// 2 configuration or usage error.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include "oblique/cli.hpp"

namespace {

struct RunFlags {
    std::string config;
    std::string out;
    int jobs = 1;
    std::int64_t seed = -1;   // negative means keep the config value
    std::string profile;      // empty means keep the config value
};

void add_run_flags(CLI::App* sub, RunFlags& fl) {
    sub->add_option("--config", fl.config, "experiment config file (JSON)")
        ->required();
    sub->add_option("--out", fl.out, "output directory, overrides the config");
    sub->add_option("--jobs", fl.jobs, "worker threads for sweep cells")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", fl.seed, "base seed, overrides the config")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--tolerance-profile", fl.profile,
                    "numeric tolerance profile, overrides the config")
        ->check(CLI::IsMember({"strict", "default"}));
}

int run_subcommand(const std::string& kind, const RunFlags& fl) {
    oblique::cli::ExperimentConfig cfg = oblique::cli::load_config(fl.config);
    if (cfg.kind != kind)
        throw oblique::cli::config_error(
            "/kind", "config kind '" + cfg.kind + "' does not match subcommand '" +
                         kind + "'");

    // Overrides are folded back into the canonical config so the recorded
    // hash describes the run that actually happened.
    if (fl.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(fl.seed);
        cfg.canonical["seed"] = cfg.seed;
    }
    if (!fl.profile.empty()) {
        cfg.tolerance_profile = fl.profile;
        cfg.canonical["tolerance_profile"] = fl.profile;
    }
    const std::string out_dir = !fl.out.empty() ? fl.out : cfg.out;

    const oblique::cli::RunOutcome outcome = oblique::cli::run(cfg, out_dir, fl.jobs);
    std::printf("%s: %d cell%s, %d failed, index at %s\n", cfg.kind.c_str(),
                outcome.cells, outcome.cells == 1 ? "" : "s", outcome.failed,
                outcome.index_path.c_str());
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oblique derivative problem toolkit"};
    app.set_version_flag("--version", std::string(oblique::cli::kToolName) + " " +
                                          oblique::cli::kToolVersion);
    app.require_subcommand(1);

    const char* const kinds[] = {"regdist", "mollify",  "extend",
                                 "solve",   "probe",    "counterexample"};
    const char* const blurbs[] = {
        "regularized distance sweeps",
        "mollified boundary map checks",
        "Neumann data extension sweeps",
        "oblique derivative solves",
        "a priori estimate probes",
        "singular example certification",
    };
    RunFlags flags[6];
    for (int i = 0; i < 6; ++i)
        add_run_flags(app.add_subcommand(kinds[i], blurbs[i]), flags[i]);

    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "summarize run outputs");
    report->add_option("dir", report_dir, "directory holding index.json files")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (report->parsed()) {
            const oblique::cli::IndexSummary sum = oblique::cli::report_index(report_dir);
            std::cout << sum.to_text();
            for (const auto& w : sum.warnings) std::cerr << "warning: " << w << "\n";
            return 0;
        }
        for (int i = 0; i < 6; ++i)
            if (app.get_subcommand(kinds[i])->parsed())
                return run_subcommand(kinds[i], flags[i]);
        return 2;
    } catch (const oblique::cli::config_error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
