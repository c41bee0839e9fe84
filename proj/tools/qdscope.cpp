#include <clocale>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "qdscope/errors.hpp"
#include "qdscope/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string preset;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;
    int threads = -1;
    bool quiet = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "Run configuration file");
    sub->add_option("--out", args.out_dir, "Output directory (overrides [run] out_dir)");
    sub->add_option("--preset", args.preset,
                    "Preset name: fig3, fig4, fig5a, figS1a, figS1b, plateau-stats");
    sub->add_option("--seed", args.seed, "Master seed (overrides [run] seed)")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--threads", args.threads, "Worker threads (0 = all cores)");
    sub->add_flag("--force", args.force, "Ignore config-hash mismatches");
    sub->add_flag("--quiet", args.quiet, "Suppress progress output");
}

qdscope::RunConfig resolve_config(const CommonArgs& args) {
    qdscope::RunConfig cfg = qdscope::load_config(args.config_path, args.preset);
    if (args.seed_set) cfg.bench.seed = args.seed;
    if (args.threads >= 0) cfg.bench.threads = args.threads;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");

    CLI::App app{"qdscope: virtual single-quantum-dot sampling of fast electric transients"};
    app.set_version_flag("--version", qdscope::artifact_version());
    app.require_subcommand(1);

    CommonArgs sim_args, fit_args, rec_args, rep_args;
    CLI::App* sim = app.add_subcommand("simulate", "Run resonance scans, write scans.csv");
    add_common(sim, sim_args);
    CLI::App* fit = app.add_subcommand("fit", "Fit scans.csv, write fits.csv");
    add_common(fit, fit_args);
    CLI::App* rec = app.add_subcommand(
        "reconstruct", "Assemble fits.csv into waveform.csv and metrics.json");
    add_common(rec, rec_args);
    CLI::App* rep = app.add_subcommand("report", "Render SVG figures from the run CSVs");
    add_common(rep, rep_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed())
            qdscope::cmd_simulate(resolve_config(sim_args), sim_args.out_dir,
                                  sim_args.quiet);
        else if (fit->parsed())
            qdscope::cmd_fit(resolve_config(fit_args), fit_args.out_dir, fit_args.force);
        else if (rec->parsed())
            qdscope::cmd_reconstruct(resolve_config(rec_args), rec_args.out_dir,
                                     rec_args.force);
        else if (rep->parsed())
            qdscope::cmd_report(resolve_config(rep_args), rep_args.out_dir);
        return 0;
    } catch (const qdscope::config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const qdscope::io_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
