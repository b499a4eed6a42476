// sclab: command line driver for the spectral cluster laboratory.
//
// Each subcommand runs one experiment described by a JSON config file and
// writes CSV/JSON outputs plus a run manifest into the output directory.
// Exit codes: 0 success, 2 invalid input or usage, 3 accuracy failure,
// 4 unsupported capability.

#include "sclab/errors.hpp"
#include "sclab/harness.hpp"

#include <cstdio>
#include <string>

#include "CLI11.hpp"

using namespace sclab;

namespace {

const char* experiment_blurb(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::spectrum:
        return "materialize and cache the spectrum below a frequency cutoff";
    case ExperimentKind::opnorm:
        return "L2 -> Linf norms of spectral window projectors";
    case ExperimentKind::knapp_scan:
        return "directional quasimode scan along a closed geodesic (flat models)";
    case ExperimentKind::beam_scan:
        return "highest-weight and zonal harmonic scan on the 2-sphere";
    case ExperimentKind::kernel_decay:
        return "smoothed projector kernel decay along and across the axis";
    case ExperimentKind::fit:
        return "fit a growth law to a scan CSV";
    case ExperimentKind::classify:
        return "classify curvature sign from a scan CSV";
    }
    return "";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sclab: quasimode growth laboratory on tori, the Klein bottle "
                 "and round spheres"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(0, 1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    for (ExperimentKind kind :
         {ExperimentKind::spectrum, ExperimentKind::opnorm, ExperimentKind::knapp_scan,
          ExperimentKind::beam_scan, ExperimentKind::kernel_decay, ExperimentKind::fit,
          ExperimentKind::classify}) {
        CLI::App* sub = app.add_subcommand(experiment_name(kind), experiment_blurb(kind));
        sub->add_option("--config", config_path, "experiment config file (JSON)")
            ->required();
        sub->add_option("--out", out_dir, "override the configured output directory");
        sub->add_option("--threads", threads, "worker threads (0 means one per core)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (app.get_subcommands().empty()) {
        std::fputs(app.help().c_str(), stderr);
        return 2;
    }
    const std::string command = app.get_subcommands()[0]->get_name();

    try {
        if (threads < 0) throw validation_error("--threads must be non-negative");
        ExperimentConfig cfg = parse_config_file(config_path);
        if (experiment_name(cfg.kind) != command)
            throw validation_error("config describes a '" +
                                   std::string(experiment_name(cfg.kind)) +
                                   "' experiment, not '" + command + "'");
        if (!out_dir.empty()) cfg.out_dir = out_dir;

        RunManifest man = run(cfg, threads);
        for (const auto& o : man.outputs)
            std::printf("wrote %s/%s (%llu bytes, fnv1a %s)\n", cfg.out_dir.c_str(),
                        o.path.c_str(), static_cast<unsigned long long>(o.bytes),
                        o.digest.c_str());
        if (man.resumed_rows > 0)
            std::printf("resumed %ld completed rows from the scan checkpoint\n",
                        man.resumed_rows);
        std::printf("manifest %s\n", man.path.c_str());
        return 0;
    } catch (const error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
