// Experiment runner: dqd-sim <experiment> --config <file> [--seed N] [--out PATH] [--threads N]
//                              [--integrator lab|rwa] [--resume] [--quiet]
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dqd/errors.hpp"
#include "dqd/harness.hpp"

using namespace dqd;

int main(int argc, char** argv) {
    CLI::App app{"Double-quantum-dot device and gate simulator"};
    std::string experiment, config, out, integrator;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool resume = false, quiet = false;
    app.add_option("experiment", experiment,
                   "stability | j-sweep | gate | noise-sweep | transition-sweep | fluct-stats")
        ->required();
    app.add_option("--config", config, "experiment configuration (JSON with comments)")->required();
    app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--out", out, "override the configured output CSV path");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--integrator", integrator, "time integrator")->check(CLI::IsMember({"lab", "rwa"}));
    app.add_flag("--resume", resume, "keep completed points of a matching earlier output");
    app.add_flag("--quiet", quiet, "no progress messages");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = load_experiment_config(config, parse_experiment(experiment));
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        if (!out.empty()) cfg.output = out;
        if (integrator == "lab") cfg.integrator = Integrator::Lab;
        if (integrator == "rwa") cfg.integrator = Integrator::Rotating;

        RunOptions opts;
        opts.resume = resume;
        if (!quiet) opts.log = [](const std::string& m) { std::cerr << "dqd-sim: " << m << '\n'; };
        const SweepResult r = run_experiment(cfg, opts);

        std::printf("%s: %zu rows -> %s\n", experiment.c_str(), r.rows.size(), cfg.output.string().c_str());
        for (const auto& [k, v] : r.metadata)
            if (k == "fidelity" || k == "gate_time_ns") std::printf("%s: %s\n", k.c_str(), v.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "dqd-sim: error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}
