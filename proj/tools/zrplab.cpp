// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// zrplab <experiment> --config <path> [--out <dir>] [--seeds a,b,c] [--threads n]
#include "zrplab/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"zero-range process workbench"};
    app.require_subcommand(0, 0);
    std::string experiment, config_path, out_dir, seeds;
    int threads = 0;
    bool dump = false, verify = false;
    app.add_option("experiment", experiment, "phi | simulate | hydro-check | supex-check | two-block | counterexample | "
                                             "solve-skeleton | rate | roundtrip")
        ->required();
    app.add_option("--config,-c", config_path, "INI file; keys not given keep their defaults");
    app.add_option("--out,-o", out_dir, "output directory (default <run.output>/<experiment>)");
    app.add_option("--seeds", seeds, "comma separated seeds, overrides run.seeds");
    app.add_option("--threads,-j", threads, "worker threads, overrides run.threads")->check(CLI::PositiveNumber);
    app.add_flag("--dump-config", dump, "print the canonical config and exit");
    app.add_flag("--verify", verify, "re-hash the MANIFEST of an existing output directory and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto config = config_path.empty() ? zrp::ExperimentConfig() : zrp::ExperimentConfig::load(config_path);
        const auto& known = zrp::ExperimentConfig::experiments();
        if (std::find(known.begin(), known.end(), experiment) == known.end())
            throw zrp::Error(zrp::ErrorKind::Config, "unknown experiment '" + experiment + "'");
        if (!config_path.empty() && config.experiment() != experiment &&
            config.experiment() != zrp::ExperimentConfig().experiment())
            throw zrp::Error(zrp::ErrorKind::Config, "key 'run.experiment' is '" + config.experiment() +
                                                         "' but the command line asks for '" + experiment + "'");
        config.set("run.experiment", experiment);
        if (!seeds.empty()) config.set("run.seeds", seeds);
        if (threads > 0) config.set("run.threads", std::to_string(threads));
        if (dump) {
            std::cout << config.save();
            return 0;
        }
        const auto dir = zrp::resolve_output_dir(config, out_dir);
        if (verify) {
            const auto bad = zrp::verify_manifest(dir);
            for (const auto& f : bad) std::cerr << "mismatch: " << f << '\n';
            return bad.empty() ? 0 : 1;
        }
        zrp::RunOptions opt;
        opt.out_dir = dir;
        opt.threads = static_cast<int>(config.integer("run.threads"));
        const auto rec = zrp::run_experiment(config, opt);
        std::cout << rec.summary.dump(2) << '\n'
                  << rec.artifacts.size() << " files in " << rec.out_dir.string() << " (" << rec.wall_clock_seconds
                  << " s)\n";
        return 0;
    } catch (const zrp::Error& e) {
        std::cerr << "zrplab: " << e.what() << '\n';
        return zrp::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "zrplab: " << e.what() << '\n';
        return 1;
    }
}
