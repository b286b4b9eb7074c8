// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file harness.hpp
 * @brief Experiment configuration, seeded ensemble runs, and run records
 *        with a hashed manifest of every artifact.
 */
#pragma once

#include "zrplab/error.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace zrp {

/// Flat INI with sections. Every key has a schema entry and a default;
/// unknown sections or keys raise ErrorKind::Config naming the key.
class ExperimentConfig {
public:
    static const std::vector<std::string>& experiments();

    /// All keys at their defaults.
    ExperimentConfig();
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Canonical text: every key, schema order. parse(save()) reproduces it byte for byte.
    std::string save() const;
    void save(const std::filesystem::path& path) const;

    /// `key` is "section.name"; the value is validated against the schema.
    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;

    long long integer(const std::string& key) const;
    double real(const std::string& key) const;
    std::vector<long long> integers(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;

    std::string experiment() const { return get("run.experiment"); }
    /// run.seeds, or run.ensemble consecutive seeds from the first one when ensemble > 0.
    std::vector<std::uint64_t> seeds() const;

    bool operator==(const ExperimentConfig&) const = default;

private:
    std::map<std::string, std::string> values_;
};

struct RunOptions {
    std::filesystem::path out_dir;
    int threads = 1;
};

struct RunRecord {
    std::string experiment;
    std::string config_text;
    std::filesystem::path out_dir;
    std::vector<std::string> artifacts; ///< relative to out_dir, sorted
    nlohmann::json summary;             ///< deterministic part
    double wall_clock_seconds = 0.0;
    std::string version;
};

/// Dispatches to the experiment, writes summary.json, record.json, config.ini,
/// plot data under plot/, and MANIFEST (sha256 of every other file).
RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Output directory: explicit --out, else run.output; relative paths are
/// placed under $ZRPLAB_OUTPUT_ROOT when that is set.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const std::string& cli_out);

std::string sha256_hex(const std::filesystem::path& file);
/// "<sha256>  <relative path>" lines sorted by path; returns the listed paths.
std::vector<std::string> write_manifest(const std::filesystem::path& dir);
/// Re-hashes every entry; returns the mismatching or missing paths.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

/// 0 success, 2 configuration or validation error, 3 numerical abort, 1 otherwise.
int exit_code_for(const Error& e) noexcept;

/// f(i) for i < n on a pool of `threads` workers. Results are stored by index,
/// so the outcome does not depend on scheduling; the first failing index is rethrown.
template <class R>
std::vector<R> parallel_map(std::size_t n, int threads, const std::function<R(std::size_t)>& f) {
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t pool = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    {
        std::vector<std::jthread> workers;
        for (std::size_t k = 1; k < pool; ++k) workers.emplace_back(worker);
        worker();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace zrp
