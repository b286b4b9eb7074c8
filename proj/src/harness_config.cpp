// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/harness.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zrp {

namespace {

enum class Type { Int, Real, Text, IntList, RealList, Choice };

struct KeySpec {
    const char* key;
    Type type;
    const char* value;
    std::vector<std::string> choices = {};
};

const std::vector<KeySpec>& schema() {
    static const std::vector<KeySpec> s = {
        {"run.experiment", Type::Choice, "phi", ExperimentConfig::experiments()},
        {"run.output", Type::Text, "runs"},
        {"run.seeds", Type::IntList, "1"},
        {"run.ensemble", Type::Int, "0"},
        {"run.threads", Type::Int, "1"},

        {"model.rate", Type::Choice, "linear", {"linear", "indicator", "odd_perturbed", "file"}},
        {"model.rate_file", Type::Text, ""},
        {"model.gamma", Type::Real, "1"},
        {"model.rho_max", Type::Real, "10"},
        {"model.rho_points", Type::Int, "50"},
        {"model.phi_range", Type::Real, "12"},

        {"profile.kind", Type::Choice, "bump", {"constant", "sine", "bump"}},
        {"profile.amplitude", Type::Real, "0.5"},
        {"profile.width", Type::Real, "0.25"},
        {"profile.mode", Type::Int, "1"},

        {"lattice.d", Type::Int, "1"},
        {"lattice.sizes", Type::IntList, "64"},
        {"lattice.t_end", Type::Real, "0.05"},
        {"lattice.snapshots", Type::Int, "5"},
        {"lattice.eps", Type::Real, "0.0625"},
        {"lattice.observable", Type::Choice, "rate", {"rate", "occupancy"}},

        {"pde.cells", Type::Int, "128"},
        {"pde.dt", Type::Real, "1e-4"},
        {"pde.t_end", Type::Real, "0.05"},
        {"pde.scheme", Type::Choice, "semi-implicit", {"semi-implicit", "explicit"}},
        {"pde.viscosity", Type::Real, "0"},
        {"pde.convention", Type::Choice, "generator", {"generator", "halved"}},
        {"pde.reference_cells", Type::Int, "512"},
        {"pde.reference_dt", Type::Real, "2e-5"},

        {"rate.modes", Type::Int, "64"},
        {"rate.time_degree", Type::Int, "0"},
        {"rate.ridge", Type::Real, "0"},
        {"rate.cases", Type::Int, "5"},
        {"rate.control_modes", Type::Int, "3"},
        {"rate.control_amplitude", Type::Real, "0.3"},

        {"counterexample.d", Type::Int, "2"},
        {"counterexample.n", Type::IntList, "1,2,3,4"},
        {"counterexample.alpha", Type::Real, "0.25"},
        {"counterexample.ensemble", Type::Int, "200"},
        {"counterexample.log_n_margin", Type::Real, "40"},
    };
    return s;
}

const KeySpec& spec_of(const std::string& key) {
    for (const auto& k : schema())
        if (key == k.key) return k;
    throw Error(ErrorKind::Config, "unknown key '" + key + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw Error(ErrorKind::Config, "key '" + key + "': '" + v + "' is not an integer");
    return x;
}

double parse_real(const std::string& key, const std::string& v) {
    double x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
        throw Error(ErrorKind::Config, "key '" + key + "': '" + v + "' is not a finite number");
    return x;
}

void validate(const KeySpec& k, const std::string& v) {
    switch (k.type) {
    case Type::Int: (void)parse_int(k.key, v); break;
    case Type::Real: (void)parse_real(k.key, v); break;
    case Type::Text: break;
    case Type::IntList:
    case Type::RealList: {
        const auto items = split_list(v);
        if (items.empty()) throw Error(ErrorKind::Config, "key '" + std::string(k.key) + "' needs at least one value");
        for (const auto& x : items) k.type == Type::IntList ? (void)parse_int(k.key, x) : (void)parse_real(k.key, x);
        break;
    }
    case Type::Choice:
        if (std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
            std::string all;
            for (const auto& c : k.choices) all += (all.empty() ? "" : "|") + c;
            throw Error(ErrorKind::Config, "key '" + std::string(k.key) + "': '" + v + "' is not one of " + all);
        }
        break;
    }
}

} // namespace

const std::vector<std::string>& ExperimentConfig::experiments() {
    static const std::vector<std::string> e = {"phi",           "simulate",       "hydro-check",
                                               "supex-check",   "two-block",      "counterexample",
                                               "solve-skeleton", "rate",          "roundtrip"};
    return e;
}

ExperimentConfig::ExperimentConfig() {
    for (const auto& k : schema()) values_[k.key] = k.value;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Config, "line " + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty())
            throw Error(ErrorKind::Config, "unknown key '" + section + "' (keys must sit inside a [section])");
        for (const auto& [name, value] : body) c.set(section + "." + name, value.data());
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Config, "cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

std::string ExperimentConfig::save() const {
    std::ostringstream os;
    std::string section;
    for (const auto& k : schema()) {
        const std::string key = k.key;
        const auto dot = key.find('.');
        if (key.substr(0, dot) != section) {
            if (!section.empty()) os << '\n';
            section = key.substr(0, dot);
            os << '[' << section << "]\n";
        }
        os << key.substr(dot + 1) << " = " << values_.at(key) << '\n';
    }
    return os.str();
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    os << save();
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const auto& k = spec_of(key);
    validate(k, value);
    values_[key] = value;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
    (void)spec_of(key);
    return values_.at(key);
}

long long ExperimentConfig::integer(const std::string& key) const { return parse_int(key, get(key)); }
double ExperimentConfig::real(const std::string& key) const { return parse_real(key, get(key)); }

std::vector<long long> ExperimentConfig::integers(const std::string& key) const {
    std::vector<long long> out;
    for (const auto& x : split_list(get(key))) out.push_back(parse_int(key, x));
    return out;
}

std::vector<double> ExperimentConfig::reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& x : split_list(get(key))) out.push_back(parse_real(key, x));
    return out;
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
    const auto listed = integers("run.seeds");
    for (long long s : listed)
        if (s < 0) throw Error(ErrorKind::Config, "key 'run.seeds': seeds must be >= 0");
    const long long n = integer("run.ensemble");
    if (n < 0) throw Error(ErrorKind::Config, "key 'run.ensemble' must be >= 0");
    std::vector<std::uint64_t> out;
    if (n == 0) {
        for (long long s : listed) out.push_back(static_cast<std::uint64_t>(s));
    } else {
        for (long long k = 0; k < n; ++k) out.push_back(static_cast<std::uint64_t>(listed.front() + k));
    }
    return out;
}

} // namespace zrp
