// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/harness.hpp"

#include "zrplab/lattice.hpp"
#include "zrplab/local_equilibrium.hpp"
#include "zrplab/profiles.hpp"
#include "zrplab/rate_functional.hpp"
#include "zrplab/rates.hpp"
#include "zrplab/skeleton.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace zrp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "zrplab 1.0.0";
constexpr const char* kRunMarker = ".zrplab-run";

/// Collects artifact files of one run.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_ / "plot");
    }
    std::string path(const std::string& rel) {
        files_.push_back(rel);
        return (dir_ / rel).string();
    }
    std::ofstream open(const std::string& rel) {
        std::ofstream os(path(rel));
        if (!os) throw Error(ErrorKind::Io, "cannot write '" + (dir_ / rel).string() + "'");
        os << std::setprecision(17);
        return os;
    }
    /// Two or three column text file with a commented header.
    void plot(const std::string& name, const std::string& header, const std::vector<std::vector<double>>& rows) {
        auto os = open("plot/" + name);
        os << "# " << header << '\n';
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) os << (k ? " " : "") << r[k];
            os << '\n';
        }
    }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

JumpRate rate_from(const ExperimentConfig& c) {
    const auto& name = c.get("model.rate");
    if (name == "linear") return JumpRate::linear();
    if (name == "indicator") return JumpRate::indicator();
    if (name == "odd_perturbed") return JumpRate::odd_perturbed();
    const auto& file = c.get("model.rate_file");
    if (file.empty()) throw Error(ErrorKind::Config, "key 'model.rate_file' must name a file when model.rate = file");
    return load_rate_config(file);
}

NonlinearityModel model_from(const ExperimentConfig& c, const JumpRate& rate) {
    const double range = c.real("model.phi_range");
    if (!(range > 0.0)) throw Error(ErrorKind::Config, "key 'model.phi_range' must be positive");
    return build_nonlinearity(rate, uniform_rho_grid(range, static_cast<int>(std::ceil(50 * range)) + 1),
                              c.real("model.gamma"));
}

ProfileSpec profile_from(const ExperimentConfig& c, int d) {
    const double gamma = c.real("model.gamma");
    const auto& kind = c.get("profile.kind");
    if (kind == "constant") return ProfileSpec::constant(gamma, d);
    if (kind == "sine")
        return ProfileSpec::sine(gamma, c.real("profile.amplitude"), static_cast<int>(c.integer("profile.mode")), d);
    return ProfileSpec::bump(gamma, c.real("profile.amplitude"), c.real("profile.width"), d);
}

int positive_int(const ExperimentConfig& c, const std::string& key) {
    const long long v = c.integer(key);
    if (v < 1 || v > std::numeric_limits<int>::max()) throw Error(ErrorKind::Config, "key '" + key + "' must be >= 1");
    return static_cast<int>(v);
}

int count_of(const ExperimentConfig& c, const std::string& key) {
    const long long v = c.integer(key);
    if (v < 0 || v > 1000000) throw Error(ErrorKind::Config, "key '" + key + "' must be in [0, 10^6]");
    return static_cast<int>(v);
}

std::vector<int> sizes_from(const ExperimentConfig& c, const std::string& key) {
    std::vector<int> out;
    for (long long v : c.integers(key)) {
        if (v < 1 || v > 1 << 20) throw Error(ErrorKind::Config, "key '" + key + "' entries must be >= 1");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

SolverParams solver_from(const ExperimentConfig& c) {
    SolverParams p;
    p.dt = c.real("pde.dt");
    p.t_end = c.real("pde.t_end");
    p.viscosity = c.real("pde.viscosity");
    p.scheme = c.get("pde.scheme") == "explicit" ? Scheme::Explicit : Scheme::SemiImplicit;
    p.diffusion_scale = c.get("pde.convention") == "halved" ? 0.5 : 1.0;
    return p;
}

DiffusionConvention convention_from(const ExperimentConfig& c) {
    return c.get("pde.convention") == "halved" ? DiffusionConvention::halved()
                                               : DiffusionConvention::generator_consistent();
}

std::vector<double> linspace(double a, double b, int intervals) {
    std::vector<double> t;
    for (int k = 0; k <= intervals; ++k) t.push_back(a + (b - a) * k / intervals);
    return t;
}

struct MeanErr {
    double mean = 0.0, stderr_ = 0.0;
};

MeanErr mean_stderr(const std::vector<double>& x) {
    MeanErr m;
    if (x.empty()) return m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    if (x.size() > 1) {
        double s = 0.0;
        for (double v : x) s += (v - m.mean) * (v - m.mean);
        m.stderr_ = std::sqrt(s / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
    }
    return m;
}

/// Independent seeds for the initial sample and the dynamics.
std::uint64_t dynamics_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

/// Random smooth potential with decaying coefficients.
SpaceTimeFunction random_potential(std::uint64_t seed, int modes, double amplitude) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::vector<double> a(static_cast<std::size_t>(modes)), b(static_cast<std::size_t>(modes));
    for (int q = 0; q < modes; ++q) {
        a[static_cast<std::size_t>(q)] = amplitude * n01(rng) / (q + 1);
        b[static_cast<std::size_t>(q)] = amplitude * n01(rng) / (q + 1);
    }
    return trig_series(std::move(a), std::move(b));
}

// ---- experiments

json run_phi(const ExperimentConfig& c, Outputs& out) {
    const auto rate = rate_from(c);
    const int points = positive_int(c, "model.rho_points");
    const double rho_max = c.real("model.rho_max");
    if (!(rho_max > 0.0)) throw Error(ErrorKind::Config, "key 'model.rho_max' must be positive");
    std::function<double(double)> closed;
    if (c.get("model.rate") == "linear") closed = [](double r) { return r; };
    if (c.get("model.rate") == "indicator") closed = [](double r) { return r / (1 + r); };
    auto os = out.open("phi.csv");
    os << "rho,phi,closed_form,abs_error\n";
    std::vector<std::vector<double>> rows;
    double worst = 0.0;
    for (int k = 1; k <= points; ++k) {
        const double rho = rho_max * k / points;
        const double phi = fugacity_of_density(rate, rho);
        os << rho << ',' << phi;
        if (closed) {
            const double e = std::abs(phi - closed(rho));
            worst = std::max(worst, e);
            os << ',' << closed(rho) << ',' << e;
        } else {
            os << ",,";
        }
        os << '\n';
        rows.push_back({rho, phi});
    }
    out.plot("phi.dat", "rho phi", rows);
    json s{{"rate", rate.name()}, {"points", points}, {"rho_max", rho_max}};
    s["max_abs_error"] = closed ? json(worst) : json(nullptr);
    return s;
}

json run_simulate(const ExperimentConfig& c, Outputs& out, int threads) {
    const auto rate = rate_from(c);
    const int d = positive_int(c, "lattice.d");
    const int N = sizes_from(c, "lattice.sizes").front();
    const auto profile = profile_from(c, d);
    const double t_end = c.real("lattice.t_end");
    const auto times = linspace(0.0, t_end, positive_int(c, "lattice.snapshots"));
    const double eps = c.real("lattice.eps");
    const auto seeds = c.seeds();
    const auto trajs = parallel_map<Trajectory>(seeds.size(), threads, [&](std::size_t k) {
        const auto init = local_equilibrium_sample(profile, N, rate, seeds[k]);
        return simulate(rate, init, t_end, times, dynamics_seed(seeds[k]));
    });
    json per_seed = json::array();
    std::vector<double> mean_field;
    for (std::size_t k = 0; k < trajs.size(); ++k) {
        const auto& tr = trajs[k];
        write_snapshots_binary(tr, out.path("snapshots_seed" + std::to_string(seeds[k]) + ".bin"));
        const auto field = coarse_grain(tr.snapshots.back(), eps);
        write_field_csv(field, out.path("coarse_seed" + std::to_string(seeds[k]) + ".csv"));
        if (mean_field.empty()) mean_field.assign(field.values.size(), 0.0);
        for (std::size_t i = 0; i < field.values.size(); ++i) mean_field[i] += field.values[i] / static_cast<double>(trajs.size());
        bool conserved = true;
        for (const auto& s : tr.snapshots) conserved = conserved && s.total() == tr.snapshots.front().total();
        per_seed.push_back({{"seed", seeds[k]}, {"events", tr.event_count}, {"particles", tr.snapshots.front().total()},
                            {"mass_conserved", conserved}});
    }
    std::vector<std::vector<double>> rows;
    const Grid g = Lattice(d, N).grid();
    for (std::size_t i = 0; i < mean_field.size(); ++i) rows.push_back({g.position(i)[0], mean_field[i]});
    out.plot("coarse_mean_final.dat", "x mean_coarse_density (first coordinate for d > 1)", rows);
    return {{"rate", rate.name()}, {"N", N}, {"d", d}, {"t_end", t_end}, {"eps", eps}, {"runs", per_seed}};
}

json run_hydro(const ExperimentConfig& c, Outputs& out, int threads) {
    const auto rate = rate_from(c);
    const auto model = model_from(c, rate);
    const int d = positive_int(c, "lattice.d");
    const auto sizes = sizes_from(c, "lattice.sizes");
    const auto profile = profile_from(c, d);
    const double t_end = c.real("lattice.t_end");
    const double eps = c.real("lattice.eps");
    const auto seeds = c.seeds();
    const bool halved = c.get("pde.convention") == "halved";

    // deterministic PDE reference on a fine grid
    SolverParams p = solver_from(c);
    p.dt = c.real("pde.reference_dt");
    p.t_end = t_end;
    p.snapshot_stride = 1 << 30;
    const Grid ref_grid(d, positive_int(c, "pde.reference_cells"));
    const auto ref = solve_skeleton(model, DensityField::sample(ref_grid, [&](const Point& x) { return profile.value(x); }),
                                    ControlField::none(), p);
    const auto& u_T = ref.final_field();

    struct Task {
        int N;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (int N : sizes)
        for (auto s : seeds) tasks.push_back({N, s});
    SimulationOptions opt;
    opt.rate_multiplier = halved ? 0.5 : 1.0;
    const auto fields = parallel_map<std::vector<double>>(tasks.size(), threads, [&](std::size_t k) {
        const auto init = local_equilibrium_sample(profile, tasks[k].N, rate, tasks[k].seed);
        const std::vector<double> times{t_end};
        const auto tr = simulate(rate, init, t_end, times, dynamics_seed(tasks[k].seed), opt);
        return coarse_grain(tr.snapshots.back(), eps).values;
    });

    double u0_l1 = 0.0;
    for (double v : DensityField::sample(ref_grid, [&](const Point& x) { return profile.value(x); }).values) u0_l1 += std::abs(v);
    u0_l1 *= ref_grid.cell_volume();

    auto errors_csv = out.open("hydro_errors.csv");
    errors_csv << "N,seed,l1_error\n";
    json table = json::array();
    std::vector<std::vector<double>> rows_mean, rows_seed, rows_dir;
    std::size_t k = 0;
    for (int N : sizes) {
        const Grid g = Lattice(d, N).grid();
        std::vector<double> u(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) u[i] = interpolate(ref_grid, u_T.values, g.position(i));
        std::vector<double> per_seed;
        std::vector<std::vector<double>> fs;
        for (std::size_t s = 0; s < seeds.size(); ++s, ++k) {
            per_seed.push_back(l1_distance(g, fields[k], u));
            errors_csv << N << ',' << seeds[s] << ',' << per_seed.back() << '\n';
            fs.push_back(fields[k]);
        }
        // error of the ensemble-mean field, jackknife standard error
        auto mean_error = [&](std::size_t skip) {
            std::vector<double> m(g.size(), 0.0);
            const double n = static_cast<double>(fs.size() - (skip < fs.size() ? 1 : 0));
            for (std::size_t s = 0; s < fs.size(); ++s)
                if (s != skip)
                    for (std::size_t i = 0; i < m.size(); ++i) m[i] += fs[s][i] / n;
            return l1_distance(g, m, u);
        };
        const double mf = mean_error(fs.size());
        double jk = 0.0;
        if (fs.size() > 1) {
            std::vector<double> loo;
            for (std::size_t s = 0; s < fs.size(); ++s) loo.push_back(mean_error(s));
            const double lm = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(loo.size());
            for (double v : loo) jk += (v - lm) * (v - lm);
            jk = std::sqrt(jk * static_cast<double>(loo.size() - 1) / static_cast<double>(loo.size()));
        }
        const auto ps = mean_stderr(per_seed);
        const auto dir = dirichlet_local_eq(profile, N, model);
        table.push_back({{"N", N}, {"box_radius", box_radius(N, eps)}, {"per_seed_mean", ps.mean},
                         {"per_seed_stderr", ps.stderr_}, {"mean_field_error", mf}, {"mean_field_stderr", jk},
                         {"dirichlet_total", dir.total}, {"dirichlet_continuum", dir.continuum}});
        rows_mean.push_back({static_cast<double>(N), mf, jk});
        rows_seed.push_back({static_cast<double>(N), ps.mean, ps.stderr_});
        rows_dir.push_back({dir.continuum, dir.total});
    }
    out.plot("hydro_error.dat", "N l1_error_of_mean_field jackknife_stderr", rows_mean);
    out.plot("hydro_error_per_seed.dat", "N mean_l1_error stderr", rows_seed);
    out.plot("dirichlet_vs_D.dat", "D(u) scaled_dirichlet_form", rows_dir);
    return {{"rate", rate.name()}, {"d", d}, {"t_end", t_end}, {"eps", eps}, {"ensemble", seeds.size()},
            {"u0_l1", u0_l1}, {"reference_cells", ref_grid.cells()}, {"errors", table}};
}

json run_supex(const ExperimentConfig& c, Outputs& out, int threads) {
    const auto rate = rate_from(c);
    const int d = positive_int(c, "lattice.d");
    const auto sizes = sizes_from(c, "lattice.sizes");
    const auto profile = profile_from(c, d);
    const double t_end = c.real("lattice.t_end");
    const double eps = c.real("lattice.eps");
    const auto seeds = c.seeds();
    const auto times = linspace(0.0, t_end, positive_int(c, "lattice.snapshots"));
    const auto obs = c.get("lattice.observable") == "rate" ? CylinderObservable::rate(rate) : CylinderObservable::occupancy();
    const auto H = [](double, const Point& x) { return 1.0 + 0.5 * std::cos(2 * std::numbers::pi * x[0]); };
    struct Task {
        int N;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (int N : sizes)
        for (auto s : seeds) tasks.push_back({N, s});
    const auto values = parallel_map<double>(tasks.size(), threads, [&](std::size_t k) {
        const auto init = local_equilibrium_sample(profile, tasks[k].N, rate, tasks[k].seed);
        const auto tr = simulate(rate, init, t_end, times, dynamics_seed(tasks[k].seed));
        return v_functional(tr, H, obs, eps).integral;
    });
    auto csv = out.open("v_integrals.csv");
    csv << "N,seed,integral_abs_V\n";
    json table = json::array();
    std::vector<std::vector<double>> rows;
    std::size_t k = 0;
    for (int N : sizes) {
        std::vector<double> v;
        for (std::size_t s = 0; s < seeds.size(); ++s, ++k) {
            v.push_back(values[k]);
            csv << N << ',' << seeds[s] << ',' << values[k] << '\n';
        }
        const auto m = mean_stderr(v);
        table.push_back({{"N", N}, {"mean", m.mean}, {"stderr", m.stderr_}});
        rows.push_back({static_cast<double>(N), m.mean, m.stderr_});
    }
    out.plot("v_vs_N.dat", "N mean_int_abs_V stderr", rows);
    return {{"rate", rate.name()}, {"observable", c.get("lattice.observable")}, {"eps", eps}, {"t_end", t_end},
            {"test_function", "1 + cos(2 pi x_0)/2"}, {"ensemble", seeds.size()}, {"table", table}};
}

json run_two_block(const ExperimentConfig& c, Outputs& out, int threads) {
    const auto rate = rate_from(c);
    const double gamma = c.real("model.gamma");
    const int d = positive_int(c, "counterexample.d");
    CounterexampleParams cp;
    cp.n = static_cast<int>(c.integers("counterexample.n").front());
    cp.alpha = c.real("counterexample.alpha");
    const auto ce = counterexample_profile(d, gamma, cp);
    const auto& o = *ce.profile.oscillating_profile();
    const MomentWeight w{};
    const auto tune = tune_two_block(gamma, d, rate, w);
    const double log_N = -std::min(o.log_r_max, o.log_r_min) + c.real("counterexample.log_n_margin");
    const auto seeds = c.seeds();
    const auto n = static_cast<std::size_t>(positive_int(c, "counterexample.ensemble"));
    const auto pairs = parallel_map<std::vector<BoxPair>>(seeds.size(), threads, [&](std::size_t k) {
        return sample_box_pairs(o, log_N, o.log_r_max, o.log_r_min, tune.ell, rate, n, seeds[k]);
    });
    std::vector<BoxPair> all;
    json per_seed = json::array();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto e = two_block_observable(pairs[k], w, tune.beta);
        per_seed.push_back({{"seed", seeds[k]}, {"mean", e.mean}, {"stderr", e.stderr_}});
        all.insert(all.end(), pairs[k].begin(), pairs[k].end());
    }
    const auto pooled = two_block_observable(all, w, tune.beta);
    std::vector<std::vector<double>> running;
    for (std::size_t m = 100; m <= all.size(); m += 100) {
        const auto e = two_block_observable(std::span<const BoxPair>(all.data(), m), w, tune.beta);
        running.push_back({static_cast<double>(m), e.mean, e.stderr_});
    }
    out.plot("two_block.dat", "samples running_mean stderr", running);
    out.plot("two_block_threshold.dat", "samples half_gamma",
             {{0.0, gamma / 2}, {static_cast<double>(all.size()), gamma / 2}});
    return {{"rate", rate.name()}, {"d", d}, {"n", cp.n}, {"theta", tune.theta}, {"ell", tune.ell},
            {"beta", tune.beta}, {"c_w", tune.c_w}, {"log_N", log_N}, {"log_r_max", o.log_r_max},
            {"log_r_min", o.log_r_min}, {"mean", pooled.mean}, {"stderr", pooled.stderr_},
            {"samples", pooled.ensemble}, {"half_gamma", gamma / 2},
            {"exceeds_half_gamma_at_2sigma", pooled.mean - 2 * pooled.stderr_ > gamma / 2}, {"per_seed", per_seed}};
}

json run_counterexample(const ExperimentConfig& c, Outputs& out) {
    const auto rate = rate_from(c);
    const auto model = model_from(c, rate);
    const double gamma = c.real("model.gamma");
    const int d = positive_int(c, "counterexample.d");
    auto csv = out.open("counterexample.csv");
    csv << "n,log_psi_inf,grad_norm2,scaled_grad_norm2,sup_u,inf_u,dirichlet\n";
    json rows = json::array();
    std::vector<std::vector<double>> plot;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, range_err = 0.0;
    for (long long n : c.integers("counterexample.n")) {
        CounterexampleParams cp;
        cp.n = static_cast<int>(n);
        cp.alpha = c.real("counterexample.alpha");
        const auto ce = counterexample_profile(d, gamma, cp, &model);
        const auto& g = ce.diagnostics;
        csv << n << ',' << g.log_psi_inf << ',' << g.grad_norm2 << ',' << g.scaled_grad_norm2 << ',' << g.sup_u << ','
            << g.inf_u << ',' << g.dirichlet << '\n';
        rows.push_back({{"n", n}, {"log_psi_inf", g.log_psi_inf}, {"grad_norm2", g.grad_norm2},
                        {"scaled_grad_norm2", g.scaled_grad_norm2}, {"sup_u", g.sup_u}, {"inf_u", g.inf_u}});
        plot.push_back({1.0 / std::sqrt(std::abs(g.log_psi_inf)), g.grad_norm2});
        lo = std::min(lo, g.scaled_grad_norm2);
        hi = std::max(hi, g.scaled_grad_norm2);
        range_err = std::max(range_err, std::abs(g.sup_u - g.inf_u - gamma));
    }
    out.plot("grad_energy.dat", "inv_sqrt_abs_log_psi_inf grad_norm2", plot);
    return {{"d", d}, {"gamma", gamma}, {"profiles", rows}, {"scaled_ratio", hi / lo}, {"max_range_error", range_err}};
}

json run_solve(const ExperimentConfig& c, Outputs& out) {
    const auto rate = rate_from(c);
    const auto model = model_from(c, rate);
    const int d = positive_int(c, "lattice.d");
    const auto profile = profile_from(c, d);
    const Grid g(d, positive_int(c, "pde.cells"));
    const auto b = solve_skeleton(model, DensityField::sample(g, [&](const Point& x) { return profile.value(x); }),
                                  ControlField::none(), solver_from(c));
    write_field_csv(b.final_field(), out.path("field_final.csv"));
    write_fields_binary(b.snapshots, out.path("fields.bin"));
    write_series_csv(b, out.path("series.csv"));
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < b.series.times.size(); ++k) rows.push_back({b.series.times[k], b.series.entropy[k]});
    out.plot("entropy.dat", "t relative_entropy", rows);
    const auto e = energy_report(b);
    auto ratio = [](const EstimateRatio& r) { return json{{"lhs", r.lhs}, {"rhs", r.rhs}, {"constant", r.constant}}; };
    return {{"rate", rate.name()}, {"cells", g.cells()}, {"d", d}, {"steps", b.steps}, {"dt", b.params.dt},
            {"max_mass_drift", b.max_mass_drift}, {"dissipation", b.accumulated_dissipation},
            {"energy", ratio(e.energy)}, {"time_regularity", ratio(e.time_regularity)},
            {"relative_entropy", ratio(e.relative_entropy)}};
}

struct FluctuationCase {
    SpaceTimeFunction H;
    SolutionBundle bundle;
};

FluctuationCase fluctuation(const ExperimentConfig& c, const NonlinearityModel& model, std::uint64_t seed) {
    const auto profile = profile_from(c, 1);
    const Grid g(1, positive_int(c, "pde.cells"));
    auto H = random_potential(seed, positive_int(c, "rate.control_modes"), c.real("rate.control_amplitude"));
    SolverParams p = solver_from(c);
    p.snapshot_stride = 1;
    auto b = solve_fokker_planck(model, DensityField::sample(g, [&](const Point& x) { return profile.value(x); }), H, p);
    return {std::move(H), std::move(b)};
}

json run_rate(const ExperimentConfig& c, Outputs& out, int threads) {
    const auto rate = rate_from(c);
    const auto model = model_from(c, rate);
    const int cases = count_of(c, "rate.cases");
    const auto base = c.seeds().front();
    TestBasis::Options bo;
    bo.d = 1;
    bo.spatial_modes = positive_int(c, "rate.modes");
    bo.time_degree = static_cast<int>(c.integer("rate.time_degree"));
    bo.t_end = c.real("pde.t_end");
    const TestBasis basis(bo);
    const auto conv = convention_from(c);
    const double ridge = c.real("rate.ridge");
    const auto totals = parallel_map<RateTotal>(static_cast<std::size_t>(cases), threads, [&](std::size_t k) {
        const auto fc = fluctuation(c, model, base + k);
        return rate_total(fc.bundle, c.real("model.gamma"), model, basis, conv, ridge);
    });
    auto csv = out.open("rate_cases.csv");
    csv << "case,static,sup_dynamic,control_dynamic,relative_gap\n";
    json rows = json::array();
    std::vector<std::vector<double>> plot;
    double worst = 0.0;
    for (std::size_t k = 0; k < totals.size(); ++k) {
        const auto& t = totals[k];
        csv << k << ',' << t.sup_form.static_part << ',' << t.sup_form.dynamic << ',' << t.control_form.dynamic << ','
            << t.relative_gap << '\n';
        write_rate_report_json(t.sup_form, out.path("rate_case" + std::to_string(k) + "_sup.json"));
        write_rate_report_json(t.control_form, out.path("rate_case" + std::to_string(k) + "_control.json"));
        if (!t.control_form.H_slices.empty())
            write_field_csv(DensityField(Grid(1, positive_int(c, "pde.cells")), t.control_form.H_slices.back(),
                                         t.control_form.slice_times.back()),
                            out.path("optimal_H_case" + std::to_string(k) + ".csv"));
        rows.push_back({{"case", k}, {"static", t.sup_form.static_part}, {"sup_dynamic", t.sup_form.dynamic},
                        {"control_dynamic", t.control_form.dynamic}, {"relative_gap", t.relative_gap},
                        {"sup_converged", t.sup_form.converged}, {"gram_condition", t.sup_form.gram_condition}});
        plot.push_back({t.control_form.dynamic, t.sup_form.dynamic});
        worst = std::max(worst, t.relative_gap);
    }
    out.plot("rate_sup_vs_control.dat", "control_form sup_form", plot);
    return {{"rate", rate.name()}, {"basis_size", basis.size()}, {"convention", c.get("pde.convention")},
            {"cases", rows}, {"max_relative_gap", worst}};
}

json run_roundtrip(const ExperimentConfig& c, Outputs& out, int threads) {
    const auto rate = rate_from(c);
    const auto model = model_from(c, rate);
    const int cases = count_of(c, "rate.cases");
    const auto base = c.seeds().front();
    const double ridge = c.real("rate.ridge");
    struct Row {
        double half_norm = 0, cost = 0, grad_error = 0, mean_projection = 0;
    };
    const auto rows = parallel_map<Row>(static_cast<std::size_t>(cases), threads, [&](std::size_t k) {
        const auto fc = fluctuation(c, model, base + k);
        const auto r = recover_control(fc.bundle, model, ridge);
        return Row{0.5 * fc.bundle.control_norm2, r.dynamic, control_gradient_error(fc.bundle, model, r, fc.H),
                   r.max_mean_projection};
    });
    auto csv = out.open("roundtrip.csv");
    csv << "case,half_control_norm,recovered_cost,gradient_error,max_mean_projection\n";
    std::vector<std::vector<double>> plot;
    double worst_gap = 0.0, worst_grad = 0.0;
    int violations = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        csv << k << ',' << r.half_norm << ',' << r.cost << ',' << r.grad_error << ',' << r.mean_projection << '\n';
        plot.push_back({r.half_norm, r.cost});
        worst_gap = std::max(worst_gap, std::abs(r.half_norm - r.cost) / std::max(r.half_norm, 1e-300));
        worst_grad = std::max(worst_grad, r.grad_error);
        if (r.cost > r.half_norm + 1e-6) ++violations;
    }
    out.plot("roundtrip.dat", "half_control_norm recovered_cost", plot);
    return {{"rate", rate.name()}, {"cases", cases}, {"max_cost_gap", worst_gap}, {"max_gradient_error", worst_grad},
            {"bound_violations", violations}};
}

} // namespace

std::string sha256_hex(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot read '" + file.string() + "'");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error(ErrorKind::Io, "sha256 init failed");
    std::vector<char> buf(1 << 16);
    while (is) {
        is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (is.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(is.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::vector<std::string> write_manifest(const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "MANIFEST")
            files.push_back(fs::relative(e.path(), dir).generic_string());
    std::sort(files.begin(), files.end());
    std::ofstream os(dir / "MANIFEST");
    if (!os) throw Error(ErrorKind::Io, "cannot write manifest in '" + dir.string() + "'");
    for (const auto& f : files) os << sha256_hex(dir / f) << "  " << f << '\n';
    return files;
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
    std::ifstream is(dir / "MANIFEST");
    if (!is) throw Error(ErrorKind::Io, "no MANIFEST in '" + dir.string() + "'");
    std::vector<std::string> bad;
    std::string line;
    while (std::getline(is, line)) {
        const auto sep = line.find("  ");
        if (sep == std::string::npos) continue;
        const std::string hash = line.substr(0, sep), rel = line.substr(sep + 2);
        if (!fs::exists(dir / rel) || sha256_hex(dir / rel) != hash) bad.push_back(rel);
    }
    return bad;
}

int exit_code_for(const Error& e) noexcept {
    switch (e.kind()) {
    case ErrorKind::Config:
    case ErrorKind::Validation: return 2;
    case ErrorKind::Io: return 1;
    default: return 3;
    }
}

namespace {

/// Stale artifacts would end up in the manifest. Directories holding the run
/// marker (complete or aborted runs) are emptied; any other non-empty directory is refused.
void clear_previous_run(const fs::path& dir) {
    fs::create_directories(dir);
    if (!fs::is_empty(dir)) {
        if (!fs::exists(dir / kRunMarker))
            throw Error(ErrorKind::Io, "output directory '" + dir.string() + "' is not empty and holds no previous run");
        for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
    }
    std::ofstream(dir / kRunMarker) << kVersion << '\n';
}

} // namespace

fs::path resolve_output_dir(const ExperimentConfig& config, const std::string& cli_out) {
    fs::path p = cli_out.empty() ? fs::path(config.get("run.output")) / config.experiment() : fs::path(cli_out);
    if (p.is_relative())
        if (const char* root = std::getenv("ZRPLAB_OUTPUT_ROOT"); root && *root) p = fs::path(root) / p;
    return p;
}

RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    if (options.threads < 1) throw Error(ErrorKind::Config, "threads must be >= 1");
    if (config.seeds().empty()) throw Error(ErrorKind::Config, "key 'run.seeds' needs at least one seed");
    clear_previous_run(options.out_dir);
    Outputs out(options.out_dir);
    const auto& ex = config.experiment();
    const int th = options.threads;
    json summary;
    if (ex == "phi") summary = run_phi(config, out);
    else if (ex == "simulate") summary = run_simulate(config, out, th);
    else if (ex == "hydro-check") summary = run_hydro(config, out, th);
    else if (ex == "supex-check") summary = run_supex(config, out, th);
    else if (ex == "two-block") summary = run_two_block(config, out, th);
    else if (ex == "counterexample") summary = run_counterexample(config, out);
    else if (ex == "solve-skeleton") summary = run_solve(config, out);
    else if (ex == "rate") summary = run_rate(config, out, th);
    else if (ex == "roundtrip") summary = run_roundtrip(config, out, th);
    else throw Error(ErrorKind::Config, "unknown experiment '" + ex + "'");
    summary["experiment"] = ex;

    RunRecord rec;
    rec.experiment = ex;
    rec.config_text = config.save();
    rec.out_dir = options.out_dir;
    rec.summary = summary;
    rec.version = kVersion;
    config.save(options.out_dir / "config.ini");
    {
        std::ofstream os(options.out_dir / "summary.json");
        os << summary.dump(2) << '\n';
    }
    rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json record{{"experiment", ex},
                {"version", rec.version},
                {"compiler", __VERSION__},
                {"threads", th},
                {"wall_clock_seconds", rec.wall_clock_seconds},
                {"config", rec.config_text}};
    {
        std::ofstream os(options.out_dir / "record.json");
        os << record.dump(2) << '\n';
    }
    rec.artifacts = write_manifest(options.out_dir);
    return rec;
}

} // namespace zrp
