// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
#include "zrplab/harness.hpp"
#include "zrplab/lattice.hpp"
#include "zrplab/local_equilibrium.hpp"
#include "zrplab/profiles.hpp"
#include "zrplab/rate_functional.hpp"
#include "zrplab/rates.hpp"
#include "zrplab/skeleton.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

using namespace zrp;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= budget_s;
    const bool ok = v.pass && in_time;
    if (!ok) ++failures;
    std::printf("%s %2d %-28s %s [%.2fs / %.0fs%s]\n", ok ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs, budget_s,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

NonlinearityModel rate_model(const JumpRate& r) { return build_nonlinearity(r, uniform_rho_grid(12.0, 601), 1.0); }

SpaceTimeFunction random_trig(std::mt19937_64& rng, int modes, double amp) {
    std::normal_distribution<double> n01;
    std::vector<double> a, b;
    for (int q = 0; q < modes; ++q) {
        a.push_back(amp * n01(rng) / (q + 1));
        b.push_back(amp * n01(rng) / (q + 1));
    }
    return trig_series(a, b);
}

SolverParams params(double dt, double t_end) {
    SolverParams p;
    p.dt = dt;
    p.t_end = t_end;
    return p;
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

} // namespace

int main() {
    criterion(1, "closed-form phi", 1, [] {
        double worst = 0.0;
        for (int k = 0; k < 50; ++k) {
            const double rho = 0.1 + (10.0 - 0.1) * k / 49.0;
            worst = std::max(worst, std::abs(fugacity_of_density(JumpRate::linear(), rho) - rho));
            worst = std::max(worst, std::abs(fugacity_of_density(JumpRate::indicator(), rho) - rho / (1 + rho)));
        }
        return Verdict{worst <= 1e-8, fmt("max |phi - closed form| = %.2e (<= 1e-8)", worst)};
    });

    criterion(2, "change-of-variables identity", 5, [] {
        double worst = 0.0;
        for (const auto& r : {JumpRate::linear(), JumpRate::indicator(), JumpRate::odd_perturbed()})
            for (int k = 1; k <= 10; ++k) {
                const double rho = 0.5 * k;
                const auto law = law_of_density(r, rho, 1e-12);
                double e = 0.0;
                for (std::size_t j = 0; j < law.pmf.size(); ++j) e += r(static_cast<std::int64_t>(j)) * law.pmf[j];
                worst = std::max(worst, std::abs(e - fugacity_of_density(r, rho, 1e-12)));
            }
        return Verdict{worst <= 1e-8, fmt("max |E lambda(eta(0)) - phi| = %.2e over 30 cases", worst)};
    });

    criterion(3, "assumption gate", 1, [] {
        const auto lin = check_assumptions(JumpRate::linear(), 64);
        const auto ind = check_assumptions(JumpRate::indicator(), 64);
        const bool ok = lin.a1_ok && lin.a2_ok && lin.lipschitz_c == 1.0 && lin.gap_pair && lin.gap_pair->k == 1 &&
                        lin.gap_pair->delta == 1.0 && !ind.a2_ok;
        return Verdict{ok, fmt("linear (c,k,delta)=(%.0f,%lld,%.0f) accepted, indicator gap %s", lin.lipschitz_c,
                               lin.gap_pair ? static_cast<long long>(lin.gap_pair->k) : -1LL,
                               lin.gap_pair ? lin.gap_pair->delta : -1.0, ind.a2_ok ? "accepted" : "rejected")};
    });

    criterion(4, "hydrodynamic limit", 300, [] {
        ExperimentConfig c;
        c.set("run.experiment", "hydro-check");
        c.set("run.ensemble", "20");
        c.set("run.seeds", "1000");
        c.set("lattice.sizes", "64,128,256");
        c.set("lattice.t_end", "0.05");
        c.set("lattice.eps", "0.0625");
        c.set("profile.kind", "bump");
        c.set("profile.amplitude", "0.5");
        const auto dir = std::filesystem::temp_directory_path() / "zrplab_acceptance_hydro";
        std::filesystem::remove_all(dir);
        const auto rec = run_experiment(c, {dir, static_cast<int>(threads())});
        const auto& e = rec.summary["errors"];
        const double u0 = rec.summary["u0_l1"].get<double>();
        bool decreasing = true;
        for (std::size_t k = 0; k + 1 < e.size(); ++k) {
            const double a = e[k]["per_seed_mean"], sa = e[k]["per_seed_stderr"];
            const double b = e[k + 1]["per_seed_mean"], sb = e[k + 1]["per_seed_stderr"];
            decreasing = decreasing && a - b > 2 * std::hypot(sa, sb);
        }
        const double last = e.back()["per_seed_mean"];
        std::string d = "L1 per seed:";
        for (const auto& r : e) d += fmt(" %.4f+-%.4f", r["per_seed_mean"].get<double>(), r["per_seed_stderr"].get<double>());
        d += fmt("; N=256 %.4f vs 0.05|u0|=%.4f", last, 0.05 * u0);
        d += "; mean-field:";
        for (const auto& r : e) d += fmt(" %.4f", r["mean_field_error"].get<double>());
        return Verdict{decreasing && last <= 0.05 * u0, d};
    });

    criterion(5, "Dirichlet/Fisher identity", 10, [] {
        const auto r = dirichlet_local_eq(ProfileSpec::sine(1.0, 0.5, 1, 1), 512, rate_model(JumpRate::odd_perturbed()));
        return Verdict{r.relative_gap <= 0.05,
                       fmt("N=512 sum %.6f vs D(u) %.6f, relative gap %.2e", r.total, r.continuum, r.relative_gap)};
    });

    criterion(6, "variational representation", 30, [] {
        const auto model = rate_model(JumpRate::indicator());
        TestBasis::Options o;
        o.d = 1;
        o.spatial_modes = 32;
        const TestBasis B(o);
        std::mt19937_64 rng(606);
        std::uniform_real_distribution<double> u(-1, 1);
        bool sandwich = true, lower = true, upper = true;
        double min_ratio = 1e300, max_ratio = 0.0;
        for (int k = 0; k < 5; ++k) {
            const double a = 0.5 * u(rng), b = 0.3 * u(rng), ph = kPi * u(rng);
            const auto f = DensityField::sample(Grid(1, 256), [=](const Point& x) {
                return 1.2 + a * std::sin(2 * kPi * x[0] + ph) + b * std::cos(4 * kPi * x[0]);
            });
            const auto r = variational_D(f, B, model);
            sandwich = sandwich && r.basis_value <= r.value_at_optimizer + 1e-12;
            upper = upper && r.value_at_optimizer <= 1.01 * r.quarter_dissipation;
            lower = lower && r.basis_value >= 0.9 * r.quarter_dissipation;
            min_ratio = std::min(min_ratio, r.value_at_optimizer / r.dissipation);
            max_ratio = std::max(max_ratio, r.value_at_optimizer / r.dissipation);
        }
        return Verdict{sandwich && upper && lower,
                       fmt("basis<=H*: %s; H* value <= D/4+1%%: %s; basis >= 0.9 D/4: %s; H* value / D in [%.4f, %.4f]",
                           sandwich ? "yes" : "no", upper ? "yes" : "no", lower ? "yes" : "no", min_ratio, max_ratio)};
    });

    criterion(7, "control roundtrip", 60, [] {
        const auto model = rate_model(JumpRate::linear());
        std::mt19937_64 rng(707);
        double worst_gap = 0.0, worst_grad = 0.0;
        int violations = 0;
        for (int k = 0; k < 20; ++k) {
            const auto H = random_trig(rng, 3, 0.3);
            const auto rho0 = DensityField::sample(Grid(1, 128), [](const Point& x) { return 1.0 + 0.3 * std::sin(2 * kPi * x[0]); });
            const auto b = solve_fokker_planck(model, rho0, H, params(1e-4, 0.02));
            const auto r = recover_control(b, model);
            const double half = 0.5 * b.control_norm2;
            worst_gap = std::max(worst_gap, std::abs(r.dynamic - half) / half);
            worst_grad = std::max(worst_grad, control_gradient_error(b, model, r, H));
            if (r.dynamic > half + 1e-6) ++violations;
        }
        return Verdict{worst_gap <= 0.02 && worst_grad <= 0.02 && violations == 0,
                       fmt("cost gap %.2e, gradient error %.2e, bound violations %d / 20", worst_gap, worst_grad, violations)};
    });

    criterion(8, "matching bounds", 120, [] {
        const auto model = rate_model(JumpRate::linear());
        TestBasis::Options o;
        o.d = 1;
        o.spatial_modes = 64;
        o.t_end = 0.02;
        const TestBasis B(o);
        std::mt19937_64 rng(808);
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const auto H = random_trig(rng, 3, 0.3);
            const auto rho0 = DensityField::sample(Grid(1, 128), [](const Point& x) { return 1.0 + 0.3 * std::sin(2 * kPi * x[0]); });
            const auto b = solve_fokker_planck(model, rho0, H, params(1e-4, 0.02));
            worst = std::max(worst, rate_total(b, 1.0, model, B, DiffusionConvention::generator_consistent()).relative_gap);
        }
        return Verdict{worst <= 0.03, fmt("max |sup - control| / control = %.2e over 5 fluctuations", worst)};
    });

    criterion(9, "relative entropy estimate", 120, [] {
        // pinned from the first run of this suite
        constexpr double pinned = 1.25; // measured 1.2451
        const auto model = rate_model(JumpRate::indicator());
        std::mt19937_64 rng(909);
        std::uniform_real_distribution<double> u01(0, 1);
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const double a = 0.6 * u01(rng), ph = u01(rng), s = 2 * u01(rng) - 1;
            const int mode = 1 + static_cast<int>(rng() % 3);
            const auto rho0 = DensityField::sample(Grid(1, 64), [=](const Point& x) { return 1.0 + a * std::sin(2 * kPi * (mode * x[0] + ph)); });
            auto p = params(5e-4, 0.05);
            p.viscosity = 0.01;
            p.sigma_cap = 0.8;
            const auto g = ControlField::vector([=](double t, const Point& x) { return Point{s * std::cos(2 * kPi * x[0]) * (1 - t), 0, 0}; });
            worst = std::max(worst, energy_report(solve_skeleton(model, rho0, g, p)).relative_entropy.constant);
        }
        return Verdict{worst <= 8.0 && worst <= pinned, fmt("max constant %.4f (<= 8, pinned %.2f)", worst, pinned)};
    });

    criterion(10, "counterexample scaling", 30, [] {
        double lo = 1e300, hi = 0.0;
        bool exact = true;
        for (int n = 1; n <= 4; ++n) {
            const auto ce = counterexample_profile(2, 1.0, {n});
            lo = std::min(lo, ce.diagnostics.scaled_grad_norm2);
            hi = std::max(hi, ce.diagnostics.scaled_grad_norm2);
            exact = exact && ce.diagnostics.sup_u - ce.diagnostics.inf_u == 1.0;
        }
        return Verdict{hi / lo < 3.0 && exact, fmt("scaled energy ratio %.3f (< 3), sup-inf = gamma exactly: %s", hi / lo,
                                                   exact ? "yes" : "no")};
    });

    criterion(11, "two-block observable", 300, [] {
        const auto rate = JumpRate::linear();
        const auto ce = counterexample_profile(2, 1.0, {1});
        const auto& o = *ce.profile.oscillating_profile();
        const auto t = tune_two_block(1.0, 2, rate, MomentWeight{});
        const double log_N = -std::min(o.log_r_max, o.log_r_min) + 40.0;
        const auto pairs = sample_box_pairs(o, log_N, o.log_r_max, o.log_r_min, t.ell, rate, 400, 1111);
        const auto e = two_block_observable(pairs, MomentWeight{}, t.beta);
        return Verdict{e.mean - 2 * e.stderr_ > 0.5,
                       fmt("mean %.4f, stderr %.4f, l=%d beta=%.4f theta=%.5f (> gamma/2 at 2 sigma)", e.mean, e.stderr_,
                           t.ell, t.beta, t.theta)};
    });

    criterion(12, "defective concavity", 30, [] {
        const std::vector<double> scales{0.02, 0.05, 0.1, 0.2};
        std::size_t violations = 0, evaluated = 0;
        std::uint64_t seed = 1212;
        for (const auto& r : {JumpRate::linear(), JumpRate::indicator(), JumpRate::odd_perturbed()}) {
            const auto c = defective_concavity_check(rate_model(r), 10000, scales, seed++);
            violations += c.violations;
            evaluated += c.evaluated;
        }
        return Verdict{violations == 0, fmt("%zu violations in %zu comparisons", violations, evaluated)};
    });

    criterion(13, "superexponential trend", 300, [] {
        ExperimentConfig c;
        c.set("run.experiment", "supex-check");
        c.set("run.ensemble", "20");
        c.set("run.seeds", "1300");
        c.set("model.rate", "odd_perturbed");
        c.set("lattice.sizes", "32,64,128");
        c.set("lattice.snapshots", "20");
        c.set("lattice.observable", "rate");
        const auto dir = std::filesystem::temp_directory_path() / "zrplab_acceptance_supex";
        std::filesystem::remove_all(dir);
        const auto rec = run_experiment(c, {dir, static_cast<int>(threads())});
        const auto& t = rec.summary["table"];
        bool mono = true;
        std::string d = "mean int|V|:";
        for (std::size_t k = 0; k < t.size(); ++k) {
            d += fmt(" %.3e+-%.1e", t[k]["mean"].get<double>(), t[k]["stderr"].get<double>());
            if (k + 1 < t.size())
                mono = mono && t[k]["mean"].get<double>() - t[k + 1]["mean"].get<double>() >
                                   2 * std::hypot(t[k]["stderr"].get<double>(), t[k + 1]["stderr"].get<double>());
        }
        return Verdict{mono, d};
    });

    criterion(14, "kinetic diagnostics", 30, [] {
        const auto model = rate_model(JumpRate::indicator());
        const auto rho0 = DensityField::sample(Grid(1, 128), [](const Point& x) { return 1.0 + 0.5 * std::sin(2 * kPi * x[0]); });
        const auto b = solve_skeleton(model, rho0, ControlField::none(), params(1e-4, 0.02));
        std::vector<double> edges;
        for (int i = 0; i <= 60; ++i) edges.push_back(0.05 * i);
        const std::vector<double> M{1.6, 2.0, 3.0};
        const auto k = kinetic_diagnostics(b, edges, M);
        const double rel = std::abs(k.defect_total - b.accumulated_theta_energy) / b.accumulated_theta_energy;
        const bool tails = k.tail_masses[0] == 0.0 && k.tail_masses[1] == 0.0 && k.tail_masses[2] == 0.0;
        return Verdict{rel <= 0.01 && tails, fmt("defect %.6f vs int int Phi'|grad rho|^2 %.6f (rel %.2e); sup rho %.4f, "
                                                 "tail mass above 1.6, 2, 3: %g %g %g",
                                                 k.defect_total, b.accumulated_theta_energy, rel, k.sup_rho,
                                                 k.tail_masses[0], k.tail_masses[1], k.tail_masses[2])};
    });

    std::printf("%d of 14 criteria failed\n", failures);
    return failures;
}
