// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/elliptic.hpp"
#include "zrplab/error.hpp"
#include "zrplab/skeleton.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

using namespace zrp;

namespace {

constexpr double kPi = std::numbers::pi;

NonlinearityModel identity_model(double gamma = 1.0) { return NonlinearityModel::identity(uniform_rho_grid(6.0, 601), gamma); }

double sine_amplitude(const DensityField& f, double mean) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i)
        s += (f.values[i] - mean) * std::sin(2 * kPi * f.grid.position(i)[0]);
    return 2.0 * s * f.grid.cell_volume();
}

DensityField heat_mode(int cells, double amp = 0.3) {
    return DensityField::sample(Grid(1, cells), [=](const Point& x) { return 1.0 + amp * std::sin(2 * kPi * x[0]); });
}

SolverParams params_for(double dt, double t_end, Scheme s = Scheme::SemiImplicit) {
    SolverParams p;
    p.dt = dt;
    p.t_end = t_end;
    p.scheme = s;
    return p;
}

SpaceTimeFunction bump_potential(double scale) {
    // H = scale * bump((x - 1/2) / 0.3)
    return SpaceTimeFunction::stationary(
        [=](const Point& x) { return scale * bump((x[0] - 0.5) / 0.3); },
        [=](const Point& x) { return Point{scale * bump_prime((x[0] - 0.5) / 0.3) / 0.3, 0, 0}; },
        [=](const Point& x) { return scale * bump_second((x[0] - 0.5) / 0.3) / 0.09; });
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

} // namespace

TEST(Elliptic, SolvesShiftedLaplacianModes) {
    // (I - Delta) sin(2 pi k x) has eigenvalue 1 + (4/h^2) sin^2(pi k h) on the grid.
    const Grid g(1, 64);
    std::vector<double> f(64), u(64, 0.0);
    for (std::size_t i = 0; i < 64; ++i) f[i] = std::sin(2 * kPi * 3 * g.position(i)[0]);
    FaceOperator A(g, 1.0, 1.0);
    conjugate_gradient(A, f, u, 1e-14);
    const double lam = 1.0 + 4.0 * 64 * 64 * std::pow(std::sin(kPi * 3.0 / 64), 2);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(u[i], f[i] / lam, 1e-13);
}

TEST(Elliptic, SingularSolveOnMeanZeroSubspace) {
    const Grid g(2, 16);
    std::mt19937_64 rng(2);
    FaceOperator A(g, 0.0, 1.0);
    for (double& w : A.face_weights) w = 0.5 + uniform01(rng);
    std::vector<double> x_true(g.size()), b(g.size()), x(g.size(), 0.0);
    for (double& v : x_true) v = uniform01(rng);
    double m = 0.0;
    for (double v : x_true) m += v;
    for (double& v : x_true) v -= m / static_cast<double>(g.size());
    A.apply(x_true, b);
    conjugate_gradient(A, b, x, 1e-13, 0, true);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(x[i], x_true[i], 1e-9);
}

TEST(Skeleton, ConstantsAreStationary) {
    for (Scheme s : {Scheme::Explicit, Scheme::SemiImplicit}) {
        const auto rho0 = DensityField::constant(Grid(2, 16), 1.7);
        const auto b = solve_skeleton(identity_model(), rho0, ControlField::none(), params_for(1e-4, 0.01, s));
        for (double v : b.final_field().values) EXPECT_NEAR(v, 1.7, 1e-13);
        EXPECT_EQ(b.series.times.size(), b.steps + 1);
    }
}

TEST(Skeleton, HeatModeDecay) {
    for (Scheme s : {Scheme::Explicit, Scheme::SemiImplicit}) {
        const double t = 0.02;
        double prev = 1e300;
        for (int cells : {32, 64, 128}) {
            const double dt = 0.2 / (cells * cells);
            const auto b = solve_skeleton(identity_model(), heat_mode(cells), ControlField::none(), params_for(dt, t, s));
            const double err = std::abs(sine_amplitude(b.final_field(), 1.0) - 0.3 * std::exp(-4 * kPi * kPi * t));
            EXPECT_LT(err, prev / 3.0);
            prev = err;
        }
        EXPECT_LT(prev, 1e-4);
    }
}

TEST(Skeleton, HalfDiffusionHalvesDecayRate) {
    auto p = params_for(1e-5, 0.02);
    p.diffusion_scale = 0.5;
    const auto b = solve_skeleton(identity_model(), heat_mode(128), ControlField::none(), p);
    EXPECT_NEAR(sine_amplitude(b.final_field(), 1.0), 0.3 * std::exp(-2 * kPi * kPi * 0.02), 2e-4);
}

TEST(Skeleton, MassConservedWithControl) {
    const auto g = ControlField::vector([](double t, const Point& x) { return Point{std::cos(2 * kPi * x[0]) * (1 + t), std::sin(2 * kPi * x[1]), 0}; });
    for (Scheme s : {Scheme::Explicit, Scheme::SemiImplicit}) {
        const auto rho0 = DensityField::sample(Grid(2, 24), [](const Point& x) { return 1.0 + 0.5 * std::sin(2 * kPi * (x[0] + x[1])); });
        const auto b = solve_skeleton(NonlinearityModel::saturating(uniform_rho_grid(6.0, 601), 1.0), rho0, g,
                                      params_for(1e-4, 0.02, s));
        EXPECT_LE(b.max_mass_drift, 1e-10);
        EXPECT_NEAR(b.series.mass.back(), b.series.mass.front(), 1e-10);
        EXPECT_GT(b.control_norm2, 0.0);
    }
}

TEST(Skeleton, ExplicitStabilityGate) {
    EXPECT_THROW(solve_skeleton(identity_model(), heat_mode(64), ControlField::none(), params_for(1e-3, 0.01, Scheme::Explicit)),
                 Error);
}

TEST(Skeleton, RejectsNegativeInitialData) {
    auto rho0 = heat_mode(16);
    rho0.values[3] = -0.1;
    EXPECT_THROW(solve_skeleton(identity_model(), rho0, ControlField::none(), params_for(1e-4, 0.01)), Error);
}

TEST(Skeleton, PositivityForDegenerateDiffusion) {
    const auto model = NonlinearityModel::porous(2.0, uniform_rho_grid(4.0, 401), 1.0);
    const auto rho0 = DensityField::sample(Grid(1, 128), [](const Point& x) { return std::max(0.0, 1.0 - 16 * (x[0] - 0.5) * (x[0] - 0.5)); });
    const auto b = solve_skeleton(model, rho0, ControlField::none(), params_for(1e-4, 0.02));
    for (const auto& f : b.snapshots) EXPECT_GE(f.min(), 0.0);
}

TEST(Skeleton, ComparisonPrinciple) {
    const auto H = bump_potential(2.0);
    const auto model = NonlinearityModel::saturating(uniform_rho_grid(6.0, 601), 1.0);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const double a = uniform01(rng), s = 0.2 + 0.5 * uniform01(rng);
        auto lo = DensityField::sample(Grid(1, 64), [&](const Point& x) { return 1.0 + 0.4 * std::sin(2 * kPi * (x[0] + a)); });
        auto hi = lo;
        for (std::size_t i = 0; i < hi.values.size(); ++i) hi.values[i] += s * bump((hi.grid.position(i)[0] - 0.3) / 0.2);
        const auto bl = solve_fokker_planck(model, lo, H, params_for(1e-4, 0.02));
        const auto bh = solve_fokker_planck(model, hi, H, params_for(1e-4, 0.02));
        for (std::size_t k = 0; k < bl.snapshots.size(); ++k)
            for (std::size_t i = 0; i < lo.values.size(); ++i)
                EXPECT_LE(bl.snapshots[k].values[i], bh.snapshots[k].values[i] + 1e-9);  // Picard tolerance
    }
}

TEST(FokkerPlanck, ZeroGradientMatchesUncontrolled) {
    const auto model = identity_model();
    const auto free = solve_skeleton(model, heat_mode(64), ControlField::none(), params_for(1e-4, 0.01));
    const auto zero = solve_fokker_planck(model, heat_mode(64), SpaceTimeFunction::zero(), params_for(1e-4, 0.01));
    const auto flat = solve_fokker_planck(
        model, heat_mode(64),
        SpaceTimeFunction::stationary([](const Point&) { return 3.0; }, [](const Point&) { return Point{0, 0, 0}; },
                                      [](const Point&) { return 0.0; }),
        params_for(1e-4, 0.01));
    EXPECT_EQ(free.final_field().values, zero.final_field().values);
    EXPECT_EQ(free.final_field().values, flat.final_field().values);
    EXPECT_EQ(zero.control_norm2, 0.0);
}

TEST(FokkerPlanck, ControlNormIsQuadratureOfPhiGradH) {
    // With Phi = id, |g|^2 = rho_face |H'|^2; at t = 0 compare with direct quadrature.
    const auto H = bump_potential(1.5);
    const auto b = solve_fokker_planck(identity_model(), heat_mode(256), H, params_for(1e-4, 0.001));
    const double ref = simpson(
        [&](double x) {
            const double hp = H.grad(0, {x, 0, 0})[0];
            return (1.0 + 0.3 * std::sin(2 * kPi * x)) * hp * hp;
        },
        0.0, 1.0, 4000);
    EXPECT_NEAR(b.series.control_norm2.front(), ref, 1e-4 * ref);
}

TEST(FokkerPlanck, SelfConvergenceWithBumpPotential) {
    const auto H = bump_potential(1.0);
    SolverParams p = params_for(4e-4, 0.01);
    const auto rows = uniqueness_probe(identity_model(), [](const Point& x) { return 1.0 + 0.3 * std::sin(2 * kPi * x[0]); },
                                       1, ControlField::potential(H), p, 32, 4, 4.0);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_GT(rows[1].order, 1.7);
    EXPECT_GT(rows[2].order, 1.7);
}

TEST(UniquenessProbe, IdenticalRunsAgree) {
    const auto a = solve_skeleton(identity_model(), heat_mode(64), ControlField::none(), params_for(1e-4, 0.01));
    const auto b = solve_skeleton(identity_model(), heat_mode(64), ControlField::none(), params_for(1e-4, 0.01));
    EXPECT_EQ(l1_distance(a.grid, a.final_field().values, b.final_field().values), 0.0);
}

TEST(UniquenessProbe, KinkedNonlinearityHasOrderAtLeastOne) {
    const auto model = build_nonlinearity(JumpRate::odd_perturbed(), uniform_rho_grid(4.0, 161), 1.0);
    const auto rows = uniqueness_probe(model, [](const Point& x) { return 1.0 + 0.5 * std::sin(2 * kPi * x[0]); }, 1,
                                       ControlField::none(), params_for(4e-4, 0.01), 32, 4, 4.0);
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_GE(rows[k].order, 1.0) << k;
}

TEST(WeakResidual, TrivialCases) {
    const auto b = solve_skeleton(identity_model(), DensityField::constant(Grid(1, 32), 2.0), ControlField::none(),
                                  params_for(1e-3, 0.01));
    const auto psi = SpaceTimeFunction::stationary([](const Point& x) { return std::sin(2 * kPi * x[0]); },
                                                   [](const Point& x) { return Point{2 * kPi * std::cos(2 * kPi * x[0]), 0, 0}; },
                                                   [](const Point& x) { return -4 * kPi * kPi * std::sin(2 * kPi * x[0]); });
    EXPECT_NEAR(weak_residual(b, b.control, psi, 0.01), 0.0, 1e-13);
    EXPECT_EQ(weak_residual(b, b.control, SpaceTimeFunction::zero(), 0.01), 0.0);
}

TEST(WeakResidual, DecreasesUnderRefinement) {
    const auto H = bump_potential(1.0);
    const auto psi = SpaceTimeFunction::stationary([](const Point& x) { return std::cos(2 * kPi * x[0]); },
                                                   [](const Point& x) { return Point{-2 * kPi * std::sin(2 * kPi * x[0]), 0, 0}; },
                                                   [](const Point& x) { return -4 * kPi * kPi * std::cos(2 * kPi * x[0]); });
    std::vector<double> r;
    for (int k = 0; k < 3; ++k) {
        const int cells = 32 << k;
        const auto b = solve_fokker_planck(identity_model(), heat_mode(cells), H, params_for(1e-3 / (1 << k), 0.02));
        r.push_back(std::abs(weak_residual(b, b.control, psi, 0.02)));
    }
    EXPECT_GT(std::log2(r[0] / r[1]), 0.9);
    EXPECT_GT(std::log2(r[1] / r[2]), 0.9);
}

TEST(EntropyDissipation, Examples) {
    const auto model = identity_model();
    EXPECT_EQ(entropy_dissipation(DensityField::constant(Grid(2, 8), 1.3), model), 0.0);
    const double ref = simpson(
        [](double x) {
            const double c = kPi * std::cos(2 * kPi * x);
            return c * c / (4.0 * (1.0 + 0.5 * std::sin(2 * kPi * x)));
        },
        0.0, 1.0, 20000);
    EXPECT_NEAR(entropy_dissipation(heat_mode(512, 0.5), model), ref, 1e-4 * ref);
    // A checkerboard is not in the kernel.
    auto cb = DensityField::constant(Grid(1, 8), 1.0);
    for (std::size_t i = 0; i < 8; i += 2) cb.values[i] = 2.0;
    EXPECT_GT(entropy_dissipation(cb, model), 0.0);
}

TEST(EnergyReport, EquilibriumHasZeroLhs) {
    const auto b = solve_skeleton(identity_model(1.5), DensityField::constant(Grid(1, 32), 1.5), ControlField::none(),
                                  params_for(1e-3, 0.01));
    const auto rep = energy_report(b);
    EXPECT_NEAR(rep.energy.lhs, 0.0, 1e-20);
    EXPECT_NEAR(rep.relative_entropy.lhs, 0.0, 1e-20);
    EXPECT_NEAR(rep.time_regularity.lhs, 0.0, 1e-10);
}

TEST(EnergyReport, UncontrolledEntropyBalance) {
    // d/dt int Psi(rho) = -4 int |grad Phi^{1/2}(rho)|^2 without control.
    const auto model = NonlinearityModel::saturating(uniform_rho_grid(6.0, 601), 1.0);
    const auto b = solve_skeleton(model, heat_mode(256, 0.5), ControlField::none(), params_for(2e-5, 0.02));
    const double lost = b.series.entropy.front() - b.series.entropy.back();
    EXPECT_NEAR(lost, 4.0 * b.accumulated_dissipation, 1e-3 * lost);
}

TEST(EnergyReport, HeatModeConstantsAcrossRefinement) {
    for (double dt : {1e-3, 5e-4, 2.5e-4}) {
        const auto b = solve_skeleton(identity_model(), heat_mode(64), ControlField::none(), params_for(dt, 0.05));
        EXPECT_LE(energy_report(b).relative_entropy.constant, 4.0);
    }
}

TEST(EnergyReport, PropertyRandomSuiteBounded) {
    std::mt19937_64 rng(21);
    const auto model = NonlinearityModel::saturating(uniform_rho_grid(6.0, 601), 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = 0.6 * uniform01(rng), ph = uniform01(rng), s = 2.0 * uniform01(rng) - 1.0;
        const int mode = 1 + static_cast<int>(rng() % 3);
        const auto rho0 = DensityField::sample(Grid(1, 64), [=](const Point& x) { return 1.0 + a * std::sin(2 * kPi * (mode * x[0] + ph)); });
        auto p = params_for(5e-4, 0.05);
        p.viscosity = 0.01;
        p.sigma_cap = 0.8;
        const auto g = ControlField::vector([=](double t, const Point& x) { return Point{s * std::cos(2 * kPi * x[0]) * (1 - t), 0, 0}; });
        const auto rep = energy_report(solve_skeleton(model, rho0, g, p));
        EXPECT_LE(rep.relative_entropy.constant, 8.0);
        EXPECT_LE(rep.energy.constant, 8.0);
        EXPECT_LE(rep.time_regularity.constant, 8.0);
    }
}

TEST(Kinetic, ConstantSolutionHasNoDefect) {
    const auto b = solve_skeleton(identity_model(), DensityField::constant(Grid(1, 16), 1.0), ControlField::none(),
                                  params_for(1e-3, 0.01));
    const std::vector<double> edges{0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
    const std::vector<double> M{0.0, 3.0};
    const auto k = kinetic_diagnostics(b, edges, M);
    EXPECT_EQ(k.defect_total, 0.0);
    const auto chi = kinetic_function(b.final_field(), 0.5);
    for (auto c : chi) EXPECT_EQ(c, 1);
    for (auto c : kinetic_function(b.final_field(), 1.5)) EXPECT_EQ(c, 0);
}

TEST(Kinetic, DefectMassMatchesThetaEnergy) {
    const auto model = NonlinearityModel::saturating(uniform_rho_grid(6.0, 601), 1.0);
    const auto b = solve_skeleton(model, heat_mode(128, 0.5), ControlField::none(), params_for(1e-4, 0.02));
    std::vector<double> edges;
    for (int i = 0; i <= 60; ++i) edges.push_back(0.05 * i);
    const std::vector<double> M{0.0, 1.0, 1.6, 2.0};
    const auto k = kinetic_diagnostics(b, edges, M);
    EXPECT_NEAR(k.defect_total, b.accumulated_theta_energy, 0.01 * b.accumulated_theta_energy);
    EXPECT_GT(k.tail_masses[1], 0.0);
    EXPECT_EQ(k.tail_masses[2], 0.0);
    EXPECT_EQ(k.tail_masses[3], 0.0);
    const std::vector<double> short_edges{0.0, 1.0};
    EXPECT_THROW(kinetic_diagnostics(b, short_edges, M), Error);
}

TEST(FieldIo, BinaryRoundTrip) {
    const auto b = solve_skeleton(identity_model(), heat_mode(16), ControlField::none(), params_for(1e-3, 0.003));
    const auto path = (std::filesystem::temp_directory_path() / "zrplab_fields.bin").string();
    write_fields_binary(b.snapshots, path);
    EXPECT_EQ(std::filesystem::file_size(path), 12u + b.snapshots.size() * 16u * 8u);
    const auto back = read_fields_binary(path);
    ASSERT_EQ(back.size(), b.snapshots.size());
    for (std::size_t k = 0; k < back.size(); ++k) EXPECT_EQ(back[k].values, b.snapshots[k].values);
    std::remove(path.c_str());
}
