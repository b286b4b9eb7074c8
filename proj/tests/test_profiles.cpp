// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/error.hpp"
#include "zrplab/local_equilibrium.hpp"
#include "zrplab/profiles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace zrp;

namespace {

constexpr double kPi = std::numbers::pi;

// Composite Simpson rule, independent of the library quadrature.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

// ||grad u||^2 for a radial d = 2 profile from finite differences of u in log r.
double energy_by_differences(const OscillatingProfile& o) {
    auto du2 = [&](double s) {
        const double e = 1e-4;
        const double g = (o.value_at_log_radius(s + e) - o.value_at_log_radius(s - e)) / (2 * e);
        return g * g;
    };
    const double la = o.psi.log_a, lb = o.psi.log_b, l2 = std::log(2.0);
    double total = simpson(du2, la, la + l2, 4000) + simpson(du2, la + l2, lb, 400000) +
                   simpson(du2, lb, lb + l2, 4000);
    return 2.0 * kPi * total;
}

// E|X - Y| for independent Poisson(mu) variables.
double poisson_abs_difference(double mu) {
    const int K = static_cast<int>(mu + 40.0 * std::sqrt(mu) + 40.0);
    std::vector<double> p(static_cast<std::size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) p[static_cast<std::size_t>(k)] = std::exp(k * std::log(mu) - mu - std::lgamma(k + 1.0));
    double s = 0.0;
    for (int i = 0; i <= K; ++i)
        for (int j = 0; j <= K; ++j) s += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)] * std::abs(i - j);
    return s;
}

} // namespace

TEST(Counterexample, OscillationIsExactlyGamma) {
    for (int n = 1; n <= 4; ++n) {
        const auto ce = counterexample_profile(2, 1.3, {n});
        EXPECT_DOUBLE_EQ(ce.diagnostics.sup_u, 1.5 * 1.3);
        EXPECT_DOUBLE_EQ(ce.diagnostics.inf_u, 0.5 * 1.3);
        EXPECT_DOUBLE_EQ(ce.diagnostics.sup_u - ce.diagnostics.inf_u, 1.3);
        EXPECT_DOUBLE_EQ(ce.diagnostics.log_psi_inf, -std::pow(n * kPi, 4));
    }
}

TEST(Counterexample, GradientEnergyDecreasesWithN) {
    const auto a = counterexample_profile(2, 1.0, {1}), b = counterexample_profile(2, 1.0, {2});
    EXPECT_LT(b.diagnostics.grad_norm2, a.diagnostics.grad_norm2);
}

TEST(Counterexample, EnergyMatchesFiniteDifferenceQuadrature) {
    for (int n : {1, 2}) {
        const auto ce = counterexample_profile(2, 1.0, {n});
        const double ref = energy_by_differences(*ce.profile.oscillating_profile());
        EXPECT_NEAR(ce.diagnostics.grad_norm2, ref, 1e-5 * ref) << "n = " << n;
    }
}

TEST(Counterexample, ScaledEnergyStaysBounded) {
    double lo = 1e300, hi = 0.0;
    for (int n = 1; n <= 4; ++n) {
        const double v = counterexample_profile(2, 1.0, {n}).diagnostics.scaled_grad_norm2;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_LT(hi / lo, 3.0);
}

TEST(Counterexample, WindowAndExtremes) {
    const auto ce = counterexample_profile(2, 1.0, {1});
    const auto& o = *ce.profile.oscillating_profile();
    EXPECT_NEAR(std::pow(-o.log_delta_prime, 0.25), std::pow(-o.log_delta, 0.25) + 2 * kPi, 1e-12);
    // psi(r) = r on the window
    for (double t : {0.0, 0.3, 0.7, 1.0}) {
        const double s = o.log_delta + t * (o.log_delta_prime - o.log_delta);
        EXPECT_DOUBLE_EQ(o.psi.log_psi(s), s);
    }
    EXPECT_LE(o.log_r_max, o.log_delta);
    EXPECT_GE(o.log_r_max, o.log_delta_prime);
    EXPECT_LE(o.log_r_min, o.log_delta);
    EXPECT_GE(o.log_r_min, o.log_delta_prime);
    EXPECT_DOUBLE_EQ(o.value_at_log_radius(o.log_r_max), 1.5);
    EXPECT_DOUBLE_EQ(o.value_at_log_radius(o.log_r_min), 0.5);
    // u = gamma beyond the outer ramp and at the centre the profile is flat
    EXPECT_EQ(o.value_at_log_radius(std::log(0.3)), 1.0);
    EXPECT_EQ(o.radial_slope(o.psi.log_a - 1.0), 0.0);
}

TEST(Counterexample, ProfileStaysInRange) {
    const auto ce = counterexample_profile(2, 2.0, {1});
    const auto& o = *ce.profile.oscillating_profile();
    for (int i = 0; i <= 20000; ++i) {
        const double s = o.psi.log_a - 1.0 + (std::log(0.5) - o.psi.log_a + 1.0) * i / 20000.0;
        const double u = o.value_at_log_radius(s);
        EXPECT_GE(u, 1.0 - 1e-12);
        EXPECT_LE(u, 3.0 + 1e-12);
    }
}

TEST(Counterexample, PsiConstraints) {
    const auto ce = counterexample_profile(2, 1.0, {1});
    const auto& psi = ce.profile.oscillating_profile()->psi;
    for (double base : {psi.log_a, psi.log_b})
        for (int i = -10; i <= 110; ++i) {
            const double s = base + std::log(2.0) * i / 100.0;
            const double dp = psi.derivative(s);
            EXPECT_GE(dp, 0.0);
            EXPECT_LE(dp, 1.0);
            if (dp > 0.0) EXPECT_GE(psi.log_psi(s), s - std::log(2.0) - 1e-12);
            // psi' from differences of psi
            const double e = 1e-6;
            const double fd = (std::exp(psi.log_psi(s + e) - s) - std::exp(psi.log_psi(s - e) - s)) / (2 * e);
            EXPECT_NEAR(fd, dp, 1e-6);
        }
}

TEST(Counterexample, ThreeDimensionalEnergyConverges) {
    const auto ce = counterexample_profile(3, 1.0, {1, 0.45, -8.0});
    const auto& o = *ce.profile.oscillating_profile();
    std::vector<double> v;
    for (int panels : {25, 50, 100, 200, 400}) v.push_back(radial_energy(o, [](double) { return 1.0; }, panels));
    for (double x : v) EXPECT_TRUE(std::isfinite(x));
    for (std::size_t i = 2; i < v.size(); ++i)
        EXPECT_LE(std::abs(v[i] - v[i - 1]), std::abs(v[i - 1] - v[i - 2]) + 1e-14 * v[i]);
    EXPECT_NEAR(v.back(), ce.diagnostics.grad_norm2, 1e-10 * v.back());
    EXPECT_DOUBLE_EQ(ce.diagnostics.sup_u - ce.diagnostics.inf_u, 1.0);
}

TEST(Counterexample, ValidationNamesConstraint) {
    EXPECT_THROW(counterexample_profile(1, 1.0, {1}), Error);
    EXPECT_THROW(counterexample_profile(2, 1.0, {0}), Error);
    try {
        counterexample_profile(3, 1.0, {1, 0.6, -8.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
    }
    EXPECT_THROW(counterexample_profile(3, 1.0, {1, 0.25, -1.0}), Error);
}

TEST(Counterexample, DirichletWithIdentityModel) {
    // Phi = id: |grad sqrt(u)|^2 = |grad u|^2 / (4u), between the bounds from u in [g/2, 3g/2].
    const auto model = NonlinearityModel::identity(uniform_rho_grid(4.0, 401), 1.0);
    const auto ce = counterexample_profile(2, 1.0, {1}, &model);
    EXPECT_GT(ce.diagnostics.dirichlet, ce.diagnostics.grad_norm2 / 6.0);
    EXPECT_LT(ce.diagnostics.dirichlet, ce.diagnostics.grad_norm2 / 2.0);
}

TEST(LocalEquilibrium, ZeroProfileGivesEmptyConfiguration) {
    const auto c = local_equilibrium_sample(ProfileSpec::constant(0.0, 2), 16, JumpRate::linear(), 1);
    EXPECT_EQ(c.total(), 0);
}

TEST(LocalEquilibrium, ConstantProfileIsIid) {
    const auto c = local_equilibrium_sample(ProfileSpec::constant(2.0, 2), 128, JumpRate::indicator(), 3);
    const double n = static_cast<double>(c.lattice().sites());
    const auto law = law_of_density(JumpRate::indicator(), 2.0);
    EXPECT_NEAR(c.total() / n, 2.0, 4 * std::sqrt(law.variance / n));
}

TEST(LocalEquilibrium, SitewiseMeansFollowProfile) {
    const auto prof = ProfileSpec::sine(1.5, 0.5, 1, 1);
    const int N = 32, E = 400;
    std::vector<double> sums(N, 0.0);
    for (int e = 0; e < E; ++e) {
        const auto c = local_equilibrium_sample(prof, N, JumpRate::linear(), 1000 + static_cast<std::uint64_t>(e));
        for (int i = 0; i < N; ++i) sums[static_cast<std::size_t>(i)] += c[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < N; ++i) {
        const double u = prof.value({static_cast<double>(i) / N, 0, 0});
        EXPECT_NEAR(sums[static_cast<std::size_t>(i)] / E, u, 4.5 * std::sqrt(u / E)) << i;
    }
}

TEST(LocalEquilibrium, PairingMatchesIntegral) {
    const auto prof = ProfileSpec::bump(1.0, 1.0, 0.3, 2);
    auto H = [](const Point& x) { return bump((x[0] - 0.5) / 0.4) * bump((x[1] - 0.5) / 0.4); };
    const int N = 128;
    const auto c = local_equilibrium_sample(prof, N, JumpRate::linear(), 8);
    // Poisson marginals: Var = N^{-2d} sum H^2 u.
    const Grid g = c.lattice().grid();
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double h = H(g.position(i)), u = prof.value(g.position(i));
        mean += h * u;
        var += h * h * u;
    }
    mean /= g.size();
    var /= static_cast<double>(g.size()) * static_cast<double>(g.size());
    EXPECT_NEAR(pair_with_test(c, H), mean, 4 * std::sqrt(var));
}

TEST(DirichletLocalEq, ConstantProfileHasZeroEdges) {
    const auto rep = dirichlet_local_eq(ProfileSpec::constant(1.0, 2), 16, NonlinearityModel::identity(uniform_rho_grid(4.0, 401), 1.0));
    for (double v : rep.per_edge) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(rep.total, 0.0);
}

TEST(DirichletLocalEq, RampEdgesMatchGradientOfRoot) {
    const double a = 1.0, b = 0.8;
    const auto prof = ProfileSpec::custom("ramp", 1, a, [=](const Point& x) { return a + b * x[0]; },
                                          [=](const Point&) { return Point{b, 0, 0}; });
    const int N = 256;
    const auto rep = dirichlet_local_eq(prof, N, NonlinearityModel::identity(uniform_rho_grid(4.0, 401), 1.0), 16);
    for (int i = N / 4; i < 3 * N / 4; ++i) {
        const double u = a + b * (i + 0.5) / N;
        EXPECT_NEAR(rep.per_edge[static_cast<std::size_t>(i)], b * b / (4 * u), 1e-5 * b * b / (4 * u));
    }
}

TEST(DirichletLocalEq, TotalConvergesToContinuum) {
    const auto prof = ProfileSpec::sine(1.0, 0.5, 1, 1);
    const auto model = NonlinearityModel::saturating(uniform_rho_grid(4.0, 401), 1.0);
    double prev = 1e300;
    for (int N : {64, 128, 256, 512}) {
        const auto rep = dirichlet_local_eq(prof, N, model);
        EXPECT_LT(rep.relative_gap, prev);
        prev = rep.relative_gap;
    }
    EXPECT_LE(prev, 0.05);
}

TEST(DirichletLocalEq, ContinuumMatchesClosedForm) {
    // u = 1 + sin(2 pi x)/2, Phi = id: int (u')^2 / (4u) = pi^2 (2 - sqrt 3) / (... ) computed by Simpson.
    const auto prof = ProfileSpec::sine(1.0, 0.5, 1, 1);
    const double ref = simpson(
        [](double x) {
            const double u = 1 + 0.5 * std::sin(2 * kPi * x), du = kPi * std::cos(2 * kPi * x);
            return du * du / (4 * u);
        },
        0.0, 1.0, 20000);
    EXPECT_NEAR(continuum_dirichlet(prof, NonlinearityModel::identity(uniform_rho_grid(4.0, 401), 1.0)), ref, 1e-10 * ref);
}

TEST(TwoBlock, ConstantProfileMatchesPoissonDifference) {
    const auto prof = ProfileSpec::constant(1.0, 1);
    const MomentWeight w;
    double prev = 1e300;
    for (int ell : {1, 4, 16}) {
        std::vector<Configuration> ens;
        for (int e = 0; e < 400; ++e)
            ens.push_back(local_equilibrium_sample(prof, 128, JumpRate::linear(), 50 + static_cast<std::uint64_t>(e)));
        const auto est = two_block_observable(ens, ell, 20, 90, w, 0.0);
        const double m = 2.0 * ell + 1.0;
        EXPECT_NEAR(est.mean, poisson_abs_difference(m) / m, 4 * est.stderr_) << ell;
        EXPECT_LT(est.mean, prev);
        prev = est.mean;
    }
}

TEST(TwoBlock, LargeBetaIsNegative) {
    const auto prof = ProfileSpec::constant(1.0, 1);
    std::vector<Configuration> ens;
    for (int e = 0; e < 100; ++e) ens.push_back(local_equilibrium_sample(prof, 64, JumpRate::linear(), static_cast<std::uint64_t>(e)));
    const auto est = two_block_observable(ens, 4, 10, 40, MomentWeight{}, 10.0);
    EXPECT_LT(est.mean + 3 * est.stderr_, 0.0);
}

TEST(TwoBlock, NeedsHundredSamples) {
    std::vector<BoxPair> few(10);
    EXPECT_THROW(two_block_observable(few, MomentWeight{}, 0.0), Error);
}

TEST(TwoBlock, TuningSatisfiesConstraints) {
    const auto t = tune_two_block(1.0, 2, JumpRate::linear(), MomentWeight{});
    EXPECT_GT((1.0 - 4 * t.theta) * (1 - 2 * t.theta), 0.75);
    EXPECT_LE((1.0 - 4 * (t.theta + 1e-4)) * (1 - 2 * (t.theta + 1e-4)), 0.75);
    EXPECT_DOUBLE_EQ(t.variance, 1.5);
    EXPECT_GE(std::pow(2 * t.ell + 1.0, 2) * std::pow(t.theta, 3), t.variance);
    EXPECT_LT(std::pow(2 * t.ell - 1.0, 2) * std::pow(t.theta, 3), t.variance);
    EXPECT_NEAR(t.beta * t.c_w, 1.0 / 8.0, 1e-15);
}

TEST(TwoBlock, CounterexampleExceedsHalfGamma) {
    const double gamma = 1.0;
    const auto ce = counterexample_profile(2, gamma, {1});
    const auto& o = *ce.profile.oscillating_profile();
    const auto t = tune_two_block(gamma, 2, JumpRate::linear(), MomentWeight{});
    const double log_N = -std::min(o.log_r_max, o.log_r_min) + 40.0;
    const auto pairs = sample_box_pairs(o, log_N, o.log_r_max, o.log_r_min, t.ell, JumpRate::linear(), 200, 5);
    const auto est = two_block_observable(pairs, MomentWeight{}, t.beta);
    EXPECT_GT(est.mean - 2 * est.stderr_, gamma / 2);
    EXPECT_THROW(sample_box_pairs(o, -o.log_r_min, o.log_r_max, o.log_r_min, t.ell, JumpRate::linear(), 100, 5),
                 Error);
}
