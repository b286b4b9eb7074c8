// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/error.hpp"
#include "zrplab/lattice.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

using namespace zrp;

namespace {

Configuration poisson_config(Lattice lat, double rho, std::uint64_t seed) {
    return Configuration(lat, sample_equilibrium(equilibrium_law(JumpRate::linear(), rho), lat.sites(), seed));
}

Configuration random_config(Lattice lat, std::mt19937_64& rng) {
    std::vector<std::int32_t> occ(lat.sites());
    for (auto& v : occ) v = static_cast<std::int32_t>(rng() % 5);
    return Configuration(lat, occ);
}

} // namespace

TEST(Lattice, Validation) {
    EXPECT_THROW(Lattice(1, 3), Error);
    EXPECT_THROW(Lattice(4, 8), Error);
    EXPECT_EQ(Lattice(3, 5).sites(), 125u);
}

TEST(RateTree, PropertyFindMatchesPrefixSums) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng() % 300;
        RateTree t(n);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = (rng() % 4 == 0) ? 0.0 : uniform01(rng);
            t.set(i, w[i]);
        }
        double total = 0.0;
        for (double x : w) total += x;
        EXPECT_NEAR(t.total(), total, 1e-12 * (1 + total));
        for (int q = 0; q < 100; ++q) {
            const double u = uniform01(rng) * t.total();
            const std::size_t i = t.find(u);
            double prefix = 0.0;
            for (std::size_t j = 0; j < i; ++j) prefix += w[j];
            EXPECT_LE(prefix, u + 1e-12);
            EXPECT_GT(prefix + w[i], u - 1e-12);
        }
    }
}

TEST(Simulator, RateTreeIntegrityAfterMillionEvents) {
    ZeroRangeSimulator sim(JumpRate::linear(), poisson_config(Lattice(1, 64), 2.0, 3), 4);
    sim.advance_events(1'000'000);
    EXPECT_EQ(sim.events(), 1'000'000u);
    EXPECT_LE(std::abs(sim.tree_total() - sim.recomputed_total()), 1e-12 * sim.recomputed_total());
}

TEST(Simulate, SingleParticleConservation) {
    const Lattice lat(1, 16);
    std::vector<std::int32_t> occ(16, 0);
    occ[0] = 1;
    const std::vector<double> times{0.1, 0.2, 0.3, 0.4, 0.5};
    const auto tr = simulate(JumpRate::linear(), Configuration(lat, occ), 0.5, times, 9);
    for (const auto& c : tr.snapshots) EXPECT_EQ(c.total(), 1);
}

TEST(Simulate, SingleParticleJumpsAtRateTwo) {
    // Rate-2 walk: event count over microscopic time T is Poisson(2T).
    const Lattice lat(1, 8);
    std::vector<std::int32_t> occ(8, 0);
    occ[3] = 1;
    const double t_macro = 1000.0 / 64.0;  // T = 1000
    const std::vector<double> none;
    const auto tr = simulate(JumpRate::linear(), Configuration(lat, occ), t_macro, none, 12);
    EXPECT_NEAR(static_cast<double>(tr.event_count), 2000.0, 5 * std::sqrt(2000.0));
}

TEST(Simulate, RateMultiplierRescalesTime) {
    const Lattice lat(1, 8);
    std::vector<std::int32_t> occ(8, 0);
    occ[3] = 1;
    SimulationOptions opt;
    opt.rate_multiplier = 0.5;
    const std::vector<double> none;
    const auto tr = simulate(JumpRate::linear(), Configuration(lat, occ), 1000.0 / 64.0, none, 12, opt);
    EXPECT_NEAR(static_cast<double>(tr.event_count), 1000.0, 5 * std::sqrt(1000.0));
}

TEST(Simulate, EmptyConfigurationHasNoEvents) {
    const Lattice lat(2, 8);
    const std::vector<double> times{0.5, 1.0};
    const auto tr = simulate(JumpRate::linear(), Configuration::empty(lat), 1.0, times, 1);
    EXPECT_EQ(tr.event_count, 0u);
    for (const auto& c : tr.snapshots) EXPECT_EQ(c, Configuration::empty(lat));
}

TEST(Simulate, DeterministicPerSeed) {
    const auto init = poisson_config(Lattice(1, 32), 1.0, 1);
    const std::vector<double> times{0.01, 0.02};
    const auto a = simulate(JumpRate::linear(), init, 0.02, times, 77);
    const auto b = simulate(JumpRate::linear(), init, 0.02, times, 77);
    EXPECT_EQ(a.snapshots, b.snapshots);
    EXPECT_EQ(a.event_count, b.event_count);
}

TEST(Simulate, RejectsBadSnapshotGrid) {
    const auto init = poisson_config(Lattice(1, 8), 1.0, 1);
    const std::vector<double> times{0.2, 0.1};
    EXPECT_THROW(simulate(JumpRate::linear(), init, 1.0, times, 1), Error);
}

TEST(Simulate, StationarityOfProductMeasure) {
    // Starting from nu_2, the time average of eta(0) and lambda(eta(0)) stays at 2.
    for (const JumpRate& rate : {JumpRate::linear(), JumpRate::odd_perturbed()}) {
        const auto law = law_of_density(rate, 2.0);
        std::vector<double> occ_means, rate_means;
        for (std::uint64_t seed = 0; seed < 12; ++seed) {
            const Lattice lat(1, 64);
            Configuration init(lat, sample_equilibrium(law, lat.sites(), 100 + seed));
            std::vector<double> times;
            for (int s = 1; s <= 20; ++s) times.push_back(0.005 * s);
            const auto tr = simulate(rate, init, 0.1, times, seed);
            double so = 0.0, sr = 0.0, n = 0.0;
            for (const auto& c : tr.snapshots)
                for (auto v : c.occupancies()) {
                    so += v;
                    sr += rate(v);
                    n += 1.0;
                }
            occ_means.push_back(so / n);
            rate_means.push_back(sr / n);
        }
        const auto mo = mean_stderr(occ_means), mr = mean_stderr(rate_means);
        EXPECT_NEAR(mo.mean, 2.0, 3 * mo.stderr_) << rate.name();
        EXPECT_NEAR(mr.mean, law.fugacity, 3 * mr.stderr_) << rate.name();
    }
}

TEST(Simulate, ReversibleMarginalIsBinomial) {
    // Independent walkers (lambda = k) with n particles on 4 sites: site 0 holds Binomial(n, 1/4).
    const int n = 6;
    const Lattice lat(1, 4);
    std::vector<std::int32_t> occ{n, 0, 0, 0};
    ZeroRangeSimulator sim(JumpRate::linear(), Configuration(lat, occ), 2024);
    std::vector<double> counts(n + 1, 0.0);
    const int samples = 20000;
    for (int s = 1; s <= samples; ++s) {
        sim.advance_to(2.0 * s);
        counts[static_cast<std::size_t>(sim.configuration()[0])] += 1.0;
    }
    double chi2 = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double p = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) *
                         std::pow(0.25, k) * std::pow(0.75, n - k);
        const double e = p * samples;
        chi2 += (counts[static_cast<std::size_t>(k)] - e) * (counts[static_cast<std::size_t>(k)] - e) / e;
    }
    EXPECT_LT(chi2, 16.81);  // chi^2_6 upper 1% point
}

TEST(CoarseGrain, ConstantConfiguration) {
    const Lattice lat(2, 10);
    const auto f = coarse_grain(Configuration(lat, std::vector<std::int32_t>(100, 3)), 0.2);
    for (double v : f.values) EXPECT_EQ(v, 3.0);
}

TEST(CoarseGrain, SingleParticle) {
    const Lattice lat(1, 10);
    std::vector<std::int32_t> occ(10, 0);
    occ[0] = 1;
    const auto f = coarse_grain(Configuration(lat, occ), 0.1);
    EXPECT_DOUBLE_EQ(f.values[0], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(f.values[1], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(f.values[9], 1.0 / 3.0);
    EXPECT_EQ(f.values[2], 0.0);
    EXPECT_EQ(f.values[5], 0.0);
}

TEST(CoarseGrain, PropertyMassPreserved) {
    std::mt19937_64 rng(4);
    for (int d = 1; d <= 3; ++d)
        for (int trial = 0; trial < 10; ++trial) {
            const Lattice lat(d, 6 + static_cast<int>(rng() % 10));
            const auto c = random_config(lat, rng);
            const auto f = coarse_grain(c, 1.0 / lat.L + 0.1 * uniform01(rng));
            EXPECT_NEAR(f.integral(), static_cast<double>(c.total()) / static_cast<double>(lat.sites()),
                        1e-13 * static_cast<double>(c.total() + 1));
        }
}

TEST(CoarseGrain, PropertyMatchesDirectBoxAverage) {
    std::mt19937_64 rng(5);
    const Lattice lat(2, 9);
    const auto c = random_config(lat, rng);
    const auto f = coarse_grain(c, 2.0 / 9.0);
    const Grid g = lat.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.coords(i);
        double s = 0.0;
        for (int a = -2; a <= 2; ++a)
            for (int b = -2; b <= 2; ++b) s += c[g.index({x[0] + a, x[1] + b, 0})];
        EXPECT_NEAR(f.values[i], s / 25.0, 1e-15);
    }
}

TEST(CoarseGrain, RadiusMustBePositive) {
    EXPECT_THROW(coarse_grain(Configuration::empty(Lattice(1, 8)), 0.05), Error);
}

TEST(PairWithTest, Examples) {
    std::mt19937_64 rng(6);
    const Lattice lat(2, 8);
    const auto c = random_config(lat, rng);
    EXPECT_NEAR(pair_with_test(c, [](const Point&) { return 1.0; }), c.total() / 64.0, 1e-14);
    EXPECT_EQ(pair_with_test(c, [](const Point&) { return 0.0; }), 0.0);
}

TEST(VFunctional, ZeroTestFunctionGivesZero) {
    const auto init = poisson_config(Lattice(1, 32), 1.0, 2);
    const std::vector<double> times{0.0, 0.01, 0.02};
    const auto tr = simulate(JumpRate::linear(), init, 0.02, times, 3);
    const auto v = v_functional(tr, [](double, const Point&) { return 0.0; }, CylinderObservable::occupancy(), 0.125);
    EXPECT_EQ(v.integral, 0.0);
    for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(VFunctional, ConstantObservableGivesZero) {
    const auto init = poisson_config(Lattice(1, 32), 1.0, 2);
    const std::vector<double> times{0.0, 0.01};
    const auto tr = simulate(JumpRate::linear(), init, 0.01, times, 3);
    CylinderObservable obs;
    obs.kind = CylinderObservable::Kind::Custom;
    obs.local = [](std::int32_t) { return 2.5; };
    obs.tilde = [](double) { return 2.5; };
    const auto v = v_functional(tr, [](double, const Point& x) { return std::sin(6.0 * x[0]); }, obs, 0.125);
    EXPECT_EQ(v.integral, 0.0);
}

TEST(VFunctional, TrapezoidOfSeries) {
    const auto init = poisson_config(Lattice(1, 32), 1.0, 2);
    const std::vector<double> times{0.0, 0.01, 0.03};
    const auto tr = simulate(JumpRate::linear(), init, 0.03, times, 3);
    const auto v = v_functional(tr, [](double, const Point& x) { return std::cos(6.283185307179586 * x[0]); },
                                CylinderObservable::rate(JumpRate::linear()), 0.125);
    const double expect = 0.005 * (std::abs(v.values[0]) + std::abs(v.values[1])) +
                          0.01 * (std::abs(v.values[1]) + std::abs(v.values[2]));
    EXPECT_NEAR(v.integral, expect, 1e-15);
    EXPECT_GT(v.integral, 0.0);
}

TEST(CylinderObservable, GrowthConstant) {
    EXPECT_DOUBLE_EQ(CylinderObservable::rate(JumpRate::linear()).growth_c, 1.0);
    // sup lambda(k)/(1+k) is attained at k = 2 for this table.
    EXPECT_DOUBLE_EQ(CylinderObservable::rate(JumpRate({0, 1, 1.6, 2.0, 2.3}, 0.3)).growth_c, 1.6 / 3.0);
}

TEST(Snapshots, BinaryRoundTrip) {
    const auto init = poisson_config(Lattice(2, 6), 1.5, 2);
    const std::vector<double> times{0.0, 0.05};
    const auto tr = simulate(JumpRate::linear(), init, 0.05, times, 3);
    const auto path = (std::filesystem::temp_directory_path() / "zrplab_snap_test.bin").string();
    write_snapshots_binary(tr, path);
    EXPECT_EQ(std::filesystem::file_size(path), 12u + 2u * 36u * 4u);
    const auto back = read_snapshots_binary(path);
    EXPECT_EQ(back.lattice, tr.lattice);
    EXPECT_EQ(back.snapshots, tr.snapshots);
    std::remove(path.c_str());
}
