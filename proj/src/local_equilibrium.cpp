// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/local_equilibrium.hpp"

#include "zrplab/error.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <random>

namespace zrp {

namespace {

/// Laws keyed by density so repeated profile values share one root-find.
class LawCache {
public:
    LawCache(const JumpRate& rate, double tol) : rate_(rate), tol_(tol) {}

    const EquilibriumSampler& sampler(double rho) {
        auto it = cache_.find(rho);
        if (it == cache_.end())
            it = cache_.emplace(rho, std::make_unique<EquilibriumSampler>(law_of_density(rate_, rho, tol_)))
                     .first;
        return *it->second;
    }

private:
    const JumpRate& rate_;
    double tol_;
    std::map<double, std::unique_ptr<EquilibriumSampler>> cache_;
};

} // namespace

Configuration local_equilibrium_sample(const ProfileSpec& profile, int N, const JumpRate& rate,
                                       std::uint64_t seed, double tol) {
    const Lattice lat(profile.dim(), N);
    const Grid g = lat.grid();
    LawCache laws(rate, tol);
    std::mt19937_64 rng(seed);
    std::vector<std::int32_t> occ(lat.sites());
    for (std::size_t i = 0; i < occ.size(); ++i) {
        const double u = profile.value(g.position(i));
        if (!(u >= 0.0)) throw Error(ErrorKind::Domain, "profile takes a negative value");
        occ[i] = laws.sampler(u)(rng);
    }
    return Configuration(lat, std::move(occ));
}

double continuum_dirichlet(const ProfileSpec& profile, const NonlinearityModel& model,
                           int quadrature_cells) {
    const int d = profile.dim();
    const GaussRule& rule = gauss_legendre(6);
    const int q = static_cast<int>(rule.nodes.size());
    const Grid cells(d, quadrature_cells);
    const double h = cells.h();
    int points = 1;
    for (int a = 0; a < d; ++a) points *= q;
    double total = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto cc = cells.coords(c);
        for (int k = 0; k < points; ++k) {
            Point x{0.0, 0.0, 0.0};
            double w = 1.0;
            int rem = k;
            for (int a = 0; a < d; ++a) {
                const int j = rem % q;
                rem /= q;
                x[static_cast<std::size_t>(a)] =
                    (cc[static_cast<std::size_t>(a)] + 0.5 + 0.5 * rule.nodes[static_cast<std::size_t>(j)]) * h;
                w *= 0.5 * h * rule.weights[static_cast<std::size_t>(j)];
            }
            const double u = profile.value(x);
            const Point gu = profile.gradient(x);
            double g2 = 0.0;
            for (int a = 0; a < d; ++a) g2 += gu[static_cast<std::size_t>(a)] * gu[static_cast<std::size_t>(a)];
            if (g2 == 0.0) continue;
            const double p = model.phi(u), dp = model.dphi(u);
            total += w * dp * dp / (4.0 * p) * g2;
        }
    }
    return total;
}

DirichletReport dirichlet_local_eq(const ProfileSpec& profile, int N, const NonlinearityModel& model,
                                   int quadrature_cells) {
    const Lattice lat(profile.dim(), N);
    const Grid g = lat.grid();
    DirichletReport rep;
    rep.N = N;
    rep.d = lat.d;
    std::vector<double> root(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) root[i] = model.sqrt_phi(profile.value(g.position(i)));
    rep.per_edge.resize(g.size() * static_cast<std::size_t>(lat.d));
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (int a = 0; a < lat.d; ++a) {
            const double diff = N * (root[g.neighbor(i, a, +1)] - root[i]);
            rep.per_edge[i * static_cast<std::size_t>(lat.d) + static_cast<std::size_t>(a)] = diff * diff;
            s += diff * diff;
        }
    rep.total = s * g.cell_volume();
    rep.continuum = continuum_dirichlet(profile, model, quadrature_cells);
    rep.relative_gap = rep.continuum > 0.0 ? std::abs(rep.total - rep.continuum) / rep.continuum
                                           : std::abs(rep.total);
    return rep;
}

namespace {

TwoBlockEstimate summarise(const std::vector<double>& samples) {
    const auto ms = mean_stderr(samples);
    return {ms.mean, ms.stderr_, ms.count};
}

double box_mean(std::span<const std::int32_t> box) {
    double s = 0.0;
    for (auto v : box) s += v;
    return s / static_cast<double>(box.size());
}

} // namespace

TwoBlockEstimate two_block_observable(std::span<const Configuration> ensemble, int ell, std::size_t x,
                                      std::size_t y, const MomentWeight& weight, double beta) {
    if (ensemble.size() < 100) throw Error(ErrorKind::Validation, "two-block estimate needs >= 100 samples");
    std::vector<double> samples;
    samples.reserve(ensemble.size());
    for (const auto& c : ensemble) {
        const auto sums = box_sums(c, ell);
        const double m = std::pow(2.0 * ell + 1.0, c.lattice().d);
        const double ax = static_cast<double>(sums[x]) / m, ay = static_cast<double>(sums[y]) / m;
        samples.push_back(std::abs(ax - ay) - beta * (weight.w(ax) + weight.w(ay)));
    }
    return summarise(samples);
}

TwoBlockEstimate two_block_observable(std::span<const BoxPair> ensemble, const MomentWeight& weight,
                                      double beta) {
    if (ensemble.size() < 100) throw Error(ErrorKind::Validation, "two-block estimate needs >= 100 samples");
    std::vector<double> samples;
    samples.reserve(ensemble.size());
    for (const auto& p : ensemble) {
        const double ax = box_mean(p.x_box), ay = box_mean(p.y_box);
        samples.push_back(std::abs(ax - ay) - beta * (weight.w(ax) + weight.w(ay)));
    }
    return summarise(samples);
}

std::vector<BoxPair> sample_box_pairs(const OscillatingProfile& profile, double log_N, double log_rx,
                                      double log_ry, int ell, const JumpRate& rate,
                                      std::size_t ensemble, std::uint64_t seed) {
    const int d = profile.d;
    const int side = 2 * ell + 1;
    std::size_t box = 1;
    for (int a = 0; a < d; ++a) box *= static_cast<std::size_t>(side);
    // Profile value at each box site: the site sits at lattice distance X = N r
    // from the centre along the first axis, displaced by an offset o.
    auto box_values = [&](double log_r) {
        const double log_X = log_N + log_r;
        if (log_X < std::log(4.0 * side))
            throw Error(ErrorKind::Validation, "box centre must lie at lattice distance >= 4 box widths from the origin");
        std::vector<double> u(box);
        for (std::size_t i = 0; i < box; ++i) {
            std::size_t rem = i;
            double along = 0.0, o2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double o = static_cast<double>(rem % static_cast<std::size_t>(side)) - ell;
                rem /= static_cast<std::size_t>(side);
                if (a == 0) along = o;
                o2 += o * o;
            }
            double shift = 0.0;
            if (log_X < 700.0) {
                const double X = std::exp(log_X);
                shift = 0.5 * std::log1p(2.0 * along / X + o2 / (X * X));
            }
            u[i] = profile.value_at_log_radius(log_r + shift);
        }
        return u;
    };
    const auto ux = box_values(log_rx), uy = box_values(log_ry);
    LawCache laws(rate, 1e-10);
    std::mt19937_64 rng(seed);
    std::vector<BoxPair> out(ensemble);
    for (auto& p : out) {
        p.x_box.resize(box);
        p.y_box.resize(box);
        for (std::size_t i = 0; i < box; ++i) p.x_box[i] = laws.sampler(ux[i])(rng);
        for (std::size_t i = 0; i < box; ++i) p.y_box[i] = laws.sampler(uy[i])(rng);
    }
    return out;
}

TwoBlockTuning tune_two_block(double gamma, int d, const JumpRate& rate, const MomentWeight& weight) {
    TwoBlockTuning t;
    const double cap = std::min(gamma / 8.0, 0.25);
    for (int i = 1; i < 100000; ++i) {
        const double theta = cap * i / 100000.0;
        if ((gamma - 4 * theta) * (1 - 2 * theta) > 0.75 * gamma) t.theta = theta;
        else break;
    }
    if (!(t.theta > 0.0)) throw Error(ErrorKind::Validation, "no admissible theta for this gamma");
    const auto hi = law_of_density(rate, 1.5 * gamma), lo = law_of_density(rate, 0.5 * gamma);
    t.variance = std::max(hi.variance, lo.variance);
    const double need = t.variance / (t.theta * t.theta * t.theta);
    while (std::pow(2.0 * t.ell + 1.0, d) < need) ++t.ell;
    auto expect_w = [&](const EquilibriumLaw& law) {
        double s = 0.0;
        for (std::size_t k = 0; k < law.pmf.size(); ++k) s += law.pmf[k] * weight.w(static_cast<double>(k));
        return s;
    };
    t.c_w = expect_w(hi) + expect_w(lo);
    t.beta = gamma / (8.0 * t.c_w);
    return t;
}

} // namespace zrp
