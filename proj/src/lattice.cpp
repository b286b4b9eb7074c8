// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/lattice.hpp"

#include "zrplab/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace zrp {

Lattice::Lattice(int dim, int side) : d(dim), L(side) {
    if (dim < 1 || dim > 3) throw Error(ErrorKind::Validation, "lattice dimension must be 1, 2 or 3");
    if (side < 4) throw Error(ErrorKind::Validation, "lattice side must be at least 4");
    if (std::pow(static_cast<double>(side), dim) > static_cast<double>(1u << 28))
        throw Error(ErrorKind::Validation, "lattice exceeds the 2^28 site budget");
}

std::size_t Lattice::sites() const noexcept {
    std::size_t n = 1;
    for (int a = 0; a < d; ++a) n *= static_cast<std::size_t>(L);
    return n;
}

Configuration::Configuration(Lattice lattice, std::vector<std::int32_t> occupancies)
    : lattice_(lattice), occ_(std::move(occupancies)) {
    if (occ_.size() != lattice_.sites())
        throw Error(ErrorKind::Validation, "configuration size does not match the lattice");
    for (auto v : occ_) {
        if (v < 0) throw Error(ErrorKind::Validation, "negative occupancy");
        total_ += v;
    }
}

Configuration Configuration::empty(Lattice lattice) {
    return Configuration(lattice, std::vector<std::int32_t>(lattice.sites(), 0));
}

void Configuration::move(std::size_t from, std::size_t to) {
    if (occ_[from] <= 0) throw Error(ErrorKind::Validation, "move from an empty site");
    if (occ_[to] == std::numeric_limits<std::int32_t>::max())
        throw Error(ErrorKind::Validation, "occupancy overflow (32-bit)");
    --occ_[from];
    ++occ_[to];
}

RateTree::RateTree(std::size_t leaves) : n_(leaves) {
    base_ = 1;
    while (base_ < std::max<std::size_t>(n_, 1)) base_ <<= 1;
    tree_.assign(2 * base_, 0.0);
}

void RateTree::set(std::size_t i, double w) noexcept {
    std::size_t node = base_ + i;
    tree_[node] = w;
    for (node >>= 1; node >= 1; node >>= 1) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

std::size_t RateTree::find(double u) const noexcept {
    std::size_t node = 1;
    while (node < base_) {
        const double left = tree_[2 * node];
        if (u < left) {
            node = 2 * node;
        } else {
            u -= left;
            node = 2 * node + 1;
        }
    }
    return node - base_;
}

double RateTree::recomputed_total() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += tree_[base_ + i];
    return s;
}

ZeroRangeSimulator::ZeroRangeSimulator(const JumpRate& rate, Configuration init,
                                       std::uint64_t seed, SimulationOptions options)
    : rate_(rate), config_(std::move(init)), tree_(config_.lattice().sites()), rng_(seed),
      options_(options) {
    rate_.validate();
    if (!(options_.rate_multiplier > 0.0))
        throw Error(ErrorKind::Validation, "rate multiplier must be positive");
    for (std::size_t i = 0; i < config_.lattice().sites(); ++i) tree_.set(i, site_rate(config_[i]));
}

double ZeroRangeSimulator::site_rate(std::int32_t k) const noexcept {
    return options_.rate_multiplier * 2.0 * config_.lattice().d * rate_(k);
}

bool ZeroRangeSimulator::step(double horizon) {
    if (pending_ < 0.0) {
        const double total = tree_.total();
        if (!(total > 0.0)) {
            time_ = std::max(time_, horizon);
            return false;
        }
        pending_ = time_ - std::log(uniform01_open_low(rng_)) / total;
    }
    if (pending_ > horizon) {
        time_ = std::max(time_, horizon);
        return false;
    }
    time_ = pending_;
    pending_ = -1.0;

    const Lattice& lat = config_.lattice();
    std::size_t site;
    do {
        site = tree_.find(uniform01(rng_) * tree_.total());
    } while (site >= lat.sites() || tree_.leaf(site) <= 0.0);
    const auto dir = static_cast<int>(rng_() % static_cast<std::uint64_t>(2 * lat.d));
    // Periodic neighbour along axis dir/2.
    const int axis = dir / 2;
    std::size_t stride = 1;
    for (int a = 0; a < axis; ++a) stride *= static_cast<std::size_t>(lat.L);
    const std::size_t L = static_cast<std::size_t>(lat.L);
    const std::size_t c = (site / stride) % L;
    std::size_t target;
    if (dir % 2 == 0) target = c + 1 == L ? site - (L - 1) * stride : site + stride;
    else target = c == 0 ? site + (L - 1) * stride : site - stride;

    config_.move(site, target);
    tree_.set(site, site_rate(config_[site]));
    tree_.set(target, site_rate(config_[target]));
    ++events_;
    return true;
}

void ZeroRangeSimulator::advance_to(double micro_time) {
    while (step(micro_time)) {
    }
}

void ZeroRangeSimulator::advance_events(std::uint64_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    for (std::uint64_t i = 0; i < n; ++i)
        if (!step(inf)) break;
}

Trajectory simulate(const JumpRate& rate, const Configuration& init, double t_end,
                    std::span<const double> snapshot_times, std::uint64_t seed,
                    SimulationOptions options) {
    if (!(t_end > 0.0)) throw Error(ErrorKind::Validation, "t_end must be positive");
    for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
        if (snapshot_times[i] < 0.0 || snapshot_times[i] > t_end)
            throw Error(ErrorKind::Validation, "snapshot time outside [0, t_end]");
        if (i > 0 && !(snapshot_times[i] > snapshot_times[i - 1]))
            throw Error(ErrorKind::Validation, "snapshot times must be strictly increasing");
    }
    const double scale = static_cast<double>(init.lattice().L) * init.lattice().L;
    ZeroRangeSimulator sim(rate, init, seed, options);
    Trajectory traj;
    traj.lattice = init.lattice();
    traj.seed = seed;
    traj.rate_multiplier = options.rate_multiplier;
    for (double t : snapshot_times) {
        sim.advance_to(t * scale);
        traj.times.push_back(t);
        traj.snapshots.push_back(sim.configuration());
    }
    sim.advance_to(t_end * scale);
    traj.event_count = sim.events();
    return traj;
}

int box_radius(int N, double eps) { return static_cast<int>(std::floor(N * eps + 1e-9)); }

std::vector<std::int64_t> box_sums(const Configuration& config, int radius) {
    const Lattice& lat = config.lattice();
    if (radius < 1) throw Error(ErrorKind::Validation, "box radius floor(N eps) must be >= 1");
    if (2 * radius + 1 > lat.L) throw Error(ErrorKind::Validation, "box wider than the lattice");
    const std::size_t n = lat.sites();
    const std::size_t L = static_cast<std::size_t>(lat.L);
    std::vector<std::int64_t> cur(config.occupancies().begin(), config.occupancies().end());
    std::vector<std::int64_t> next(n);
    std::size_t stride = 1;
    for (int axis = 0; axis < lat.d; ++axis) {
        // Sliding window along one axis, separable over axes.
        for (std::size_t i = 0; i < n; ++i) {
            if ((i / stride) % L != 0) continue;
            std::int64_t s = 0;
            for (int o = -radius; o <= radius; ++o) {
                const std::size_t c = static_cast<std::size_t>((o + lat.L) % lat.L);
                s += cur[i + c * stride];
            }
            for (std::size_t c = 0; c < L; ++c) {
                next[i + c * stride] = s;
                const std::size_t out = (c + L - static_cast<std::size_t>(radius)) % L;
                const std::size_t in = (c + static_cast<std::size_t>(radius) + 1) % L;
                s += cur[i + in * stride] - cur[i + out * stride];
            }
        }
        std::swap(cur, next);
        stride *= L;
    }
    return cur;
}

DensityField coarse_grain(const Configuration& config, double eps) {
    const Lattice& lat = config.lattice();
    const int r = box_radius(lat.L, eps);
    const auto sums = box_sums(config, r);
    const double m = std::pow(2.0 * r + 1.0, lat.d);
    std::vector<double> v(sums.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(sums[i]) / m;
    return DensityField(lat.grid(), std::move(v));
}

double pair_with_test(const Configuration& config, const std::function<double(const Point&)>& H) {
    const Grid g = config.lattice().grid();
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (config[i] != 0) s += H(g.position(i)) * config[i];
    return s * g.cell_volume();
}

CylinderObservable CylinderObservable::occupancy() {
    CylinderObservable o;
    o.kind = Kind::Occupancy;
    o.local = [](std::int32_t k) { return static_cast<double>(k); };
    o.tilde = [](double rho) { return rho; };
    o.growth_c = 1.0;
    return o;
}

CylinderObservable CylinderObservable::rate(const JumpRate& rate, double tol) {
    CylinderObservable o;
    o.kind = Kind::Rate;
    o.local = [rate](std::int32_t k) { return rate(k); };
    o.tilde = [rate, tol](double rho) { return fugacity_of_density(rate, rho, tol); };
    double c = rate.tail_slope();
    for (std::int64_t k = 0; k <= 2 * rate.table_max() + 2; ++k)
        c = std::max(c, rate(k) / (1.0 + static_cast<double>(k)));
    o.growth_c = c;
    return o;
}

VSeries v_functional(const Trajectory& traj, const std::function<double(double, const Point&)>& H,
                     const CylinderObservable& obs, double eps) {
    VSeries out;
    const Lattice& lat = traj.lattice;
    const Grid g = lat.grid();
    const int r = box_radius(lat.L, eps);
    const double m = std::pow(2.0 * r + 1.0, lat.d);
    std::unordered_map<std::int64_t, double> tilde_cache;
    std::vector<double> h(g.size());
    for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
        const double t = traj.times[s];
        bool any = false;
        for (std::size_t i = 0; i < g.size(); ++i) {
            h[i] = H(t, g.position(i));
            any = any || h[i] != 0.0;
        }
        double v = 0.0;
        if (any) {
            const Configuration& c = traj.snapshots[s];
            const auto sums = box_sums(c, r);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (h[i] == 0.0) continue;
                auto it = tilde_cache.find(sums[i]);
                if (it == tilde_cache.end())
                    it = tilde_cache.emplace(sums[i], obs.tilde(static_cast<double>(sums[i]) / m)).first;
                v += h[i] * (obs.local(c[i]) - it->second);
            }
            v *= g.cell_volume();
        }
        out.times.push_back(t);
        out.values.push_back(v);
    }
    for (std::size_t s = 1; s < out.times.size(); ++s)
        out.integral += 0.5 * (out.times[s] - out.times[s - 1]) *
                        (std::abs(out.values[s]) + std::abs(out.values[s - 1]));
    return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorKind::Io, "truncated snapshot file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_snapshots_binary(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    put_u32(os, static_cast<std::uint32_t>(traj.lattice.d));
    put_u32(os, static_cast<std::uint32_t>(traj.lattice.L));
    put_u32(os, static_cast<std::uint32_t>(traj.snapshots.size()));
    for (const auto& c : traj.snapshots)
        for (auto v : c.occupancies()) put_u32(os, static_cast<std::uint32_t>(v));
}

Trajectory read_snapshots_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
    Trajectory t;
    const int d = static_cast<int>(get_u32(is));
    const int L = static_cast<int>(get_u32(is));
    t.lattice = Lattice(d, L);
    const std::uint32_t count = get_u32(is);
    for (std::uint32_t s = 0; s < count; ++s) {
        std::vector<std::int32_t> occ(t.lattice.sites());
        for (auto& v : occ) v = static_cast<std::int32_t>(get_u32(is));
        t.snapshots.emplace_back(t.lattice, std::move(occ));
    }
    return t;
}

} // namespace zrp
