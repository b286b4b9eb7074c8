// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file lattice.hpp
 * @brief Event-driven zero-range dynamics on the periodic lattice (Z/LZ)^d
 *        in diffusive scaling, coarse-graining and replacement observables.
 */
#pragma once

#include "zrplab/grid.hpp"
#include "zrplab/rates.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace zrp {

/// Periodic lattice; N is identified with L, site x sits at x/N on the unit torus.
struct Lattice {
    int d = 1;
    int L = 4;

    Lattice() = default;
    Lattice(int dim, int side);

    std::size_t sites() const noexcept;
    Grid grid() const { return Grid(d, L, 0.0); }
    bool operator==(const Lattice&) const = default;
};

class Configuration {
public:
    Configuration() = default;
    Configuration(Lattice lattice, std::vector<std::int32_t> occupancies);
    static Configuration empty(Lattice lattice);

    const Lattice& lattice() const noexcept { return lattice_; }
    std::span<const std::int32_t> occupancies() const noexcept { return occ_; }
    std::int32_t operator[](std::size_t i) const noexcept { return occ_[i]; }
    std::int64_t total() const noexcept { return total_; }
    /// Move one particle from site `from` to site `to`.
    void move(std::size_t from, std::size_t to);

    bool operator==(const Configuration& o) const { return lattice_ == o.lattice_ && occ_ == o.occ_; }

private:
    Lattice lattice_;
    std::vector<std::int32_t> occ_;
    std::int64_t total_ = 0;
};

/// Binary sum tree over nonnegative leaf weights; parents are recomputed from
/// their children on every update, so the root never accumulates drift.
class RateTree {
public:
    explicit RateTree(std::size_t leaves = 0);
    void set(std::size_t i, double w) noexcept;
    double leaf(std::size_t i) const noexcept { return tree_[base_ + i]; }
    double total() const noexcept { return tree_[1]; }
    /// Leaf i with prefix(i) <= u < prefix(i+1); u in [0, total).
    std::size_t find(double u) const noexcept;
    /// Plain left-to-right sum of the leaves.
    double recomputed_total() const noexcept;
    std::size_t size() const noexcept { return n_; }

private:
    std::size_t n_ = 0;
    std::size_t base_ = 1;
    std::vector<double> tree_;
};

struct SimulationOptions {
    /// Per directed edge a site with k particles fires at multiplier * lambda(k),
    /// so the total exit rate is multiplier * 2d lambda(k).
    double rate_multiplier = 1.0;
};

/// Gillespie simulator owning one configuration.
class ZeroRangeSimulator {
public:
    ZeroRangeSimulator(const JumpRate& rate, Configuration init, std::uint64_t seed,
                       SimulationOptions options = {});

    /// Advance up to `micro_time` (microscopic units), stopping before the first event past it.
    void advance_to(double micro_time);
    /// Perform exactly n events (or fewer when the total rate vanishes).
    void advance_events(std::uint64_t n);

    const Configuration& configuration() const noexcept { return config_; }
    double micro_time() const noexcept { return time_; }
    std::uint64_t events() const noexcept { return events_; }
    double tree_total() const noexcept { return tree_.total(); }
    double recomputed_total() const noexcept { return tree_.recomputed_total(); }

private:
    double site_rate(std::int32_t k) const noexcept;
    bool step(double horizon);

    JumpRate rate_;
    Configuration config_;
    RateTree tree_;
    std::mt19937_64 rng_;
    SimulationOptions options_;
    double time_ = 0.0;
    double pending_ = -1.0; ///< next event time already drawn, -1 if none
    std::uint64_t events_ = 0;
};

struct Trajectory {
    Lattice lattice;
    std::vector<double> times; ///< macroscopic
    std::vector<Configuration> snapshots;
    std::uint64_t seed = 0;
    std::uint64_t event_count = 0;
    double rate_multiplier = 1.0;
};

/// Runs to macroscopic time t_end (microscopic N^2 t_end) and records the
/// configuration at each snapshot time (strictly increasing, within [0, t_end]).
Trajectory simulate(const JumpRate& rate, const Configuration& init, double t_end,
                    std::span<const double> snapshot_times, std::uint64_t seed,
                    SimulationOptions options = {});

/// Integer box sums over |y - x|_inf <= radius with periodic wrap.
std::vector<std::int64_t> box_sums(const Configuration& config, int radius);

/// Box radius floor(N eps) used by coarse_grain.
int box_radius(int N, double eps);

/// eta-bar at scale eps on the lattice grid (values at x/N).
DensityField coarse_grain(const Configuration& config, double eps);

/// N^{-d} sum_x H(x/N) eta(x).
double pair_with_test(const Configuration& config, const std::function<double(const Point&)>& H);

/// Local function Psi(eta) = local(eta(0)) and its equilibrium mean tilde(rho).
struct CylinderObservable {
    enum class Kind { Occupancy, Rate, Custom };
    Kind kind = Kind::Occupancy;
    std::function<double(std::int32_t)> local;
    std::function<double(double)> tilde;
    double growth_c = 1.0; ///< |Psi(eta)| <= C (1 + eta(0))

    static CylinderObservable occupancy();
    static CylinderObservable rate(const JumpRate& rate, double tol = 1e-10);
};

struct VSeries {
    double integral = 0.0; ///< trapezoid of |V| over the snapshot times
    std::vector<double> times;
    std::vector<double> values;
};

/// V(t) = N^{-d} sum_x H(t, x/N) [Psi(tau_x eta) - tilde(eta-bar^{N eps}(x))].
VSeries v_functional(const Trajectory& traj, const std::function<double(double, const Point&)>& H,
                     const CylinderObservable& obs, double eps);

/// Flat binary: uint32 d, L, count, then count * L^d little-endian int32.
void write_snapshots_binary(const Trajectory& traj, const std::string& path);
Trajectory read_snapshots_binary(const std::string& path);

} // namespace zrp
