// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file local_equilibrium.hpp
 * @brief Slowly varying product measures nu_{u(x/N)}: sampling, their
 *        Dirichlet form, and the two-box comparison observable.
 */
#pragma once

#include "zrplab/lattice.hpp"
#include "zrplab/profiles.hpp"
#include "zrplab/rates.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace zrp {

/// Independent sites, x distributed as nu_{u(x/N)}.
Configuration local_equilibrium_sample(const ProfileSpec& profile, int N, const JumpRate& rate,
                                       std::uint64_t seed, double tol = 1e-10);

struct DirichletReport {
    int N = 0;
    int d = 1;
    /// Entry i*d + axis: (N (sqrt phi(u((x+e)/N)) - sqrt phi(u(x/N))))^2.
    std::vector<double> per_edge;
    double total = 0.0;     ///< N^{-d} sum of per_edge
    double continuum = 0.0; ///< int |grad phi^{1/2}(u)|^2 by Gauss quadrature
    double relative_gap = 0.0;
};

DirichletReport dirichlet_local_eq(const ProfileSpec& profile, int N, const NonlinearityModel& model,
                                   int quadrature_cells = 256);

/// Continuum int |grad phi^{1/2}(u)|^2 over the torus (tensor Gauss rule).
double continuum_dirichlet(const ProfileSpec& profile, const NonlinearityModel& model,
                           int quadrature_cells = 256);

/// Occupancies of two boxes of side 2l+1.
struct BoxPair {
    std::vector<std::int32_t> x_box;
    std::vector<std::int32_t> y_box;
};

struct TwoBlockEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t ensemble = 0;
};

/// Monte Carlo mean of |eta-bar^l(x) - eta-bar^l(y)| - beta (w(eta-bar^l(x)) + w(eta-bar^l(y))).
TwoBlockEstimate two_block_observable(std::span<const Configuration> ensemble, int ell, std::size_t x,
                                      std::size_t y, const MomentWeight& weight, double beta);
TwoBlockEstimate two_block_observable(std::span<const BoxPair> ensemble, const MomentWeight& weight,
                                      double beta);

/// Box pairs drawn from the local equilibrium of a radial oscillating profile
/// around lattice points at log radii log_rx, log_ry (along the first axis)
/// on a lattice of scale N = exp(log_N). Only the two boxes are sampled.
std::vector<BoxPair> sample_box_pairs(const OscillatingProfile& profile, double log_N, double log_rx,
                                      double log_ry, int ell, const JumpRate& rate,
                                      std::size_t ensemble, std::uint64_t seed);

struct TwoBlockTuning {
    double theta = 0.0; ///< (gamma - 4 theta)(1 - 2 theta) > 3 gamma / 4
    int ell = 1;        ///< Chebyshev: Var / ((2l+1)^d theta^2) <= theta
    double beta = 0.0;  ///< beta C_w = gamma / 8 < gamma / 4
    double c_w = 0.0;   ///< E_{nu_{3g/2}} w + E_{nu_{g/2}} w, bounds E w(eta-bar) by Jensen
    double variance = 0.0;
};

TwoBlockTuning tune_two_block(double gamma, int d, const JumpRate& rate, const MomentWeight& weight);

} // namespace zrp
