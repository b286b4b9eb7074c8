// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file rate_functional.hpp
 * @brief The dynamic rate functional in its supremum form (test-function
 *        basis) and its control form (weighted elliptic recovery).
 */
#pragma once

#include "zrplab/numerics.hpp"
#include "zrplab/rates.hpp"
#include "zrplab/skeleton.hpp"

#include <string>
#include <vector>

namespace zrp {

/// J = <H_T,rho_T> - <H_0,rho_0> - int <d_t H, rho> - int int Phi(rho) (c_lap Lap H + c_grad |grad H|^2).
struct DiffusionConvention {
    double c_lap = 1.0;
    double c_grad = 0.5;
    bool pde_half = false;

    static DiffusionConvention generator_consistent() { return {1.0, 0.5, false}; }
    /// Halved Laplacian in J together with the halved PDE.
    static DiffusionConvention halved() { return {0.5, 0.5, true}; }
    double pde_scale() const noexcept { return pde_half ? 0.5 : 1.0; }
};

/// Space-time test functions S_s(x) P_p(t): products of per-axis trigonometric
/// factors, optionally times a product bump centred in the torus, times
/// Legendre polynomials in t on [0, T].
class TestBasis {
public:
    struct Options {
        int d = 1;
        int spatial_modes = 8;
        int time_degree = 0;
        double t_end = 1.0;
        bool compact = false;
        double bump_width = 0.45;
    };

    explicit TestBasis(const Options& opt);

    std::size_t size() const noexcept { return spatial_.size() * static_cast<std::size_t>(opt_.time_degree + 1); }
    std::size_t spatial_size() const noexcept { return spatial_.size(); }
    const Options& options() const noexcept { return opt_; }

    /// Spatial factor s: value, gradient and Laplacian.
    double spatial_value(std::size_t s, const Point& x) const;
    Point spatial_grad(std::size_t s, const Point& x) const;
    double spatial_laplacian(std::size_t s, const Point& x) const;
    /// Time factor p and its derivative.
    double time_value(int p, double t) const;
    double time_derivative(int p, double t) const;

    /// Member i = s * (time_degree + 1) + p.
    SpaceTimeFunction member(std::size_t i) const;
    SpaceTimeFunction combination(const std::vector<double>& coefficients) const;

    /// Condition number of the Gram matrix of the spatial factors sampled on g.
    double gram_condition(const Grid& g) const;
    std::string describe(std::size_t i) const;

private:
    struct Factor {
        int wavenumber = 0;
        int kind = 0; ///< 0 constant, 1 cos, 2 sin
    };
    Options opt_;
    std::vector<std::array<Factor, 3>> spatial_;
};

enum class RateMethod { SupJ, ControlNorm };

struct RateReport {
    double static_part = 0.0;
    double dynamic = 0.0;
    double total = 0.0;
    RateMethod method = RateMethod::SupJ;
    std::vector<double> coefficients;
    double gradient_norm = 0.0;
    bool converged = false;
    int iterations = 0;
    std::size_t rank = 0;       ///< kept directions of the Hessian
    std::size_t basis_size = 0;
    bool reduced = false;       ///< singular Hessian, reduced-basis fallback used
    double gram_condition = 0.0;
    // Control form only.
    std::vector<std::vector<double>> H_slices;
    std::vector<double> slice_times;
    double max_mean_projection = 0.0; ///< largest removed mean of the elliptic right side
    double max_solver_residual = 0.0;
};

double j_functional(const SpaceTimeFunction& H, const SolutionBundle& bundle, const NonlinearityModel& model,
                    const DiffusionConvention& conv);

/// Static part H_Phi(rho_0 | gamma): relative entropy through the rate if the model has one.
double static_rate(const DensityField& rho0, double gamma, const NonlinearityModel& model);

RateReport i_up(const SolutionBundle& bundle, const TestBasis& basis, double gamma, const NonlinearityModel& model,
                const DiffusionConvention& conv);

struct VariationalReport {
    double basis_value = 0.0;
    std::vector<double> coefficients;
    double value_at_optimizer = 0.0; ///< at H* = 1/2 log Phi(rho); NaN if Phi vanishes somewhere
    double dissipation = 0.0;        ///< D = int |grad Phi^{1/2}(rho)|^2
    double quarter_dissipation = 0.0;
    std::size_t rank = 0;
};

/// sup over the basis of int Phi(rho)(-Lap H - |grad H|^2), discretised with
/// log-mean face weights so that 1/2 log Phi(rho) is the exact discrete maximiser.
VariationalReport variational_D(const DensityField& field, const TestBasis& basis, const NonlinearityModel& model);

/// Solves -div(Phi(rho) grad H) = d_t rho - c Lap Phi(rho) - visc Lap rho per
/// step of the bundle, with the same time levels as the scheme that made it.
RateReport recover_control(const SolutionBundle& bundle, const NonlinearityModel& model, double ridge = 0.0);

/// Recovered H slices as a tabulated potential control.
/// sqrt( sum tau sum_f Phi(rho-bar_f) |D_f H_rec - dH(face)|^2 / sum tau sum_f Phi(rho-bar_f) |dH(face)|^2 ),
/// comparing recovered face gradients with the analytic gradient of a generating potential.
double control_gradient_error(const SolutionBundle& bundle, const NonlinearityModel& model,
                              const RateReport& recovered, const SpaceTimeFunction& H);

ControlField recovered_control_field(const SolutionBundle& bundle, const RateReport& recovered);

struct RateTotal {
    RateReport sup_form;
    RateReport control_form;
    double relative_gap = 0.0; ///< |sup - control| / max(control, tiny), dynamic parts
};

RateTotal rate_total(const SolutionBundle& bundle, double gamma, const NonlinearityModel& model,
                     const TestBasis& basis, const DiffusionConvention& conv, double ridge = 0.0);

void write_rate_report_json(const RateReport& report, const std::string& path);

} // namespace zrp
