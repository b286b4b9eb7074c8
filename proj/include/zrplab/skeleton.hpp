// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file skeleton.hpp
 * @brief Conservative finite-volume solver for the controlled degenerate
 *        diffusion  d_t rho = c Delta Phi(rho) + visc Delta rho - div(sigma(rho) g)
 *        on the periodic unit torus, with energy and kinetic diagnostics.
 */
#pragma once

#include "zrplab/grid.hpp"
#include "zrplab/numerics.hpp"
#include "zrplab/rates.hpp"

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace zrp {

/// Control entering the flux through its face components.  A Vector control
/// gives g directly; a Potential control gives a field H with g = Phi^{1/2}(rho) grad H.
class ControlField {
public:
    enum class Kind { None, Vector, Potential };

    static ControlField none();
    static ControlField vector(std::function<Point(double, const Point&)> g);
    static ControlField potential(SpaceTimeFunction H);
    /// Face data per time slice, slice k used on [times[k], times[k+1]).
    /// For Potential the data are face differences (H_j - H_i) / h.
    static ControlField tabulated(Kind kind, std::vector<double> times,
                                  std::vector<std::vector<double>> faces);

    Kind kind() const noexcept { return kind_; }
    bool is_tabulated() const noexcept { return !times_.empty(); }
    const SpaceTimeFunction& potential_function() const noexcept { return H_; }

    /// Writes the face component (g or the face gradient of H) at time t.
    void face_values(const Grid& grid, double t, std::span<double> out) const;

private:
    Kind kind_ = Kind::None;
    std::function<Point(double, const Point&)> g_;
    SpaceTimeFunction H_;
    std::vector<double> times_;
    std::vector<std::vector<double>> faces_;
};

enum class Scheme { Explicit, SemiImplicit };

struct SolverParams {
    double viscosity = 0.0;
    double dt = 1e-4;
    double t_end = 0.01;
    Scheme scheme = Scheme::SemiImplicit;
    /// Cells below -positivity_floor abort the solve.
    double positivity_floor = 0.0;
    double cfl_safety = 0.9;
    /// sigma = min(Phi^{1/2}, sigma_cap).
    double sigma_cap = std::numeric_limits<double>::infinity();
    /// Multiplies Delta Phi(rho); 1/2 reproduces the halved generator convention.
    double diffusion_scale = 1.0;
    int snapshot_stride = 1;
    double picard_tol = 1e-10;
    int picard_max = 50;
    double cg_tol = 1e-13;
    /// Phi' is evaluated at rho v dphi_floor where a chord degenerates.
    double dphi_floor = 1e-12;
};

/// Per-step time series, index 0 is the initial datum.
struct DiagnosticSeries {
    std::vector<double> times;
    std::vector<double> mass;
    std::vector<double> l2_gamma;     ///< int (rho - gamma)^2
    std::vector<double> entropy;      ///< int Psi_{Phi,gamma}(rho)
    std::vector<double> dissipation;  ///< int |grad Phi^{1/2}(rho)|^2
    std::vector<double> theta_energy; ///< int |grad Theta_Phi(rho)|^2
    std::vector<double> grad_energy;  ///< int |grad rho|^2
    std::vector<double> control_norm2;///< int |g|^2
};

struct SolutionBundle {
    Grid grid;
    SolverParams params;
    NonlinearityModel model;
    ControlField control;
    std::vector<DensityField> snapshots;
    DiagnosticSeries series;
    std::size_t steps = 0;
    double accumulated_dissipation = 0.0;
    double accumulated_theta_energy = 0.0;
    double accumulated_grad_energy = 0.0;
    double control_norm2 = 0.0; ///< int int |g|^2, left-point rule over the steps
    double sigma_sup = 0.0;     ///< largest face sigma met
    double max_mass_drift = 0.0;///< largest relative mass change in one step
    int max_picard_sweeps = 0;

    const DensityField& initial() const { return snapshots.front(); }
    const DensityField& final_field() const { return snapshots.back(); }
};

SolutionBundle solve_skeleton(const NonlinearityModel& model, const DensityField& rho0,
                              const ControlField& control, const SolverParams& params);

/// Drift form d_t rho = c Delta Phi(rho) - div(Phi(rho) grad H).
SolutionBundle solve_fokker_planck(const NonlinearityModel& model, const DensityField& rho0,
                                   const SpaceTimeFunction& H, const SolverParams& params);

/// Face values sigma_f g_f of the control flux for the field rho at time t.
void control_flux(const Grid& grid, const NonlinearityModel& model, const ControlField& control,
                  const SolverParams& params, double t, std::span<const double> rho,
                  std::span<double> sigma_g, double* g_norm2 = nullptr, double* sigma_max = nullptr);

/// int rho_t psi - int rho_0 psi - int_0^t [ int c Phi(rho) Lap psi + visc rho Lap psi + sigma g . grad psi ].
double weak_residual(const SolutionBundle& bundle, const ControlField& control,
                     const SpaceTimeFunction& psi, double t);

/// int |grad Phi^{1/2}(rho)|^2 with compact face differences.
double entropy_dissipation(const DensityField& field, const NonlinearityModel& model);

struct EstimateRatio {
    double lhs = 0.0;
    double rhs = 0.0;
    double constant = 0.0; ///< smallest constant making the estimate hold
};

struct EnergyReport {
    EstimateRatio energy;      ///< sup ||rho||^2_{L2_g} + ||grad Theta||^2 + visc ||grad rho||^2
    EstimateRatio time_regularity;
    EstimateRatio relative_entropy;
};

EnergyReport energy_report(const SolutionBundle& bundle);

struct KineticReport {
    std::vector<double> xi_edges;
    std::vector<double> defect;     ///< per xi bin
    double defect_total = 0.0;
    std::vector<double> tail_masses;///< defect mass in [M, M+1] per M
    double sup_rho = 0.0;
};

/// chi(x, xi) = 1 if 0 < xi < rho(x).
std::vector<unsigned char> kinetic_function(const DensityField& field, double xi);

KineticReport kinetic_diagnostics(const SolutionBundle& bundle, std::span<const double> xi_edges,
                                  std::span<const double> M_list);

struct ProbeRow {
    int cells = 0;
    double dt = 0.0;
    double distance = 0.0; ///< L1 distance to the next finer level, on the finer grid
    double order = 0.0;    ///< log2 of the distance ratio to the previous row
};

/// Solves on base_cells * 2^k cells, k < levels, with dt divided by dt_factor per level.
std::vector<ProbeRow> uniqueness_probe(const NonlinearityModel& model,
                                       const std::function<double(const Point&)>& rho0, int d,
                                       const ControlField& control, const SolverParams& params,
                                       int base_cells, int levels = 4, double dt_factor = 4.0);

void write_field_csv(const DensityField& field, const std::string& path);
/// Header uint32 LE d, M, count; payload float64 LE values per field.
void write_fields_binary(std::span<const DensityField> fields, const std::string& path);
std::vector<DensityField> read_fields_binary(const std::string& path);
void write_series_csv(const SolutionBundle& bundle, const std::string& path);

} // namespace zrp
