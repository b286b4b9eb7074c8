// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file rates.hpp
 * @brief Jump rates, their product invariant measures and the macroscopic
 *        nonlinearity phi(rho) = E[lambda(eta(0))].
 */
#pragma once

#include "zrplab/grid.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace zrp {

/// lambda(k) given by a table on 0..K and the affine tail
/// lambda(k) = lambda(K) + tail_slope (k - K) for k > K.
class JumpRate {
public:
    JumpRate(std::vector<double> table, double tail_slope, std::string name = "custom");

    /// lambda(k) = k.
    static JumpRate linear();
    /// lambda(k) = 1 for k >= 1.
    static JumpRate indicator();
    /// lambda(k) = k + 0.5 [k odd], tabulated up to an even K, unit slope beyond.
    static JumpRate odd_perturbed(int table_size = 256);
    /// Tabulate f on 0..K and continue with the given slope.
    static JumpRate tabulated(const std::function<double(std::int64_t)>& f, int K,
                              double tail_slope, std::string name);

    double operator()(std::int64_t k) const noexcept {
        if (k <= K_) return table_[static_cast<std::size_t>(k)];
        return table_.back() + slope_ * static_cast<double>(k - K_);
    }

    /// Largest tabulated occupancy K.
    std::int64_t table_max() const noexcept { return K_; }
    const std::vector<double>& table() const noexcept { return table_; }
    double tail_slope() const noexcept { return slope_; }
    const std::string& name() const noexcept { return name_; }
    bool bounded() const noexcept { return slope_ == 0.0; }
    /// inf_{j >= k} lambda(j) for k >= 1.
    double inf_from(std::int64_t k) const noexcept;
    /// Critical fugacity lim inf lambda (infinite for unbounded rates).
    double critical_fugacity() const noexcept;

    /// Throws ErrorKind::InvalidRate unless lambda(0) = 0 and lambda(k) > 0 for k >= 1.
    void validate() const;

private:
    std::vector<double> table_;
    double slope_;
    std::string name_;
    std::int64_t K_;
    std::vector<double> suffix_min_;
};

struct GapWitness {
    std::int64_t k = 0;
    double delta = 0.0;
};

struct AssumptionReport {
    double lipschitz_c = 0.0;
    bool monotone = false;
    std::optional<GapWitness> gap_pair;
    bool a1_ok = false;
    bool a2_ok = false;
    std::int64_t scan_depth = 0;
};

/// Exhaustive scan of the table plus the closed-form affine tail.
AssumptionReport check_assumptions(const JumpRate& rate, std::int64_t scan_depth);

struct PartitionResult {
    double value = 1.0;     ///< Z(phi); may be +inf when only log_value is representable
    double log_value = 0.0; ///< log Z(phi)
    std::int64_t truncation = 0;
    double tail_bound = 0.0; ///< bound on omitted mass relative to Z
};

PartitionResult partition_Z(const JumpRate& rate, double fugacity, double tol = 1e-12);

/// Product-measure marginal nu at a given fugacity, truncated at K_pmf.
struct EquilibriumLaw {
    double fugacity = 0.0;
    std::int64_t truncation = 0;
    std::vector<double> pmf;
    double z_value = 1.0;
    double log_z = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double rate_mean = 0.0; ///< E[lambda(eta(0))], equal to the fugacity
    double tail_bound = 0.0;
};

EquilibriumLaw equilibrium_law(const JumpRate& rate, double fugacity, double tol = 1e-12);

double mean_density(const JumpRate& rate, double fugacity, double tol = 1e-12);

/// Inverse of mean_density; also checks E[lambda(eta(0))] = phi.
double fugacity_of_density(const JumpRate& rate, double rho, double tol = 1e-10);

/// Law with mean rho.
EquilibriumLaw law_of_density(const JumpRate& rate, double rho, double tol = 1e-10);

/// Evaluators for Phi, Phi', Phi^1/2, Theta(xi) = int_0^xi sqrt(Phi'),
/// Psi(xi) with Psi(gamma) = 0 and Psi' = log(Phi/Phi(gamma)).
class NonlinearityModel {
public:
    enum class Kind { FromRate, ClosedForm };

    static NonlinearityModel closed_form(std::string label, std::function<double(double)> phi,
                                         std::function<double(double)> dphi,
                                         std::vector<double> rho_grid, double gamma);
    static NonlinearityModel identity(std::vector<double> rho_grid, double gamma);
    /// Phi(rho) = rho/(1+rho).
    static NonlinearityModel saturating(std::vector<double> rho_grid, double gamma);
    /// Phi(rho) = rho^m, degenerate at 0 for m > 1.
    static NonlinearityModel porous(double m, std::vector<double> rho_grid, double gamma);
    /// Tabulated (rho_i, phi_i, phi'_i) with Hermite interpolation.
    static NonlinearityModel from_table(std::string label, std::vector<double> rho,
                                        std::vector<double> phi, std::vector<double> dphi,
                                        double gamma, std::optional<JumpRate> rate = {});

    double phi(double xi) const;
    double dphi(double xi) const;
    double sqrt_phi(double xi) const;
    /// Theta(xi) = int_0^xi sqrt(Phi'(s)) ds.
    double theta(double xi) const;
    /// Psi_{Phi,gamma}(xi) = int_gamma^xi log(Phi(s)/Phi(gamma)) ds.
    double psi(double xi) const;
    double psi_prime(double xi) const;

    Kind kind() const noexcept { return kind_; }
    const std::string& label() const noexcept { return label_; }
    const std::optional<JumpRate>& rate() const noexcept { return rate_; }
    double gamma() const noexcept { return gamma_; }
    double a_est() const noexcept { return a_est_; }
    double A_est() const noexcept { return A_est_; }
    double vartheta() const;
    std::span<const double> rho_grid() const noexcept { return rho_; }
    std::span<const double> phi_grid() const noexcept { return phi_; }
    std::span<const double> dphi_grid() const noexcept { return dphi_; }

    /// Same model with Phi multiplied by kappa.
    NonlinearityModel scaled(double kappa) const;
    /// Same Phi with a different reference density.
    NonlinearityModel with_gamma(double gamma) const;

private:
    NonlinearityModel() = default;
    void finalize();
    std::size_t interval(double xi) const;
    double log_phi_integral(double xi) const; ///< int_0^xi log Phi
    double hermite(double xi, bool derivative) const;

    Kind kind_ = Kind::ClosedForm;
    std::string label_;
    std::optional<JumpRate> rate_;
    std::function<double(double)> phi_fn_, dphi_fn_;
    std::vector<double> rho_, phi_, dphi_;
    std::vector<double> cum_log_phi_, cum_theta_;
    double gamma_ = 1.0;
    double a_est_ = 0.0, A_est_ = 0.0;
    double log_phi_gamma_ = 0.0, log_phi_integral_gamma_ = 0.0;
};

/// Tabulate phi and phi' on rho_grid (0 is added if missing); phi' by the
/// variance identity and a five-point difference must agree to 10 tol.
NonlinearityModel build_nonlinearity(const JumpRate& rate, std::vector<double> rho_grid,
                                     double gamma, double tol = 1e-8);

/// Uniform grid 0, h, ..., rho_max with `nodes` points.
std::vector<double> uniform_rho_grid(double rho_max, int nodes);

/// Inverse-CDF sampler for a fixed law.
class EquilibriumSampler {
public:
    explicit EquilibriumSampler(const EquilibriumLaw& law);
    std::int32_t operator()(std::mt19937_64& rng) const;

private:
    std::vector<double> cdf_;
};

std::vector<std::int32_t> sample_equilibrium(const EquilibriumLaw& law, std::size_t n_sites,
                                             std::uint64_t seed);

struct RelativeEntropy {
    double value = 0.0;      ///< closed form through phi and log Z
    double quadrature = 0.0; ///< cell sum of int_gamma^rho log(phi(s)/phi(gamma)) ds
};

RelativeEntropy relative_entropy_field(const DensityField& rho0, double gamma,
                                       const JumpRate& rate, double tol = 1e-10);

struct ConcavityCheck {
    double max_ratio = 0.0;
    double vartheta = 1.0;
    std::size_t violations = 0;
    std::size_t evaluated = 0;
};

/// Random piecewise-constant profiles on a periodic grid, mollified at the
/// given scales; compares (Phi^1/2(u))^eps with vartheta Phi^1/2(u^eps).
ConcavityCheck defective_concavity_check(const NonlinearityModel& model, std::size_t samples,
                                         std::span<const double> scales, std::uint64_t seed,
                                         int points = 128);

struct MomentWeight {
    std::function<double(double)> w = [](double x) { return x * std::log1p(x); };
    double theta = 1.0;
};

struct MomentResult {
    enum class Status { Certified, Inconclusive };
    Status status = Status::Inconclusive;
    double estimate = 0.0;         ///< E[exp(theta w)] at the requested theta (inf if uncertified)
    double theta_certified = 0.0;  ///< largest dyadic theta <= requested with a certified tail
    double tail_bound = 0.0;
    std::int64_t truncation = 0;
};

MomentResult moment_check(const JumpRate& rate, double fugacity, const MomentWeight& weight,
                          double tol = 1e-12);

/// key = value lines with keys name, table (comma separated), tail_slope.
JumpRate parse_rate_config(const std::string& text);
JumpRate load_rate_config(const std::string& path);
std::string format_rate_config(const JumpRate& rate);

/// CSV with header rho,phi,dphi.
void write_nonlinearity_csv(const NonlinearityModel& model, std::ostream& out);

} // namespace zrp
