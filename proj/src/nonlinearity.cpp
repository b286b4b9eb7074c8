// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/error.hpp"
#include "zrplab/rates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zrp {

namespace {

void check_grid(const std::vector<double>& rho, double gamma) {
    if (rho.size() < 3) throw Error(ErrorKind::Validation, "density grid needs at least 3 nodes");
    for (std::size_t i = 1; i < rho.size(); ++i)
        if (!(rho[i] > rho[i - 1]))
            throw Error(ErrorKind::Validation, "density grid must be strictly increasing");
    if (rho.front() < 0.0) throw Error(ErrorKind::Validation, "density grid must be nonnegative");
    if (!(gamma > rho.front() && gamma < rho.back()))
        throw Error(ErrorKind::Validation, "reference density must lie inside the grid");
}

void ensure_zero_node(std::vector<double>& rho) {
    if (rho.front() > 0.0) rho.insert(rho.begin(), 0.0);
}

} // namespace

std::vector<double> uniform_rho_grid(double rho_max, int nodes) {
    std::vector<double> g(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i) g[static_cast<std::size_t>(i)] = rho_max * i / (nodes - 1);
    return g;
}

NonlinearityModel NonlinearityModel::closed_form(std::string label,
                                                 std::function<double(double)> phi,
                                                 std::function<double(double)> dphi,
                                                 std::vector<double> rho_grid, double gamma) {
    ensure_zero_node(rho_grid);
    check_grid(rho_grid, gamma);
    NonlinearityModel m;
    m.kind_ = Kind::ClosedForm;
    m.label_ = std::move(label);
    m.phi_fn_ = std::move(phi);
    m.dphi_fn_ = std::move(dphi);
    m.rho_ = std::move(rho_grid);
    m.gamma_ = gamma;
    m.phi_.resize(m.rho_.size());
    m.dphi_.resize(m.rho_.size());
    for (std::size_t i = 0; i < m.rho_.size(); ++i) {
        m.phi_[i] = m.phi_fn_(m.rho_[i]);
        m.dphi_[i] = m.dphi_fn_(m.rho_[i]);
    }
    m.finalize();
    return m;
}

NonlinearityModel NonlinearityModel::identity(std::vector<double> rho_grid, double gamma) {
    return closed_form(
        "identity", [](double x) { return x; }, [](double) { return 1.0; }, std::move(rho_grid),
        gamma);
}

NonlinearityModel NonlinearityModel::saturating(std::vector<double> rho_grid, double gamma) {
    return closed_form(
        "saturating", [](double x) { return x / (1.0 + x); },
        [](double x) { return 1.0 / ((1.0 + x) * (1.0 + x)); }, std::move(rho_grid), gamma);
}

NonlinearityModel NonlinearityModel::porous(double m, std::vector<double> rho_grid, double gamma) {
    if (!(m >= 1.0)) throw Error(ErrorKind::Validation, "porous exponent must be >= 1");
    std::ostringstream label;
    label << "porous_" << m;
    return closed_form(
        label.str(), [m](double x) { return x > 0.0 ? std::pow(x, m) : 0.0; },
        [m](double x) { return x > 0.0 ? m * std::pow(x, m - 1.0) : (m == 1.0 ? 1.0 : 0.0); },
        std::move(rho_grid), gamma);
}

NonlinearityModel NonlinearityModel::from_table(std::string label, std::vector<double> rho,
                                                std::vector<double> phi, std::vector<double> dphi,
                                                double gamma, std::optional<JumpRate> rate) {
    if (rho.size() != phi.size() || rho.size() != dphi.size())
        throw Error(ErrorKind::Validation, "nonlinearity table columns differ in length");
    check_grid(rho, gamma);
    if (rho.front() != 0.0 || phi.front() != 0.0)
        throw Error(ErrorKind::Validation, "nonlinearity table must start at (0, 0)");
    for (std::size_t i = 1; i < phi.size(); ++i)
        if (!(phi[i] > phi[i - 1]))
            throw Error(ErrorKind::Validation, "phi must be strictly increasing on the grid");
    NonlinearityModel m;
    m.kind_ = rate ? Kind::FromRate : Kind::ClosedForm;
    m.label_ = std::move(label);
    m.rate_ = std::move(rate);
    m.rho_ = std::move(rho);
    m.phi_ = std::move(phi);
    m.dphi_ = std::move(dphi);
    m.gamma_ = gamma;
    m.finalize();
    return m;
}

void NonlinearityModel::finalize() {
    a_est_ = *std::min_element(dphi_.begin(), dphi_.end());
    A_est_ = *std::max_element(dphi_.begin(), dphi_.end());

    const std::size_t n = rho_.size();
    cum_log_phi_.assign(n, 0.0);
    cum_theta_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double a = rho_[i - 1], b = rho_[i];
        double lp;
        if (i == 1) {
            // int_0^b log Phi = int_0^b log(Phi(s)/s) ds + b log b - b
            lp = integrate([this](double s) { return std::log(phi(s) / s); }, 0.0, b, 1, 24) +
                 b * std::log(b) - b;
        } else {
            lp = integrate([this](double s) { return std::log(phi(s)); }, a, b, 1, 16);
        }
        cum_log_phi_[i] = cum_log_phi_[i - 1] + lp;
        cum_theta_[i] = cum_theta_[i - 1] +
                        integrate([this](double s) { return std::sqrt(std::max(0.0, dphi(s))); },
                                  a, b, 1, 16);
    }
    log_phi_gamma_ = std::log(phi(gamma_));
    log_phi_integral_gamma_ = log_phi_integral(gamma_);
}

std::size_t NonlinearityModel::interval(double xi) const {
    auto it = std::upper_bound(rho_.begin(), rho_.end(), xi);
    std::size_t i = static_cast<std::size_t>(it - rho_.begin());
    if (i == 0) return 0;
    return std::min(i - 1, rho_.size() - 2);
}

double NonlinearityModel::hermite(double xi, bool derivative) const {
    const std::size_t i = interval(xi);
    const double a = rho_[i], b = rho_[i + 1], h = b - a;
    const double t = (xi - a) / h;
    const double y0 = phi_[i], y1 = phi_[i + 1], m0 = dphi_[i] * h, m1 = dphi_[i + 1] * h;
    if (!derivative) {
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 +
               (t3 - t2) * m1;
    }
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 +
            (3 * t2 - 2 * t) * m1) /
           h;
}

double NonlinearityModel::phi(double xi) const {
    if (phi_fn_) return phi_fn_(xi);
    if (xi <= 0.0) return dphi_.front() * xi;
    if (xi >= rho_.back()) return phi_.back() + dphi_.back() * (xi - rho_.back());
    return hermite(xi, false);
}

double NonlinearityModel::dphi(double xi) const {
    if (dphi_fn_) return dphi_fn_(xi);
    if (xi <= 0.0) return dphi_.front();
    if (xi >= rho_.back()) return dphi_.back();
    return hermite(xi, true);
}

double NonlinearityModel::sqrt_phi(double xi) const { return std::sqrt(std::max(0.0, phi(xi))); }

double NonlinearityModel::log_phi_integral(double xi) const {
    if (xi <= 0.0) return 0.0;
    const double b1 = rho_[1];
    if (xi <= b1)
        return integrate([this](double s) { return std::log(phi(s) / s); }, 0.0, xi, 1, 24) +
               xi * std::log(xi) - xi;
    if (xi >= rho_.back()) {
        const double a = rho_.back();
        const int pieces = 1 + static_cast<int>((xi - a) / (rho_[rho_.size() - 1] - rho_[rho_.size() - 2]));
        return cum_log_phi_.back() +
               integrate([this](double s) { return std::log(phi(s)); }, a, xi, pieces, 16);
    }
    const std::size_t i = interval(xi);
    return cum_log_phi_[i] +
           integrate([this](double s) { return std::log(phi(s)); }, rho_[i], xi, 1, 16);
}

double NonlinearityModel::psi(double xi) const {
    if (xi < 0.0) throw Error(ErrorKind::Domain, "Psi evaluated at a negative density");
    return log_phi_integral(xi) - log_phi_integral_gamma_ - (xi - gamma_) * log_phi_gamma_;
}

double NonlinearityModel::psi_prime(double xi) const {
    return std::log(phi(xi)) - log_phi_gamma_;
}

double NonlinearityModel::theta(double xi) const {
    auto integrand = [this](double s) { return std::sqrt(std::max(0.0, dphi(s))); };
    if (xi <= 0.0) return 0.0;
    if (xi >= rho_.back()) {
        if (phi_fn_) return cum_theta_.back() + integrate(integrand, rho_.back(), xi, 4, 16);
        // Beyond the table Phi is affine, so sqrt(Phi') is constant.
        return cum_theta_.back() + std::sqrt(std::max(0.0, dphi_.back())) * (xi - rho_.back());
    }
    const std::size_t i = interval(xi);
    return cum_theta_[i] + integrate(integrand, rho_[i], xi, 1, 16);
}

double NonlinearityModel::vartheta() const {
    if (!(a_est_ > 0.0)) return INFINITY;
    return std::sqrt(A_est_ / a_est_);
}

NonlinearityModel NonlinearityModel::scaled(double kappa) const {
    if (!(kappa > 0.0)) throw Error(ErrorKind::Validation, "scale factor must be positive");
    std::vector<double> p = phi_, dp = dphi_;
    for (double& v : p) v *= kappa;
    for (double& v : dp) v *= kappa;
    NonlinearityModel m;
    m.kind_ = Kind::ClosedForm;
    m.label_ = label_ + "_scaled";
    m.rho_ = rho_;
    m.phi_ = std::move(p);
    m.dphi_ = std::move(dp);
    m.gamma_ = gamma_;
    if (phi_fn_) {
        auto f = phi_fn_, df = dphi_fn_;
        m.phi_fn_ = [f, kappa](double x) { return kappa * f(x); };
        m.dphi_fn_ = [df, kappa](double x) { return kappa * df(x); };
    }
    m.finalize();
    return m;
}

NonlinearityModel NonlinearityModel::with_gamma(double gamma) const {
    check_grid(rho_, gamma);
    NonlinearityModel m = *this;
    m.gamma_ = gamma;
    m.finalize();
    return m;
}

NonlinearityModel build_nonlinearity(const JumpRate& rate, std::vector<double> rho_grid,
                                     double gamma, double tol) {
    rate.validate();
    ensure_zero_node(rho_grid);
    check_grid(rho_grid, gamma);
    const double inner = std::min(1e-13, tol * 1e-3);
    std::vector<double> phi(rho_grid.size()), dphi(rho_grid.size());
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
        const double rho = rho_grid[i];
        if (rho == 0.0) {
            phi[i] = 0.0;
            dphi[i] = rate(1);
            continue;
        }
        const auto law = law_of_density(rate, rho, inner);
        phi[i] = law.fugacity;
        const double via_variance = law.fugacity / law.variance;
        const double delta = std::min(1e-3 * std::max(1.0, rho), rho / 3.0);
        auto f = [&](double r) { return fugacity_of_density(rate, r, inner); };
        const double via_difference =
            (-f(rho + 2 * delta) + 8 * f(rho + delta) - 8 * f(rho - delta) + f(rho - 2 * delta)) /
            (12 * delta);
        if (std::abs(via_variance - via_difference) > 10.0 * tol * std::max(1.0, via_variance)) {
            std::ostringstream os;
            os.precision(12);
            os << "phi'(" << rho << "): variance identity gives " << via_variance
               << ", finite difference gives " << via_difference;
            throw Error(ErrorKind::Inconsistency, os.str());
        }
        dphi[i] = via_variance;
    }
    return NonlinearityModel::from_table(rate.name(), std::move(rho_grid), std::move(phi),
                                         std::move(dphi), gamma, rate);
}

ConcavityCheck defective_concavity_check(const NonlinearityModel& model, std::size_t samples,
                                         std::span<const double> scales, std::uint64_t seed,
                                         int points) {
    if (!(model.a_est() > 0.0))
        throw Error(ErrorKind::Ellipticity, "defective concavity needs a_est > 0");
    if (scales.empty()) throw Error(ErrorKind::Validation, "no mollification scales given");
    ConcavityCheck out;
    out.vartheta = model.vartheta();
    std::mt19937_64 rng(seed);
    const double top = model.rho_grid().back();
    const std::size_t n = static_cast<std::size_t>(points);
    std::vector<double> u(n), root(n), u_eps(n), root_eps(n);

    for (std::size_t s = 0; s < samples; ++s) {
        // Piecewise-constant profile with 1..8 random pieces on the periodic unit interval.
        const int pieces = 1 + static_cast<int>(rng() % 8);
        std::vector<double> breaks(static_cast<std::size_t>(pieces));
        for (double& b : breaks) b = uniform01(rng);
        std::sort(breaks.begin(), breaks.end());
        std::vector<double> levels(static_cast<std::size_t>(pieces));
        for (double& l : levels) l = top * uniform01(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = (i + 0.5) / static_cast<double>(n);
            const auto k = static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), x) -
                                                    breaks.begin());
            u[i] = levels[k % levels.size()];
            root[i] = model.sqrt_phi(u[i]);
        }
        const double eps = scales[s % scales.size()];
        const int radius = static_cast<int>(eps * static_cast<double>(n));
        std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
        double ksum = 0.0;
        for (int j = -radius; j <= radius; ++j) {
            const double w = radius == 0 ? 1.0 : bump(j / (radius + 1.0));
            kernel[static_cast<std::size_t>(j + radius)] = w;
            ksum += w;
        }
        for (double& w : kernel) w /= ksum;
        for (std::size_t i = 0; i < n; ++i) {
            double a = 0.0, b = 0.0;
            for (int j = -radius; j <= radius; ++j) {
                const std::size_t idx = (i + n + static_cast<std::size_t>(j + static_cast<int>(n))) % n;
                const double w = kernel[static_cast<std::size_t>(j + radius)];
                a += w * root[idx];
                b += w * u[idx];
            }
            const double denom = model.sqrt_phi(b);
            if (denom <= 0.0) continue;
            const double ratio = a / denom;
            ++out.evaluated;
            out.max_ratio = std::max(out.max_ratio, ratio);
            if (ratio > out.vartheta * (1.0 + 1e-12)) ++out.violations;
        }
    }
    return out;
}

} // namespace zrp
