// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file profiles.hpp
 * @brief Macroscopic density profiles on the unit torus, including radial
 *        profiles that oscillate on logarithmically separated scales.
 */
#pragma once

#include "zrplab/numerics.hpp"
#include "zrplab/rates.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zrp {

/// Radial cutoff psi with psi' rising smoothly on [a, 2a], psi(r) = r on
/// [2a, b], psi' falling on [b, 2b]; psi(0) = 1.5a, psi(inf) = 1.5b.
/// 0 <= psi' <= 1 and psi(r) >= r/2 wherever psi' != 0. Everything is
/// parametrised by log radii so that scales like e^{-1000} are representable.
struct RadialCutoff {
    double log_a = -2.0;
    double log_b = -1.0;

    double log_psi(double log_r) const;
    /// r psi'(r) / psi(r).
    double log_derivative(double log_r) const;
    /// psi'(r) itself (between 0 and 1).
    double derivative(double log_r) const;
    double log_psi_inf() const;
};

/// Oscillating radial profile centred at (1/2, ..., 1/2).
///  d = 2: u = gamma (1 + sin(|log psi|^{1/4}) / 2)
///  d = 3: u = gamma (2 + sin(psi^{-alpha})) / 2
struct OscillatingProfile {
    int d = 2;
    double gamma = 1.0;
    int n = 1;
    double alpha = 0.25;
    RadialCutoff psi;
    double log_delta = 0.0;       ///< upper end of the window where psi(r) = r
    double log_delta_prime = 0.0; ///< lower end of that window
    double log_r_max = 0.0;       ///< a radius where u = 3 gamma / 2
    double log_r_min = 0.0;       ///< a radius where u = gamma / 2

    /// Phase argument of the sine at log radius.
    double phase(double log_r) const;
    double value_at_log_radius(double log_r) const;
    /// r du/dr.
    double radial_slope(double log_r) const;
    /// True beyond the support of psi', where u = gamma exactly.
    bool outside(double log_r) const { return log_r >= psi.log_b + std::log(2.0); }
};

class ProfileSpec {
public:
    enum class Kind { Constant, Sine, Bump, Oscillating, Custom };

    static ProfileSpec constant(double gamma, int d = 1);
    /// gamma (1 + amplitude sin(2 pi mode x_0)).
    static ProfileSpec sine(double gamma, double amplitude, int mode = 1, int d = 1);
    /// gamma (1 + amplitude prod_i bump((x_i - 1/2)/width)).
    static ProfileSpec bump(double gamma, double amplitude, double width, int d = 1);
    static ProfileSpec custom(std::string label, int d, double gamma,
                              std::function<double(const Point&)> u,
                              std::function<Point(const Point&)> grad);
    static ProfileSpec oscillating(const OscillatingProfile& p);

    double value(const Point& x) const;
    Point gradient(const Point& x) const;

    Kind kind() const noexcept { return kind_; }
    int dim() const noexcept { return d_; }
    double gamma() const noexcept { return gamma_; }
    const std::string& label() const noexcept { return label_; }
    const std::map<std::string, double>& parameters() const noexcept { return params_; }
    const std::optional<OscillatingProfile>& oscillating_profile() const noexcept { return osc_; }

private:
    Kind kind_ = Kind::Constant;
    int d_ = 1;
    double gamma_ = 1.0;
    std::string label_;
    std::map<std::string, double> params_;
    std::function<double(const Point&)> u_;
    std::function<Point(const Point&)> grad_;
    std::optional<OscillatingProfile> osc_;
};

struct CounterexampleParams {
    int n = 1;
    double alpha = 0.25;    ///< d = 3 only, 0 < alpha < 1/2
    double log_cutoff = -8; ///< d = 3 only: log of the inner ramp start a
};

struct CounterexampleDiagnostics {
    double grad_norm2 = 0.0;      ///< ||grad u||^2_{L^2}
    double dirichlet = 0.0;       ///< int |grad phi^{1/2}(u)|^2, NaN without a model
    double sup_u = 0.0;
    double inf_u = 0.0;
    double log_psi_inf = 0.0;
    double scaled_grad_norm2 = 0.0; ///< grad_norm2 sqrt|log psi(inf)|  (d = 2)
};

struct Counterexample {
    ProfileSpec profile;
    CounterexampleDiagnostics diagnostics;
};

/// Builds the d = 2 (psi(inf) = e^{-(n pi)^4}) or d = 3 (psi(inf) = (n pi)^{-1/alpha})
/// profile; throws ErrorKind::Validation naming the violated constraint.
Counterexample counterexample_profile(int d, double gamma, const CounterexampleParams& params,
                                      const NonlinearityModel* model = nullptr);

/// |S^{d-1}| int_0^inf weight(u) |u'(r)|^2 r^{d-1} dr for a radial oscillating profile.
double radial_energy(const OscillatingProfile& p, const std::function<double(double)>& weight,
                     int panels = 400);

} // namespace zrp
