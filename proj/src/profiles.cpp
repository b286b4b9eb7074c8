// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/profiles.hpp"

#include "zrplab/error.hpp"

#include <cmath>
#include <numbers>

namespace zrp {

namespace {

const double kLog2 = std::log(2.0);
const double kLog15 = std::log(1.5);
constexpr double kPi = std::numbers::pi;

/// int_0^s smooth_step.
double step_integral(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return s - 0.5;
    return integrate(smooth_step, 0.0, s, 4, 16);
}

double sphere_area(int d) { return d == 1 ? 2.0 : d == 2 ? 2.0 * kPi : 4.0 * kPi; }

} // namespace

double RadialCutoff::log_psi(double log_r) const {
    if (log_r <= log_a) return log_a + kLog15;
    if (log_r < log_a + kLog2) return log_a + std::log(1.5 + step_integral(std::expm1(log_r - log_a)));
    if (log_r <= log_b) return log_r;
    if (log_r < log_b + kLog2) {
        const double s = std::expm1(log_r - log_b);
        return log_b + std::log(1.0 + s - step_integral(s));
    }
    return log_b + kLog15;
}

double RadialCutoff::derivative(double log_r) const {
    if (log_r <= log_a) return 0.0;
    if (log_r < log_a + kLog2) return smooth_step(std::expm1(log_r - log_a));
    if (log_r <= log_b) return 1.0;
    if (log_r < log_b + kLog2) return 1.0 - smooth_step(std::expm1(log_r - log_b));
    return 0.0;
}

double RadialCutoff::log_derivative(double log_r) const {
    if (log_r <= log_a) return 0.0;
    if (log_r < log_a + kLog2) {
        const double s = std::expm1(log_r - log_a);
        return (1.0 + s) * smooth_step(s) / (1.5 + step_integral(s));
    }
    if (log_r <= log_b) return 1.0;
    if (log_r < log_b + kLog2) {
        const double s = std::expm1(log_r - log_b);
        return (1.0 + s) * (1.0 - smooth_step(s)) / (1.0 + s - step_integral(s));
    }
    return 0.0;
}

double RadialCutoff::log_psi_inf() const { return log_b + kLog15; }

double OscillatingProfile::phase(double log_r) const {
    if (outside(log_r)) return d == 2 ? n * kPi : n * kPi;
    const double lp = psi.log_psi(log_r);
    return d == 2 ? std::pow(-lp, 0.25) : std::exp(-alpha * lp);
}

double OscillatingProfile::value_at_log_radius(double log_r) const {
    if (outside(log_r)) return gamma;
    const double f = phase(log_r);
    return d == 2 ? gamma * (1.0 + 0.5 * std::sin(f)) : 0.5 * gamma * (2.0 + std::sin(f));
}

double OscillatingProfile::radial_slope(double log_r) const {
    if (outside(log_r)) return 0.0;
    const double L = psi.log_derivative(log_r);
    if (L == 0.0) return 0.0;
    const double lp = psi.log_psi(log_r);
    if (d == 2) {
        const double f = std::pow(-lp, 0.25);
        return 0.5 * gamma * std::cos(f) * 0.25 * std::pow(-lp, -0.75) * (-L);
    }
    const double P = std::exp(-alpha * lp);
    return 0.5 * gamma * std::cos(P) * (-alpha * P * L);
}

ProfileSpec ProfileSpec::constant(double gamma, int d) {
    ProfileSpec p;
    p.kind_ = Kind::Constant;
    p.d_ = d;
    p.gamma_ = gamma;
    p.label_ = "constant";
    p.params_ = {{"gamma", gamma}};
    p.u_ = [gamma](const Point&) { return gamma; };
    p.grad_ = [](const Point&) { return Point{0.0, 0.0, 0.0}; };
    return p;
}

ProfileSpec ProfileSpec::sine(double gamma, double amplitude, int mode, int d) {
    ProfileSpec p;
    p.kind_ = Kind::Sine;
    p.d_ = d;
    p.gamma_ = gamma;
    p.label_ = "sine";
    p.params_ = {{"gamma", gamma}, {"amplitude", amplitude}, {"mode", mode}};
    const double k = 2.0 * kPi * mode;
    p.u_ = [=](const Point& x) { return gamma * (1.0 + amplitude * std::sin(k * x[0])); };
    p.grad_ = [=](const Point& x) { return Point{gamma * amplitude * k * std::cos(k * x[0]), 0.0, 0.0}; };
    return p;
}

ProfileSpec ProfileSpec::bump(double gamma, double amplitude, double width, int d) {
    if (!(width > 0.0 && width < 0.5))
        throw Error(ErrorKind::Validation, "bump width must lie in (0, 1/2)");
    ProfileSpec p;
    p.kind_ = Kind::Bump;
    p.d_ = d;
    p.gamma_ = gamma;
    p.label_ = "bump";
    p.params_ = {{"gamma", gamma}, {"amplitude", amplitude}, {"width", width}};
    p.u_ = [=](const Point& x) {
        double b = 1.0;
        for (int a = 0; a < d; ++a) b *= zrp::bump((x[static_cast<std::size_t>(a)] - 0.5) / width);
        return gamma * (1.0 + amplitude * b);
    };
    p.grad_ = [=](const Point& x) {
        Point g{0.0, 0.0, 0.0};
        for (int a = 0; a < d; ++a) {
            double prod = gamma * amplitude / width;
            for (int c = 0; c < d; ++c) {
                const double s = (x[static_cast<std::size_t>(c)] - 0.5) / width;
                prod *= c == a ? bump_prime(s) : zrp::bump(s);
            }
            g[static_cast<std::size_t>(a)] = prod;
        }
        return g;
    };
    return p;
}

ProfileSpec ProfileSpec::custom(std::string label, int d, double gamma,
                                std::function<double(const Point&)> u,
                                std::function<Point(const Point&)> grad) {
    ProfileSpec p;
    p.kind_ = Kind::Custom;
    p.d_ = d;
    p.gamma_ = gamma;
    p.label_ = std::move(label);
    p.params_ = {{"gamma", gamma}};
    p.u_ = std::move(u);
    p.grad_ = std::move(grad);
    return p;
}

ProfileSpec ProfileSpec::oscillating(const OscillatingProfile& o) {
    ProfileSpec p;
    p.kind_ = Kind::Oscillating;
    p.d_ = o.d;
    p.gamma_ = o.gamma;
    p.label_ = o.d == 2 ? "oscillating_d2" : "oscillating_d3";
    p.params_ = {{"gamma", o.gamma}, {"n", o.n}, {"log_a", o.psi.log_a}, {"log_b", o.psi.log_b}};
    if (o.d == 3) p.params_["alpha"] = o.alpha;
    p.osc_ = o;
    auto radius = [d = o.d](const Point& x, Point& rel) {
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
            rel[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(a)] - 0.5;
            r2 += rel[static_cast<std::size_t>(a)] * rel[static_cast<std::size_t>(a)];
        }
        return std::sqrt(r2);
    };
    p.u_ = [o, radius](const Point& x) {
        Point rel{0.0, 0.0, 0.0};
        return o.value_at_log_radius(std::log(radius(x, rel)));
    };
    p.grad_ = [o, radius](const Point& x) {
        Point rel{0.0, 0.0, 0.0};
        const double r = radius(x, rel);
        Point g{0.0, 0.0, 0.0};
        if (r == 0.0) return g;
        const double slope = o.radial_slope(std::log(r));
        for (int a = 0; a < o.d; ++a) g[static_cast<std::size_t>(a)] = slope * rel[static_cast<std::size_t>(a)] / (r * r);
        return g;
    };
    return p;
}

double ProfileSpec::value(const Point& x) const { return u_(x); }
Point ProfileSpec::gradient(const Point& x) const { return grad_(x); }

double radial_energy(const OscillatingProfile& p, const std::function<double(double)>& weight,
                     int panels) {
    auto integrand = [&](double s) {
        const double slope = p.radial_slope(s);
        if (slope == 0.0) return 0.0;
        return weight(p.value_at_log_radius(s)) * slope * slope * std::exp((p.d - 2) * s);
    };
    const double la = p.psi.log_a, lb = p.psi.log_b;
    double total = integrate(integrand, la, la + kLog2, 64, 16);
    total += integrate(integrand, lb, lb + kLog2, 64, 16);
    if (p.d == 2) {
        // On the window log r = -F^4, ds = -4F^3 dF.
        const double f_lo = std::pow(-lb, 0.25), f_hi = std::pow(-(la + kLog2), 0.25);
        total += integrate(
            [&](double f) {
                const double f3 = f * f * f;
                return integrand(-f3 * f) * 4.0 * f3;
            },
            f_lo, f_hi, panels, 16);
    } else {
        // On the window log r = -log(P)/alpha, ds = -dP/(alpha P).
        const double p_lo = std::exp(-p.alpha * lb), p_hi = std::exp(-p.alpha * (la + kLog2));
        const int n = std::max(panels, static_cast<int>((p_hi - p_lo) / 0.5) + 1);
        total += integrate(
            [&](double P) { return integrand(-std::log(P) / p.alpha) / (p.alpha * P); }, p_lo,
            p_hi, n, 16);
    }
    return sphere_area(p.d) * total;
}

Counterexample counterexample_profile(int d, double gamma, const CounterexampleParams& params,
                                      const NonlinearityModel* model) {
    if (d != 2 && d != 3) throw Error(ErrorKind::Validation, "counterexample profiles exist for d = 2 or 3");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::Validation, "gamma must be positive");
    if (params.n < 1) throw Error(ErrorKind::Validation, "n must be >= 1");
    OscillatingProfile o;
    o.d = d;
    o.gamma = gamma;
    o.n = params.n;
    o.alpha = params.alpha;
    double first_max, first_min;
    if (d == 2) {
        const double log_psi_inf = -std::pow(params.n * kPi, 4);
        o.psi.log_b = log_psi_inf - kLog15;
        o.log_delta = o.psi.log_b;
        const double f_delta = std::pow(-o.log_delta, 0.25);
        // |log delta'|^{1/4} = |log delta|^{1/4} + 2 pi
        o.log_delta_prime = -std::pow(f_delta + 2.0 * kPi, 4);
        o.psi.log_a = o.log_delta_prime - kLog2;
        first_max = kPi / 2 + 2 * kPi * std::ceil((f_delta - kPi / 2) / (2 * kPi));
        first_min = 3 * kPi / 2 + 2 * kPi * std::ceil((f_delta - 3 * kPi / 2) / (2 * kPi));
        o.log_r_max = -std::pow(first_max, 4);
        o.log_r_min = -std::pow(first_min, 4);
    } else {
        if (!(params.alpha > 0.0 && params.alpha < 0.5))
            throw Error(ErrorKind::Validation, "constraint 0 < alpha < (d-2)/2 violated");
        const double log_psi_inf = -std::log(params.n * kPi) / params.alpha;
        o.psi.log_b = log_psi_inf - kLog15;
        o.psi.log_a = params.log_cutoff;
        if (!(o.psi.log_a + kLog2 < o.psi.log_b))
            throw Error(ErrorKind::Validation, "constraint: inner cutoff 2a must lie below b = psi(inf)/1.5");
        o.log_delta = o.psi.log_b;
        o.log_delta_prime = o.psi.log_a + kLog2;
        const double p_lo = std::exp(-params.alpha * o.log_delta);
        const double p_hi = std::exp(-params.alpha * o.log_delta_prime);
        first_max = kPi / 2 + 2 * kPi * std::ceil((p_lo - kPi / 2) / (2 * kPi));
        first_min = 3 * kPi / 2 + 2 * kPi * std::ceil((p_lo - 3 * kPi / 2) / (2 * kPi));
        if (first_max > p_hi || first_min > p_hi)
            throw Error(ErrorKind::Validation, "constraint: window [2a, b] too narrow to reach both extremes");
        o.log_r_max = -std::log(first_max) / params.alpha;
        o.log_r_min = -std::log(first_min) / params.alpha;
    }
    if (o.psi.log_b + kLog2 >= std::log(0.5))
        throw Error(ErrorKind::Validation, "constraint: support of u - gamma must lie inside the central box");
    // Structural constraints on psi, checked on the two ramps.
    for (double base : {o.psi.log_a, o.psi.log_b})
        for (int i = 0; i <= 200; ++i) {
            const double s = base + kLog2 * i / 200.0;
            const double dpsi = o.psi.derivative(s);
            if (dpsi < 0.0 || dpsi > 1.0)
                throw Error(ErrorKind::Validation, "constraint 0 <= psi' <= 1 violated");
            if (dpsi > 0.0 && o.psi.log_psi(s) < s - kLog2 - 1e-12)
                throw Error(ErrorKind::Validation, "constraint psi(r) >= r/2 on supp psi' violated");
        }

    Counterexample out{ProfileSpec::oscillating(o), {}};
    auto& dg = out.diagnostics;
    dg.log_psi_inf = o.psi.log_psi_inf();
    dg.sup_u = o.value_at_log_radius(o.log_r_max);
    dg.inf_u = o.value_at_log_radius(o.log_r_min);
    dg.grad_norm2 = radial_energy(o, [](double) { return 1.0; });
    dg.scaled_grad_norm2 = dg.grad_norm2 * std::sqrt(std::abs(dg.log_psi_inf));
    dg.dirichlet = model ? radial_energy(o,
                                         [model](double u) {
                                             const double p = model->phi(u), dp = model->dphi(u);
                                             return dp * dp / (4.0 * p);
                                         })
                         : std::nan("");
    return out;
}

} // namespace zrp
