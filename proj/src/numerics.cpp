// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/numerics.hpp"

#include "zrplab/error.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <mutex>
#include <stdexcept>

namespace zrp {

SpaceTimeFunction SpaceTimeFunction::zero() {
    return {[](double, const Point&) { return 0.0; },
            [](double, const Point&) { return Point{0.0, 0.0, 0.0}; },
            [](double, const Point&) { return 0.0; },
            [](double, const Point&) { return 0.0; }};
}

SpaceTimeFunction SpaceTimeFunction::stationary(std::function<double(const Point&)> v,
                                                std::function<Point(const Point&)> g,
                                                std::function<double(const Point&)> lap) {
    return {[v](double, const Point& x) { return v(x); },
            [g](double, const Point& x) { return g(x); },
            [lap](double, const Point& x) { return lap(x); },
            [](double, const Point&) { return 0.0; }};
}

SpaceTimeFunction trig_series(std::vector<double> a, std::vector<double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::Validation, "sine and cosine coefficient counts differ");
    const auto sa = std::make_shared<std::vector<double>>(std::move(a));
    const auto sb = std::make_shared<std::vector<double>>(std::move(b));
    // derivative order 0, 1, 2 of the series at x_0
    auto eval = [sa, sb](double x, int order) {
        double v = 0.0;
        for (std::size_t k = 0; k < sa->size(); ++k) {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(k + 1);
            const double s = std::sin(w * x), c = std::cos(w * x);
            if (order == 0) v += (*sa)[k] * s + (*sb)[k] * c;
            else if (order == 1) v += w * ((*sa)[k] * c - (*sb)[k] * s);
            else v -= w * w * ((*sa)[k] * s + (*sb)[k] * c);
        }
        return v;
    };
    return SpaceTimeFunction::stationary([eval](const Point& x) { return eval(x[0], 0); },
                                         [eval](const Point& x) { return Point{eval(x[0], 1), 0, 0}; },
                                         [eval](const Point& x) { return eval(x[0], 2); });
}

SpaceTimeFunction SpaceTimeFunction::scaled(double factor) const {
    auto self = *this;
    return {[self, factor](double t, const Point& x) { return factor * self.value(t, x); },
            [self, factor](double t, const Point& x) {
                Point g = self.grad(t, x);
                for (double& c : g) c *= factor;
                return g;
            },
            [self, factor](double t, const Point& x) { return factor * self.laplacian(t, x); },
            [self, factor](double t, const Point& x) {
                return factor * self.time_derivative(t, x);
            }};
}

namespace {

GaussRule build_rule(int n) {
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[static_cast<std::size_t>(i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

} // namespace

const GaussRule& gauss_legendre(int order) {
    if (order < 1 || order > 64) throw std::invalid_argument("gauss_legendre: order out of range");
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, build_rule(order)).first;
    return it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, int pieces,
                 int order) {
    const GaussRule& rule = gauss_legendre(order);
    const double width = (b - a) / pieces;
    double total = 0.0;
    for (int p = 0; p < pieces; ++p) {
        const double lo = a + p * width;
        const double mid = lo + 0.5 * width;
        double part = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
            part += rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
        total += 0.5 * width * part;
    }
    return total;
}

double bump(double s) {
    const double q = 1.0 - s * s;
    if (q <= 0.0) return 0.0;
    return std::exp(1.0 - 1.0 / q);
}

double bump_prime(double s) {
    const double q = 1.0 - s * s;
    if (q <= 0.0) return 0.0;
    return bump(s) * (-2.0 * s / (q * q));
}

double bump_second(double s) {
    const double q = 1.0 - s * s;
    if (q <= 0.0) return 0.0;
    const double q2 = q * q;
    return bump(s) * (4.0 * s * s / (q2 * q2) - 2.0 / q2 - 8.0 * s * s / (q2 * q));
}

namespace {
double step_kernel(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
double step_kernel_prime(double x) { return x > 0.0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }
} // namespace

double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = step_kernel(s), b = step_kernel(1.0 - s);
    return a / (a + b);
}

double smooth_step_prime(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double a = step_kernel(s), b = step_kernel(1.0 - s);
    const double da = step_kernel_prime(s), db = -step_kernel_prime(1.0 - s);
    return (da * b - a * db) / ((a + b) * (a + b));
}

MeanStderr mean_stderr(std::span<const double> xs) {
    MeanStderr out;
    out.count = xs.size();
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    return out;
}

} // namespace zrp
