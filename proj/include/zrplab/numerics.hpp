// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace zrp {

/// A point of the unit torus; unused trailing coordinates are zero.
using Point = std::array<double, 3>;

/// Smooth function of (t, x) with analytic first/second derivatives.
struct SpaceTimeFunction {
    std::function<double(double, const Point&)> value;
    std::function<Point(double, const Point&)> grad;
    std::function<double(double, const Point&)> laplacian;
    std::function<double(double, const Point&)> time_derivative;

    static SpaceTimeFunction zero();
    /// Time-independent wrapper.
    static SpaceTimeFunction stationary(std::function<double(const Point&)> v,
                                        std::function<Point(const Point&)> g,
                                        std::function<double(const Point&)> lap);
    SpaceTimeFunction scaled(double factor) const;
};

/// Stationary H(x) = sum_k a_k sin(2 pi k x_0) + b_k cos(2 pi k x_0), k = 1, 2, ...
SpaceTimeFunction trig_series(std::vector<double> a, std::vector<double> b);

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

const GaussRule& gauss_legendre(int order);

/// Integrate f over [a, b] with `pieces` panels of a Gauss rule.
double integrate(const std::function<double(double)>& f, double a, double b, int pieces = 1,
                 int order = 16);

/// Uniform double in [0, 1) with 53 random bits; portable across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1].
inline double uniform01_open_low(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// C-infinity bump exp(1 - 1/(1 - s^2)) on |s| < 1, peak value 1 at s = 0.
double bump(double s);
/// Derivative of bump with respect to s.
double bump_prime(double s);
/// Second derivative of bump with respect to s.
double bump_second(double s);

/// Smooth monotone transition from 0 (s <= 0) to 1 (s >= 1), all derivatives
/// vanish at both ends.
double smooth_step(double s);
double smooth_step_prime(double s);

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t count = 0;
};

MeanStderr mean_stderr(std::span<const double> xs);

} // namespace zrp
