// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/elliptic.hpp"

#include "zrplab/error.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace zrp {

FaceOperator::FaceOperator(const Grid& g, double diag_value, double face_weight)
    : grid(g), diag(g.size(), diag_value), face_weights(g.size() * static_cast<std::size_t>(g.dim()), face_weight) {}

void FaceOperator::apply(std::span<const double> x, std::span<double> out) const {
    const int d = grid.dim();
    const double ih2 = 1.0 / (grid.h() * grid.h());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = diag[i] * x[i];
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int a = 0; a < d; ++a) {
            const std::size_t j = grid.neighbor(i, a, +1);
            const double flux = face_weights[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] * ih2 * (x[i] - x[j]);
            out[i] += flux;
            out[j] -= flux;
        }
}

std::vector<double> FaceOperator::diagonal() const {
    const int d = grid.dim();
    const double ih2 = 1.0 / (grid.h() * grid.h());
    std::vector<double> out = diag;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int a = 0; a < d; ++a) {
            const double w = face_weights[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] * ih2;
            out[i] += w;
            out[grid.neighbor(i, a, +1)] += w;
        }
    return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void remove_mean(std::span<double> v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double& x : v) x -= m;
}

} // namespace

CgResult conjugate_gradient(const FaceOperator& A, std::span<const double> b, std::span<double> x,
                            double tol, int max_iter, bool project_mean) {
    const std::size_t n = b.size();
    if (max_iter <= 0) max_iter = static_cast<int>(std::min<std::size_t>(10 * n + 100, 1'000'000));
    std::vector<double> rhs(b.begin(), b.end());
    if (project_mean) {
        remove_mean(rhs);
        remove_mean(x);
    }
    const auto diag = A.diagonal();
    std::vector<double> r(n), z(n), p(n), q(n);
    A.apply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    if (project_mean) remove_mean(r);
    const double bnorm = std::sqrt(dot(rhs, rhs));
    CgResult res;
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    if (project_mean) remove_mean(z);
    p = z;
    double rz = dot(r, z);
    for (int it = 0; it < max_iter; ++it) {
        res.relative_residual = std::sqrt(dot(r, r)) / bnorm;
        if (res.relative_residual <= tol) {
            res.iterations = it;
            return res;
        }
        A.apply(p, q);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if (project_mean) remove_mean(r);
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        if (project_mean) remove_mean(z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    // Recompute the true residual before giving up.
    A.apply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    if (project_mean) remove_mean(r);
    res.relative_residual = std::sqrt(dot(r, r)) / bnorm;
    res.iterations = max_iter;
    if (res.relative_residual <= tol) return res;
    throw Error(ErrorKind::Convergence,
                "conjugate gradient stalled at relative residual " + std::to_string(res.relative_residual));
}

double h_minus_one_norm2(const Grid& g, std::span<const double> f) {
    FaceOperator A(g, 1.0, 1.0);
    std::vector<double> u(f.size(), 0.0);
    conjugate_gradient(A, f, u, 1e-12);
    return dot(f, u) * g.cell_volume();
}

} // namespace zrp
