// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
/**
 * @file elliptic.hpp
 * @brief Symmetric face-weighted operators on the periodic grid and a
 *        Jacobi-preconditioned conjugate gradient solver.
 */
#pragma once

#include "zrplab/grid.hpp"

#include <span>
#include <vector>

namespace zrp {

/// (A x)_i = diag_i x_i + sum over faces f at i of w_f (x_i - x_j) / h^2.
/// Face f = i * d + axis joins i and grid.neighbor(i, axis, +1).
struct FaceOperator {
    Grid grid;
    std::vector<double> diag;
    std::vector<double> face_weights;

    FaceOperator(const Grid& g, double diag_value, double face_weight);

    void apply(std::span<const double> x, std::span<double> out) const;
    std::vector<double> diagonal() const;
};

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Solves A x = b starting from x. With project_mean the solve happens on the
/// mean-zero subspace (A singular with constants in its kernel).
/// Throws Convergence when the relative residual does not reach tol.
CgResult conjugate_gradient(const FaceOperator& A, std::span<const double> b, std::span<double> x,
                            double tol = 1e-12, int max_iter = 0, bool project_mean = false);

/// <f, (I - Delta_h)^{-1} f> h^d.
double h_minus_one_norm2(const Grid& g, std::span<const double> f);

} // namespace zrp
