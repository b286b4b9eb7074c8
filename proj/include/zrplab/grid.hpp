// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "zrplab/numerics.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace zrp {

/// Uniform periodic grid on the unit torus [0,1)^d with M cells per side.
/// `offset` places value i at (c + offset)/M: 0.5 for finite-volume cells,
/// 0 for lattice sites x/N.
class Grid {
public:
    Grid() = default;
    Grid(int d, int cells, double offset = 0.5);

    int dim() const noexcept { return d_; }
    int cells() const noexcept { return m_; }
    double h() const noexcept { return 1.0 / m_; }
    double cell_volume() const noexcept { return volume_; }
    double offset() const noexcept { return offset_; }
    std::size_t size() const noexcept { return size_; }

    std::array<int, 3> coords(std::size_t i) const noexcept;
    std::size_t index(const std::array<int, 3>& c) const noexcept;
    /// Periodic neighbour of cell i one step along `axis` (step = +1 or -1).
    std::size_t neighbor(std::size_t i, int axis, int step) const noexcept;
    Point position(std::size_t i) const noexcept;
    /// Midpoint of the face between i and neighbor(i, axis, +1).
    Point face_position(std::size_t i, int axis) const noexcept;

    bool operator==(const Grid& other) const noexcept {
        return d_ == other.d_ && m_ == other.m_ && offset_ == other.offset_;
    }

private:
    int d_ = 1;
    int m_ = 1;
    double offset_ = 0.5;
    std::size_t size_ = 1;
    double volume_ = 1.0;
    std::array<std::size_t, 3> stride_{1, 1, 1};
};

/// Real-valued field on a Grid, with a time stamp.
struct DensityField {
    Grid grid;
    std::vector<double> values;
    double time = 0.0;

    DensityField() = default;
    DensityField(Grid g, std::vector<double> v, double t = 0.0);

    static DensityField constant(const Grid& g, double c, double t = 0.0);
    static DensityField sample(const Grid& g, const std::function<double(const Point&)>& f,
                               double t = 0.0);

    /// Riemann sum of the values, i.e. the total mass.
    double integral() const;
    double min() const;
    double max() const;
};

/// Sum over faces of h^d ((v_j - v_i)/h)^2, the compact-stencil Dirichlet energy.
double face_gradient_energy(const Grid& g, std::span<const double> v);

/// L1 distance h^d sum |a - b| on a common grid.
double l1_distance(const Grid& g, std::span<const double> a, std::span<const double> b);

/// Periodic multilinear interpolation of cell values at an arbitrary point.
double interpolate(const Grid& g, std::span<const double> v, const Point& x);

} // namespace zrp
