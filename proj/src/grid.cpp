// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/grid.hpp"

#include "zrplab/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace zrp {

Grid::Grid(int d, int cells, double offset) : d_(d), m_(cells), offset_(offset) {
    if (d < 1 || d > 3) throw Error(ErrorKind::Validation, "grid dimension must be 1, 2 or 3");
    if (cells < 2) throw Error(ErrorKind::Validation, "grid needs at least 2 cells per side");
    size_ = 1;
    for (int a = 0; a < 3; ++a) {
        stride_[static_cast<std::size_t>(a)] = size_;
        if (a < d) size_ *= static_cast<std::size_t>(cells);
    }
    volume_ = std::pow(1.0 / cells, d);
}

std::array<int, 3> Grid::coords(std::size_t i) const noexcept {
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < d_; ++a) {
        c[static_cast<std::size_t>(a)] = static_cast<int>(i % static_cast<std::size_t>(m_));
        i /= static_cast<std::size_t>(m_);
    }
    return c;
}

std::size_t Grid::index(const std::array<int, 3>& c) const noexcept {
    std::size_t i = 0;
    for (int a = d_ - 1; a >= 0; --a) {
        int ca = c[static_cast<std::size_t>(a)] % m_;
        if (ca < 0) ca += m_;
        i = i * static_cast<std::size_t>(m_) + static_cast<std::size_t>(ca);
    }
    return i;
}

std::size_t Grid::neighbor(std::size_t i, int axis, int step) const noexcept {
    const std::size_t s = stride_[static_cast<std::size_t>(axis)];
    const std::size_t m = static_cast<std::size_t>(m_);
    const std::size_t c = (i / s) % m;
    if (step > 0) return c + 1 == m ? i - (m - 1) * s : i + s;
    return c == 0 ? i + (m - 1) * s : i - s;
}

Point Grid::position(std::size_t i) const noexcept {
    const auto c = coords(i);
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < d_; ++a)
        p[static_cast<std::size_t>(a)] = (c[static_cast<std::size_t>(a)] + offset_) / m_;
    return p;
}

Point Grid::face_position(std::size_t i, int axis) const noexcept {
    Point p = position(i);
    p[static_cast<std::size_t>(axis)] += 0.5 / m_;
    return p;
}

DensityField::DensityField(Grid g, std::vector<double> v, double t)
    : grid(g), values(std::move(v)), time(t) {
    if (values.size() != grid.size())
        throw Error(ErrorKind::Validation, "field size " + std::to_string(values.size()) +
                                               " does not match grid size " +
                                               std::to_string(grid.size()));
}

DensityField DensityField::constant(const Grid& g, double c, double t) {
    return DensityField(g, std::vector<double>(g.size(), c), t);
}

DensityField DensityField::sample(const Grid& g, const std::function<double(const Point&)>& f,
                                  double t) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g.position(i));
    return DensityField(g, std::move(v), t);
}

double DensityField::integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_volume();
}

double DensityField::min() const { return *std::min_element(values.begin(), values.end()); }
double DensityField::max() const { return *std::max_element(values.begin(), values.end()); }

double face_gradient_energy(const Grid& g, std::span<const double> v) {
    const double inv_h2 = 1.0 / (g.h() * g.h());
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (int a = 0; a < g.dim(); ++a) {
            const double diff = v[g.neighbor(i, a, +1)] - v[i];
            s += diff * diff;
        }
    return s * inv_h2 * g.cell_volume();
}

double l1_distance(const Grid& g, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += std::abs(a[i] - b[i]);
    return s * g.cell_volume();
}

double interpolate(const Grid& g, std::span<const double> v, const Point& x) {
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) {
        const double s = x[static_cast<std::size_t>(a)] * g.cells() - g.offset();
        const double fl = std::floor(s);
        base[static_cast<std::size_t>(a)] = static_cast<int>(fl);
        frac[static_cast<std::size_t>(a)] = s - fl;
    }
    double out = 0.0;
    const int corners = 1 << g.dim();
    for (int k = 0; k < corners; ++k) {
        double w = 1.0;
        std::array<int, 3> c = base;
        for (int a = 0; a < g.dim(); ++a) {
            const bool up = (k >> a) & 1;
            w *= up ? frac[static_cast<std::size_t>(a)] : 1.0 - frac[static_cast<std::size_t>(a)];
            c[static_cast<std::size_t>(a)] += up ? 1 : 0;
        }
        out += w * v[g.index(c)];
    }
    return out;
}

} // namespace zrp
