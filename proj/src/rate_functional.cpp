// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/rate_functional.hpp"

#include "zrplab/elliptic.hpp"
#include "zrplab/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>

namespace zrp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> trapezoid_weights(const std::vector<double>& t) {
    std::vector<double> w(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) {
        w[k - 1] += 0.5 * (t[k] - t[k - 1]);
        w[k] += 0.5 * (t[k] - t[k - 1]);
    }
    return w;
}

double log_mean(double a, double b) {
    if (a <= 0.0 || b <= 0.0) return 0.0;
    const double r = b / a - 1.0;
    if (std::abs(r) < 1e-6) return 0.5 * (a + b);
    return (b - a) / (std::log(b) - std::log(a));
}

} // namespace

TestBasis::TestBasis(const Options& opt) : opt_(opt) {
    if (opt.d < 1 || opt.d > 3) throw Error(ErrorKind::Validation, "basis dimension must be 1, 2 or 3");
    if (opt.spatial_modes < 1) throw Error(ErrorKind::Validation, "basis needs at least one spatial mode");
    if (opt.time_degree < 0) throw Error(ErrorKind::Validation, "time degree must be >= 0");
    if (!(opt.t_end > 0.0)) throw Error(ErrorKind::Validation, "basis t_end must be positive");
    if (opt.compact && !(opt.bump_width > 0.0 && opt.bump_width <= 0.5))
        throw Error(ErrorKind::Validation, "bump width must lie in (0, 1/2]");
    std::vector<Factor> axis{{0, 0}};
    for (int k = 1; k <= opt.spatial_modes; ++k) {
        axis.push_back({k, 1});
        axis.push_back({k, 2});
    }
    std::vector<std::array<Factor, 3>> all;
    const std::size_t na = axis.size();
    const std::size_t n1 = opt.d >= 2 ? na : 1, n2 = opt.d >= 3 ? na : 1;
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = 0; b < n1; ++b)
            for (std::size_t c = 0; c < n2; ++c) {
                std::array<Factor, 3> f{axis[a], axis[b], axis[c]};
                const bool constant = f[0].kind == 0 && f[1].kind == 0 && f[2].kind == 0;
                if (constant && !opt.compact) continue;
                all.push_back(f);
            }
    auto key = [](const std::array<Factor, 3>& f) {
        int mx = 0, sum = 0;
        for (const auto& x : f) {
            mx = std::max(mx, x.wavenumber);
            sum += x.wavenumber;
        }
        return std::tuple(mx, sum);
    };
    std::stable_sort(all.begin(), all.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
    if (all.size() < static_cast<std::size_t>(opt.spatial_modes))
        throw Error(ErrorKind::Validation, "not enough spatial modes");
    spatial_.assign(all.begin(), all.begin() + opt.spatial_modes);
}

namespace {

struct FactorEval {
    double v, dv, d2v;
};

FactorEval factor_eval(int kind, int k, double x) {
    if (kind == 0) return {1.0, 0.0, 0.0};
    const double w = kTwoPi * k;
    const double c = std::cos(w * x), s = std::sin(w * x);
    if (kind == 1) return {c, -w * s, -w * w * c};
    return {s, w * c, -w * w * s};
}

} // namespace

double TestBasis::spatial_value(std::size_t s, const Point& x) const {
    double v = 1.0;
    for (int a = 0; a < opt_.d; ++a) {
        const auto& f = spatial_[s][static_cast<std::size_t>(a)];
        v *= factor_eval(f.kind, f.wavenumber, x[static_cast<std::size_t>(a)]).v;
        if (opt_.compact) v *= bump((x[static_cast<std::size_t>(a)] - 0.5) / opt_.bump_width);
    }
    return v;
}

Point TestBasis::spatial_grad(std::size_t s, const Point& x) const {
    // Each axis contributes a factor q_a(x_a) = trig(x_a) * bump(x_a).
    std::array<double, 3> q{1, 1, 1}, dq{0, 0, 0};
    for (int a = 0; a < opt_.d; ++a) {
        const auto& f = spatial_[s][static_cast<std::size_t>(a)];
        const double xa = x[static_cast<std::size_t>(a)];
        const auto t = factor_eval(f.kind, f.wavenumber, xa);
        double b = 1.0, db = 0.0;
        if (opt_.compact) {
            const double u = (xa - 0.5) / opt_.bump_width;
            b = bump(u);
            db = bump_prime(u) / opt_.bump_width;
        }
        q[static_cast<std::size_t>(a)] = t.v * b;
        dq[static_cast<std::size_t>(a)] = t.dv * b + t.v * db;
    }
    Point g{0, 0, 0};
    for (int a = 0; a < opt_.d; ++a) {
        double p = dq[static_cast<std::size_t>(a)];
        for (int c = 0; c < opt_.d; ++c)
            if (c != a) p *= q[static_cast<std::size_t>(c)];
        g[static_cast<std::size_t>(a)] = p;
    }
    return g;
}

double TestBasis::spatial_laplacian(std::size_t s, const Point& x) const {
    std::array<double, 3> q{1, 1, 1}, d2q{0, 0, 0};
    for (int a = 0; a < opt_.d; ++a) {
        const auto& f = spatial_[s][static_cast<std::size_t>(a)];
        const double xa = x[static_cast<std::size_t>(a)];
        const auto t = factor_eval(f.kind, f.wavenumber, xa);
        double b = 1.0, db = 0.0, d2b = 0.0;
        if (opt_.compact) {
            const double u = (xa - 0.5) / opt_.bump_width;
            b = bump(u);
            db = bump_prime(u) / opt_.bump_width;
            d2b = bump_second(u) / (opt_.bump_width * opt_.bump_width);
        }
        q[static_cast<std::size_t>(a)] = t.v * b;
        d2q[static_cast<std::size_t>(a)] = t.d2v * b + 2.0 * t.dv * db + t.v * d2b;
    }
    double lap = 0.0;
    for (int a = 0; a < opt_.d; ++a) {
        double p = d2q[static_cast<std::size_t>(a)];
        for (int c = 0; c < opt_.d; ++c)
            if (c != a) p *= q[static_cast<std::size_t>(c)];
        lap += p;
    }
    return lap;
}

double TestBasis::time_value(int p, double t) const {
    const double tau = 2.0 * t / opt_.t_end - 1.0;
    double prev = 1.0, cur = tau;
    if (p == 0) return 1.0;
    for (int n = 1; n < p; ++n) {
        const double next = ((2.0 * n + 1.0) * tau * cur - n * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

double TestBasis::time_derivative(int p, double t) const {
    // P'_{n+1} = P'_{n-1} + (2n+1) P_n
    if (p == 0) return 0.0;
    std::vector<double> dP(static_cast<std::size_t>(p) + 1, 0.0);
    dP[1] = 1.0;
    for (int n = 1; n < p; ++n)
        dP[static_cast<std::size_t>(n) + 1] = dP[static_cast<std::size_t>(n) - 1] + (2.0 * n + 1.0) * time_value(n, t);
    return dP[static_cast<std::size_t>(p)] * 2.0 / opt_.t_end;
}

SpaceTimeFunction TestBasis::member(std::size_t i) const {
    std::vector<double> c(size(), 0.0);
    c[i] = 1.0;
    return combination(c);
}

SpaceTimeFunction TestBasis::combination(const std::vector<double>& coefficients) const {
    if (coefficients.size() != size()) throw Error(ErrorKind::Validation, "coefficient count does not match the basis");
    const auto self = std::make_shared<TestBasis>(*this);
    const auto c = std::make_shared<std::vector<double>>(coefficients);
    const int np = opt_.time_degree + 1;
    SpaceTimeFunction f;
    f.value = [self, c, np](double t, const Point& x) {
        double v = 0.0;
        for (std::size_t i = 0; i < c->size(); ++i)
            if ((*c)[i] != 0.0) v += (*c)[i] * self->spatial_value(i / static_cast<std::size_t>(np), x) * self->time_value(static_cast<int>(i % static_cast<std::size_t>(np)), t);
        return v;
    };
    f.grad = [self, c, np](double t, const Point& x) {
        Point g{0, 0, 0};
        for (std::size_t i = 0; i < c->size(); ++i)
            if ((*c)[i] != 0.0) {
                const Point gs = self->spatial_grad(i / static_cast<std::size_t>(np), x);
                const double w = (*c)[i] * self->time_value(static_cast<int>(i % static_cast<std::size_t>(np)), t);
                for (int a = 0; a < 3; ++a) g[static_cast<std::size_t>(a)] += w * gs[static_cast<std::size_t>(a)];
            }
        return g;
    };
    f.laplacian = [self, c, np](double t, const Point& x) {
        double v = 0.0;
        for (std::size_t i = 0; i < c->size(); ++i)
            if ((*c)[i] != 0.0) v += (*c)[i] * self->spatial_laplacian(i / static_cast<std::size_t>(np), x) * self->time_value(static_cast<int>(i % static_cast<std::size_t>(np)), t);
        return v;
    };
    f.time_derivative = [self, c, np](double t, const Point& x) {
        double v = 0.0;
        for (std::size_t i = 0; i < c->size(); ++i)
            if ((*c)[i] != 0.0) v += (*c)[i] * self->spatial_value(i / static_cast<std::size_t>(np), x) * self->time_derivative(static_cast<int>(i % static_cast<std::size_t>(np)), t);
        return v;
    };
    return f;
}

double TestBasis::gram_condition(const Grid& g) const {
    Eigen::MatrixXd V(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(spatial_.size()));
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t s = 0; s < spatial_.size(); ++s)
            V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = spatial_value(s, g.position(i));
    const Eigen::MatrixXd G = V.transpose() * V * g.cell_volume();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

std::string TestBasis::describe(std::size_t i) const {
    const int np = opt_.time_degree + 1;
    const auto& f = spatial_[i / static_cast<std::size_t>(np)];
    std::ostringstream os;
    static const char* names[] = {"1", "cos", "sin"};
    for (int a = 0; a < opt_.d; ++a) {
        if (a) os << '*';
        const auto& x = f[static_cast<std::size_t>(a)];
        os << names[x.kind];
        if (x.kind) os << x.wavenumber;
    }
    if (opt_.compact) os << "*bump";
    os << "*P" << (i % static_cast<std::size_t>(np));
    return os.str();
}

namespace {

struct QuadMax {
    Eigen::VectorXd c;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    std::size_t rank = 0;
    bool reduced = false;
    bool converged = false;
};

/// Maximises b.c - c^T Q c for symmetric positive semidefinite Q by damped Newton.
QuadMax maximize_concave(const Eigen::VectorXd& b, const Eigen::MatrixXd& Q) {
    const Eigen::Index n = b.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    const auto& lam = es.eigenvalues();
    const auto& E = es.eigenvectors();
    const double top = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
    const double thr = 1e-12 * top;
    QuadMax out;
    out.c = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k)
        if (lam(k) > thr) ++out.rank;
    out.reduced = out.rank < static_cast<std::size_t>(n);
    auto f = [&](const Eigen::VectorXd& c) { return b.dot(c) - c.dot(Q * c); };
    auto kept_part = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
        for (Eigen::Index k = 0; k < n; ++k)
            if (lam(k) > thr) r += E.col(k) * E.col(k).dot(v);
        return r;
    };
    const double tol = 1e-9 * std::max(1.0, b.norm());
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd g = b - 2.0 * Q * out.c;
        out.iterations = it;
        if (kept_part(g).norm() <= tol) {
            out.converged = true;
            break;
        }
        Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
        for (Eigen::Index k = 0; k < n; ++k)
            if (lam(k) > thr) step += E.col(k) * (E.col(k).dot(g) / (2.0 * lam(k)));
        const double f0 = f(out.c), slope = g.dot(step);
        double t = 1.0;
        while (t > 1e-12 && f(out.c + t * step) < f0 + 1e-4 * t * slope) t *= 0.5;
        out.c += t * step;
        out.iterations = it + 1;
    }
    const Eigen::VectorXd g = b - 2.0 * Q * out.c;
    out.gradient_norm = g.norm();
    if (!out.converged) out.converged = kept_part(g).norm() <= tol;
    out.value = f(out.c);
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

double j_functional(const SpaceTimeFunction& H, const SolutionBundle& bundle, const NonlinearityModel& model,
                    const DiffusionConvention& conv) {
    const Grid& g = bundle.grid;
    const int d = g.dim();
    const double h = g.h(), vol = g.cell_volume();
    std::vector<double> times;
    for (const auto& f : bundle.snapshots) times.push_back(f.time);
    const auto w = trapezoid_weights(times);
    auto pairing = [&](const DensityField& f) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += H.value(f.time, g.position(i)) * f.values[i];
        return s * vol;
    };
    double J = pairing(bundle.final_field()) - pairing(bundle.initial());
    std::vector<double> Hn(g.size()), phi(g.size());
    for (std::size_t k = 0; k < bundle.snapshots.size(); ++k) {
        const auto& f = bundle.snapshots[k];
        double dt_term = 0.0, diff_term = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Point x = g.position(i);
            Hn[i] = H.value(f.time, x);
            phi[i] = model.phi(std::max(f.values[i], 0.0));
            if (H.time_derivative) dt_term += H.time_derivative(f.time, x) * f.values[i];
        }
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const std::size_t j = g.neighbor(i, a, +1);
                const double dH = (Hn[j] - Hn[i]) / h;
                const double face_phi = model.phi(std::max(0.5 * (f.values[i] + f.values[j]), 0.0));
                // sum_i Phi_i (Lap_h H)_i = - sum_f dPhi dH / h^2
                diff_term += -conv.c_lap * (phi[j] - phi[i]) / h * dH + conv.c_grad * face_phi * dH * dH;
            }
        J -= w[k] * vol * (dt_term + diff_term);
    }
    return J;
}

double static_rate(const DensityField& rho0, double gamma, const NonlinearityModel& model) {
    if (model.rate()) return relative_entropy_field(rho0, gamma, *model.rate()).value;
    const NonlinearityModel m = model.gamma() == gamma ? model : model.with_gamma(gamma);
    double s = 0.0;
    for (double v : rho0.values) s += m.psi(v);
    return s * rho0.grid.cell_volume();
}

RateReport i_up(const SolutionBundle& bundle, const TestBasis& basis, double gamma, const NonlinearityModel& model,
                const DiffusionConvention& conv) {
    const Grid& g = bundle.grid;
    if (basis.options().d != g.dim()) throw Error(ErrorKind::Validation, "basis and grid dimensions differ");
    const int d = g.dim();
    const double h = g.h(), vol = g.cell_volume();
    const Eigen::Index S = static_cast<Eigen::Index>(basis.spatial_size());
    const int np = basis.options().time_degree + 1;
    const Eigen::Index nf = static_cast<Eigen::Index>(g.size()) * d;

    Eigen::MatrixXd V(static_cast<Eigen::Index>(g.size()), S), D(nf, S);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (Eigen::Index s = 0; s < S; ++s) V(static_cast<Eigen::Index>(i), s) = basis.spatial_value(static_cast<std::size_t>(s), g.position(i));
    for (std::size_t i = 0; i < g.size(); ++i)
        for (int a = 0; a < d; ++a) {
            const Eigen::Index f = static_cast<Eigen::Index>(i) * d + a;
            D.row(f) = (V.row(static_cast<Eigen::Index>(g.neighbor(i, a, +1))) - V.row(static_cast<Eigen::Index>(i))) / h;
        }

    std::vector<double> times;
    for (const auto& f : bundle.snapshots) times.push_back(f.time);
    const auto w = trapezoid_weights(times);
    const double T = times.back();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(S * np);
    std::vector<Eigen::MatrixXd> G(static_cast<std::size_t>(np * np), Eigen::MatrixXd::Zero(S, S));
    Eigen::VectorXd rho(static_cast<Eigen::Index>(g.size())), dphi(nf), face_phi(nf);
    for (std::size_t k = 0; k < bundle.snapshots.size(); ++k) {
        const auto& f = bundle.snapshots[k];
        const double t = f.time;
        for (std::size_t i = 0; i < g.size(); ++i) rho(static_cast<Eigen::Index>(i)) = f.values[i];
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const std::size_t j = g.neighbor(i, a, +1);
                const Eigen::Index fi = static_cast<Eigen::Index>(i) * d + a;
                dphi(fi) = (model.phi(std::max(f.values[j], 0.0)) - model.phi(std::max(f.values[i], 0.0))) / h;
                face_phi(fi) = model.phi(std::max(0.5 * (f.values[i] + f.values[j]), 0.0));
            }
        const Eigen::VectorXd proj = V.transpose() * rho * vol;
        // sum_i Phi_i (Lap_h S)_i h^d = - sum_f dPhi dS h^d
        const Eigen::VectorXd lap = -(D.transpose() * dphi) * vol;
        const Eigen::MatrixXd Gk = D.transpose() * face_phi.asDiagonal() * D * vol;
        for (int p = 0; p < np; ++p) {
            const double P = basis.time_value(p, t), dP = basis.time_derivative(p, t);
            for (Eigen::Index s = 0; s < S; ++s) {
                double& bi = b(s * np + p);
                if (k + 1 == bundle.snapshots.size()) bi += basis.time_value(p, T) * proj(s);
                if (k == 0) bi -= basis.time_value(p, 0.0) * proj(s);
                bi -= w[k] * (dP * proj(s) + conv.c_lap * P * lap(s));
            }
            for (int q = 0; q < np; ++q)
                G[static_cast<std::size_t>(p * np + q)] += w[k] * conv.c_grad * P * basis.time_value(q, t) * Gk;
        }
    }
    Eigen::MatrixXd Q(S * np, S * np);
    for (Eigen::Index s = 0; s < S; ++s)
        for (Eigen::Index s2 = 0; s2 < S; ++s2)
            for (int p = 0; p < np; ++p)
                for (int q = 0; q < np; ++q) Q(s * np + p, s2 * np + q) = G[static_cast<std::size_t>(p * np + q)](s, s2);
    Q = 0.5 * (Q + Q.transpose());

    const auto opt = maximize_concave(b, Q);
    RateReport r;
    r.method = RateMethod::SupJ;
    r.static_part = static_rate(bundle.initial(), gamma, model);
    r.dynamic = std::max(opt.value, 0.0);
    r.total = r.static_part + r.dynamic;
    r.coefficients = to_std(opt.c);
    r.gradient_norm = opt.gradient_norm;
    r.converged = opt.converged;
    r.iterations = opt.iterations;
    r.rank = opt.rank;
    r.basis_size = basis.size();
    r.reduced = opt.reduced;
    r.gram_condition = basis.gram_condition(g);
    return r;
}

VariationalReport variational_D(const DensityField& field, const TestBasis& basis, const NonlinearityModel& model) {
    const Grid& g = field.grid;
    if (basis.options().d != g.dim()) throw Error(ErrorKind::Validation, "basis and grid dimensions differ");
    for (double v : field.values)
        if (!(v >= 0.0)) throw Error(ErrorKind::Domain, "variational representation needs a nonnegative field");
    const int d = g.dim();
    const double h = g.h(), vol = g.cell_volume();
    const Eigen::Index S = static_cast<Eigen::Index>(basis.spatial_size());
    const Eigen::Index nf = static_cast<Eigen::Index>(g.size()) * d;
    std::vector<double> phi(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) phi[i] = model.phi(field.values[i]);
    Eigen::MatrixXd D(nf, S);
    Eigen::VectorXd dphi(nf), lm(nf);
    std::vector<double> vals(static_cast<std::size_t>(S));
    for (std::size_t i = 0; i < g.size(); ++i)
        for (int a = 0; a < d; ++a) {
            const std::size_t j = g.neighbor(i, a, +1);
            const Eigen::Index f = static_cast<Eigen::Index>(i) * d + a;
            for (Eigen::Index s = 0; s < S; ++s)
                D(f, s) = (basis.spatial_value(static_cast<std::size_t>(s), g.position(j)) -
                           basis.spatial_value(static_cast<std::size_t>(s), g.position(i))) / h;
            dphi(f) = (phi[j] - phi[i]) / h;
            lm(f) = log_mean(phi[i], phi[j]);
        }
    const Eigen::VectorXd b = D.transpose() * dphi * vol;
    const Eigen::MatrixXd Q = D.transpose() * lm.asDiagonal() * D * vol;
    const auto opt = maximize_concave(b, 0.5 * (Q + Q.transpose()));
    VariationalReport r;
    r.basis_value = opt.value;
    r.coefficients = to_std(opt.c);
    r.rank = opt.rank;
    r.dissipation = entropy_dissipation(field, model);
    r.quarter_dissipation = 0.25 * r.dissipation;
    if (*std::min_element(phi.begin(), phi.end()) > 0.0) {
        double v = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const std::size_t j = g.neighbor(i, a, +1);
                const double dH = 0.5 * (std::log(phi[j]) - std::log(phi[i])) / h;
                const double dP = (phi[j] - phi[i]) / h;
                v += dP * dH - log_mean(phi[i], phi[j]) * dH * dH;
            }
        r.value_at_optimizer = v * vol;
    } else {
        r.value_at_optimizer = std::nan("");
    }
    return r;
}

RateReport recover_control(const SolutionBundle& bundle, const NonlinearityModel& model, double ridge) {
    const Grid& g = bundle.grid;
    const int d = g.dim();
    const double h = g.h(), vol = g.cell_volume();
    const auto& p = bundle.params;
    if (bundle.snapshots.size() != bundle.steps + 1)
        throw Error(ErrorKind::Validation, "control recovery needs every solver step (snapshot_stride = 1)");
    if (!(ridge >= 0.0)) throw Error(ErrorKind::Validation, "ridge must be >= 0");
    const bool implicit = p.scheme == Scheme::SemiImplicit;
    RateReport r;
    r.method = RateMethod::ControlNorm;
    FaceOperator A(g, ridge, 0.0);
    std::vector<double> rhs(g.size()), H(g.size(), 0.0), u(g.size());
    double cost = 0.0;
    for (std::size_t n = 0; n + 1 < bundle.snapshots.size(); ++n) {
        const auto& now = bundle.snapshots[n];
        const auto& next = bundle.snapshots[n + 1];
        const auto& level = implicit ? next : now;
        const double tau = next.time - now.time;
        for (std::size_t i = 0; i < g.size(); ++i)
            u[i] = p.diffusion_scale * model.phi(std::max(level.values[i], 0.0)) + p.viscosity * level.values[i];
        for (std::size_t i = 0; i < g.size(); ++i) {
            double lap = 0.0;
            for (int a = 0; a < d; ++a) lap += u[g.neighbor(i, a, +1)] - 2.0 * u[i] + u[g.neighbor(i, a, -1)];
            rhs[i] = (next.values[i] - now.values[i]) / tau - lap / (h * h);
        }
        double mean = 0.0;
        for (double v : rhs) mean += v;
        mean /= static_cast<double>(rhs.size());
        for (double& v : rhs) v -= mean;
        r.max_mean_projection = std::max(r.max_mean_projection, std::abs(mean));
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const double w = model.phi(std::max(0.5 * (now.values[i] + now.values[g.neighbor(i, a, +1)]), 0.0));
                if (!(w > 1e-14))
                    throw Error(ErrorKind::Ellipticity, "density touches 0 at t = " + std::to_string(now.time));
                A.face_weights[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] = w;
            }
        const auto cg = conjugate_gradient(A, rhs, H, 1e-12, 0, ridge == 0.0);
        r.max_solver_residual = std::max(r.max_solver_residual, cg.relative_residual);
        double slice = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const double dH = (H[g.neighbor(i, a, +1)] - H[i]) / h;
                slice += A.face_weights[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] * dH * dH;
            }
        cost += 0.5 * tau * slice * vol;
        r.H_slices.push_back(H);
        r.slice_times.push_back(now.time);
    }
    r.dynamic = cost;
    r.total = cost;
    r.converged = true;
    return r;
}

double control_gradient_error(const SolutionBundle& bundle, const NonlinearityModel& model,
                              const RateReport& recovered, const SpaceTimeFunction& H) {
    const Grid& g = bundle.grid;
    const int d = g.dim();
    if (recovered.H_slices.size() + 1 != bundle.snapshots.size())
        throw Error(ErrorKind::Validation, "recovered slices do not match the bundle");
    double err = 0.0, ref = 0.0;
    for (std::size_t n = 0; n < recovered.H_slices.size(); ++n) {
        const auto& rho = bundle.snapshots[n].values;
        const auto& Hn = recovered.H_slices[n];
        const double t = bundle.snapshots[n].time, tau = bundle.snapshots[n + 1].time - t;
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const std::size_t j = g.neighbor(i, a, +1);
                const double w = model.phi(std::max(0.5 * (rho[i] + rho[j]), 0.0));
                const double exact = H.grad(t, g.face_position(i, a))[static_cast<std::size_t>(a)];
                const double rec = (Hn[j] - Hn[i]) / g.h();
                err += tau * w * (rec - exact) * (rec - exact);
                ref += tau * w * exact * exact;
            }
    }
    return ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err);
}

ControlField recovered_control_field(const SolutionBundle& bundle, const RateReport& recovered) {
    const Grid& g = bundle.grid;
    const int d = g.dim();
    std::vector<std::vector<double>> faces;
    for (const auto& H : recovered.H_slices) {
        std::vector<double> f(g.size() * static_cast<std::size_t>(d));
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a)
                f[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] = (H[g.neighbor(i, a, +1)] - H[i]) / g.h();
        faces.push_back(std::move(f));
    }
    return ControlField::tabulated(ControlField::Kind::Potential, recovered.slice_times, std::move(faces));
}

RateTotal rate_total(const SolutionBundle& bundle, double gamma, const NonlinearityModel& model,
                     const TestBasis& basis, const DiffusionConvention& conv, double ridge) {
    RateTotal t;
    t.sup_form = i_up(bundle, basis, gamma, model, conv);
    t.control_form = recover_control(bundle, model, ridge);
    t.control_form.static_part = t.sup_form.static_part;
    t.control_form.total = t.control_form.static_part + t.control_form.dynamic;
    const double a = t.sup_form.dynamic, b = t.control_form.dynamic;
    const double scale = std::max(std::abs(a), std::abs(b));
    t.relative_gap = scale < 1e-12 ? 0.0 : std::abs(a - b) / std::max(std::abs(b), 1e-300);
    return t;
}

void write_rate_report_json(const RateReport& report, const std::string& path) {
    nlohmann::json j;
    j["static"] = report.static_part;
    j["dynamic"] = report.dynamic;
    j["total"] = report.total;
    j["method"] = report.method == RateMethod::SupJ ? "sup_J" : "control_norm";
    j["coefficients"] = report.coefficients;
    j["gradient_norm"] = report.gradient_norm;
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    j["rank"] = report.rank;
    j["basis_size"] = report.basis_size;
    j["reduced_basis"] = report.reduced;
    j["gram_condition"] = report.gram_condition;
    j["max_mean_projection"] = report.max_mean_projection;
    j["max_solver_residual"] = report.max_solver_residual;
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    os << j.dump(2) << '\n';
}

} // namespace zrp
