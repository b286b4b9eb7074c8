// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/skeleton.hpp"

#include "zrplab/elliptic.hpp"
#include "zrplab/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <cstring>
#include <sstream>

namespace zrp {

ControlField ControlField::none() { return {}; }

ControlField ControlField::vector(std::function<Point(double, const Point&)> g) {
    ControlField c;
    c.kind_ = Kind::Vector;
    c.g_ = std::move(g);
    return c;
}

ControlField ControlField::potential(SpaceTimeFunction H) {
    ControlField c;
    c.kind_ = Kind::Potential;
    c.H_ = std::move(H);
    return c;
}

ControlField ControlField::tabulated(Kind kind, std::vector<double> times,
                                     std::vector<std::vector<double>> faces) {
    if (kind == Kind::None) return none();
    if (times.empty() || times.size() != faces.size())
        throw Error(ErrorKind::Validation, "tabulated control needs one face vector per slice time");
    if (!std::is_sorted(times.begin(), times.end()))
        throw Error(ErrorKind::Validation, "tabulated control slice times must increase");
    ControlField c;
    c.kind_ = kind;
    c.times_ = std::move(times);
    c.faces_ = std::move(faces);
    return c;
}

void ControlField::face_values(const Grid& grid, double t, std::span<double> out) const {
    const int d = grid.dim();
    const std::size_t nf = grid.size() * static_cast<std::size_t>(d);
    if (kind_ == Kind::None) {
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(nf), 0.0);
        return;
    }
    if (is_tabulated()) {
        auto it = std::upper_bound(times_.begin(), times_.end(), t + 1e-12 * (1.0 + std::abs(t)));
        const std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
        if (faces_[k].size() != nf) throw Error(ErrorKind::Validation, "tabulated control does not match the grid");
        std::copy(faces_[k].begin(), faces_[k].end(), out.begin());
        return;
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int a = 0; a < d; ++a) {
            const Point x = grid.face_position(i, a);
            const Point v = kind_ == Kind::Vector ? g_(t, x) : H_.grad(t, x);
            out[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] = v[static_cast<std::size_t>(a)];
        }
}

void control_flux(const Grid& grid, const NonlinearityModel& model, const ControlField& control,
                  const SolverParams& params, double t, std::span<const double> rho,
                  std::span<double> sigma_g, double* g_norm2, double* sigma_max) {
    const int d = grid.dim();
    control.face_values(grid, t, sigma_g);
    double n2 = 0.0, smax = 0.0;
    if (control.kind() != ControlField::Kind::None) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const std::size_t f = i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a);
                const double mean = 0.5 * (rho[i] + rho[grid.neighbor(i, a, +1)]);
                const double root = model.sqrt_phi(std::max(mean, 0.0));
                const double sigma = std::min(root, params.sigma_cap);
                const double g = control.kind() == ControlField::Kind::Potential ? root * sigma_g[f] : sigma_g[f];
                sigma_g[f] = sigma * g;
                n2 += g * g;
                smax = std::max(smax, sigma);
            }
    }
    if (g_norm2) *g_norm2 = n2 * grid.cell_volume();
    if (sigma_max) *sigma_max = smax;
}

namespace {

std::vector<double> map_values(std::span<const double> v, const std::function<double(double)>& f) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
    return out;
}

class Stepper {
public:
    Stepper(const Grid& g, const NonlinearityModel& m, const ControlField& c, const SolverParams& p)
        : grid_(g), model_(m), control_(c), p_(p), sg_(g.size() * static_cast<std::size_t>(g.dim())),
          op_(g, 1.0, 0.0) {}

    /// Divergence of the explicit part of the flux, returning the control norm at t.
    void explicit_divergence(double t, std::span<const double> rho, bool with_diffusion,
                             std::vector<double>& div, double& g_norm2, double& sigma_max) {
        const int d = grid_.dim();
        const double h = grid_.h();
        control_flux(grid_, model_, control_, p_, t, rho, sg_, &g_norm2, &sigma_max);
        std::vector<double> phi;
        if (with_diffusion) phi = map_values(rho, [&](double x) { return model_.phi(std::max(x, 0.0)); });
        std::fill(div.begin(), div.end(), 0.0);
        for (std::size_t i = 0; i < grid_.size(); ++i)
            for (int a = 0; a < d; ++a) {
                const std::size_t j = grid_.neighbor(i, a, +1);
                double J = sg_[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)];
                if (with_diffusion)
                    J -= (p_.diffusion_scale * (phi[j] - phi[i]) + p_.viscosity * (rho[j] - rho[i])) / h;
                div[i] += J / h;
                div[j] -= J / h;
            }
    }

    double chord(double x, double y) const {
        const double lo = std::max(std::min(x, y), 0.0), hi = std::max(std::max(x, y), 0.0);
        if (hi - lo > 1e-9 * (1.0 + hi)) return (model_.phi(hi) - model_.phi(lo)) / (hi - lo);
        return model_.dphi(std::max(0.5 * (lo + hi), p_.dphi_floor));
    }

    /// Implicit Euler for the diffusion by Picard iteration on chord slopes.
    int implicit_solve(std::span<const double> rhs, std::vector<double>& x, double dt) {
        const int d = grid_.dim();
        std::vector<double> y(x);
        for (int sweep = 1; sweep <= p_.picard_max; ++sweep) {
            for (std::size_t i = 0; i < grid_.size(); ++i)
                for (int a = 0; a < d; ++a) {
                    const std::size_t j = grid_.neighbor(i, a, +1);
                    op_.face_weights[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] =
                        dt * (p_.diffusion_scale * chord(x[i], x[j]) + p_.viscosity);
                }
            conjugate_gradient(op_, rhs, y, p_.cg_tol);
            double change = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                change = std::max(change, std::abs(y[i] - x[i]));
                scale = std::max(scale, std::abs(y[i]));
            }
            x = y;
            if (change <= p_.picard_tol * (1.0 + scale)) return sweep;
        }
        throw Error(ErrorKind::Convergence,
                    "lagged-diffusivity iteration did not converge in " + std::to_string(p_.picard_max) + " sweeps");
    }

private:
    const Grid& grid_;
    const NonlinearityModel& model_;
    const ControlField& control_;
    const SolverParams& p_;
    std::vector<double> sg_;
    FaceOperator op_;
};

void validate(const DensityField& rho0, const SolverParams& p) {
    for (double v : rho0.values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::Domain, "initial density must be finite and >= 0");
    if (!(p.dt > 0.0) || !(p.t_end > 0.0)) throw Error(ErrorKind::Validation, "dt and t_end must be positive");
    if (p.snapshot_stride < 1) throw Error(ErrorKind::Validation, "snapshot_stride must be >= 1");
    if (!(p.viscosity >= 0.0)) throw Error(ErrorKind::Validation, "viscosity must be >= 0");
    if (!(p.diffusion_scale > 0.0)) throw Error(ErrorKind::Validation, "diffusion_scale must be positive");
}

std::vector<double> trapezoid_weights(std::span<const double> t) {
    std::vector<double> w(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k) {
        w[k - 1] += 0.5 * (t[k] - t[k - 1]);
        w[k] += 0.5 * (t[k] - t[k - 1]);
    }
    return w;
}

double trapezoid(std::span<const double> t, std::span<const double> v) {
    const auto w = trapezoid_weights(t);
    double s = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) s += w[k] * v[k];
    return s;
}

} // namespace

SolutionBundle solve_skeleton(const NonlinearityModel& model, const DensityField& rho0,
                              const ControlField& control, const SolverParams& params) {
    validate(rho0, params);
    const Grid& grid = rho0.grid;
    const int d = grid.dim();
    const double h = grid.h();
    const std::size_t steps = static_cast<std::size_t>(std::ceil(params.t_end / params.dt - 1e-9));
    const double dt = params.t_end / static_cast<double>(steps);
    if (params.scheme == Scheme::Explicit) {
        const double limit =
            params.cfl_safety * h * h / (2.0 * d * (params.diffusion_scale * model.A_est() + params.viscosity));
        if (dt > limit) {
            std::ostringstream os;
            os << "explicit step dt = " << dt << " exceeds the stability limit " << limit;
            throw Error(ErrorKind::Validation, os.str());
        }
    }

    SolutionBundle b{grid, params, model, control, {}, {}, steps};
    b.params.dt = dt;
    Stepper stepper(grid, model, control, params);
    std::vector<double> rho = rho0.values, div(grid.size()), rhs(grid.size());
    const double gamma = model.gamma();
    const double vol = grid.cell_volume();
    b.snapshots.emplace_back(grid, rho, 0.0);

    auto record = [&](double t, double g_norm2) {
        auto& s = b.series;
        double mass = 0.0, l2 = 0.0, ent = 0.0;
        for (double v : rho) {
            mass += v;
            l2 += (v - gamma) * (v - gamma);
            ent += model.psi(std::max(v, 0.0));
        }
        s.times.push_back(t);
        s.mass.push_back(mass * vol);
        s.l2_gamma.push_back(l2 * vol);
        s.entropy.push_back(ent * vol);
        s.dissipation.push_back(
            face_gradient_energy(grid, map_values(rho, [&](double x) { return model.sqrt_phi(std::max(x, 0.0)); })));
        s.theta_energy.push_back(
            face_gradient_energy(grid, map_values(rho, [&](double x) { return model.theta(std::max(x, 0.0)); })));
        s.grad_energy.push_back(face_gradient_energy(grid, rho));
        s.control_norm2.push_back(g_norm2);
    };

    for (std::size_t n = 0;; ++n) {
        const double t = static_cast<double>(n) * dt;
        const bool last = n == steps;
        double g_norm2 = 0.0, sigma_max = 0.0;
        const bool explicit_scheme = params.scheme == Scheme::Explicit;
        stepper.explicit_divergence(t, rho, explicit_scheme, div, g_norm2, sigma_max);
        b.sigma_sup = std::max(b.sigma_sup, sigma_max);
        record(t, g_norm2);
        if (last) break;

        const double mass_before = b.series.mass.back();
        if (explicit_scheme) {
            for (std::size_t i = 0; i < rho.size(); ++i) rho[i] -= dt * div[i];
        } else {
            for (std::size_t i = 0; i < rho.size(); ++i) rhs[i] = rho[i] - dt * div[i];
            b.max_picard_sweeps = std::max(b.max_picard_sweeps, stepper.implicit_solve(rhs, rho, dt));
            // The exact implicit solution is nonnegative (M-matrix); clear CG round-off below zero.
            const double noise = 1e-12 * (1.0 + *std::max_element(rho.begin(), rho.end()));
            for (double& v : rho)
                if (v < 0.0 && v > -noise) v = 0.0;
        }
        const auto lowest = std::min_element(rho.begin(), rho.end());
        if (*lowest < -params.positivity_floor) {
            std::ostringstream os;
            os << "step " << n + 1 << " (t = " << t + dt << ") produced density " << *lowest << " in cell "
               << (lowest - rho.begin());
            throw Error(ErrorKind::NegativeDensity, os.str());
        }
        double mass_after = 0.0;
        for (double v : rho) mass_after += v;
        mass_after *= vol;
        if (mass_before > 0.0) b.max_mass_drift = std::max(b.max_mass_drift, std::abs(mass_after - mass_before) / mass_before);
        if ((n + 1) % static_cast<std::size_t>(params.snapshot_stride) == 0 || n + 1 == steps)
            b.snapshots.emplace_back(grid, rho, n + 1 == steps ? params.t_end : t + dt);
    }
    b.series.times.back() = params.t_end;
    const auto& s = b.series;
    b.accumulated_dissipation = trapezoid(s.times, s.dissipation);
    b.accumulated_theta_energy = trapezoid(s.times, s.theta_energy);
    b.accumulated_grad_energy = trapezoid(s.times, s.grad_energy);
    // The scheme holds the control fixed on each step, so its norm integrates exactly by the left-point rule.
    for (std::size_t k = 0; k + 1 < s.times.size(); ++k) b.control_norm2 += (s.times[k + 1] - s.times[k]) * s.control_norm2[k];
    return b;
}

SolutionBundle solve_fokker_planck(const NonlinearityModel& model, const DensityField& rho0,
                                   const SpaceTimeFunction& H, const SolverParams& params) {
    SolverParams p = params;
    p.sigma_cap = std::numeric_limits<double>::infinity();
    return solve_skeleton(model, rho0, ControlField::potential(H), p);
}

double weak_residual(const SolutionBundle& bundle, const ControlField& control,
                     const SpaceTimeFunction& psi, double t) {
    const Grid& g = bundle.grid;
    const int d = g.dim();
    const auto& p = bundle.params;
    std::vector<double> times;
    std::vector<const DensityField*> fields;
    for (const auto& f : bundle.snapshots)
        if (f.time <= t + 1e-12 * (1.0 + t)) {
            times.push_back(f.time);
            fields.push_back(&f);
        }
    if (fields.empty() || std::abs(times.back() - t) > 1e-9 * (1.0 + t))
        throw Error(ErrorKind::Validation, "no snapshot at the requested time");
    const double vol = g.cell_volume();
    auto pairing = [&](const DensityField& f) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += f.values[i] * psi.value(f.time, g.position(i));
        return s * vol;
    };
    std::vector<double> sg(g.size() * static_cast<std::size_t>(d));
    std::vector<double> rate(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k) {
        const auto& f = *fields[k];
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Point x = g.position(i);
            const double r = f.values[i];
            const double lap = psi.laplacian(f.time, x);
            s += (p.diffusion_scale * bundle.model.phi(std::max(r, 0.0)) + p.viscosity * r) * lap;
            if (psi.time_derivative) s += r * psi.time_derivative(f.time, x);
        }
        control_flux(g, bundle.model, control, p, f.time, f.values, sg);
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int a = 0; a < d; ++a)
                s += sg[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] *
                     psi.grad(f.time, g.face_position(i, a))[static_cast<std::size_t>(a)];
        rate[k] = s * vol;
    }
    return pairing(*fields.back()) - pairing(*fields.front()) - trapezoid(times, rate);
}

double entropy_dissipation(const DensityField& field, const NonlinearityModel& model) {
    for (double v : field.values)
        if (!(v >= 0.0)) throw Error(ErrorKind::Domain, "entropy dissipation needs a nonnegative field");
    return face_gradient_energy(field.grid, map_values(field.values, [&](double x) { return model.sqrt_phi(x); }));
}

namespace {

EstimateRatio plain_ratio(double lhs, double rhs) {
    EstimateRatio r{lhs, rhs, 0.0};
    if (rhs > 0.0) r.constant = lhs / rhs;
    else if (lhs > 1e-14) r.constant = std::numeric_limits<double>::infinity();
    return r;
}

} // namespace

EnergyReport energy_report(const SolutionBundle& b) {
    EnergyReport rep;
    const auto& s = b.series;
    const double visc = b.params.viscosity;
    const double sup_l2 = *std::max_element(s.l2_gamma.begin(), s.l2_gamma.end());
    // Without control the left side already exceeds ||rho_0||^2 by half the L2 loss,
    // so the constant multiplies the whole right side.
    rep.energy = plain_ratio(sup_l2 + b.accumulated_theta_energy + visc * b.accumulated_grad_energy,
                             s.l2_gamma.front() + b.sigma_sup * b.sigma_sup * b.control_norm2);

    // H^1_t H^{-1}_x norm of rho - gamma from the snapshots.
    const Grid& g = b.grid;
    const double gamma = b.model.gamma();
    std::vector<double> times, level;
    std::vector<double> shifted(g.size()), diff(g.size());
    for (const auto& f : b.snapshots) {
        for (std::size_t i = 0; i < g.size(); ++i) shifted[i] = f.values[i] - gamma;
        times.push_back(f.time);
        level.push_back(h_minus_one_norm2(g, shifted));
    }
    double time_part = 0.0;
    for (std::size_t k = 1; k < b.snapshots.size(); ++k) {
        const double tau = b.snapshots[k].time - b.snapshots[k - 1].time;
        for (std::size_t i = 0; i < g.size(); ++i)
            diff[i] = (b.snapshots[k].values[i] - b.snapshots[k - 1].values[i]) / tau;
        time_part += tau * h_minus_one_norm2(g, diff);
    }
    const double lhs2 = std::sqrt(trapezoid(times, level) + time_part);
    const double rhs2 = std::sqrt(s.l2_gamma.front()) +
                        (visc + b.params.diffusion_scale * b.model.A_est()) * std::sqrt(b.accumulated_grad_energy) +
                        b.sigma_sup * std::sqrt(b.control_norm2);
    rep.time_regularity = plain_ratio(lhs2, rhs2);

    const double sup_ent = *std::max_element(s.entropy.begin(), s.entropy.end());
    rep.relative_entropy = plain_ratio(sup_ent + b.accumulated_dissipation, s.entropy.front() + b.control_norm2);
    return rep;
}

std::vector<unsigned char> kinetic_function(const DensityField& field, double xi) {
    std::vector<unsigned char> chi(field.values.size());
    for (std::size_t i = 0; i < chi.size(); ++i) chi[i] = (0.0 < xi && xi < field.values[i]) ? 1 : 0;
    return chi;
}

KineticReport kinetic_diagnostics(const SolutionBundle& b, std::span<const double> xi_edges,
                                  std::span<const double> M_list) {
    if (xi_edges.size() < 2 || !std::is_sorted(xi_edges.begin(), xi_edges.end()))
        throw Error(ErrorKind::Validation, "xi grid must be increasing with at least two edges");
    KineticReport rep;
    for (const auto& f : b.snapshots) rep.sup_rho = std::max(rep.sup_rho, f.max());
    if (xi_edges.front() > 0.0 || xi_edges.back() < rep.sup_rho + 1.0)
        throw Error(ErrorKind::Validation, "xi grid must cover [0, max rho + 1]");
    rep.xi_edges.assign(xi_edges.begin(), xi_edges.end());
    rep.defect.assign(xi_edges.size() - 1, 0.0);
    rep.tail_masses.assign(M_list.size(), 0.0);
    const Grid& g = b.grid;
    const int d = g.dim();
    const double h = g.h(), vol = g.cell_volume();
    std::vector<double> times;
    for (const auto& f : b.snapshots) times.push_back(f.time);
    const auto w = trapezoid_weights(times);
    for (std::size_t k = 0; k < b.snapshots.size(); ++k) {
        const auto& v = b.snapshots[k].values;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double g2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double fwd = (v[g.neighbor(i, a, +1)] - v[i]) / h;
                const double bwd = (v[i] - v[g.neighbor(i, a, -1)]) / h;
                g2 += 0.5 * (fwd * fwd + bwd * bwd);
            }
            const double r = v[i];
            const double m = b.model.dphi(std::max(r, b.params.dphi_floor)) * g2 * vol * w[k];
            auto it = std::upper_bound(xi_edges.begin(), xi_edges.end(), r);
            const std::size_t bin = std::min<std::size_t>(
                static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - xi_edges.begin() - 1, 0)), rep.defect.size() - 1);
            rep.defect[bin] += m;
            for (std::size_t q = 0; q < M_list.size(); ++q)
                if (r >= M_list[q] && r <= M_list[q] + 1.0) rep.tail_masses[q] += m;
        }
    }
    for (double x : rep.defect) rep.defect_total += x;
    return rep;
}

std::vector<ProbeRow> uniqueness_probe(const NonlinearityModel& model,
                                       const std::function<double(const Point&)>& rho0, int d,
                                       const ControlField& control, const SolverParams& params,
                                       int base_cells, int levels, double dt_factor) {
    if (levels < 2) throw Error(ErrorKind::Validation, "uniqueness probe needs at least two levels");
    std::vector<DensityField> finals;
    std::vector<double> dts;
    for (int k = 0; k < levels; ++k) {
        const Grid grid(d, base_cells << k);
        SolverParams p = params;
        p.dt = params.dt / std::pow(dt_factor, k);
        p.snapshot_stride = std::numeric_limits<int>::max();
        auto b = solve_skeleton(model, DensityField::sample(grid, rho0), control, p);
        dts.push_back(b.params.dt);
        finals.push_back(b.final_field());
    }
    std::vector<ProbeRow> rows;
    for (int k = 0; k + 1 < levels; ++k) {
        const auto& coarse = finals[static_cast<std::size_t>(k)];
        const auto& fine = finals[static_cast<std::size_t>(k) + 1];
        std::vector<double> up(fine.grid.size());
        for (std::size_t i = 0; i < up.size(); ++i) up[i] = interpolate(coarse.grid, coarse.values, fine.grid.position(i));
        ProbeRow row{base_cells << k, dts[static_cast<std::size_t>(k)], l1_distance(fine.grid, up, fine.values), 0.0};
        if (!rows.empty() && row.distance > 0.0) row.order = std::log2(rows.back().distance / row.distance);
        rows.push_back(row);
    }
    return rows;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) os.put(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(is.get())) << (8 * k);
    if (!is) throw Error(ErrorKind::Io, "truncated field file");
    return v;
}

void put_f64(std::ostream& os, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int k = 0; k < 8; ++k) os.put(static_cast<char>((bits >> (8 * k)) & 0xff));
}

double get_f64(std::istream& is) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(is.get())) << (8 * k);
    if (!is) throw Error(ErrorKind::Io, "truncated field file");
    double x;
    std::memcpy(&x, &bits, sizeof x);
    return x;
}

} // namespace

void write_field_csv(const DensityField& field, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    os << "cell,value\n" << std::setprecision(17);
    for (std::size_t i = 0; i < field.values.size(); ++i) os << i << ',' << field.values[i] << '\n';
}

void write_fields_binary(std::span<const DensityField> fields, const std::string& path) {
    if (fields.empty()) throw Error(ErrorKind::Validation, "no fields to write");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    put_u32(os, static_cast<std::uint32_t>(fields.front().grid.dim()));
    put_u32(os, static_cast<std::uint32_t>(fields.front().grid.cells()));
    put_u32(os, static_cast<std::uint32_t>(fields.size()));
    for (const auto& f : fields) {
        if (!(f.grid == fields.front().grid)) throw Error(ErrorKind::Validation, "fields live on different grids");
        for (double v : f.values) put_f64(os, v);
    }
}

std::vector<DensityField> read_fields_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
    const int d = static_cast<int>(get_u32(is));
    const int m = static_cast<int>(get_u32(is));
    const std::uint32_t count = get_u32(is);
    const Grid g(d, m);
    std::vector<DensityField> out;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::vector<double> v(g.size());
        for (double& x : v) x = get_f64(is);
        out.emplace_back(g, std::move(v));
    }
    return out;
}

void write_series_csv(const SolutionBundle& b, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    const auto& s = b.series;
    os << "t,mass,l2_gamma,entropy,dissipation,theta_energy,grad_energy,control_norm2\n" << std::setprecision(17);
    for (std::size_t k = 0; k < s.times.size(); ++k)
        os << s.times[k] << ',' << s.mass[k] << ',' << s.l2_gamma[k] << ',' << s.entropy[k] << ','
           << s.dissipation[k] << ',' << s.theta_energy[k] << ',' << s.grad_energy[k] << ',' << s.control_norm2[k]
           << '\n';
}

} // namespace zrp
