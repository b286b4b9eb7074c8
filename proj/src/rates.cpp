// Copyright (C) 2026 zrplab authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
#include "zrplab/rates.hpp"

#include "zrplab/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace zrp {

namespace {

constexpr std::int64_t kMaxSeriesTerms = 10'000'000;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

} // namespace

JumpRate::JumpRate(std::vector<double> table, double tail_slope, std::string name)
    : table_(std::move(table)), slope_(tail_slope), name_(std::move(name)) {
    if (table_.empty()) throw Error(ErrorKind::InvalidRate, "rate table is empty");
    for (double v : table_)
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidRate, "rate table has non-finite entry");
    if (!std::isfinite(slope_) || slope_ < 0.0)
        throw Error(ErrorKind::InvalidRate, "tail_slope must be finite and >= 0");
    if (table_.size() == 1 && slope_ == 0.0)
        throw Error(ErrorKind::InvalidRate, "table {lambda(0)} with zero slope has no positive rates");
    K_ = static_cast<std::int64_t>(table_.size()) - 1;
    suffix_min_.assign(table_.size(), 0.0);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = table_.size(); i-- > 0;) {
        m = std::min(m, table_[i]);
        suffix_min_[i] = m;
    }
}

JumpRate JumpRate::linear() { return JumpRate({0.0, 1.0}, 1.0, "linear"); }

JumpRate JumpRate::indicator() { return JumpRate({0.0, 1.0}, 0.0, "indicator"); }

JumpRate JumpRate::odd_perturbed(int table_size) {
    if (table_size % 2 != 0) ++table_size;
    return tabulated(
        [](std::int64_t k) { return static_cast<double>(k) + (k % 2 == 1 ? 0.5 : 0.0); },
        table_size, 1.0, "odd_perturbed");
}

JumpRate JumpRate::tabulated(const std::function<double(std::int64_t)>& f, int K,
                             double tail_slope, std::string name) {
    std::vector<double> t(static_cast<std::size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) t[static_cast<std::size_t>(k)] = f(k);
    return JumpRate(std::move(t), tail_slope, std::move(name));
}

double JumpRate::inf_from(std::int64_t k) const noexcept {
    if (k > K_) return (*this)(k);
    // Tail values are >= lambda(K), which the suffix minimum already covers.
    return suffix_min_[static_cast<std::size_t>(k)];
}

double JumpRate::critical_fugacity() const noexcept {
    return bounded() ? table_.back() : std::numeric_limits<double>::infinity();
}

void JumpRate::validate() const {
    if (table_[0] != 0.0)
        throw Error(ErrorKind::InvalidRate, "lambda(0) = " + fmt(table_[0]) + " must be 0");
    for (std::size_t k = 1; k < table_.size(); ++k)
        if (!(table_[k] > 0.0))
            throw Error(ErrorKind::InvalidRate,
                        "lambda(" + std::to_string(k) + ") = " + fmt(table_[k]) + " must be > 0");
}

AssumptionReport check_assumptions(const JumpRate& rate, std::int64_t scan_depth) {
    rate.validate();
    const std::int64_t K = rate.table_max();
    if (scan_depth < 2 * K)
        throw Error(ErrorKind::Validation, "scan_depth must be at least 2K = " + std::to_string(2 * K));
    scan_depth = std::max<std::int64_t>(scan_depth, 2);

    AssumptionReport rep;
    rep.scan_depth = scan_depth;
    // Consecutive differences bound every longer difference quotient by telescoping;
    // beyond K every difference equals the tail slope.
    double cmax = rate.tail_slope();
    double dmin = rate.tail_slope();
    for (std::int64_t k = 0; k < scan_depth; ++k) {
        const double diff = rate(k + 1) - rate(k);
        cmax = std::max(cmax, diff);
        dmin = std::min(dmin, diff);
    }
    rep.lipschitz_c = cmax;
    rep.a1_ok = std::isfinite(cmax);
    rep.monotone = dmin >= 0.0;

    if (rep.monotone && rate.tail_slope() > 0.0) {
        // For n > K both endpoints are on the affine tail: gap = slope * k.
        // Mixed pairs n <= K < n + k are covered by the scan since scan_depth >= 2K.
        for (std::int64_t k = 1; k <= std::max<std::int64_t>(K, 1) + 1; ++k) {
            double delta = rate.tail_slope() * static_cast<double>(k);
            for (std::int64_t n = 0; n + k <= scan_depth; ++n) delta = std::min(delta, rate(n + k) - rate(n));
            if (delta > 0.0) {
                rep.gap_pair = GapWitness{k, delta};
                break;
            }
        }
    }
    rep.a2_ok = rep.gap_pair.has_value();
    return rep;
}

namespace {

/// log t_k = k log phi - sum_{l<=k} log lambda(l), truncated where the
/// k^2-weighted remainder is below `rel` times the partial sum.
struct SeriesTerms {
    std::vector<double> log_terms;
    double log_z = 0.0;
    double tail_bound = 0.0;
};

SeriesTerms series_terms(const JumpRate& rate, double phi, double rel) {
    rate.validate();
    if (!(phi >= 0.0) || !std::isfinite(phi))
        throw Error(ErrorKind::Domain, "fugacity must be finite and >= 0, got " + fmt(phi));
    SeriesTerms s;
    s.log_terms.push_back(0.0);
    if (phi == 0.0) return s;
    if (phi >= rate.critical_fugacity())
        throw Error(ErrorKind::Divergence,
                    "partition series diverges at fugacity " + fmt(phi) +
                        "; critical fugacity is " + fmt(rate.critical_fugacity()));
    const double log_phi = std::log(phi);
    const double log_rel = std::log(rel);
    if (rate.bounded()) {
        // Geometric tail with ratio phi/lambda(K): predict the length before summing.
        const double predicted = static_cast<double>(rate.table_max()) +
                                 (40.0 - log_rel) / -std::log(phi / rate.critical_fugacity());
        if (predicted > static_cast<double>(kMaxSeriesTerms))
            throw Error(ErrorKind::Divergence, "partition series at fugacity " + fmt(phi) +
                                                   " needs more than " +
                                                   std::to_string(kMaxSeriesTerms) +
                                                   " terms; critical fugacity is " +
                                                   fmt(rate.critical_fugacity()));
    }
    double log_z = 0.0;
    for (std::int64_t k = 0; k < kMaxSeriesTerms; ++k) {
        const double lam_next = rate(k + 1);
        const double log_next = s.log_terms.back() + log_phi - std::log(lam_next);
        const double q = phi / rate.inf_from(k + 1);
        const double w = static_cast<double>(k + 2) / static_cast<double>(k + 1);
        const double qq = q * w * w;
        if (qq < 1.0) {
            const double log_tail = 2.0 * std::log(static_cast<double>(k + 1)) + log_next -
                                    std::log1p(-qq);
            if (log_tail <= log_rel + log_z) {
                s.log_z = log_z;
                s.tail_bound = std::exp(log_tail - log_z);
                return s;
            }
        }
        s.log_terms.push_back(log_next);
        log_z = log_add(log_z, log_next);
    }
    throw Error(ErrorKind::Divergence, "partition series did not reach tolerance within " +
                                           std::to_string(kMaxSeriesTerms) + " terms at fugacity " +
                                           fmt(phi));
}

double series_rel(double tol) { return std::min(tol, 1e-16); }

} // namespace

PartitionResult partition_Z(const JumpRate& rate, double fugacity, double tol) {
    const auto s = series_terms(rate, fugacity, series_rel(tol));
    PartitionResult r;
    r.log_value = s.log_z;
    r.value = std::exp(s.log_z);
    r.truncation = static_cast<std::int64_t>(s.log_terms.size()) - 1;
    r.tail_bound = s.tail_bound;
    return r;
}

EquilibriumLaw equilibrium_law(const JumpRate& rate, double fugacity, double tol) {
    const auto s = series_terms(rate, fugacity, series_rel(tol));
    EquilibriumLaw law;
    law.fugacity = fugacity;
    law.truncation = static_cast<std::int64_t>(s.log_terms.size()) - 1;
    law.log_z = s.log_z;
    law.z_value = std::exp(s.log_z);
    law.tail_bound = s.tail_bound;
    law.pmf.resize(s.log_terms.size());
    double total = 0.0;
    for (std::size_t k = 0; k < law.pmf.size(); ++k) {
        law.pmf[k] = std::exp(s.log_terms[k] - s.log_z);
        total += law.pmf[k];
    }
    // Renormalise the round-off of the log-space sum so that sum pmf <= 1.
    if (total > 1.0)
        for (double& p : law.pmf) p /= total;
    double m = 0.0, m2 = 0.0, lm = 0.0;
    for (std::size_t k = 0; k < law.pmf.size(); ++k) {
        const double kk = static_cast<double>(k);
        m += kk * law.pmf[k];
        m2 += kk * kk * law.pmf[k];
        lm += rate(static_cast<std::int64_t>(k)) * law.pmf[k];
    }
    law.mean = m;
    law.variance = std::max(0.0, m2 - m * m);
    law.rate_mean = lm;
    return law;
}

double mean_density(const JumpRate& rate, double fugacity, double tol) {
    return equilibrium_law(rate, fugacity, tol).mean;
}

EquilibriumLaw law_of_density(const JumpRate& rate, double rho, double tol) {
    rate.validate();
    if (!(rho >= 0.0) || !std::isfinite(rho))
        throw Error(ErrorKind::Domain, "density must be finite and >= 0, got " + fmt(rho));
    if (rho == 0.0) return equilibrium_law(rate, 0.0, tol);

    const double crit = rate.critical_fugacity();
    const bool bounded = std::isfinite(crit);
    double lo = 0.0;
    double hi = bounded ? 0.5 * crit : std::max(1.0, rho * rate(1));
    EquilibriumLaw law_hi = equilibrium_law(rate, hi, tol);
    while (law_hi.mean < rho) {
        lo = hi;
        if (bounded) {
            hi = 0.5 * (hi + crit);
            if (crit - hi <= 1e-12 * crit)
                throw Error(ErrorKind::Range, "density " + fmt(rho) +
                                                  " exceeds the reachable range; sup density ~ " +
                                                  fmt(law_hi.mean));
        } else {
            hi *= 2.0;
        }
        try {
            law_hi = equilibrium_law(rate, hi, tol);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Divergence) throw;
            throw Error(ErrorKind::Range, "density " + fmt(rho) +
                                              " exceeds the reachable range; sup density ~ " +
                                              fmt(law_hi.mean));
        }
    }

    double phi = hi;
    EquilibriumLaw law = law_hi;
    for (int it = 0; it < 60; ++it) {
        const double f = law.mean - rho;
        if (std::abs(f) <= 1e-15 * std::max(1.0, rho)) break;
        if (f > 0.0) hi = phi; else lo = phi;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        double next = law.variance > 0.0 ? phi - f * phi / law.variance : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        phi = next;
        law = equilibrium_law(rate, phi, tol);
    }
    if (std::abs(law.mean - rho) > tol * std::max(1.0, rho))
        throw Error(ErrorKind::Convergence, "density inversion stalled at rho = " + fmt(rho) +
                                                " (mean " + fmt(law.mean) + ")");
    if (std::abs(law.rate_mean - law.fugacity) > tol * std::max(1.0, law.fugacity))
        throw Error(ErrorKind::Inconsistency,
                    "E[lambda(eta(0))] = " + fmt(law.rate_mean) + " differs from fugacity " +
                        fmt(law.fugacity) + "; partition truncation too coarse");
    return law;
}

double fugacity_of_density(const JumpRate& rate, double rho, double tol) {
    return law_of_density(rate, rho, tol).fugacity;
}

// ---------------------------------------------------------------------------

EquilibriumSampler::EquilibriumSampler(const EquilibriumLaw& law) {
    if (law.pmf.empty()) throw Error(ErrorKind::Validation, "empty equilibrium law");
    cdf_.resize(law.pmf.size());
    double c = 0.0;
    for (std::size_t k = 0; k < law.pmf.size(); ++k) {
        if (!(law.pmf[k] >= 0.0)) throw Error(ErrorKind::Validation, "negative pmf entry");
        c += law.pmf[k];
        cdf_[k] = c;
    }
    // The omitted tail is folded into the last atom.
    cdf_.back() = std::numeric_limits<double>::infinity();
}

std::int32_t EquilibriumSampler::operator()(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    return static_cast<std::int32_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
}

std::vector<std::int32_t> sample_equilibrium(const EquilibriumLaw& law, std::size_t n_sites,
                                             std::uint64_t seed) {
    EquilibriumSampler sampler(law);
    std::mt19937_64 rng(seed);
    std::vector<std::int32_t> out(n_sites);
    for (auto& v : out) v = sampler(rng);
    return out;
}

RelativeEntropy relative_entropy_field(const DensityField& rho0, double gamma,
                                       const JumpRate& rate, double tol) {
    for (double v : rho0.values)
        if (!(v >= 0.0)) throw Error(ErrorKind::Domain, "density field has a negative entry");
    const auto law_g = law_of_density(rate, gamma, tol);
    const double log_phi_g = std::log(law_g.fugacity);

    std::map<double, std::pair<double, double>> cache;
    auto cell = [&](double rho) {
        auto it = cache.find(rho);
        if (it != cache.end()) return it->second;
        const auto law = law_of_density(rate, rho, tol);
        const double lead = rho == 0.0 ? 0.0 : rho * (std::log(law.fugacity) - log_phi_g);
        const double closed = lead - (law.log_z - law_g.log_z);
        const double quad = integrate(
            [&](double s) { return std::log(fugacity_of_density(rate, s, tol)) - log_phi_g; },
            gamma, rho, 2, 16);
        return cache.emplace(rho, std::make_pair(closed, quad)).first->second;
    };
    RelativeEntropy out;
    for (double v : rho0.values) {
        const auto [c, q] = cell(v);
        out.value += c;
        out.quadrature += q;
    }
    out.value *= rho0.grid.cell_volume();
    out.quadrature *= rho0.grid.cell_volume();
    return out;
}

// ---------------------------------------------------------------------------

MomentResult moment_check(const JumpRate& rate, double fugacity, const MomentWeight& weight,
                          double tol) {
    const auto base = series_terms(rate, fugacity, series_rel(tol));
    MomentResult res;
    if (weight.theta == 0.0) {
        res.status = MomentResult::Status::Certified;
        res.estimate = 1.0;
        res.tail_bound = base.tail_bound;
        res.truncation = static_cast<std::int64_t>(base.log_terms.size()) - 1;
        return res;
    }
    const double log_phi = fugacity > 0.0 ? std::log(fugacity) : -INFINITY;
    const std::int64_t k_cap = std::max<std::int64_t>(4 * rate.table_max(), 20000);

    struct Attempt {
        bool ok = false;
        double estimate = 0.0, tail = 0.0;
        std::int64_t truncation = 0;
    };
    auto attempt = [&](double theta) {
        Attempt a;
        double log_t = 0.0;          // log of unweighted term t_k
        double la = theta * weight.w(0.0);
        double log_s = la;
        double prev_ratio = INFINITY;
        for (std::int64_t k = 0; k < k_cap; ++k) {
            const double log_t_next = log_t + log_phi - std::log(rate(k + 1));
            const double la_next = log_t_next + theta * weight.w(static_cast<double>(k + 1));
            const double log_ratio = la_next - la;
            const double ratio = std::exp(log_ratio);
            if (ratio < 1.0 && ratio <= prev_ratio) {
                const double log_tail = la_next - std::log1p(-ratio);
                if (log_tail <= std::log(tol) + log_s) {
                    a.ok = true;
                    a.tail = std::exp(log_tail - log_s);
                    a.estimate = std::exp(log_s - base.log_z);
                    a.truncation = k;
                    return a;
                }
            }
            prev_ratio = ratio;
            log_t = log_t_next;
            la = la_next;
            log_s = log_add(log_s, la);
            if (!std::isfinite(la) && la > 0) break;
        }
        return a;
    };
    for (int j = 0; j <= 20; ++j) {
        const double theta = weight.theta / std::ldexp(1.0, j);
        const Attempt a = attempt(theta);
        if (!a.ok) continue;
        res.theta_certified = theta;
        if (j == 0) {
            res.status = MomentResult::Status::Certified;
            res.estimate = a.estimate;
            res.tail_bound = a.tail;
            res.truncation = a.truncation;
        }
        break;
    }
    if (res.status != MomentResult::Status::Certified) res.estimate = INFINITY;
    return res;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (trim(text.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::Config, "key '" + key + "': cannot parse number '" + text + "'");
}

} // namespace

JumpRate parse_rate_config(const std::string& text) {
    std::istringstream in(text);
    std::string line, name = "custom";
    std::optional<std::vector<double>> table;
    std::optional<double> slope;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Config, "expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "name") {
            name = value;
        } else if (key == "table") {
            std::vector<double> t;
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ',')) t.push_back(parse_number(key, trim(item)));
            table = std::move(t);
        } else if (key == "tail_slope") {
            slope = parse_number(key, value);
        } else {
            throw Error(ErrorKind::Config, "unknown rate key '" + key + "'");
        }
    }
    if (!table) throw Error(ErrorKind::Config, "rate config is missing 'table'");
    if (!slope) throw Error(ErrorKind::Config, "rate config is missing 'tail_slope'");
    return JumpRate(std::move(*table), *slope, name);
}

JumpRate load_rate_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open rate config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_rate_config(ss.str());
}

std::string format_rate_config(const JumpRate& rate) {
    std::ostringstream os;
    os << "name = " << rate.name() << "\ntable = ";
    for (std::size_t i = 0; i < rate.table().size(); ++i)
        os << (i ? ", " : "") << fmt(rate.table()[i]);
    os << "\ntail_slope = " << fmt(rate.tail_slope()) << "\n";
    return os.str();
}

void write_nonlinearity_csv(const NonlinearityModel& model, std::ostream& out) {
    out << "rho,phi,dphi\n";
    out.precision(17);
    for (std::size_t i = 0; i < model.rho_grid().size(); ++i)
        out << model.rho_grid()[i] << ',' << model.phi_grid()[i] << ',' << model.dphi_grid()[i]
            << '\n';
}

} // namespace zrp
