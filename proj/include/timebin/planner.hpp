#pragma once

// Design-space tools built on the contrast model: excitation-period tuning,
// contrast-versus-period and fidelity-versus-window curves, error budgets and
// fidelity prediction.

#include "timebin/node.hpp"
#include "timebin/physics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace timebin {

// ---------------------------------------------------------------------------
// Period tuning

struct TauTuning {
    double tau_s = 0.0;
    double c_timebin = 0.0;
};

namespace detail {

inline double timebin_at(std::span<const TrapMode> modes, double tau_s) {
    return contrast_timebin(modes, tau_s).c_timebin;
}

} // namespace detail

/// Maximizes C' over [tau_min, tau_max]: grid at the given resolution, then
/// golden-section refinement within one grid step of the best point. Equal
/// values resolve to the smaller period.
inline TauTuning tune_tau(std::span<const TrapMode> modes, double tau_min_s, double tau_max_s,
                          double resolution_s = 1e-9) {
    if (!(tau_min_s > 0.0) || !(tau_max_s >= tau_min_s))
        throw std::invalid_argument("tune_tau: empty or non-positive period range");
    if (!(resolution_s > 0.0))
        throw std::invalid_argument("tune_tau: resolution must be positive");

    const auto steps = static_cast<std::size_t>(std::floor((tau_max_s - tau_min_s) / resolution_s + 1e-9));
    TauTuning best{tau_min_s, detail::timebin_at(modes, tau_min_s)};
    for (std::size_t i = 1; i <= steps; ++i) {
        const double t = tau_min_s + static_cast<double>(i) * resolution_s;
        const double c = detail::timebin_at(modes, t);
        if (c > best.c_timebin)
            best = {t, c};
    }

    double lo = std::max(tau_min_s, best.tau_s - resolution_s);
    double hi = std::min(tau_max_s, best.tau_s + resolution_s);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = detail::timebin_at(modes, x1);
    double f2 = detail::timebin_at(modes, x2);
    for (int it = 0; it < 80 && hi - lo > 1e-6 * resolution_s; ++it) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = detail::timebin_at(modes, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = detail::timebin_at(modes, x2);
        }
    }
    const double t = 0.5 * (lo + hi);
    const double c = detail::timebin_at(modes, t);
    if (c > best.c_timebin)
        best = {t, c};
    return best;
}

// ---------------------------------------------------------------------------
// Curves

struct SweepPoint {
    double x = 0.0;
    double y = 0.0;
    std::optional<double> lo;
    std::optional<double> hi;
    std::optional<double> overlay;
};

struct SweepCurve {
    std::string name;
    std::string x_label;
    std::string y_label;
    std::string overlay_label; // empty when no overlay
    double scale = 1.0;        // y = raw / scale
    std::vector<SweepPoint> points;

    [[nodiscard]] double raw(std::size_t i) const { return points.at(i).y * scale; }

    void normalize_to_max() {
        double m = 0.0;
        for (const auto& p : points)
            m = std::max(m, p.y * scale);
        if (m <= 0.0)
            return;
        for (auto& p : points) {
            p.y = p.y * scale / m;
            if (p.lo)
                *p.lo = *p.lo * scale / m;
            if (p.hi)
                *p.hi = *p.hi * scale / m;
        }
        scale = m;
    }
};

/// Mode sets at the three cooling levels compared in the period sweep:
/// configured occupations, the Doppler limit for a beam with equal
/// projection on all three axes, and the motional ground state.
struct CoolingLevels {
    std::vector<TrapMode> doppler_config;
    std::vector<TrapMode> doppler_optimal;
    std::vector<TrapMode> zero_point;
};

inline constexpr double equal_projection_theta_deg = 54.735610317245346; // cos^2 = 1/3

inline CoolingLevels cooling_levels(const NodeSpec& a, const NodeSpec& b, const CoolingParams& cooling = {}) {
    CoolingLevels lv;
    lv.doppler_config = all_modes(a, b, cooling);
    lv.doppler_optimal = lv.doppler_config;
    lv.zero_point = lv.doppler_config;
    for (auto& m : lv.doppler_optimal) {
        const EmitterSpec& e = m.ion == Node::A ? a.emitter : b.emitter;
        m.nbar = doppler_nbar(m.freq_hz, equal_projection_theta_deg, e, cooling);
    }
    for (auto& m : lv.zero_point)
        m.nbar = 0.0;
    return lv;
}

inline std::vector<double> linspace_step(double from, double to, double step) {
    if (!(step > 0.0) || !(to >= from))
        throw std::invalid_argument("sweep: need from <= to and a positive step");
    const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
    std::vector<double> xs(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        xs[i] = from + static_cast<double>(i) * step;
    return xs;
}

/// C'(tau) for the three cooling levels, each rescaled to a maximum of 1.
/// The raw values remain available through SweepCurve::raw.
inline std::array<SweepCurve, 3> sweep_tau(const CoolingLevels& levels, std::span<const double> taus_s) {
    std::array<SweepCurve, 3> out;
    const std::array<const std::vector<TrapMode>*, 3> sets{&levels.doppler_config, &levels.doppler_optimal,
                                                           &levels.zero_point};
    const std::array<const char*, 3> names{"dopp_exp", "dopp_opt", "zero_point"};
    for (std::size_t k = 0; k < 3; ++k) {
        SweepCurve& c = out[k];
        c.name = names[k];
        c.x_label = "tau_ns";
        c.y_label = "c_timebin_rel";
        c.points.reserve(taus_s.size());
        for (double t : taus_s)
            c.points.push_back({t * 1e9, detail::timebin_at(*sets[k], t), {}, {}, {}});
        c.normalize_to_max();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Detection-window sweep

/// Reference state for relative fidelity: odd population and the parity
/// contrast that would remain with no emission-time recoil penalty.
struct FidelityReference {
    double p_odd = 0.993;
    double contrast = 0.953;
};

struct WindowSweepOptions {
    double angle_uncertainty_deg = 3.0;
    FidelityReference reference;
    CoolingParams cooling;
};

namespace detail {

inline double relative_fidelity(const FidelityReference& ref, double c_arrival) {
    return (ref.p_odd + ref.contrast * c_arrival) / (ref.p_odd + ref.contrast);
}

inline double arrival_factor(const NodeSpec& a, const NodeSpec& b, const CoolingParams& cooling,
                             std::span<const double> nbar, double delta_t_s) {
    auto modes = all_modes(a, b, cooling);
    for (std::size_t i = 0; i < modes.size(); ++i)
        modes[i].nbar = nbar[i];
    const double tau_r = a.emitter.tau_r_s;
    return contrast_arrival(modes, tau_r, window_stats(delta_t_s, tau_r).big_w);
}

} // namespace detail

/// Relative fidelity F(dt)/F(0) and yield versus detection half-window.
/// The band spans every combination of beam angles shifted by
/// -u, 0, +u degrees, with occupations held at their nominal values.
inline SweepCurve sweep_window(const NodeSpec& a, const NodeSpec& b, std::span<const double> deltas_s,
                               const WindowSweepOptions& opt = {}) {
    if (opt.angle_uncertainty_deg < 0.0)
        throw std::invalid_argument("sweep_window: angle uncertainty must be non-negative");
    const auto nominal = all_modes(a, b, opt.cooling);
    std::vector<double> nbar;
    for (const auto& m : nominal)
        nbar.push_back(m.nbar);
    const double tau_r = a.emitter.tau_r_s;

    // Perturbed geometries, valid ones only.
    std::vector<std::pair<NodeSpec, NodeSpec>> variants;
    const double u = opt.angle_uncertainty_deg;
    const std::array<double, 3> shifts{-u, 0.0, u};
    for (double da1 : shifts)
        for (double db1 : shifts)
            for (double da2 : shifts)
                for (double db2 : shifts) {
                    NodeSpec na = a;
                    NodeSpec nb = b;
                    na.geometry.alpha_deg += da1;
                    na.geometry.beam_tilt_deg += db1;
                    nb.geometry.alpha_deg += da2;
                    nb.geometry.beam_tilt_deg += db2;
                    try {
                        na.geometry.validate();
                        nb.geometry.validate();
                    } catch (const std::invalid_argument&) {
                        continue;
                    }
                    variants.emplace_back(std::move(na), std::move(nb));
                }

    SweepCurve c;
    c.name = "window";
    c.x_label = "delta_t_ns";
    c.y_label = "fidelity_rel";
    c.overlay_label = "yield";
    for (double dt : deltas_s) {
        const double y = detail::relative_fidelity(opt.reference, detail::arrival_factor(a, b, opt.cooling, nbar, dt));
        double lo = y;
        double hi = y;
        for (const auto& [na, nb] : variants) {
            const double v = detail::relative_fidelity(opt.reference, detail::arrival_factor(na, nb, opt.cooling, nbar, dt));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        c.points.push_back({dt * 1e9, y, lo, hi, window_stats(dt, tau_r).yield_y});
    }
    return c;
}

// ---------------------------------------------------------------------------
// Error budget

enum class BoundKind { measured, upper_bound };

struct ErrorBudgetEntry {
    std::string label;
    double fidelity_error = 0.0;
    BoundKind bound = BoundKind::measured;
};

struct ErrorBudget {
    std::vector<ErrorBudgetEntry> entries;
    double total = 0.0;
    double total_rounded = 0.0; // one significant figure
};

/// Label of the entry covered by the recoil contrast model.
inline constexpr std::string_view recoil_window_label = "atom_recoil_window";

inline std::vector<ErrorBudgetEntry> paper_error_budget() {
    using enum BoundKind;
    return {
        {"spam_1762_intensity", 0.01, measured},
        {"wavepacket_overlap", 0.004, measured},
        {std::string(recoil_window_label), 0.002, measured},
        {"background_counts", 0.002, upper_bound},
        {"atom_recoil_frequency_fluctuation", 0.001, upper_bound},
        {"beamsplitter_imperfection", 0.001, upper_bound},
        {"residual_erasure", 0.001, upper_bound},
        {"micromotion", 0.0001, upper_bound},
        {"coherence_time", 0.0001, upper_bound},
    };
}

inline double round_significant(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x))
        return x;
    const double mag = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
    return std::round(x * mag) / mag;
}

/// First-order composition: fidelity errors add.
inline ErrorBudget compose_error_budget(std::span<const ErrorBudgetEntry> entries) {
    ErrorBudget b;
    for (const auto& e : entries) {
        if (!(e.fidelity_error >= 0.0 && e.fidelity_error <= 1.0))
            throw std::invalid_argument("error budget: entry '" + e.label + "' outside [0, 1]");
    }
    b.entries.assign(entries.begin(), entries.end());
    std::vector<double> v;
    v.reserve(entries.size());
    for (const auto& e : entries)
        v.push_back(e.fidelity_error);
    std::sort(v.begin(), v.end());
    b.total = std::accumulate(v.begin(), v.end(), 0.0);
    b.total_rounded = round_significant(b.total, 1);
    return b;
}

// ---------------------------------------------------------------------------
// Fidelity prediction

struct PredictionTerm {
    std::string label;
    double fidelity_error = 0.0;
};

struct FidelityPrediction {
    double fidelity = 1.0;
    double c_timebin = 1.0;
    double c_arrival = 1.0;
    std::vector<PredictionTerm> terms;
};

/// F = 1 - sum of budget errors - (1 - C' C'')/2. The recoil model replaces
/// the budget entry it covers.
inline FidelityPrediction predict_fidelity(std::span<const TrapMode> modes, const ProtocolParams& protocol,
                                           double tau_r_s, std::span<const ErrorBudgetEntry> budget) {
    FidelityPrediction p;
    const auto rep = coherence_report(modes, protocol.tau_s, tau_r_s, protocol.delta_t_s);
    p.c_timebin = rep.c_timebin;
    p.c_arrival = rep.c_arrival;
    const double recoil = 0.5 * (1.0 - rep.c_total);
    p.terms.push_back({"recoil_model", recoil});
    double err = recoil;
    for (const auto& e : budget) {
        if (e.label == recoil_window_label)
            continue;
        if (!(e.fidelity_error >= 0.0 && e.fidelity_error <= 1.0))
            throw std::invalid_argument("predict_fidelity: entry '" + e.label + "' outside [0, 1]");
        p.terms.push_back({e.label, e.fidelity_error});
        err += e.fidelity_error;
    }
    p.fidelity = 1.0 - err;
    return p;
}

} // namespace timebin
