#pragma once

// Closed-form recoil, cooling, detection-window and contrast models for
// heralded two-node entanglement with time-bin photons.
//
// Everything here is a pure function over small value types. Angles are
// degrees at the interface and radians internally. Products over motional
// modes run in canonical order (ion A then B, axes z, x, y); use
// canonical_order() before calling if mode lists are assembled ad hoc and
// bit-reproducibility matters.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace timebin {

namespace constants {
inline constexpr double hbar = 1.054571817e-34;         // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
} // namespace constants

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / pi; }

enum class Node { A, B };
enum class Axis { z, x, y };

inline constexpr std::array<Axis, 3> all_axes{Axis::z, Axis::x, Axis::y};

inline std::string_view to_string(Node n) { return n == Node::A ? "A" : "B"; }

inline std::string_view to_string(Axis a) {
    switch (a) {
    case Axis::z:
        return "z";
    case Axis::x:
        return "x";
    case Axis::y:
        return "y";
    }
    return "?";
}

inline std::size_t axis_index(Axis a) { return static_cast<std::size_t>(a); }

/// Emitting species and its decay channels.
struct EmitterSpec {
    double mass_kg = 138.0 * constants::atomic_mass_unit;
    double wavelength_m = 493e-9;
    double tau_r_s = 7.85e-9;
    double p_exc = 0.8;
    double branch_sigma = 0.49; // usable sigma photon back to the qubit state
    double branch_pi = 0.24;    // pi photon to the wrong ground state
    double branch_d = 0.27;     // decay into the D3/2 manifold
    double pol_rejection = 0.98;

    [[nodiscard]] double wavenumber() const { return two_pi / wavelength_m; }
    [[nodiscard]] double gamma() const { return 1.0 / tau_r_s; }

    void validate() const {
        if (!(mass_kg > 0.0) || !(wavelength_m > 0.0) || !(tau_r_s > 0.0))
            throw std::invalid_argument("emitter: mass, wavelength and lifetime must be positive");
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!unit(p_exc) || !unit(pol_rejection))
            throw std::invalid_argument("emitter: p_exc and pol_rejection must lie in [0, 1]");
        if (!(branch_sigma > 0.0) || branch_pi < 0.0 || branch_d < 0.0)
            throw std::invalid_argument("emitter: branching ratios must be non-negative");
        if (std::abs(branch_sigma + branch_pi + branch_d - 1.0) > 1e-9)
            throw std::invalid_argument("emitter: branching ratios must sum to 1");
    }
};

/// Beam layout of one trap. The emission direction is perpendicular to the
/// axial z axis at angle alpha from x; excitation and cooling beams are
/// colinear and tilted from z by beam_tilt.
struct BeamGeometry {
    double alpha_deg = 45.0;
    double beam_tilt_deg = 45.0;

    void validate() const {
        auto in_range = [](double d) { return d >= 0.0 && d < 180.0; };
        if (!in_range(alpha_deg) || !in_range(beam_tilt_deg))
            throw std::invalid_argument("geometry: angles must lie in [0, 180) degrees");
    }
};

/// Angles of the excitation/cooling wavevector (theta) and the emission
/// wavevector (psi) to one principal axis.
struct AxisPair {
    double theta_deg = 0.0;
    double psi_deg = 0.0;
};

struct AxisAngles {
    std::array<AxisPair, 3> per_axis{}; // indexed by axis_index(), order z, x, y

    [[nodiscard]] const AxisPair& at(Axis a) const { return per_axis[axis_index(a)]; }
    AxisPair& at(Axis a) { return per_axis[axis_index(a)]; }
};

struct TrapMode {
    Node ion = Node::A;
    Axis axis = Axis::z;
    double freq_hz = 1e6;
    double nbar = 0.0;
    double eta = 0.0;  // Lamb-Dicke parameter for the excitation-emission wavevector difference
    double zeta = 0.0; // Lamb-Dicke parameter for the emission wavevector alone

    [[nodiscard]] double omega() const { return two_pi * freq_hz; }

    void validate() const {
        if (!(freq_hz > 0.0))
            throw std::invalid_argument("mode: frequency must be positive");
        if (nbar < 0.0 || eta < 0.0 || zeta < 0.0)
            throw std::invalid_argument("mode: nbar, eta and zeta must be non-negative");
    }
};

struct CollectionChain {
    double eps_fiber = 0.19;
    double transmission = 0.9;
    double eps_det = 0.71;
    double solid_angle_frac = 0.10;

    void validate() const {
        for (double v : {eps_fiber, transmission, eps_det, solid_angle_frac})
            if (v < 0.0 || v > 1.0)
                throw std::invalid_argument("collection chain: efficiencies must lie in [0, 1]");
    }
};

struct ProtocolParams {
    double tau_s = 6048e-9;
    double delta_t_s = 10e-9;
    double rep_rate_hz = 70e3;
    double duty = 0.3;

    void validate() const {
        if (!(tau_s > 0.0))
            throw std::invalid_argument("protocol: tau must be positive");
        if (delta_t_s < 0.0 || std::isnan(delta_t_s))
            throw std::invalid_argument("protocol: detection window must be non-negative");
        if (rep_rate_hz < 0.0 || duty < 0.0 || duty > 1.0)
            throw std::invalid_argument("protocol: repetition rate must be >= 0 and duty in [0, 1]");
    }
};

struct WindowStats {
    double w = 0.0;       // delta_t / tau_R
    double big_w = 0.0;   // variance of the accepted arrival difference in units of 2 tau_R^2
    double yield_y = 0.0; // fraction of events accepted
};

struct CoherenceReport {
    double c_timebin = 1.0;
    double c_arrival = 1.0;
    double c_total = 1.0;
    std::vector<double> phase_offsets;
};

/// Sorts modes into the canonical product order: ion A then B, axes z, x, y.
inline void canonical_order(std::vector<TrapMode>& modes) {
    std::stable_sort(modes.begin(), modes.end(), [](const TrapMode& l, const TrapMode& r) {
        if (l.ion != r.ion)
            return l.ion < r.ion;
        return l.axis < r.axis;
    });
}

inline AxisAngles derive_beam_angles(const BeamGeometry& geom) {
    const double a = deg_to_rad(geom.alpha_deg);
    const double b = deg_to_rad(geom.beam_tilt_deg);
    auto angle = [](double c) { return rad_to_deg(std::acos(std::clamp(c, -1.0, 1.0))); };

    AxisAngles out;
    out.at(Axis::x) = {angle(-std::sin(b) * std::sin(a)), angle(std::cos(a))};
    out.at(Axis::y) = {angle(std::sin(b) * std::cos(a)), angle(std::sin(a))};
    out.at(Axis::z) = {angle(-std::cos(b)), 90.0};
    return out;
}

struct RecoilParams {
    double eta = 0.0;
    double zeta = 0.0;
};

/// sqrt(hbar k^2 / 2 m omega): recoil scale for a photon kick along the axis.
inline double recoil_scale(double freq_hz, const EmitterSpec& emitter) {
    if (!(freq_hz > 0.0))
        throw std::domain_error("recoil_params: frequency must be positive");
    const double k = emitter.wavenumber();
    return std::sqrt(constants::hbar * k * k / (2.0 * emitter.mass_kg * two_pi * freq_hz));
}

inline RecoilParams recoil_params(double freq_hz, const AxisPair& angles, const EmitterSpec& emitter) {
    const double scale = recoil_scale(freq_hz, emitter);
    const double cos_psi = std::cos(deg_to_rad(angles.psi_deg));
    const double cos_theta = std::cos(deg_to_rad(angles.theta_deg));
    return {scale * std::abs(cos_psi - cos_theta), scale * std::abs(cos_psi)};
}

/// Doppler cooling limit along an axis whose angle to the cooling beam is
/// theta. All rates in rad/s. Throws for an axis perpendicular to the beam.
inline double doppler_nbar(double freq_hz, double theta_deg, double gamma_rad_s, double detuning_rad_s,
                           double sat_s) {
    if (!(freq_hz > 0.0) || !(gamma_rad_s > 0.0) || !(detuning_rad_s > 0.0) || sat_s < 0.0)
        throw std::domain_error("doppler_nbar: rates must be positive");
    const double c = std::cos(deg_to_rad(theta_deg));
    if (c * c < 1e-12)
        throw std::domain_error("doppler_nbar: uncooled axis (beam perpendicular to mode)");
    const double omega = two_pi * freq_hz;
    const double detuning_term = detuning_rad_s / gamma_rad_s + gamma_rad_s * (1.0 + sat_s) / (4.0 * detuning_rad_s);
    return gamma_rad_s / (4.0 * omega) * detuning_term * (1.0 + 1.0 / (3.0 * c * c));
}

/// Cooling laser settings relative to the natural linewidth.
struct CoolingParams {
    double detuning_over_gamma = 0.5;
    double saturation = 1.0;
};

inline double doppler_nbar(double freq_hz, double theta_deg, const EmitterSpec& emitter, const CoolingParams& cooling) {
    const double g = emitter.gamma();
    return doppler_nbar(freq_hz, theta_deg, g, cooling.detuning_over_gamma * g, cooling.saturation);
}

namespace detail {

// e^w - 1 - w - w^2/2 without cancellation for small w.
inline double exp_tail3(double w) {
    if (w < 0.5) {
        double term = w * w * w / 6.0;
        double sum = 0.0;
        for (int k = 3; k < 40 && term > 1e-300; ++k) {
            sum += term;
            term *= w / (k + 1);
            if (term < sum * 1e-18)
                break;
        }
        return sum;
    }
    return std::expm1(w) - w - 0.5 * w * w;
}

} // namespace detail

inline WindowStats window_stats(double delta_t_s, double tau_r_s) {
    if (delta_t_s < 0.0 || !(tau_r_s > 0.0))
        throw std::domain_error("window_stats: need delta_t >= 0 and tau_R > 0");
    WindowStats s;
    s.w = delta_t_s / tau_r_s;
    if (s.w == 0.0)
        return s;
    if (std::isinf(s.w)) {
        s.big_w = 1.0;
        s.yield_y = 1.0;
        return s;
    }
    s.yield_y = -std::expm1(-s.w);
    if (s.w < 30.0) {
        s.big_w = std::exp(-s.w) * detail::exp_tail3(s.w) / s.yield_y;
    } else {
        s.big_w = (1.0 - (1.0 + s.w + 0.5 * s.w * s.w) * std::exp(-s.w)) / s.yield_y;
    }
    return s;
}

struct TimebinContrast {
    double c_timebin = 1.0;
    std::vector<double> phase_offsets;
};

inline TimebinContrast contrast_timebin(std::span<const TrapMode> modes, double tau_s) {
    TimebinContrast out;
    out.phase_offsets.reserve(modes.size());
    double exponent = 0.0;
    for (const auto& m : modes) {
        const double wt = m.omega() * tau_s;
        const double eta2 = m.eta * m.eta;
        exponent += eta2 * (2.0 * m.nbar + 1.0) * (1.0 - std::cos(wt));
        out.phase_offsets.push_back(eta2 * std::sin(wt));
    }
    out.c_timebin = std::exp(-exponent);
    return out;
}

/// Gaussian-approximation arrival-time contrast, valid for omega tau_R << 1.
inline double contrast_arrival(std::span<const TrapMode> modes, double tau_r_s, double big_w) {
    double exponent = 0.0;
    for (const auto& m : modes) {
        const double wt = m.omega() * tau_r_s;
        exponent += m.zeta * m.zeta * (2.0 * m.nbar + 1.0) * big_w * wt * wt;
    }
    return std::exp(-exponent);
}

inline CoherenceReport coherence_report(std::span<const TrapMode> modes, double tau_s, double tau_r_s,
                                        double delta_t_s) {
    auto tb = contrast_timebin(modes, tau_s);
    CoherenceReport r;
    r.c_timebin = tb.c_timebin;
    r.c_arrival = contrast_arrival(modes, tau_r_s, window_stats(delta_t_s, tau_r_s).big_w);
    r.c_total = r.c_timebin * r.c_arrival;
    r.phase_offsets = std::move(tb.phase_offsets);
    return r;
}

inline double bell_fidelity(double p_odd, double contrast) { return 0.5 * (p_odd + contrast); }

inline double collection_prob(const EmitterSpec& emitter, const CollectionChain& chain) {
    return emitter.p_exc * emitter.branch_sigma * chain.eps_fiber * chain.transmission * chain.eps_det *
           chain.solid_angle_frac;
}

struct SuccessRate {
    double p_e = 0.0;
    double rate_hz = 0.0;
};

inline SuccessRate success_prob_and_rate(double p_a, double p_b, double yield_y, double rep_rate_hz, double duty) {
    SuccessRate r;
    r.p_e = 0.5 * p_a * p_b;
    r.rate_hz = r.p_e * yield_y * rep_rate_hz * duty;
    return r;
}

inline double double_emission_prob(double p_exc, double branch_sigma, double pulse_len_s, double tau_r_s) {
    return p_exc * p_exc * branch_sigma * branch_sigma * pulse_len_s / (8.0 * tau_r_s);
}

struct Commensurability {
    TrapMode mode;
    double cycles = 0.0;   // omega tau / 2 pi
    double residual = 0.0; // distance to the nearest integer
};

inline std::vector<Commensurability> commensurability(std::span<const TrapMode> modes, double tau_s) {
    if (!(tau_s > 0.0))
        throw std::domain_error("commensurability: tau must be positive");
    std::vector<Commensurability> out;
    out.reserve(modes.size());
    for (const auto& m : modes) {
        const double cycles = m.freq_hz * tau_s;
        out.push_back({m, cycles, std::abs(cycles - std::round(cycles))});
    }
    return out;
}

/// Rebuilds eta and zeta of every mode from a node's geometry and emitter.
inline void assign_recoil(std::span<TrapMode> modes, const AxisAngles& angles, const EmitterSpec& emitter) {
    for (auto& m : modes) {
        auto r = recoil_params(m.freq_hz, angles.at(m.axis), emitter);
        m.eta = r.eta;
        m.zeta = r.zeta;
    }
}

} // namespace timebin
