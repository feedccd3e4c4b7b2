#pragma once

// Stochastic attempt engine and sampling oracles.
//
// Each attempt follows the per-ion procedure: the ion sits in an equal
// superposition, so exactly one of its two branches is exposed to an
// excitation pulse (the down branch early, the up branch after the swap
// late). The exposed branch is excited with p_exc and decays to the qubit
// state (sigma photon), to the wrong ground state (pi photon, mostly blocked
// by the polarizer) or to D3/2 (photon filtered out, attempt lost).
//
// Two-photon interference is modelled at the outcome level: photons in
// different bins reach either beamsplitter output with equal probability,
// photons in the same bin bunch onto one output. Coherence is not tracked per
// attempt here; synthesize_tomography attaches it from sampled motion.

#include "timebin/event_stream.hpp"
#include "timebin/herald.hpp"
#include "timebin/node.hpp"
#include "timebin/physics.hpp"
#include "timebin/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace timebin {

struct NoiseParams {
    double pulse_angle_rms = 0.0;     // fractional rms error of each qubit rotation angle
    double dark_count_rate_hz = 0.0;  // per detector
    double mode_overlap_error = 0.0;  // fidelity error from imperfect wavepacket overlap
    double readout_error = 0.0;       // per-qubit state detection error
    bool veto = true;                 // shelve/de-shelve erasure check
    double veto_failure = 0.01;       // probability the erasure check misses a wrong-state ion
};

/// Where events land on the time axis of an acquisition.
struct LogTiming {
    double sync_to_early_s = 1e-6;                  // SYNC to early excitation mark
    double gate_s = 100e-9;                         // detection gate after each mark
    std::array<double, 2> path_delay_s{30e-9, 32.5e-9}; // mark to detector, per channel
};

struct SimConfig {
    NodeSpec node_a = paper_node_a();
    NodeSpec node_b = paper_node_b();
    ProtocolParams protocol = paper_protocol();
    NoiseParams noise;
    LogTiming timing;

    void validate() const {
        node_a.validate();
        node_b.validate();
        protocol.validate();
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (noise.pulse_angle_rms < 0 || noise.dark_count_rate_hz < 0 || !unit(noise.mode_overlap_error) ||
            !unit(noise.readout_error) || !unit(noise.veto_failure))
            throw std::invalid_argument("noise: rates must be non-negative and probabilities in [0, 1]");
        if (timing.gate_s <= 0 || timing.sync_to_early_s < 0 || timing.path_delay_s[0] < 0 ||
            timing.path_delay_s[1] < 0)
            throw std::invalid_argument("timing: gate must be positive and delays non-negative");
    }
};

enum class PhotonBin : std::uint8_t { early, late, none };
enum class DecayBranch : std::uint8_t { no_excite, sigma, pi, d_leak };

struct NodeOutcome {
    PhotonBin bin = PhotonBin::none; // bin of the collected photon
    DecayBranch branch = DecayBranch::no_excite;
    bool collected = false;
    double arrival_offset_s = 0.0; // emission delay after the excitation mark
    std::uint8_t channel = 0;
};

struct SimDetection {
    Bin bin = Bin::early;
    std::uint8_t channel = 0;
    double offset_s = 0.0; // after the bin's excitation mark, before the path delay
    bool pi_origin = false;
};

struct AttemptOutcome {
    std::array<NodeOutcome, 2> nodes{};
    HeraldResult herald;
    bool wrong_state = false;  // an ion ended in the wrong ground state
    bool false_herald = false; // psi+/psi- heralded although an ion is in the wrong state
    std::optional<double> tau_offset_s; // tau* - tau for one-early-one-late patterns
    std::array<SimDetection, 8> detections{};
    std::size_t n_detections = 0;

    [[nodiscard]] std::span<const SimDetection> detection_list() const { return {detections.data(), n_detections}; }
};

/// Precomputed per-run probabilities so the attempt loop only draws numbers.
struct AttemptModel {
    struct PerNode {
        double p_exc = 0;
        double branch_sigma = 0;
        double branch_pi = 0;
        double sigma_collect = 0; // collection chain only
        double pi_collect = 0;    // chain times polarizer leakage
    };
    std::array<PerNode, 2> nodes{};
    double tau_r_s = 7.85e-9;
    double dark_mean_per_gate = 0.0;
    double gate_s = 100e-9;
    ProtocolParams protocol;
    NoiseParams noise;

    explicit AttemptModel(const SimConfig& cfg) : protocol(cfg.protocol), noise(cfg.noise) {
        const std::array<const NodeSpec*, 2> specs{&cfg.node_a, &cfg.node_b};
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& s = *specs[i];
            const double chain =
                s.chain.eps_fiber * s.chain.transmission * s.chain.eps_det * s.chain.solid_angle_frac;
            nodes[i] = {s.emitter.p_exc, s.emitter.branch_sigma, s.emitter.branch_pi, chain,
                        chain * (1.0 - s.emitter.pol_rejection)};
        }
        // Both ions share the species; the lifetime is taken from node A.
        tau_r_s = cfg.node_a.emitter.tau_r_s;
        gate_s = cfg.timing.gate_s;
        dark_mean_per_gate = cfg.noise.dark_count_rate_hz * cfg.timing.gate_s;
    }
};

namespace detail {

inline std::uint64_t poisson_small(Rng& rng, double mean) {
    if (mean <= 0.0)
        return 0;
    return std::poisson_distribution<std::uint64_t>(mean)(rng);
}

} // namespace detail

inline AttemptOutcome simulate_attempt(const AttemptModel& model, Rng& rng) {
    AttemptOutcome out;
    bool d_leak = false;
    std::array<bool, 2> photon_pi{false, false};

    for (std::size_t i = 0; i < 2; ++i) {
        const auto& p = model.nodes[i];
        NodeOutcome& n = out.nodes[i];
        const PhotonBin exposed = uniform01(rng) < 0.5 ? PhotonBin::early : PhotonBin::late;
        const double u = uniform01(rng);
        const double excited = p.p_exc;
        double collect = 0.0;
        if (u >= excited) {
            n.branch = DecayBranch::no_excite;
        } else if (u < excited * p.branch_sigma) {
            n.branch = DecayBranch::sigma;
            collect = p.sigma_collect;
        } else if (u < excited * (p.branch_sigma + p.branch_pi)) {
            n.branch = DecayBranch::pi;
            collect = p.pi_collect;
            out.wrong_state = true;
        } else {
            n.branch = DecayBranch::d_leak;
            d_leak = true;
        }
        if (collect > 0.0 && uniform01(rng) < collect) {
            n.collected = true;
            n.bin = exposed;
            n.arrival_offset_s = exponential(rng, model.tau_r_s);
            photon_pi[i] = n.branch == DecayBranch::pi;
        }
    }

    // Detector channels.
    const bool a = out.nodes[0].collected;
    const bool b = out.nodes[1].collected;
    if (a && b && out.nodes[0].bin == out.nodes[1].bin) {
        const auto ch = static_cast<std::uint8_t>(uniform01(rng) < 0.5 ? 0 : 1);
        out.nodes[0].channel = ch;
        out.nodes[1].channel = ch;
    } else {
        for (std::size_t i = 0; i < 2; ++i)
            if (out.nodes[i].collected)
                out.nodes[i].channel = static_cast<std::uint8_t>(uniform01(rng) < 0.5 ? 0 : 1);
    }

    auto push = [&](const SimDetection& d) {
        if (out.n_detections < out.detections.size())
            out.detections[out.n_detections++] = d;
    };
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& n = out.nodes[i];
        if (n.collected)
            push({n.bin == PhotonBin::early ? Bin::early : Bin::late, n.channel, n.arrival_offset_s, photon_pi[i]});
    }
    if (model.dark_mean_per_gate > 0.0) {
        for (Bin bin : {Bin::early, Bin::late})
            for (std::uint8_t ch = 0; ch < 2; ++ch) {
                const auto k = detail::poisson_small(rng, model.dark_mean_per_gate);
                for (std::uint64_t j = 0; j < k; ++j)
                    push({bin, ch, uniform01(rng) * model.gate_s, false});
            }
    }

    // Herald classification.
    int n_early = 0;
    int n_late = 0;
    const SimDetection* early = nullptr;
    const SimDetection* late = nullptr;
    for (const auto& d : out.detection_list()) {
        if (d.bin == Bin::early) {
            ++n_early;
            early = &d;
        } else {
            ++n_late;
            late = &d;
        }
    }
    if (d_leak || out.n_detections < 2) {
        out.herald = HeraldResult::rejected(RejectReason::missing_photon);
    } else if (n_early != 1 || n_late != 1) {
        out.herald = HeraldResult::rejected(RejectReason::same_bin);
    } else {
        const double offset = late->offset_s - early->offset_s;
        out.tau_offset_s = offset;
        out.herald = herald_classify(early->channel, late->channel, model.protocol.tau_s + offset, model.protocol);
        if (out.herald.is_herald() && out.wrong_state) {
            if (model.noise.veto && uniform01(rng) >= model.noise.veto_failure)
                out.herald = HeraldResult::erasure();
            else
                out.false_herald = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tally

struct RunTally {
    std::uint64_t attempts = 0;
    std::uint64_t psi_plus = 0;
    std::uint64_t psi_minus = 0;
    std::uint64_t erasure_flagged = 0;
    std::uint64_t same_bin = 0;
    std::uint64_t missing_photon = 0;
    std::uint64_t out_of_window = 0;
    std::uint64_t false_heralds = 0; // unflagged heralds with an ion in the wrong state
    // Moments of tau* - tau over accepted events (heralds and flagged).
    std::uint64_t offset_count = 0;
    double offset_sum = 0.0;
    double offset_sum_sq = 0.0;
    std::vector<double> offsets; // filled only when collection is requested

    [[nodiscard]] std::uint64_t heralds() const { return psi_plus + psi_minus; }

    [[nodiscard]] double herald_probability() const {
        return attempts ? static_cast<double>(heralds()) / static_cast<double>(attempts) : 0.0;
    }

    [[nodiscard]] double erasure_flag_rate() const {
        const auto n = heralds() + erasure_flagged;
        return n ? static_cast<double>(erasure_flagged) / static_cast<double>(n) : 0.0;
    }

    [[nodiscard]] double false_herald_rate() const {
        return heralds() ? static_cast<double>(false_heralds) / static_cast<double>(heralds()) : 0.0;
    }

    [[nodiscard]] double offset_mean() const { return offset_count ? offset_sum / static_cast<double>(offset_count) : 0.0; }

    [[nodiscard]] double offset_variance() const {
        if (offset_count < 2)
            return 0.0;
        const double n = static_cast<double>(offset_count);
        return (offset_sum_sq - offset_sum * offset_sum / n) / (n - 1.0);
    }

    void add(const AttemptOutcome& o, bool keep_offset) {
        ++attempts;
        switch (o.herald.kind) {
        case HeraldKind::psi_plus:
            ++psi_plus;
            break;
        case HeraldKind::psi_minus:
            ++psi_minus;
            break;
        case HeraldKind::erasure_flagged:
            ++erasure_flagged;
            break;
        case HeraldKind::rejected:
            if (o.herald.reason == RejectReason::same_bin)
                ++same_bin;
            else if (o.herald.reason == RejectReason::out_of_window)
                ++out_of_window;
            else
                ++missing_photon;
            return;
        }
        if (o.false_herald)
            ++false_heralds;
        if (o.tau_offset_s) {
            ++offset_count;
            offset_sum += *o.tau_offset_s;
            offset_sum_sq += *o.tau_offset_s * *o.tau_offset_s;
            if (keep_offset)
                offsets.push_back(*o.tau_offset_s);
        }
    }

    void merge(const RunTally& t) {
        attempts += t.attempts;
        psi_plus += t.psi_plus;
        psi_minus += t.psi_minus;
        erasure_flagged += t.erasure_flagged;
        same_bin += t.same_bin;
        missing_photon += t.missing_photon;
        out_of_window += t.out_of_window;
        false_heralds += t.false_heralds;
        offset_count += t.offset_count;
        offset_sum += t.offset_sum;
        offset_sum_sq += t.offset_sum_sq;
        offsets.insert(offsets.end(), t.offsets.begin(), t.offsets.end());
    }
};

// ---------------------------------------------------------------------------
// Event log emission

inline std::uint64_t to_ps(double seconds) { return static_cast<std::uint64_t>(std::llround(seconds * 1e12)); }

/// Appends the records of one attempt. SYNC of attempt k sits at k / rep_rate.
inline void append_attempt_records(std::uint32_t attempt_id, const AttemptOutcome& o, const SimConfig& cfg,
                                   std::vector<TimeTagRecord>& out) {
    const double period = cfg.protocol.rep_rate_hz > 0 ? 1.0 / cfg.protocol.rep_rate_hz : cfg.protocol.tau_s * 4;
    const std::uint64_t sync = to_ps(static_cast<double>(attempt_id) * period);
    const std::uint64_t early = sync + to_ps(cfg.timing.sync_to_early_s);
    const std::uint64_t late = early + to_ps(cfg.protocol.tau_s);
    const std::uint8_t kind = o.herald.kind == HeraldKind::erasure_flagged ? kind_erasure_flag : 0;
    out.push_back({sync, attempt_id, Channel::sync, kind});
    out.push_back({early, attempt_id, Channel::exc_early, 0});
    const std::size_t first_early = out.size();
    std::vector<TimeTagRecord> late_records;
    for (const auto& d : o.detection_list()) {
        const std::uint64_t mark = d.bin == Bin::early ? early : late;
        const TimeTagRecord r{mark + to_ps(cfg.timing.path_delay_s[d.channel] + d.offset_s), attempt_id,
                              static_cast<Channel>(d.channel), 0};
        (d.bin == Bin::early ? out : late_records).push_back(r);
    }
    auto by_time = [](const TimeTagRecord& l, const TimeTagRecord& r) { return l.t_ps < r.t_ps; };
    std::stable_sort(out.begin() + static_cast<std::ptrdiff_t>(first_early), out.end(), by_time);
    // An early-bin photon can arrive after the late mark; keep the stream time ordered.
    TimeTagRecord late_mark{late, attempt_id, Channel::exc_late, 0};
    auto pos = std::upper_bound(out.begin() + static_cast<std::ptrdiff_t>(first_early), out.end(), late_mark, by_time);
    out.insert(pos, late_mark);
    std::stable_sort(late_records.begin(), late_records.end(), by_time);
    out.insert(out.end(), late_records.begin(), late_records.end());
}

struct RunOptions {
    std::uint64_t attempts = 0;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    bool collect_offsets = false;
    bool emit_log = false;
};

struct RunResult {
    RunTally tally;
    std::vector<TimeTagRecord> log;
};

/// Runs attempts split into contiguous blocks, one per worker. Worker w uses
/// random stream w of the seed, and tallies merge in worker order, so results
/// depend only on (config, attempts, seed, workers).
inline RunResult run_simulation(const SimConfig& cfg, const RunOptions& opt) {
    cfg.validate();
    const AttemptModel model(cfg);
    const unsigned workers = std::max(1u, opt.workers);
    std::vector<RunResult> parts(workers);

    auto work = [&](unsigned w) {
        const std::uint64_t begin = opt.attempts * w / workers;
        const std::uint64_t end = opt.attempts * (w + 1) / workers;
        Rng rng = make_stream(opt.seed, w);
        RunResult& part = parts[w];
        for (std::uint64_t k = begin; k < end; ++k) {
            const AttemptOutcome o = simulate_attempt(model, rng);
            part.tally.add(o, opt.collect_offsets);
            if (opt.emit_log)
                append_attempt_records(static_cast<std::uint32_t>(k), o, cfg, part.log);
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
            threads.emplace_back(work, w);
    }

    RunResult result;
    for (auto& p : parts) {
        result.tally.merge(p.tally);
        result.log.insert(result.log.end(), p.log.begin(), p.log.end());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sampling oracles

/// tau* - tau for one accepted event: the difference of two independent
/// exponential emission delays, resampled until it falls within +-delta_t.
/// draws (optional) counts the pairs drawn, so accepted / draws estimates Y.
inline double sample_arrival_diff(double tau_r_s, double delta_t_s, Rng& rng, std::uint64_t* draws = nullptr) {
    if (!(delta_t_s > 0.0))
        throw std::domain_error("sample_arrival_diff: delta_t must be positive");
    while (true) {
        const double d = exponential(rng, tau_r_s) - exponential(rng, tau_r_s);
        if (draws)
            ++*draws;
        if (std::abs(d) <= delta_t_s)
            return d;
    }
}

/// Monte Carlo average of the exact per-event arrival-time coherence
/// exp[-zeta^2 (2 nbar + 1)(1 - cos omega (tau* - tau))] over every mode.
inline double arrival_coherence_sampled(std::span<const TrapMode> modes, double tau_r_s, double delta_t_s,
                                        std::uint64_t n_samples, Rng& rng) {
    double sum = 0.0;
    for (std::uint64_t i = 0; i < n_samples; ++i) {
        const double d = sample_arrival_diff(tau_r_s, delta_t_s, rng);
        double exponent = 0.0;
        for (const auto& m : modes)
            exponent += m.zeta * m.zeta * (2.0 * m.nbar + 1.0) * (1.0 - std::cos(m.omega() * d));
        sum += std::exp(-exponent);
    }
    return n_samples ? sum / static_cast<double>(n_samples) : 1.0;
}

inline double motional_coherence_sampled(double zeta, double freq_hz, double nbar, double tau_r_s, double delta_t_s,
                                         std::uint64_t n_samples, Rng& rng) {
    TrapMode m;
    m.freq_hz = freq_hz;
    m.nbar = nbar;
    m.zeta = zeta;
    return arrival_coherence_sampled(std::span<const TrapMode>(&m, 1), tau_r_s, delta_t_s, n_samples, rng);
}

/// Thermal motion drawn in the coherent-state basis: one complex amplitude
/// per mode with E|alpha|^2 = nbar.
struct MotionalSample {
    std::vector<std::complex<double>> amplitudes;
};

inline MotionalSample sample_motion(std::span<const TrapMode> modes, Rng& rng) {
    MotionalSample s;
    s.amplitudes.reserve(modes.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& m : modes) {
        const double sd = std::sqrt(0.5 * m.nbar);
        const double re = normal(rng);
        const double im = normal(rng);
        s.amplitudes.emplace_back(sd * re, sd * im);
    }
    return s;
}

/// Coherence of one heralded event. A recoil kick of strength lambda at two
/// times separated by t leaves relative displacement
/// gamma = i lambda (e^{-i omega t} - 1); for motional state |alpha> the
/// branch overlap is exp(-|gamma|^2/2) exp(i [2 Im(gamma conj(alpha)) + phi0]).
/// The excitation-separation (eta, tau) and emission-delay (zeta, tau* - tau)
/// contributions are drawn from independent thermal samples, so the event
/// average reproduces the factorised contrast C' C''.
inline std::complex<double> event_coherence(std::span<const TrapMode> modes, double tau_s, double arrival_offset_s,
                                            const MotionalSample& timebin_motion, const MotionalSample& arrival_motion) {
    double log_mag = 0.0;
    double phase = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const auto& m = modes[i];
        auto kick = [&](double lambda, double t, std::complex<double> alpha, bool zero_point_phase) {
            const double wt = m.omega() * t;
            const std::complex<double> gamma = std::complex<double>(0.0, lambda) * (std::polar(1.0, -wt) - 1.0);
            log_mag -= 0.5 * std::norm(gamma);
            phase += 2.0 * std::imag(gamma * std::conj(alpha));
            if (zero_point_phase)
                phase += lambda * lambda * std::sin(wt);
        };
        kick(m.eta, tau_s, timebin_motion.amplitudes[i], true);
        kick(m.zeta, arrival_offset_s, arrival_motion.amplitudes[i], false);
    }
    return std::polar(std::exp(log_mag), phase);
}

// ---------------------------------------------------------------------------
// Tomography synthesis

struct TomographyConfig {
    SimConfig sim;
    double base_contrast = 1.0;    // coherence left by sources outside the motional model
    double phase_offset_rad = 0.0; // fringe phase of the prepared state
};

struct TomographyRun {
    std::vector<TimeTagRecord> log;      // one frame per two-photon candidate
    std::vector<ReadoutRecord> readouts; // one readout per candidate
};

namespace detail {

// Probability a pi pulse with fractional angle error e leaves the state unswapped.
inline double swap_failure(double e) {
    const double s = std::sin(0.5 * pi * e);
    return s * s;
}

} // namespace detail

/// Expected parity contrast of the synthesized data after the detection
/// window, using the closed-form motional factors.
inline double expected_contrast(const TomographyConfig& cfg) {
    const auto modes = all_modes(cfg.sim.node_a, cfg.sim.node_b);
    const auto& p = cfg.sim.protocol;
    const double motion = coherence_report(modes, p.tau_s, cfg.sim.node_a.emitter.tau_r_s, p.delta_t_s).c_total;
    const double s = cfg.sim.noise.pulse_angle_rms * pi;
    const double keep = 0.5 * (1.0 + std::exp(-0.5 * s * s)); // E[1 - swap_failure]
    const double r = 1.0 - 2.0 * cfg.sim.noise.readout_error;
    return cfg.base_contrast * (1.0 - 2.0 * cfg.sim.noise.mode_overlap_error) * motion * keep * keep * r * r;
}

/// Expected odd-parity population of the synthesized data.
inline double expected_odd_population(const TomographyConfig& cfg) {
    const double s = cfg.sim.noise.pulse_angle_rms * pi;
    const double f = 0.5 * (1.0 - std::exp(-0.5 * s * s)); // E[swap_failure]
    const double p_odd = (1 - f) * (1 - f) + f * f;
    const double e = cfg.sim.noise.readout_error;
    const double same = (1 - e) * (1 - e) + e * e;
    return p_odd * same + (1 - p_odd) * (1 - same);
}

/// Generates n_candidates two-photon events (one photon per bin) and the ion
/// readout that follows each. Emission delays are not pre-selected: the
/// detection window is applied downstream by the classifier. Readouts cycle
/// through the analysis phases, with every (phases + 1)-th event measured in
/// the population basis. Each event's coherence comes from sampled motion and
/// its own arrival-time difference.
inline TomographyRun synthesize_tomography(const TomographyConfig& cfg, std::uint64_t n_candidates,
                                           std::span<const double> phases, Rng& rng) {
    cfg.sim.validate();
    const auto modes = all_modes(cfg.sim.node_a, cfg.sim.node_b);
    const double tau_r = cfg.sim.node_a.emitter.tau_r_s;
    const auto& noise = cfg.sim.noise;
    const double static_factor = cfg.base_contrast * (1.0 - 2.0 * noise.mode_overlap_error);
    std::normal_distribution<double> angle_noise(0.0, 1.0);

    TomographyRun run;
    run.log.reserve(n_candidates * 5);
    run.readouts.reserve(n_candidates);
    const std::size_t slots = phases.size() + 1;
    for (std::uint64_t k = 0; k < n_candidates; ++k) {
        const auto id = static_cast<std::uint32_t>(k);
        const double e1 = exponential(rng, tau_r);
        const double e2 = exponential(rng, tau_r);
        const auto ch_early = static_cast<std::uint8_t>(uniform01(rng) < 0.5 ? 0 : 1);
        const auto ch_late = static_cast<std::uint8_t>(uniform01(rng) < 0.5 ? 0 : 1);

        AttemptOutcome o;
        o.detections[0] = {Bin::early, ch_early, e1, false};
        o.detections[1] = {Bin::late, ch_late, e2, false};
        o.n_detections = 2;
        append_attempt_records(id, o, cfg.sim, run.log);

        const MotionalSample tb = sample_motion(modes, rng);
        const MotionalSample ar = sample_motion(modes, rng);
        const std::complex<double> c = event_coherence(modes, cfg.sim.protocol.tau_s, e2 - e1, tb, ar);

        const double fa = detail::swap_failure(noise.pulse_angle_rms * angle_noise(rng));
        const double fb = detail::swap_failure(noise.pulse_angle_rms * angle_noise(rng));

        ReadoutRecord r;
        r.attempt_id = id;
        const std::size_t slot = k % slots;
        bool odd = false;
        if (slot == phases.size()) {
            r.basis = ReadoutBasis::population;
            odd = uniform01(rng) < (1 - fa) * (1 - fb) + fa * fb;
        } else {
            r.basis = ReadoutBasis::parity;
            r.phase_rad = phases[slot];
            const double sign = ch_early == ch_late ? 1.0 : -1.0;
            const double amp = static_factor * (1 - fa) * (1 - fb) * std::abs(c);
            const double parity = sign * amp * std::cos(r.phase_rad - cfg.phase_offset_rad - std::arg(c));
            odd = uniform01(rng) >= 0.5 * (1.0 + parity);
        }
        std::uint8_t a = uniform01(rng) < 0.5 ? 0 : 1;
        std::uint8_t b = odd ? static_cast<std::uint8_t>(1 - a) : a;
        if (uniform01(rng) < noise.readout_error)
            a ^= 1;
        if (uniform01(rng) < noise.readout_error)
            b ^= 1;
        r.bit_a = a;
        r.bit_b = b;
        run.readouts.push_back(r);
    }
    return run;
}

} // namespace timebin
