#include "stats_oracles.hpp"
#include "timebin/analysis.hpp"
#include "timebin/event_stream.hpp"
#include "timebin/monte_carlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numeric>

using namespace timebin;

namespace {

SimConfig lossless() {
    SimConfig c;
    for (NodeSpec* n : {&c.node_a, &c.node_b}) {
        n->emitter.p_exc = 1.0;
        n->emitter.branch_sigma = 1.0;
        n->emitter.branch_pi = 0.0;
        n->emitter.branch_d = 0.0;
        n->chain = {1.0, 1.0, 1.0, 1.0};
    }
    c.protocol.delta_t_s = 1.0;
    return c;
}

// Efficient collection so heralds are frequent; branching as measured.
SimConfig bright() {
    SimConfig c;
    for (NodeSpec* n : {&c.node_a, &c.node_b})
        n->chain = {1.0, 1.0, 1.0, 1.0};
    return c;
}

// Recoil-free motion: a very long wavelength gives vanishing Lamb-Dicke parameters.
SimConfig recoil_free() {
    SimConfig c;
    for (NodeSpec* n : {&c.node_a, &c.node_b})
        n->emitter.wavelength_m = 1e3;
    return c;
}

double sigma_binomial(double p, double n) { return std::sqrt(p * (1 - p) / n); }

std::uint64_t sum_counts(const RunTally& t) {
    return t.psi_plus + t.psi_minus + t.erasure_flagged + t.same_bin + t.missing_photon + t.out_of_window;
}

} // namespace

// ----- herald rule ----------------------------------------------------------------

TEST(Herald, ChannelRule) {
    const ProtocolParams p = paper_protocol();
    EXPECT_EQ(herald_classify(0, 0, p.tau_s, p), HeraldResult::psi_plus());
    EXPECT_EQ(herald_classify(1, 1, p.tau_s, p), HeraldResult::psi_plus());
    EXPECT_EQ(herald_classify(0, 1, p.tau_s, p), HeraldResult::psi_minus());
    EXPECT_EQ(herald_classify(0, 1, p.tau_s + 2 * p.delta_t_s, p), HeraldResult::rejected(RejectReason::out_of_window));
    EXPECT_EQ(herald_classify(0, 0, p.tau_s - p.delta_t_s, p), HeraldResult::psi_plus());
}

// ----- attempt engine -------------------------------------------------------------

TEST(Attempt, LosslessHeraldsHalfTheTime) {
    RunOptions o;
    o.attempts = 200000;
    o.seed = 11;
    const auto t = run_simulation(lossless(), o).tally;
    const double p = t.herald_probability();
    EXPECT_NEAR(p, 0.5, 3 * sigma_binomial(0.5, 2e5));
    EXPECT_EQ(t.missing_photon, 0u);
    EXPECT_EQ(t.same_bin + t.heralds(), t.attempts);
}

TEST(Attempt, PaperHeraldProbability) {
    RunOptions o;
    o.attempts = 2'000'000;
    o.seed = 5;
    const SimConfig cfg;
    const auto t = run_simulation(cfg, o).tally;
    const double y = window_stats(cfg.protocol.delta_t_s, cfg.node_a.emitter.tau_r_s).yield_y;
    const double expect = 0.5 * cfg.node_a.collection() * cfg.node_b.collection() * y;
    EXPECT_NEAR(expect, 1.63e-5, 0.05e-5);
    EXPECT_NEAR(t.herald_probability(), expect, 3 * sigma_binomial(expect, 2e6));
}

TEST(Attempt, CountsSumToAttempts) {
    RunOptions o;
    o.attempts = 100000;
    o.seed = 2;
    for (unsigned w : {1u, 3u}) {
        o.workers = w;
        const auto t = run_simulation(bright(), o).tally;
        EXPECT_EQ(sum_counts(t), t.attempts);
        EXPECT_GE(t.herald_probability(), 0.0);
        EXPECT_LE(t.herald_probability(), 1.0);
    }
}

TEST(Attempt, NodeInvariants) {
    const AttemptModel model(bright());
    Rng rng = make_stream(9, 0);
    for (int i = 0; i < 20000; ++i) {
        const auto o = simulate_attempt(model, rng);
        for (const auto& n : o.nodes) {
            EXPECT_GE(n.arrival_offset_s, 0.0);
            if (n.collected) {
                EXPECT_NE(n.bin, PhotonBin::none);
                EXPECT_TRUE(n.branch == DecayBranch::sigma || n.branch == DecayBranch::pi);
            }
        }
        EXPECT_LE(o.n_detections, 2u);
        if (o.herald.is_herald()) {
            ASSERT_EQ(o.n_detections, 2u);
            EXPECT_NE(o.detections[0].bin, o.detections[1].bin);
            ASSERT_TRUE(o.tau_offset_s);
            EXPECT_LE(std::abs(*o.tau_offset_s), model.protocol.delta_t_s);
        }
    }
}

TEST(Attempt, BellStatesSplitEvenly) {
    RunOptions o;
    o.attempts = 400000;
    o.seed = 21;
    const auto t = run_simulation(bright(), o).tally;
    const double n = static_cast<double>(t.heralds());
    ASSERT_GT(n, 1000);
    EXPECT_NEAR(static_cast<double>(t.psi_plus) / n, 0.5, 3 * sigma_binomial(0.5, n));
}

TEST(Attempt, VetoSuppressesFalseHeralds) {
    RunOptions o;
    o.attempts = 2'000'000;
    o.seed = 8;
    const auto with = run_simulation(bright(), o).tally;
    EXPECT_LT(with.false_herald_rate(), 1e-3);
    EXPECT_GT(with.erasure_flagged, 0u);

    SimConfig off = bright();
    off.noise.veto = false;
    const auto without = run_simulation(off, o).tally;
    // Leakage ratio per node: branch_pi (1 - pol_rejection) / branch_sigma.
    const double leak = 0.24 * 0.02 / 0.49;
    const double expect = 1 - 1 / ((1 + leak) * (1 + leak));
    const double n = static_cast<double>(without.heralds());
    EXPECT_NEAR(without.false_herald_rate(), expect, 4 * sigma_binomial(expect, n));
    EXPECT_EQ(without.erasure_flagged, 0u);
}

TEST(Attempt, OffsetVarianceMatchesWindowStats) {
    RunOptions o;
    o.attempts = 1'000'000;
    o.seed = 33;
    o.collect_offsets = true;
    const SimConfig cfg = bright();
    const auto t = run_simulation(cfg, o).tally;
    const auto m = oracle::moments(t.offsets);
    const double tau_r = cfg.node_a.emitter.tau_r_s;
    const double expect = 2 * tau_r * tau_r * window_stats(cfg.protocol.delta_t_s, tau_r).big_w;
    EXPECT_NEAR(m.variance, expect, 3 * m.variance_se);
    EXPECT_NEAR(t.offset_variance(), m.variance, 1e-6 * m.variance);
}

TEST(Attempt, DarkCountsCreateExtraDetections) {
    SimConfig c = bright();
    c.noise.dark_count_rate_hz = 2e6; // 0.2 per gate per detector
    RunOptions o;
    o.attempts = 50000;
    o.seed = 4;
    const auto noisy = run_simulation(c, o).tally;
    const auto clean = run_simulation(bright(), o).tally;
    EXPECT_GT(noisy.same_bin, clean.same_bin);
    EXPECT_EQ(sum_counts(noisy), noisy.attempts);
}

// ----- reproducibility ---------------------------------------------------------------

TEST(Run, DeterministicForSeedAndWorkers) {
    RunOptions o;
    o.attempts = 300000;
    o.seed = 77;
    o.workers = 4;
    o.emit_log = true;
    const auto a = run_simulation(bright(), o);
    const auto b = run_simulation(bright(), o);
    EXPECT_EQ(a.tally.psi_plus, b.tally.psi_plus);
    EXPECT_EQ(a.tally.psi_minus, b.tally.psi_minus);
    EXPECT_EQ(a.tally.offset_sum, b.tally.offset_sum);
    EXPECT_EQ(encode_binary(a.log), encode_binary(b.log));
    o.seed = 78;
    const auto c = run_simulation(bright(), o);
    EXPECT_NE(a.tally.offset_sum, c.tally.offset_sum);
}

TEST(Run, ZeroAttempts) {
    RunOptions o;
    o.attempts = 0;
    o.workers = 3;
    const auto r = run_simulation(SimConfig{}, o);
    EXPECT_EQ(r.tally.attempts, 0u);
    EXPECT_EQ(r.tally.herald_probability(), 0.0);
    EXPECT_TRUE(r.log.empty());
}

TEST(Run, EventLogReclassifiesToSameTally) {
    RunOptions o;
    o.attempts = 200000;
    o.seed = 12;
    o.workers = 2;
    o.emit_log = true;
    const SimConfig cfg = bright();
    const auto r = run_simulation(cfg, o);
    const auto decoded = decode_binary(encode_binary(r.log));
    const auto frames = frame_attempts(decoded);
    EXPECT_EQ(frames.frames.size(), o.attempts);
    EXPECT_TRUE(frames.warnings.empty());
    ClassifyOptions co;
    co.protocol = cfg.protocol;
    ChannelOffsets off;
    for (int ch = 0; ch < 2; ++ch)
        off.mean_arrival_ps[ch] = (cfg.timing.path_delay_s[ch] + cfg.node_a.emitter.tau_r_s) * 1e12;
    co.offsets = off;
    const auto c = classify_frames(frames.frames, co);
    EXPECT_EQ(c.summary.psi_plus, r.tally.psi_plus);
    EXPECT_EQ(c.summary.psi_minus, r.tally.psi_minus);
    EXPECT_EQ(c.summary.erasure_flagged, r.tally.erasure_flagged);
    EXPECT_EQ(c.summary.same_bin, r.tally.same_bin);
    EXPECT_EQ(c.summary.out_of_window, r.tally.out_of_window);
}

// ----- sampling oracles ---------------------------------------------------------------

TEST(ArrivalSampling, UntruncatedVarianceIsLaplace) {
    Rng rng = make_stream(1, 0);
    const double tau = 7.85e-9;
    std::vector<double> x(1'000'000);
    for (auto& v : x)
        v = sample_arrival_diff(tau, 1.0, rng);
    const auto m = oracle::moments(x);
    EXPECT_NEAR(m.variance, 2 * tau * tau, 3 * m.variance_se);
}

TEST(ArrivalSampling, TruncatedVarianceAndAcceptance) {
    Rng rng = make_stream(2, 0);
    const double tau = 7.85e-9;
    const double dt = 10e-9;
    std::uint64_t draws = 0;
    std::vector<double> x(1'000'000);
    for (auto& v : x)
        v = sample_arrival_diff(tau, dt, rng, &draws);
    const auto m = oracle::moments(x);
    EXPECT_NEAR(m.variance, 2 * tau * tau * 0.190, 3 * m.variance_se + 2 * tau * tau * 0.0005);
    const double y = window_stats(dt, tau).yield_y;
    const double acc = static_cast<double>(x.size()) / static_cast<double>(draws);
    EXPECT_NEAR(acc, y, 3 * sigma_binomial(y, static_cast<double>(draws)));
    EXPECT_NEAR(m.mean, 0.0, 3 * std::sqrt(m.variance / 1e6));
}

TEST(ArrivalSampling, NarrowWindowCollapses) {
    Rng rng = make_stream(3, 0);
    std::vector<double> x(2000);
    for (auto& v : x)
        v = sample_arrival_diff(7.85e-9, 1e-12, rng);
    EXPECT_LE(oracle::moments(x).variance, 1e-24 / 3 * 1.2);
    EXPECT_THROW(sample_arrival_diff(1.0, 0.0, rng), std::domain_error);
}

TEST(ArrivalSampling, KolmogorovSmirnovAgainstTruncatedLaplace) {
    Rng rng = make_stream(4, 0);
    const double tau = 7.85e-9, dt = 10e-9;
    std::vector<double> x(200000);
    for (auto& v : x)
        v = sample_arrival_diff(tau, dt, rng);
    const auto ks = oracle::ks_test(x, [&](double v) { return oracle::truncated_laplace_cdf(v, tau, dt); });
    EXPECT_GT(ks.p_value, 0.01);
}

TEST(MotionalSampling, ZeroZetaIsExactlyOne) {
    Rng rng = make_stream(5, 0);
    EXPECT_EQ(motional_coherence_sampled(0.0, 1e6, 10.0, 7.85e-9, 10e-9, 10000, rng), 1.0);
}

TEST(MotionalSampling, AgreesWithGaussianApproximation) {
    Rng rng = make_stream(6, 0);
    TrapMode m;
    m.freq_hz = 992e3;
    m.nbar = 826;
    m.zeta = 0.077;
    for (auto [dt, tol] : {std::pair{10e-9, 0.001}, std::pair{50e-9, 0.003}}) {
        const double approx = contrast_arrival(std::span(&m, 1), 7.85e-9, window_stats(dt, 7.85e-9).big_w);
        const double sampled = motional_coherence_sampled(m.zeta, m.freq_hz, m.nbar, 7.85e-9, dt, 200000, rng);
        EXPECT_NEAR(sampled, approx, tol) << dt;
    }
}

TEST(MotionalSampling, ThermalSecondMoment) {
    Rng rng = make_stream(7, 0);
    std::vector<TrapMode> modes(2);
    modes[0].nbar = 15;
    modes[1].nbar = 0.5;
    std::array<double, 2> acc{0, 0};
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const auto s = sample_motion(modes, rng);
        for (int k = 0; k < 2; ++k)
            acc[k] += std::norm(s.amplitudes[k]);
    }
    // |alpha|^2 is exponential with mean nbar: standard error nbar / sqrt(n).
    for (int k = 0; k < 2; ++k)
        EXPECT_NEAR(acc[k] / n, modes[k].nbar, 4 * modes[k].nbar / std::sqrt(n));
}

TEST(MotionalSampling, EventCoherenceAveragesToClosedForm) {
    Rng rng = make_stream(8, 0);
    TrapMode m;
    m.freq_hz = 1e6;
    m.nbar = 3;
    m.eta = 0.1;
    m.zeta = 0.0;
    const std::vector<TrapMode> modes{m};
    const double tau = 0.3e-6;
    const int n = 200000;
    std::complex<double> sum{0, 0};
    for (int i = 0; i < n; ++i)
        sum += event_coherence(modes, tau, 0.0, sample_motion(modes, rng), sample_motion(modes, rng));
    sum /= static_cast<double>(n);
    const auto ref = contrast_timebin(modes, tau);
    EXPECT_NEAR(std::abs(sum), ref.c_timebin, 4 / std::sqrt(n));
    EXPECT_NEAR(std::arg(sum), ref.phase_offsets[0], 4 / std::sqrt(n) / ref.c_timebin);
}

// ----- tomography synthesis ------------------------------------------------------------

namespace {

struct PipelineResult {
    BellDatasets data;
    ClassifySummary summary;
};

PipelineResult run_pipeline(const TomographyConfig& cfg, std::uint64_t n, std::span<const double> phases,
                            std::uint64_t seed) {
    Rng rng = make_stream(seed, 0);
    const auto run = synthesize_tomography(cfg, n, phases, rng);
    const auto records = decode_binary(encode_binary(run.log));
    const auto frames = frame_attempts(records);
    ClassifyOptions co;
    co.protocol = cfg.sim.protocol;
    const auto c = classify_frames(frames.frames, co);
    return {assemble_datasets(run.readouts, c.outcomes), c.summary};
}

std::vector<double> phase_grid(int n) {
    std::vector<double> p;
    for (int i = 0; i < n; ++i)
        p.push_back(2 * M_PI * i / n);
    return p;
}

} // namespace

TEST(Tomography, IdealStateGivesUnitFidelity) {
    TomographyConfig cfg;
    cfg.sim = recoil_free();
    const auto phases = phase_grid(12);
    const auto r = run_pipeline(cfg, 60000, phases, 1);
    EXPECT_NEAR(r.summary.yield(), window_stats(10e-9, 7.85e-9).yield_y, 0.01);
    for (const BellData* d : {&r.data.plus, &r.data.minus}) {
        const auto fit = fit_parity(d->parity);
        const auto p = odd_population(d->population);
        EXPECT_EQ(p.value, 1.0);
        const auto f = bell_fidelity_est(p, fit);
        EXPECT_NEAR(f.value, 1.0, 3 * f.std_err + 1e-9);
    }
}

TEST(Tomography, RecoversPhaseOffset) {
    TomographyConfig cfg;
    cfg.sim = recoil_free();
    cfg.base_contrast = 0.8;
    cfg.phase_offset_rad = 0.7;
    const auto phases = phase_grid(12);
    const auto r = run_pipeline(cfg, 100000, phases, 2);
    const auto plus = fit_parity(r.data.plus.parity);
    const auto minus = fit_parity(r.data.minus.parity);
    EXPECT_NEAR(plus.phase_offset, 0.7, 3 * plus.phase_err);
    EXPECT_NEAR(wrap_phase(minus.phase_offset - M_PI), 0.7, 3 * minus.phase_err);
    EXPECT_NEAR(plus.contrast, 0.8, 3 * plus.contrast_err);
}

TEST(Tomography, PaperConfigContrastMatchesExpectation) {
    TomographyConfig cfg;
    cfg.sim.noise.readout_error = 0.002;
    cfg.sim.noise.pulse_angle_rms = 0.03;
    cfg.sim.noise.mode_overlap_error = 0.004;
    cfg.base_contrast = 0.97;
    const auto phases = phase_grid(12);
    const auto r = run_pipeline(cfg, 150000, phases, 3);
    const double expect = expected_contrast(cfg);
    for (const BellData* d : {&r.data.plus, &r.data.minus}) {
        const auto fit = fit_parity(d->parity);
        EXPECT_NEAR(fit.contrast, expect, 3 * fit.contrast_err);
        const auto p = odd_population(d->population);
        EXPECT_NEAR(p.value, expected_odd_population(cfg), 3 * p.std_err + 1e-9);
    }
}

TEST(Tomography, ExpectedContrastFactors) {
    TomographyConfig cfg;
    cfg.sim = recoil_free();
    EXPECT_NEAR(expected_contrast(cfg), 1.0, 1e-9);
    cfg.sim.noise.readout_error = 0.1;
    EXPECT_NEAR(expected_contrast(cfg), 0.64, 1e-9);
    EXPECT_NEAR(expected_odd_population(cfg), 0.82, 1e-9);
}
