#include "timebin/analysis.hpp"
#include "timebin/random.hpp"

#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

using namespace timebin;

namespace {

std::vector<double> phase_grid(int n) {
    std::vector<double> p;
    for (int i = 0; i < n; ++i)
        p.push_back(2 * M_PI * i / n);
    return p;
}

// Exact-expectation points: n_odd chosen so the parity equals the model up to
// count rounding, with large shot numbers.
std::vector<ParityPoint> exact_points(double c, double phi0, double b, std::span<const double> phases,
                                      std::uint64_t shots = 1'000'000'000) {
    std::vector<ParityPoint> out;
    for (double ph : phases) {
        const double parity = c * std::cos(ph - phi0) + b;
        ParityPoint p;
        p.phase_rad = ph;
        p.n_shots = shots;
        p.n_odd = static_cast<std::uint64_t>(std::llround(0.5 * (1 - parity) * static_cast<double>(shots)));
        p.n_even = shots - p.n_odd;
        out.push_back(p);
    }
    return out;
}

std::vector<ParityPoint> sampled_points(double c, double phi0, double b, std::span<const double> phases,
                                        std::uint64_t shots, Rng& rng) {
    std::vector<ParityPoint> out;
    for (double ph : phases) {
        const double p_odd = 0.5 * (1 - (c * std::cos(ph - phi0) + b));
        ParityPoint p;
        p.phase_rad = ph;
        p.n_shots = shots;
        p.n_odd = std::binomial_distribution<std::uint64_t>(shots, p_odd)(rng);
        p.n_even = shots - p.n_odd;
        out.push_back(p);
    }
    return out;
}

// Discrete Fourier amplitude at unit frequency on a uniform grid.
std::complex<double> fourier(std::span<const ParityPoint> pts) {
    std::complex<double> s{0, 0};
    for (const auto& p : pts)
        s += p.parity() * std::polar(1.0, p.phase_rad);
    return 2.0 * s / static_cast<double>(pts.size());
}

std::vector<RamseyPoint> ramsey_data(double a, double t2, double sigma, Rng* rng) {
    std::vector<RamseyPoint> pts;
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i <= 14; ++i) {
        const double t = 0.25e-3 * i;
        double y = a * std::exp(-(t / t2) * (t / t2));
        if (rng)
            y += sigma * noise(*rng);
        pts.push_back({t, y, sigma});
    }
    return pts;
}

} // namespace

// ----- parity fringe ---------------------------------------------------------------

TEST(FitParity, RecoversExactModel) {
    const auto phases = phase_grid(12);
    for (double phi0 : {-2.5, -0.3, 0.0, 1.2, 3.0}) {
        const auto pts = exact_points(0.93, phi0, 0.02, phases);
        const auto f = fit_parity(pts);
        EXPECT_NEAR(f.contrast, 0.93, 1e-6);
        EXPECT_NEAR(wrap_phase(f.phase_offset - phi0), 0.0, 1e-6);
        EXPECT_NEAR(f.offset, 0.02, 1e-6);
        EXPECT_FALSE(f.clamped);
    }
}

TEST(FitParity, AgreesWithFourierOnUniformGrid) {
    Rng rng = make_stream(1, 0);
    const auto phases = phase_grid(16);
    const auto pts = sampled_points(0.6, 0.4, 0.0, phases, 1000, rng);
    const auto f = fit_parity(pts);
    const auto z = fourier(pts);
    // Weighted and unweighted estimators differ at the level of the noise.
    EXPECT_NEAR(f.contrast, std::abs(z), 2 * f.contrast_err);
    EXPECT_NEAR(wrap_phase(f.phase_offset - std::arg(z)), 0.0, 2 * f.phase_err);
}

TEST(FitParity, ErrorBarsAreCalibrated) {
    Rng rng = make_stream(2, 0);
    const auto phases = phase_grid(12);
    const int trials = 400;
    double pull_sum = 0, pull_sq = 0;
    for (int i = 0; i < trials; ++i) {
        const auto f = fit_parity(sampled_points(0.9, 0.3, 0.0, phases, 200, rng));
        const double pull = (f.contrast - 0.9) / f.contrast_err;
        pull_sum += pull;
        pull_sq += pull * pull;
    }
    const double mean = pull_sum / trials;
    const double sd = std::sqrt(pull_sq / trials - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.25);
    EXPECT_NEAR(sd, 1.0, 0.15);
}

TEST(FitParity, FixedOffsetMode) {
    const auto phases = phase_grid(8);
    const auto pts = exact_points(0.8, 0.5, 0.0, phases);
    FitOptions o;
    o.free_offset = false;
    const auto f = fit_parity(pts, o);
    EXPECT_NEAR(f.contrast, 0.8, 1e-6);
    EXPECT_EQ(f.offset, 0.0);
    EXPECT_EQ(f.offset_err, 0.0);
}

TEST(FitParity, RequiresPhaseCoverage) {
    const std::vector<double> three{0.0, 1.0, 2.0};
    EXPECT_THROW(fit_parity(exact_points(0.5, 0, 0, three)), FitError);
    const std::vector<double> narrow{0.0, 0.5, 1.0, 1.5, 2.0};
    EXPECT_THROW(fit_parity(exact_points(0.5, 0, 0, narrow)), FitError);
    const std::vector<double> repeated{0.0, 0.0, 2 * M_PI, 4 * M_PI, 1.0};
    EXPECT_THROW(fit_parity(exact_points(0.5, 0, 0, repeated)), FitError);
    const std::vector<double> half{0.0, 1.0, 2.0, M_PI};
    EXPECT_NO_THROW(fit_parity(exact_points(0.5, 0, 0, half)));
}

TEST(FitParity, DegenerateAndClamped) {
    const auto phases = phase_grid(6);
    const auto flat = exact_points(0.0, 0.0, 0.2, phases, 1000);
    const auto f = fit_parity(flat);
    EXPECT_TRUE(f.degenerate);
    EXPECT_EQ(f.contrast, 0.0);

    // Saturated data: every point at +-1 around a shifted cosine.
    std::vector<ParityPoint> sat;
    for (double ph : phases) {
        ParityPoint p;
        p.phase_rad = ph;
        p.n_shots = 100;
        p.n_odd = std::cos(ph) > 0 ? 0 : 100;
        p.n_even = 100 - p.n_odd;
        sat.push_back(p);
    }
    const auto g = fit_parity(sat);
    EXPECT_LE(g.contrast + std::abs(g.offset), 1.0 + 1e-12);
    EXPECT_TRUE(g.clamped);
}

TEST(FitParity, InconsistentCountsRejected) {
    std::vector<ParityPoint> pts = exact_points(0.5, 0, 0, phase_grid(6), 100);
    pts[0].n_even += 1;
    EXPECT_THROW(fit_parity(pts), FitError);
}

TEST(FitParity, PhaseWrapping) {
    EXPECT_NEAR(wrap_phase(3 * M_PI), M_PI, 1e-12);
    EXPECT_NEAR(wrap_phase(-M_PI), M_PI, 1e-12);
    EXPECT_NEAR(wrap_phase(0.5 - 4 * M_PI), 0.5, 1e-12);
}

// ----- populations and fidelity -------------------------------------------------------

TEST(Populations, OddFractionAndFidelity) {
    PopulationCounts c{2, 498, 496, 4};
    const auto p = odd_population(c);
    EXPECT_NEAR(p.value, 0.994, 1e-12);
    EXPECT_NEAR(p.std_err, std::sqrt(0.994 * 0.006 / 1000), 1e-12);
    FringeFit f;
    f.contrast = 0.949;
    f.contrast_err = 0.006;
    const auto fid = bell_fidelity_est(p, f);
    EXPECT_NEAR(fid.value, 0.9715, 1e-12);
    EXPECT_NEAR(fid.std_err, 0.5 * std::hypot(p.std_err, 0.006), 1e-12);
    EXPECT_THROW(odd_population(PopulationCounts{}), FitError);
}

// ----- Ramsey ------------------------------------------------------------------------------

TEST(Ramsey, RecoversNoiselessEnvelope) {
    const auto pts = ramsey_data(0.5, 2.10e-3, 0.01, nullptr);
    const auto f = fit_ramsey(pts);
    EXPECT_NEAR(f.t2_star_s, 2.10e-3, 1e-12);
    EXPECT_NEAR(f.amplitude, 0.5, 1e-10);
    EXPECT_NEAR(f.chi2, 0.0, 1e-12);
}

TEST(Ramsey, ErrorBarsAreCalibrated) {
    Rng rng = make_stream(3, 0);
    const int trials = 300;
    double s = 0, s2 = 0, err = 0;
    for (int i = 0; i < trials; ++i) {
        const auto f = fit_ramsey(ramsey_data(0.5, 2.10e-3, 0.02, &rng));
        const double pull = (f.t2_star_s - 2.10e-3) / f.t2_err;
        s += pull;
        s2 += pull * pull;
        err += f.t2_err;
    }
    const double mean = s / trials;
    EXPECT_NEAR(mean, 0.0, 0.25);
    EXPECT_NEAR(std::sqrt(s2 / trials - mean * mean), 1.0, 0.15);
    EXPECT_GT(err / trials, 0.0);
}

TEST(Ramsey, UnknownErrorsScaleFromResiduals) {
    Rng rng = make_stream(4, 0);
    auto pts = ramsey_data(0.5, 2.10e-3, 0.02, &rng);
    const auto known = fit_ramsey(pts);
    for (auto& p : pts)
        p.err = 0.0;
    const auto unknown = fit_ramsey(pts);
    EXPECT_NEAR(unknown.t2_star_s, known.t2_star_s, 1e-9);
    EXPECT_GT(unknown.t2_err, 0.0);
    EXPECT_NEAR(unknown.t2_err / known.t2_err, std::sqrt(known.chi2 / 13.0), 1e-6);
}

TEST(Ramsey, AmplitudeCap) {
    auto pts = ramsey_data(0.6, 2.0e-3, 0.01, nullptr);
    RamseyOptions o;
    o.cap_amplitude = true;
    EXPECT_LE(fit_ramsey(pts, o).amplitude, 0.5);
    EXPECT_NEAR(fit_ramsey(pts).amplitude, 0.6, 1e-9);
}

TEST(Ramsey, TooFewPoints) {
    const std::vector<RamseyPoint> two{{0, 0.5, 0.01}, {1e-3, 0.4, 0.01}};
    EXPECT_THROW(fit_ramsey(two), FitError);
}

// ----- thresholding -------------------------------------------------------------------------

TEST(Threshold, PoissonReference) {
    const auto r = optimal_threshold(0.1, 10.0);
    EXPECT_EQ(r.threshold, 2.5);
    const boost::math::poisson_distribution<double> dark(0.1), bright(10.0);
    EXPECT_NEAR(r.dark_error, boost::math::cdf(boost::math::complement(dark, 2.0)), 1e-12);
    EXPECT_NEAR(r.bright_error, boost::math::cdf(bright, 2.0), 1e-12);
    EXPECT_NEAR(r.bright_error, 2.77e-3, 0.01e-3);
    EXPECT_NEAR(r.dark_error, 1.55e-4, 0.01e-4);
    EXPECT_FALSE(r.degenerate);
}

TEST(Threshold, BruteForceOptimum) {
    for (auto [d, b] : {std::pair{0.05, 4.0}, std::pair{0.5, 6.0}, std::pair{1.0, 20.0}, std::pair{2.0, 3.0}}) {
        const boost::math::poisson_distribution<double> dark(d), bright(b);
        double best = 2, best_k = -1;
        for (int k = 0; k < 80; ++k) {
            const double e = 0.5 * (boost::math::cdf(boost::math::complement(dark, k)) + boost::math::cdf(bright, k));
            if (e < best - 1e-15) {
                best = e;
                best_k = k;
            }
        }
        const auto r = optimal_threshold(d, b);
        EXPECT_EQ(r.threshold, best_k + 0.5) << d << " " << b;
        EXPECT_NEAR(r.error_rate, best, 1e-12);
    }
}

TEST(Threshold, EqualMeansAreDegenerate) {
    const auto r = optimal_threshold(3.0, 3.0);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.error_rate, 0.5);
    EXPECT_THROW(optimal_threshold(5.0, 1.0), std::invalid_argument);
    EXPECT_THROW(optimal_threshold(-1.0, 1.0), std::invalid_argument);
}

// ----- dataset assembly and CSV inputs -------------------------------------------------------

TEST(Datasets, JoinByAttemptId) {
    const std::vector<FrameOutcome> outcomes{{1, HeraldResult::psi_plus(), 0.0},
                                             {2, HeraldResult::psi_minus(), 0.0},
                                             {3, HeraldResult::erasure(), 0.0},
                                             {4, HeraldResult::rejected(RejectReason::same_bin), {}}};
    const std::vector<ReadoutRecord> rows{{1, ReadoutBasis::parity, 0.5, 0, 1}, {1, ReadoutBasis::population, 0, 1, 0},
                                          {2, ReadoutBasis::parity, 0.5, 0, 0}, {2, ReadoutBasis::parity, 1.5, 1, 1},
                                          {3, ReadoutBasis::parity, 0.5, 0, 1}, {4, ReadoutBasis::parity, 0.5, 0, 1},
                                          {9, ReadoutBasis::parity, 0.5, 0, 1}};
    const auto d = assemble_datasets(rows, outcomes);
    ASSERT_EQ(d.plus.parity.size(), 1u);
    EXPECT_EQ(d.plus.parity[0].n_odd, 1u);
    EXPECT_EQ(d.plus.population.up_down, 1u);
    ASSERT_EQ(d.minus.parity.size(), 2u);
    EXPECT_EQ(d.minus.parity[0].phase_rad, 0.5);
    EXPECT_EQ(d.minus.parity[0].n_even, 1u);
    EXPECT_EQ(d.minus.population.total(), 0u);
}

TEST(CsvInputs, ParityAndRamseyTables) {
    std::istringstream parity("phase_rad,n_shots,n_odd\n0,100,10\n# comment\n1.5,100,55\n");
    const auto p = read_parity_csv(parity);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[1].n_even, 45u);
    std::istringstream bad("phase_rad,n_shots,n_odd\n0,100,110\n");
    EXPECT_THROW(read_parity_csv(bad), FormatError);
    std::istringstream short_row("0,100\n");
    EXPECT_THROW(read_parity_csv(short_row), FormatError);
    std::istringstream ramsey("delay_s,amplitude,err\n0.001,0.4,0.01\n");
    const auto r = read_ramsey_csv(ramsey);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].amplitude, 0.4);
    std::istringstream nan("0.001,abc,0.01\n");
    EXPECT_THROW(read_ramsey_csv(nan), FormatError);
}
