#pragma once

// Estimators for the two-qubit readout: parity fringe fitting, odd-parity
// population, Bell fidelity with error propagation, Ramsey envelope fitting
// and Poisson count thresholding. All uncertainties are 1-sigma.

#include "timebin/event_stream.hpp"
#include "timebin/herald.hpp"
#include "timebin/physics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace timebin {

struct Estimate {
    double value = 0.0;
    double std_err = 0.0;
};

struct ParityPoint {
    double phase_rad = 0.0;
    std::uint64_t n_shots = 0;
    std::uint64_t n_even = 0;
    std::uint64_t n_odd = 0;

    [[nodiscard]] double parity() const {
        return n_shots == 0 ? 0.0 : (static_cast<double>(n_even) - static_cast<double>(n_odd)) / static_cast<double>(n_shots);
    }
};

struct FringeFit {
    double contrast = 0.0;       // >= 0
    double phase_offset = 0.0;   // wrapped to (-pi, pi]
    double offset = 0.0;         // vertical offset b
    double contrast_err = 0.0;
    double phase_err = 0.0;
    double offset_err = 0.0;
    double signed_amplitude = 0.0; // +-contrast with the phase folded into (-pi/2, pi/2]
    double chi2 = 0.0;
    bool degenerate = false;       // all points equal; contrast reported as 0
    bool clamped = false;          // contrast reduced so |model| <= 1

    [[nodiscard]] double model(double phase) const { return contrast * std::cos(phase - phase_offset) + offset; }
};

struct FitOptions {
    bool free_offset = true;
    int max_iterations = 25;
};

class FitError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline double wrap_phase(double phi) {
    double r = std::remainder(phi, two_pi); // [-pi, pi]
    if (r <= -pi)
        r += two_pi;
    return r;
}

namespace detail {

// Phase coverage of a scan: number of distinct phases and the span they
// cover on the circle (2 pi minus the largest gap).
inline std::pair<std::size_t, double> phase_coverage(std::vector<double> phases) {
    for (auto& p : phases)
        p = std::fmod(std::fmod(p, two_pi) + two_pi, two_pi);
    std::sort(phases.begin(), phases.end());
    phases.erase(std::unique(phases.begin(), phases.end(), [](double a, double b) { return b - a < 1e-12; }),
                 phases.end());
    if (phases.size() > 1 && phases.back() - phases.front() > two_pi - 1e-12)
        phases.pop_back();
    if (phases.size() < 2)
        return {phases.size(), 0.0};
    double gap = phases.front() + two_pi - phases.back();
    for (std::size_t i = 1; i < phases.size(); ++i)
        gap = std::max(gap, phases[i] - phases[i - 1]);
    return {phases.size(), two_pi - gap};
}

} // namespace detail

/// Weighted least squares of y = C cos(phi - phi0) + b. Sigmas must be
/// positive. The model is linear in (C cos phi0, C sin phi0, b), so the
/// weighted normal equations give the exact minimiser.
inline FringeFit fit_fringe(std::span<const double> phases, std::span<const double> values,
                            std::span<const double> sigmas, const FitOptions& opt = {}) {
    const std::size_t n = phases.size();
    const Eigen::Index k = opt.free_offset ? 3 : 2;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), k);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = std::cos(phases[i]);
        a(r, 1) = std::sin(phases[i]);
        if (opt.free_offset)
            a(r, 2) = 1.0;
        y(r) = values[i];
        w(r) = 1.0 / (sigmas[i] * sigmas[i]);
    }
    const Eigen::MatrixXd normal = a.transpose() * w.asDiagonal() * a;
    const Eigen::VectorXd rhs = a.transpose() * w.asDiagonal() * y;
    const Eigen::VectorXd p = normal.ldlt().solve(rhs);
    const Eigen::MatrixXd cov = normal.inverse();

    FringeFit f;
    const double ac = p(0);
    const double as = p(1);
    f.offset = opt.free_offset ? p(2) : 0.0;
    f.offset_err = opt.free_offset ? std::sqrt(cov(2, 2)) : 0.0;
    f.contrast = std::hypot(ac, as);
    f.phase_offset = wrap_phase(std::atan2(as, ac));
    if (f.contrast > 0.0) {
        const double c2 = f.contrast * f.contrast;
        f.contrast_err = std::sqrt(std::max(0.0, (ac * ac * cov(0, 0) + as * as * cov(1, 1) + 2 * ac * as * cov(0, 1)) / c2));
        f.phase_err = std::sqrt(std::max(0.0, (as * as * cov(0, 0) + ac * ac * cov(1, 1) - 2 * ac * as * cov(0, 1)) / (c2 * c2)));
    } else {
        f.contrast_err = std::sqrt(0.5 * (cov(0, 0) + cov(1, 1)));
        f.phase_err = pi;
    }
    f.signed_amplitude = std::abs(f.phase_offset) <= pi / 2 ? f.contrast : -f.contrast;
    const Eigen::VectorXd resid = y - a * p;
    f.chi2 = resid.cwiseProduct(resid).dot(w);
    return f;
}

/// Parity fringe fit with binomial weights. The Fourier projection at unit
/// frequency seeds the weights, which are then refined from the fitted model
/// until the parameters settle.
inline FringeFit fit_parity(std::span<const ParityPoint> points, const FitOptions& opt = {}) {
    std::vector<double> phases;
    std::vector<double> values;
    std::vector<double> shots;
    for (const auto& pt : points) {
        if (pt.n_even + pt.n_odd != pt.n_shots)
            throw FitError("fit_parity: n_even + n_odd must equal n_shots");
        if (pt.n_shots == 0)
            continue;
        phases.push_back(pt.phase_rad);
        values.push_back(pt.parity());
        shots.push_back(static_cast<double>(pt.n_shots));
    }
    const auto [distinct, span] = detail::phase_coverage(phases);
    if (distinct < 4 || span < pi - 1e-9)
        throw FitError("fit_parity: need at least 4 distinct phases spanning half a period");

    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*hi - *lo < 1e-15) {
        FringeFit f;
        f.degenerate = true;
        f.offset = opt.free_offset ? *lo : 0.0;
        f.phase_err = pi;
        return f;
    }

    // Unweighted projection as the starting model.
    std::vector<double> sigmas(values.size(), 1.0);
    FringeFit fit = fit_fringe(phases, values, sigmas, opt);
    for (int it = 0; it < opt.max_iterations; ++it) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double m = std::clamp(fit.model(phases[i]), -1.0, 1.0);
            const double var = std::max(1.0 - m * m, 1.0 / shots[i]) / shots[i];
            sigmas[i] = std::sqrt(var);
        }
        const FringeFit next = fit_fringe(phases, values, sigmas, opt);
        const bool settled = std::abs(next.contrast - fit.contrast) < 1e-13 &&
                             std::abs(wrap_phase(next.phase_offset - fit.phase_offset)) < 1e-13 &&
                             std::abs(next.offset - fit.offset) < 1e-13;
        fit = next;
        if (settled)
            break;
    }
    if (fit.contrast + std::abs(fit.offset) > 1.0) {
        fit.contrast = std::max(0.0, 1.0 - std::abs(fit.offset));
        fit.signed_amplitude = std::copysign(fit.contrast, fit.signed_amplitude);
        fit.clamped = true;
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Populations and fidelity

struct PopulationCounts {
    std::uint64_t down_down = 0;
    std::uint64_t down_up = 0;
    std::uint64_t up_down = 0;
    std::uint64_t up_up = 0;

    [[nodiscard]] std::uint64_t total() const { return down_down + down_up + up_down + up_up; }
};

inline Estimate odd_population(const PopulationCounts& c) {
    const auto n = c.total();
    if (n == 0)
        throw FitError("odd_population: no shots");
    const double p = static_cast<double>(c.down_up + c.up_down) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

inline Estimate bell_fidelity_est(const Estimate& p_odd, const FringeFit& fringe) {
    return {bell_fidelity(p_odd.value, fringe.contrast), 0.5 * std::hypot(p_odd.std_err, fringe.contrast_err)};
}

// ---------------------------------------------------------------------------
// Ramsey envelope

struct RamseyPoint {
    double delay_s = 0.0;
    double amplitude = 0.0;
    double err = 0.0; // <= 0: unknown, errors then scaled from the residuals
};

struct RamseyFit {
    double t2_star_s = 0.0;
    double t2_err = 0.0;
    double amplitude = 0.0;
    double amplitude_err = 0.0;
    double chi2 = 0.0;
};

struct RamseyOptions {
    bool cap_amplitude = false; // constrain A <= 0.5 (unentangled pair)
    int max_iterations = 200;
};

/// Least squares of amplitude(t) = A exp(-(t/T2*)^2). Seeded by a linear fit
/// of log(amplitude) against t^2, then Levenberg-Marquardt.
inline RamseyFit fit_ramsey(std::span<const RamseyPoint> points, const RamseyOptions& opt = {}) {
    if (points.size() < 3)
        throw FitError("fit_ramsey: need at least 3 delays");
    const bool known_errors = std::all_of(points.begin(), points.end(), [](const RamseyPoint& p) { return p.err > 0; });
    auto weight = [&](const RamseyPoint& p) { return known_errors ? 1.0 / (p.err * p.err) : 1.0; };

    // log-linear seed: ln y = ln A - t^2 / T^2
    double s0 = 0, s1 = 0, s2 = 0, sy = 0, sxy = 0;
    for (const auto& p : points) {
        if (p.amplitude <= 0)
            continue;
        const double x = p.delay_s * p.delay_s;
        const double ly = std::log(p.amplitude);
        const double wgt = weight(p) * p.amplitude * p.amplitude;
        s0 += wgt;
        s1 += wgt * x;
        s2 += wgt * x * x;
        sy += wgt * ly;
        sxy += wgt * x * ly;
    }
    double amp = 0.5;
    double inv_t2 = 0.0; // 1 / T^2
    const double det = s0 * s2 - s1 * s1;
    if (s0 > 0 && std::abs(det) > 0) {
        const double slope = (s0 * sxy - s1 * sy) / det;
        amp = std::exp((sy - slope * s1) / s0);
        inv_t2 = -slope;
    }
    if (!(inv_t2 > 0)) {
        double tmax = 0;
        for (const auto& p : points)
            tmax = std::max(tmax, p.delay_s);
        inv_t2 = tmax > 0 ? 1.0 / (tmax * tmax) : 1.0;
    }
    if (opt.cap_amplitude)
        amp = std::min(amp, 0.5);

    // Parameters (A, u) with u = 1/T^2 keep the model smooth at long T.
    auto chi2_of = [&](double aa, double uu) {
        double c = 0;
        for (const auto& p : points) {
            const double r = p.amplitude - aa * std::exp(-uu * p.delay_s * p.delay_s);
            c += weight(p) * r * r;
        }
        return c;
    };
    Eigen::Matrix2d jtj;
    double chi2 = chi2_of(amp, inv_t2);
    double lambda = 1e-3;
    bool converged = false;
    for (int it = 0; it < opt.max_iterations && !converged; ++it) {
        jtj.setZero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (const auto& p : points) {
            const double t2 = p.delay_s * p.delay_s;
            const double e = std::exp(-inv_t2 * t2);
            const Eigen::Vector2d j(e, -amp * t2 * e);
            const double r = p.amplitude - amp * e;
            jtj += weight(p) * j * j.transpose();
            jtr += weight(p) * r * j;
        }
        bool improved = false;
        while (!improved && lambda < 1e12) {
            Eigen::Matrix2d damped = jtj;
            damped.diagonal() *= (1.0 + lambda);
            const Eigen::Vector2d step = damped.ldlt().solve(jtr);
            double na = amp + step(0);
            if (opt.cap_amplitude)
                na = std::min(na, 0.5);
            const double nu = std::max(inv_t2 + step(1), 1e-300);
            const double nc = chi2_of(na, nu);
            if (nc > chi2) {
                lambda *= 10.0;
                continue;
            }
            const double rel = std::abs(na - amp) / std::max(std::abs(amp), 1e-300) + std::abs(nu - inv_t2) / inv_t2;
            converged = rel < 1e-14;
            amp = na;
            inv_t2 = nu;
            chi2 = nc;
            lambda = std::max(lambda * 0.1, 1e-12);
            improved = true;
        }
        if (!improved)
            break;
    }

    // Covariance at the solution.
    jtj.setZero();
    for (const auto& p : points) {
        const double t2 = p.delay_s * p.delay_s;
        const double e = std::exp(-inv_t2 * t2);
        const Eigen::Vector2d j(e, -amp * t2 * e);
        jtj += weight(p) * j * j.transpose();
    }
    Eigen::Matrix2d cov = jtj.inverse();
    if (!known_errors && points.size() > 2)
        cov *= chi2 / static_cast<double>(points.size() - 2);

    RamseyFit f;
    f.amplitude = amp;
    f.amplitude_err = std::sqrt(std::max(0.0, cov(0, 0)));
    f.t2_star_s = 1.0 / std::sqrt(inv_t2);
    // T = u^(-1/2)  =>  dT/du = -T^3 / 2
    f.t2_err = 0.5 * f.t2_star_s * f.t2_star_s * f.t2_star_s * std::sqrt(std::max(0.0, cov(1, 1)));
    f.chi2 = chi2;
    return f;
}

// ---------------------------------------------------------------------------
// Fluorescence thresholding

struct ThresholdResult {
    double threshold = 0.5;   // counts above this read as bright
    double dark_error = 0.0;  // P(dark state reads bright)
    double bright_error = 0.0;
    double error_rate = 0.0;  // mean of the two
    bool degenerate = false;  // equal means: no threshold separates the states
};

namespace detail {

// Poisson cumulative probabilities P(X <= k) for k = 0..kmax.
inline std::vector<double> poisson_cdf_table(double lambda, std::size_t kmax) {
    std::vector<double> cdf(kmax + 1);
    double term = std::exp(-lambda);
    double acc = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) {
        if (k > 0)
            term *= lambda / static_cast<double>(k);
        acc += term;
        cdf[k] = std::min(acc, 1.0);
    }
    return cdf;
}

} // namespace detail

/// Half-integer count threshold minimising the mean misclassification of a
/// dark state with Poisson mean lambda_dark and a bright state with mean
/// lambda_bright. Ties go to the lower threshold.
inline ThresholdResult optimal_threshold(double lambda_dark, double lambda_bright) {
    if (lambda_dark < 0 || lambda_bright < lambda_dark || !std::isfinite(lambda_bright))
        throw std::invalid_argument("optimal_threshold: need 0 <= lambda_dark <= lambda_bright");
    ThresholdResult best;
    if (lambda_bright == lambda_dark) {
        best.degenerate = true;
        best.dark_error = std::exp(-lambda_dark) < 1.0 ? 1.0 - std::exp(-lambda_dark) : 0.0;
        best.bright_error = 1.0 - best.dark_error;
        best.error_rate = 0.5;
        return best;
    }
    const auto kmax = static_cast<std::size_t>(std::ceil(lambda_bright + 12.0 * std::sqrt(lambda_bright) + 20.0));
    const auto dark = detail::poisson_cdf_table(lambda_dark, kmax);
    const auto bright = detail::poisson_cdf_table(lambda_bright, kmax);
    best.error_rate = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kmax; ++k) {
        const double de = std::max(0.0, 1.0 - dark[k]); // dark shows more than k counts
        const double be = bright[k];                    // bright shows k or fewer
        const double e = 0.5 * (de + be);
        if (e < best.error_rate - 1e-15) {
            best.threshold = static_cast<double>(k) + 0.5;
            best.dark_error = de;
            best.bright_error = be;
            best.error_rate = e;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Dataset assembly and CSV inputs

struct BellData {
    std::vector<ParityPoint> parity; // sorted by phase
    PopulationCounts population;
};

struct BellDatasets {
    BellData plus;
    BellData minus;
};

/// Joins ion readouts with herald outcomes by attempt id; only psi+/psi-
/// attempts contribute.
inline BellDatasets assemble_datasets(std::span<const ReadoutRecord> readouts, std::span<const FrameOutcome> outcomes) {
    std::unordered_map<std::uint32_t, HeraldKind> heralds;
    for (const auto& o : outcomes)
        if (o.result.is_herald())
            heralds.emplace(o.attempt_id, o.result.kind);

    std::map<double, ParityPoint> plus_pts;
    std::map<double, ParityPoint> minus_pts;
    BellDatasets out;
    for (const auto& r : readouts) {
        const auto it = heralds.find(r.attempt_id);
        if (it == heralds.end())
            continue;
        const bool plus = it->second == HeraldKind::psi_plus;
        BellData& data = plus ? out.plus : out.minus;
        if (r.basis == ReadoutBasis::population) {
            auto& c = data.population;
            if (r.bit_a == 0 && r.bit_b == 0)
                ++c.down_down;
            else if (r.bit_a == 0)
                ++c.down_up;
            else if (r.bit_b == 0)
                ++c.up_down;
            else
                ++c.up_up;
        } else {
            auto& pt = (plus ? plus_pts : minus_pts)[r.phase_rad];
            pt.phase_rad = r.phase_rad;
            ++pt.n_shots;
            if (r.odd())
                ++pt.n_odd;
            else
                ++pt.n_even;
        }
    }
    for (auto& [phase, pt] : plus_pts)
        out.plus.parity.push_back(pt);
    for (auto& [phase, pt] : minus_pts)
        out.minus.parity.push_back(pt);
    return out;
}

namespace detail {

inline std::vector<std::vector<std::string>> read_numeric_csv(std::istream& is, std::size_t columns,
                                                              std::string_view header) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#' || (rows.empty() && text == header))
            continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        while (true) {
            const auto comma = text.find(',', start);
            f.emplace_back(trim(text.substr(start, comma == text.npos ? text.npos : comma - start)));
            if (comma == text.npos)
                break;
            start = comma + 1;
        }
        if (f.size() != columns)
            throw FormatError("expected " + std::to_string(columns) + " fields", lineno);
        for (const auto& s : f) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
                throw FormatError("not a number: '" + s + "'", lineno);
        }
        f.push_back(std::to_string(lineno));
        rows.push_back(std::move(f));
    }
    return rows;
}

} // namespace detail

/// CSV "phase_rad,n_shots,n_odd".
inline std::vector<ParityPoint> read_parity_csv(std::istream& is) {
    std::vector<ParityPoint> out;
    for (const auto& row : detail::read_numeric_csv(is, 3, "phase_rad,n_shots,n_odd")) {
        const std::size_t line = std::stoul(row[3]);
        ParityPoint p;
        p.phase_rad = std::stod(row[0]);
        p.n_shots = detail::parse_unsigned(row[1], UINT64_MAX, line);
        p.n_odd = detail::parse_unsigned(row[2], UINT64_MAX, line);
        if (p.n_odd > p.n_shots)
            throw FormatError("n_odd exceeds n_shots", line);
        p.n_even = p.n_shots - p.n_odd;
        out.push_back(p);
    }
    return out;
}

/// CSV "delay_s,amplitude,err".
inline std::vector<RamseyPoint> read_ramsey_csv(std::istream& is) {
    std::vector<RamseyPoint> out;
    for (const auto& row : detail::read_numeric_csv(is, 3, "delay_s,amplitude,err"))
        out.push_back({std::stod(row[0]), std::stod(row[1]), std::stod(row[2])});
    return out;
}

} // namespace timebin
