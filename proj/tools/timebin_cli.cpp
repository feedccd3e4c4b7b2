// timebin: command-line front end for the model, simulator and analysis chain.

#include "timebin/analysis.hpp"
#include "timebin/config.hpp"
#include "timebin/event_stream.hpp"
#include "timebin/monte_carlo.hpp"
#include "timebin/planner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace {

using namespace timebin;
using json = nlohmann::ordered_json;

enum ExitCode : int { ok = 0, usage = 1, config_error = 2, data_error = 3 };

// A rectangular result: one header and rows of numbers or strings.
struct Table {
    using Cell = std::variant<double, std::int64_t, std::string>;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    json meta = json::object();

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

std::string format_cell(const Table::Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", *d);
        return buf;
    }
    if (const auto* i = std::get_if<std::int64_t>(&c))
        return std::to_string(*i);
    return std::get<std::string>(c);
}

json to_json(const Table::Cell& c) {
    return std::visit([](const auto& v) { return json(v); }, c);
}

void write_table(const Table& t, const std::string& format, std::ostream& os) {
    if (format == "json") {
        json out = json::object();
        if (!t.meta.empty())
            out["meta"] = t.meta;
        json rows = json::array();
        for (const auto& r : t.rows) {
            json obj = json::object();
            for (std::size_t i = 0; i < t.columns.size(); ++i)
                obj[t.columns[i]] = to_json(r[i]);
            rows.push_back(std::move(obj));
        }
        out["rows"] = std::move(rows);
        os << out.dump(2) << '\n';
        return;
    }
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            os << (i ? "," : "") << format_cell(r[i]);
        os << '\n';
    }
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open '" + path + "'", 0);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ifstream open_text(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open '" + path + "'", 0);
    return in;
}

void write_log(const std::string& path, const std::string& format, std::span<const TimeTagRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    if (format == "csv") {
        encode_csv(records, out);
    } else {
        const auto bytes = encode_binary(records);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("list", "'" + item + "' is not a number");
        }
    }
    return out;
}

std::string result_name(const HeraldResult& r) { return std::string(to_string(r)); }

// ---------------------------------------------------------------------------
// Commands

Table cmd_geometry(const RunConfig& cfg) {
    Table t{{"node", "axis", "theta_deg", "psi_deg"}, {}, {}};
    for (const NodeSpec* n : {&cfg.sim.node_a, &cfg.sim.node_b}) {
        const auto ang = n->angles();
        for (Axis ax : all_axes)
            t.add({std::string(to_string(n->id)), std::string(to_string(ax)), ang.at(ax).theta_deg, ang.at(ax).psi_deg});
    }
    return t;
}

Table cmd_recoil(const RunConfig& cfg) {
    Table t{{"node", "axis", "freq_khz", "eta", "zeta", "nbar", "cycles"}, {}, {}};
    const auto modes = cfg.modes();
    const auto comm = commensurability(modes, cfg.sim.protocol.tau_s);
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const auto& m = modes[i];
        t.add({std::string(to_string(m.ion)), std::string(to_string(m.axis)), m.freq_hz * 1e-3, m.eta, m.zeta, m.nbar,
               comm[i].cycles});
    }
    t.meta["tau_ns"] = cfg.sim.protocol.tau_s * 1e9;
    return t;
}

Table cmd_rate(const RunConfig& cfg) {
    const auto& p = cfg.sim.protocol;
    const double pa = cfg.sim.node_a.collection();
    const double pb = cfg.sim.node_b.collection();
    const double y = window_stats(p.delta_t_s, cfg.sim.node_a.emitter.tau_r_s).yield_y;
    const auto r = success_prob_and_rate(pa, pb, y, p.rep_rate_hz, p.duty);
    const double dbl = double_emission_prob(cfg.sim.node_a.emitter.p_exc, cfg.sim.node_a.emitter.branch_sigma, cfg.pulse_len_s,
                                            cfg.sim.node_a.emitter.tau_r_s);
    Table t{{"p_a", "p_b", "p_e", "yield", "rate_hz", "double_emission"}, {}, {}};
    t.add({pa, pb, r.p_e, y, r.rate_hz, dbl});
    return t;
}

Table tally_table(const RunTally& s) {
    Table t{{"quantity", "value"}, {}, {}};
    auto n = [](std::uint64_t v) { return Table::Cell(static_cast<std::int64_t>(v)); };
    t.add({std::string("attempts"), n(s.attempts)});
    t.add({std::string("psi_plus"), n(s.psi_plus)});
    t.add({std::string("psi_minus"), n(s.psi_minus)});
    t.add({std::string("erasure_flagged"), n(s.erasure_flagged)});
    t.add({std::string("rejected_same_bin"), n(s.same_bin)});
    t.add({std::string("rejected_missing_photon"), n(s.missing_photon)});
    t.add({std::string("rejected_out_of_window"), n(s.out_of_window)});
    t.add({std::string("false_heralds"), n(s.false_heralds)});
    t.add({std::string("herald_probability"), s.herald_probability()});
    t.add({std::string("erasure_flag_rate"), s.erasure_flag_rate()});
    t.add({std::string("false_herald_rate"), s.false_herald_rate()});
    t.add({std::string("offset_mean_ns"), s.offset_mean() * 1e9});
    t.add({std::string("offset_variance_ns2"), s.offset_variance() * 1e18});
    return t;
}

Table cmd_simulate(const RunConfig& cfg, std::uint64_t attempts, const std::string& log_path,
                   const std::string& log_format) {
    RunOptions opt;
    opt.attempts = attempts;
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    opt.emit_log = !log_path.empty();
    const auto res = run_simulation(cfg.sim, opt);
    if (!log_path.empty())
        write_log(log_path, log_format, res.log);
    return tally_table(res.tally);
}

Table cmd_sweep_window(const RunConfig& cfg, const std::vector<double>& dt_ns) {
    std::vector<double> dts;
    for (double v : dt_ns) {
        if (!(v >= 0.0))
            throw CLI::ValidationError("--dt", "windows must be non-negative");
        dts.push_back(v * 1e-9);
    }
    WindowSweepOptions opt;
    opt.angle_uncertainty_deg = cfg.angle_uncertainty_deg;
    opt.reference = cfg.reference;
    opt.cooling = cfg.cooling;
    const auto curve = sweep_window(cfg.sim.node_a, cfg.sim.node_b, dts, opt);
    Table t{{"delta_t_ns", "yield", "big_w", "fidelity_rel", "fidelity_lo", "fidelity_hi"}, {}, {}};
    for (const auto& p : curve.points) {
        const auto ws = window_stats(p.x * 1e-9, cfg.sim.node_a.emitter.tau_r_s);
        t.add({p.x, *p.overlay, ws.big_w, p.y, *p.lo, *p.hi});
    }
    return t;
}

Table cmd_sweep_tau(const RunConfig& cfg, double from_ns, double to_ns, double step_ns) {
    const auto taus = linspace_step(from_ns * 1e-9, to_ns * 1e-9, step_ns * 1e-9);
    const auto curves = sweep_tau(cooling_levels(cfg.sim.node_a, cfg.sim.node_b, cfg.cooling), taus);
    Table t{{"tau_ns", "dopp_exp", "dopp_opt", "zero_point"}, {}, {}};
    for (std::size_t i = 0; i < taus.size(); ++i)
        t.add({curves[0].points[i].x, curves[0].points[i].y, curves[1].points[i].y, curves[2].points[i].y});
    for (const auto& c : curves)
        t.meta["scale_" + c.name] = c.scale;
    return t;
}

Table cmd_tune_tau(const RunConfig& cfg, double from_ns, double to_ns, double resolution_ns) {
    const auto modes = cfg.modes();
    const auto r = tune_tau(modes, from_ns * 1e-9, to_ns * 1e-9, resolution_ns * 1e-9);
    Table t{{"tau_ns", "c_timebin"}, {}, {}};
    t.add({r.tau_s * 1e9, r.c_timebin});
    return t;
}

Table cmd_budget(const RunConfig& cfg) {
    const auto b = compose_error_budget(cfg.budget);
    Table t{{"source", "fidelity_error", "bound"}, {}, {}};
    for (const auto& e : b.entries)
        t.add({e.label, e.fidelity_error, std::string(e.bound == BoundKind::upper_bound ? "upper_bound" : "measured")});
    t.add({std::string("total"), b.total_rounded, std::string("sum")});
    t.meta["total_exact"] = b.total;
    return t;
}

Table cmd_predict(RunConfig cfg, std::optional<double> nbar) {
    if (nbar) {
        for (NodeSpec* n : {&cfg.sim.node_a, &cfg.sim.node_b})
            for (auto& m : n->modes)
                m.nbar = *nbar;
    }
    const auto modes = cfg.modes();
    const auto p = predict_fidelity(modes, cfg.sim.protocol, cfg.sim.node_a.emitter.tau_r_s, cfg.budget);
    Table t{{"term", "fidelity_error"}, {}, {}};
    for (const auto& term : p.terms)
        t.add({term.label, term.fidelity_error});
    t.add({std::string("fidelity"), p.fidelity});
    t.meta["c_timebin"] = p.c_timebin;
    t.meta["c_arrival"] = p.c_arrival;
    return t;
}

Table cmd_parse(const std::string& in) {
    const auto records = parse_stream(read_bytes(in));
    const auto frames = frame_attempts(records);
    for (const auto& w : frames.warnings)
        std::cerr << "warning: " << w << '\n';
    Table t{{"attempt_id", "channel", "t_ps", "kind"}, {}, {}};
    for (const auto& r : records)
        t.add({static_cast<std::int64_t>(r.attempt_id), static_cast<std::int64_t>(r.channel),
               static_cast<std::int64_t>(r.t_ps), static_cast<std::int64_t>(r.kind)});
    t.meta["records"] = records.size();
    t.meta["frames"] = frames.frames.size();
    t.meta["orphan_records"] = frames.orphan_records;
    return t;
}

ClassifyOptions classify_options(const RunConfig& cfg, const std::string& rule) {
    ClassifyOptions opt;
    opt.protocol = cfg.sim.protocol;
    opt.rule = rule == "per-bin" ? WindowRule::per_bin : WindowRule::difference;
    return opt;
}

Table cmd_classify(const RunConfig& cfg, const std::string& in, const std::string& rule) {
    const auto records = parse_stream(read_bytes(in));
    const auto frames = frame_attempts(records);
    for (const auto& w : frames.warnings)
        std::cerr << "warning: " << w << '\n';
    const auto c = classify_frames(frames.frames, classify_options(cfg, rule));
    Table t{{"attempt_id", "result", "offset_ns"}, {}, {}};
    for (const auto& o : c.outcomes) {
        if (o.result.kind == HeraldKind::rejected && o.result.reason == RejectReason::missing_photon)
            continue;
        t.add({static_cast<std::int64_t>(o.attempt_id), result_name(o.result),
               o.offset_s ? Table::Cell(*o.offset_s * 1e9) : Table::Cell(std::string())});
    }
    const auto& s = c.summary;
    t.meta = {{"frames", s.frames},         {"incomplete", s.incomplete},       {"psi_plus", s.psi_plus},
              {"psi_minus", s.psi_minus},   {"erasure_flagged", s.erasure_flagged}, {"same_bin", s.same_bin},
              {"missing_photon", s.missing_photon}, {"out_of_window", s.out_of_window}, {"yield", s.yield()}};
    return t;
}

void add_fit_row(Table& t, const std::string& label, const FringeFit& f, std::optional<Estimate> p_odd) {
    Table::Cell p = p_odd ? Table::Cell(p_odd->value) : Table::Cell(std::string());
    Table::Cell pe = p_odd ? Table::Cell(p_odd->std_err) : Table::Cell(std::string());
    Table::Cell fid = std::string();
    Table::Cell fe = std::string();
    if (p_odd) {
        const auto e = bell_fidelity_est(*p_odd, f);
        fid = e.value;
        fe = e.std_err;
    }
    t.add({label, f.contrast, f.contrast_err, f.phase_offset, f.phase_err, f.offset, p, pe, fid, fe});
}

Table cmd_fit_parity(const RunConfig& cfg, const std::string& in, const std::string& log, const std::string& readouts,
                     bool fixed_offset, std::optional<double> p_odd, double p_odd_err) {
    FitOptions fo;
    fo.free_offset = !fixed_offset;
    Table t{{"state", "contrast", "contrast_err", "phase_rad", "phase_err", "offset", "p_odd", "p_odd_err", "fidelity",
             "fidelity_err"},
            {},
            {}};
    if (!in.empty()) {
        auto is = open_text(in);
        const auto pts = read_parity_csv(is);
        std::optional<Estimate> pe;
        if (p_odd)
            pe = Estimate{*p_odd, p_odd_err};
        add_fit_row(t, "data", fit_parity(pts, fo), pe);
        return t;
    }
    const auto records = parse_stream(read_bytes(log));
    const auto frames = frame_attempts(records);
    const auto c = classify_frames(frames.frames, classify_options(cfg, "difference"));
    auto rs = open_text(readouts);
    const auto rows = decode_readouts_csv(rs);
    const auto data = assemble_datasets(rows, c.outcomes);
    for (const auto& [label, d] : {std::pair{"psi+", &data.plus}, std::pair{"psi-", &data.minus}}) {
        std::optional<Estimate> pe;
        if (d->population.total() > 0)
            pe = odd_population(d->population);
        add_fit_row(t, label, fit_parity(d->parity, fo), pe);
    }
    t.meta["yield"] = c.summary.yield();
    return t;
}

Table cmd_fit_ramsey(const std::string& in, bool cap) {
    auto is = open_text(in);
    const auto pts = read_ramsey_csv(is);
    RamseyOptions opt;
    opt.cap_amplitude = cap;
    const auto f = fit_ramsey(pts, opt);
    Table t{{"t2_star_ms", "t2_err_ms", "amplitude", "amplitude_err", "chi2"}, {}, {}};
    t.add({f.t2_star_s * 1e3, f.t2_err * 1e3, f.amplitude, f.amplitude_err, f.chi2});
    return t;
}

Table cmd_threshold(double dark, double bright) {
    const auto r = optimal_threshold(dark, bright);
    Table t{{"threshold", "dark_error", "bright_error", "error_rate", "degenerate"}, {}, {}};
    t.add({r.threshold, r.dark_error, r.bright_error, r.error_rate, static_cast<std::int64_t>(r.degenerate)});
    return t;
}

Table cmd_tomography(const RunConfig& cfg, std::uint64_t candidates, int n_phases, const std::string& log,
                     const std::string& log_format, const std::string& readouts) {
    if (n_phases < 4)
        throw CLI::ValidationError("--phases", "need at least 4 analysis phases");
    TomographyConfig tc;
    tc.sim = cfg.sim;
    tc.base_contrast = cfg.tomography.base_contrast;
    tc.phase_offset_rad = cfg.tomography.phase_offset_rad;
    std::vector<double> phases;
    for (int i = 0; i < n_phases; ++i)
        phases.push_back(two_pi * i / n_phases);
    Rng rng = make_stream(cfg.seed, 0);
    const auto run = synthesize_tomography(tc, candidates, phases, rng);
    write_log(log, log_format, run.log);
    std::ofstream out(readouts);
    if (!out)
        throw std::runtime_error("cannot write '" + readouts + "'");
    encode_readouts_csv(run.readouts, out);
    Table t{{"candidates", "expected_contrast", "expected_p_odd"}, {}, {}};
    t.add({static_cast<std::int64_t>(candidates), expected_contrast(tc), expected_odd_population(tc)});
    return t;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-bin remote entanglement model, simulator and analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string out_path;
    std::string format = "csv";
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--seed", seed, "master random seed");
    app.add_option("--workers", workers, "worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--out", out_path, "output file (default stdout)");
    app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));

    auto* geometry = app.add_subcommand("geometry", "beam angles to every trap axis");
    auto* recoil = app.add_subcommand("recoil", "Lamb-Dicke parameters, occupations and period commensurability");
    auto* rate = app.add_subcommand("rate", "success probability and entanglement rate");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo attempt simulation");
    std::optional<std::uint64_t> attempts;
    std::string log_path;
    std::string log_format = "binary";
    simulate->add_option("--attempts", attempts, "number of attempts (default from config)");
    simulate->add_option("--log", log_path, "write the time-tag log here");
    simulate->add_option("--log-format", log_format, "log format")->check(CLI::IsMember({"binary", "csv"}));

    auto* sweep_window_cmd = app.add_subcommand("sweep-window", "relative fidelity and yield versus detection window");
    std::string dt_list = "2,5,10,20,30,50";
    sweep_window_cmd->add_option("--dt", dt_list, "comma-separated half-windows in ns");

    double from_ns = 5000, to_ns = 7000, step_ns = 1;
    auto* sweep_tau_cmd = app.add_subcommand("sweep-tau", "time-bin contrast versus excitation period");
    double sweep_from = 5900, sweep_to = 6200;
    sweep_tau_cmd->add_option("--from-ns", sweep_from);
    sweep_tau_cmd->add_option("--to-ns", sweep_to);
    sweep_tau_cmd->add_option("--step-ns", step_ns);

    auto* tune = app.add_subcommand("tune-tau", "period maximizing time-bin contrast");
    tune->add_option("--from-ns", from_ns);
    tune->add_option("--to-ns", to_ns);
    double resolution_ns = 1;
    tune->add_option("--resolution-ns", resolution_ns);

    auto* budget = app.add_subcommand("budget", "error budget table and total");
    auto* predict = app.add_subcommand("predict", "predicted Bell-state fidelity");
    std::optional<double> nbar_override;
    predict->add_option("--nbar", nbar_override, "set every mode occupation");

    std::string in_path;
    auto* parse = app.add_subcommand("parse", "decode a time-tag log (binary or CSV)");
    parse->add_option("--in", in_path, "log file")->required();

    auto* classify = app.add_subcommand("classify", "herald classification of a time-tag log");
    std::string rule = "difference";
    classify->add_option("--in", in_path, "log file")->required();
    classify->add_option("--rule", rule)->check(CLI::IsMember({"difference", "per-bin"}));

    auto* fit_parity_cmd = app.add_subcommand("fit-parity", "parity fringe fit and fidelity");
    std::string readouts_path;
    bool fixed_offset = false;
    std::optional<double> p_odd;
    double p_odd_err = 0.0;
    auto* fp_in = fit_parity_cmd->add_option("--in", in_path, "CSV phase_rad,n_shots,n_odd");
    auto* fp_log = fit_parity_cmd->add_option("--log", log_path, "time-tag log for the full pipeline");
    auto* fp_ro = fit_parity_cmd->add_option("--readouts", readouts_path, "readout CSV matching --log");
    fp_log->needs(fp_ro);
    fp_ro->needs(fp_log);
    fp_in->excludes(fp_log);
    fit_parity_cmd->add_flag("--fixed-offset", fixed_offset, "fit without a vertical offset");
    fit_parity_cmd->add_option("--p-odd", p_odd, "odd population for the fidelity column");
    fit_parity_cmd->add_option("--p-odd-err", p_odd_err);

    auto* fit_ramsey_cmd = app.add_subcommand("fit-ramsey", "Gaussian Ramsey envelope fit");
    bool cap = false;
    fit_ramsey_cmd->add_option("--in", in_path, "CSV delay_s,amplitude,err")->required();
    fit_ramsey_cmd->add_flag("--cap-amplitude", cap, "constrain the amplitude to at most 0.5");

    auto* threshold = app.add_subcommand("threshold", "optimal photon-count threshold");
    double dark = 0.1, bright = 10.0;
    threshold->add_option("--dark", dark, "mean counts of the dark state");
    threshold->add_option("--bright", bright, "mean counts of the bright state");

    auto* tomography = app.add_subcommand("tomography", "synthesize a heralded parity-scan dataset");
    std::uint64_t candidates = 20000;
    int n_phases = 12;
    tomography->add_option("--candidates", candidates, "two-photon candidate events");
    tomography->add_option("--phases", n_phases, "analysis phases per period");
    tomography->add_option("--log", log_path, "time-tag log output")->required();
    tomography->add_option("--log-format", log_format)->check(CLI::IsMember({"binary", "csv"}));
    tomography->add_option("--readouts", readouts_path, "readout CSV output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    RunConfig cfg;
    try {
        if (!config_path.empty())
            cfg = load_config_file(config_path);
        if (seed)
            cfg.seed = *seed;
        if (workers)
            cfg.workers = *workers;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    }
    std::cerr << "# seed = " << cfg.seed << "\n# resolved configuration\n" << to_ini(cfg);

    try {
        Table t;
        if (*geometry)
            t = cmd_geometry(cfg);
        else if (*recoil)
            t = cmd_recoil(cfg);
        else if (*rate)
            t = cmd_rate(cfg);
        else if (*simulate)
            t = cmd_simulate(cfg, attempts.value_or(cfg.attempts), log_path, log_format);
        else if (*sweep_window_cmd)
            t = cmd_sweep_window(cfg, parse_list(dt_list));
        else if (*sweep_tau_cmd)
            t = cmd_sweep_tau(cfg, sweep_from, sweep_to, step_ns);
        else if (*tune)
            t = cmd_tune_tau(cfg, from_ns, to_ns, resolution_ns);
        else if (*budget)
            t = cmd_budget(cfg);
        else if (*predict)
            t = cmd_predict(cfg, nbar_override);
        else if (*parse)
            t = cmd_parse(in_path);
        else if (*classify)
            t = cmd_classify(cfg, in_path, rule);
        else if (*fit_parity_cmd) {
            if (in_path.empty() && log_path.empty())
                throw CLI::ValidationError("fit-parity", "give --in, or --log with --readouts");
            t = cmd_fit_parity(cfg, in_path, log_path, readouts_path, fixed_offset, p_odd, p_odd_err);
        } else if (*fit_ramsey_cmd)
            t = cmd_fit_ramsey(in_path, cap);
        else if (*threshold)
            t = cmd_threshold(dark, bright);
        else if (*tomography)
            t = cmd_tomography(cfg, candidates, n_phases, log_path, log_format, readouts_path);

        if (out_path.empty()) {
            write_table(t, format, std::cout);
        } else {
            std::ofstream out(out_path, std::ios::binary);
            if (!out)
                throw std::runtime_error("cannot write '" + out_path + "'");
            write_table(t, format, out);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const FitError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    }
    return ok;
}
