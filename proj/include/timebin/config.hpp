#pragma once

// Run configuration: INI sections with unit-suffixed keys. Every key has a
// default equal to the shipped measured parameter set, so an empty file is a
// valid configuration. Unknown sections or keys are errors.

#include "timebin/monte_carlo.hpp"
#include "timebin/node.hpp"
#include "timebin/physics.hpp"
#include "timebin/planner.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace timebin {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct TomographySettings {
    double base_contrast = 1.0;
    double phase_offset_rad = 0.0;
};

struct RunConfig {
    SimConfig sim;
    CoolingParams cooling;
    std::vector<ErrorBudgetEntry> budget = paper_error_budget();
    FidelityReference reference;
    TomographySettings tomography;
    double angle_uncertainty_deg = 3.0;
    double pulse_len_s = 3e-12; // excitation pulse duration
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::uint64_t attempts = 1'000'000;

    [[nodiscard]] std::vector<TrapMode> modes() const { return all_modes(sim.node_a, sim.node_b, cooling); }

    void validate() const {
        sim.validate();
        if (cooling.detuning_over_gamma <= 0.0 || cooling.saturation < 0.0)
            throw std::invalid_argument("cooling: detuning must be positive and saturation non-negative");
        for (const auto& e : budget)
            if (!(e.fidelity_error >= 0.0 && e.fidelity_error <= 1.0))
                throw std::invalid_argument("budget: entry '" + e.label + "' outside [0, 1]");
        if (reference.p_odd < 0 || reference.p_odd > 1 || reference.contrast < 0 || reference.contrast > 1)
            throw std::invalid_argument("reference: p_odd and contrast must lie in [0, 1]");
        if (tomography.base_contrast < 0 || tomography.base_contrast > 1)
            throw std::invalid_argument("tomography: base_contrast must lie in [0, 1]");
        if (angle_uncertainty_deg < 0)
            throw std::invalid_argument("window: angle uncertainty must be non-negative");
        if (!(pulse_len_s >= 0.0))
            throw std::invalid_argument("protocol: pulse length must be non-negative");
        if (workers == 0)
            throw std::invalid_argument("run: workers must be at least 1");
        // Doppler limits must exist for every mode left without an occupation.
        (void)modes();
    }
};

inline RunConfig paper_config() { return RunConfig{}; }

namespace detail {

inline double parse_double(const std::string& text, const std::string& where) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v))
        throw ConfigError(where + ": expected a number, got '" + text + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& where) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
        throw ConfigError(where + ": expected a non-negative integer, got '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& text, const std::string& where) {
    if (text == "true" || text == "on" || text == "1")
        return true;
    if (text == "false" || text == "off" || text == "0")
        return false;
    throw ConfigError(where + ": expected true or false, got '" + text + "'");
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct Key {
    std::string name;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

struct Section {
    std::string name;
    std::vector<Key> keys;
};

// A double field stored in SI units and written with a unit scale.
template <class Access>
Key real(std::string name, double scale, Access access) {
    return {name,
            [access, scale](RunConfig& c, const std::string& v, const std::string& where) {
                access(c) = parse_double(v, where) * scale;
            },
            [access, scale](const RunConfig& c) { return fmt(access(const_cast<RunConfig&>(c)) / scale); }};
}

inline void node_sections(std::vector<Section>& out, const std::string& prefix, NodeSpec& (*node)(RunConfig&)) {
    out.push_back({prefix + ".emitter",
                   {
                       real("mass_u", constants::atomic_mass_unit, [node](RunConfig& c) -> double& { return node(c).emitter.mass_kg; }),
                       real("wavelength_nm", 1e-9, [node](RunConfig& c) -> double& { return node(c).emitter.wavelength_m; }),
                       real("tau_r_ns", 1e-9, [node](RunConfig& c) -> double& { return node(c).emitter.tau_r_s; }),
                       real("p_exc", 1.0, [node](RunConfig& c) -> double& { return node(c).emitter.p_exc; }),
                       real("branch_sigma", 1.0, [node](RunConfig& c) -> double& { return node(c).emitter.branch_sigma; }),
                       real("branch_pi", 1.0, [node](RunConfig& c) -> double& { return node(c).emitter.branch_pi; }),
                       real("branch_d", 1.0, [node](RunConfig& c) -> double& { return node(c).emitter.branch_d; }),
                       real("pol_rejection", 1.0, [node](RunConfig& c) -> double& { return node(c).emitter.pol_rejection; }),
                   }});
    out.push_back({prefix + ".geometry",
                   {
                       real("alpha_deg", 1.0, [node](RunConfig& c) -> double& { return node(c).geometry.alpha_deg; }),
                       real("beam_tilt_deg", 1.0, [node](RunConfig& c) -> double& { return node(c).geometry.beam_tilt_deg; }),
                   }});
    out.push_back({prefix + ".chain",
                   {
                       real("eps_fiber", 1.0, [node](RunConfig& c) -> double& { return node(c).chain.eps_fiber; }),
                       real("transmission", 1.0, [node](RunConfig& c) -> double& { return node(c).chain.transmission; }),
                       real("eps_det", 1.0, [node](RunConfig& c) -> double& { return node(c).chain.eps_det; }),
                       real("solid_angle_frac", 1.0, [node](RunConfig& c) -> double& { return node(c).chain.solid_angle_frac; }),
                   }});
    Section modes{prefix + ".modes", {}};
    for (Axis ax : all_axes) {
        const std::string a(to_string(ax));
        const std::size_t i = axis_index(ax);
        modes.keys.push_back(real(a + "_freq_khz", 1e3, [node, i](RunConfig& c) -> double& { return node(c).modes[i].freq_hz; }));
        modes.keys.push_back(
            {a + "_nbar",
             [node, i](RunConfig& c, const std::string& v, const std::string& where) {
                 if (v == "doppler")
                     node(c).modes[i].nbar.reset();
                 else
                     node(c).modes[i].nbar = parse_double(v, where);
             },
             [node, i](const RunConfig& c) {
                 const auto& n = node(const_cast<RunConfig&>(c)).modes[i].nbar;
                 return n ? fmt(*n) : std::string("doppler");
             }});
    }
    out.push_back(std::move(modes));
}

inline NodeSpec& node_a(RunConfig& c) { return c.sim.node_a; }
inline NodeSpec& node_b(RunConfig& c) { return c.sim.node_b; }

inline const std::vector<Section>& schema() {
    static const std::vector<Section> sections = [] {
        std::vector<Section> s;
        s.push_back({"protocol",
                     {
                         real("tau_ns", 1e-9, [](RunConfig& c) -> double& { return c.sim.protocol.tau_s; }),
                         real("delta_t_ns", 1e-9, [](RunConfig& c) -> double& { return c.sim.protocol.delta_t_s; }),
                         real("rep_rate_khz", 1e3, [](RunConfig& c) -> double& { return c.sim.protocol.rep_rate_hz; }),
                         real("duty", 1.0, [](RunConfig& c) -> double& { return c.sim.protocol.duty; }),
                         real("pulse_len_ps", 1e-12, [](RunConfig& c) -> double& { return c.pulse_len_s; }),
                     }});
        node_sections(s, "alice", &node_a);
        node_sections(s, "bob", &node_b);
        s.push_back({"cooling",
                     {
                         real("detuning_over_gamma", 1.0, [](RunConfig& c) -> double& { return c.cooling.detuning_over_gamma; }),
                         real("saturation", 1.0, [](RunConfig& c) -> double& { return c.cooling.saturation; }),
                     }});
        s.push_back(
            {"noise",
             {
                 real("pulse_angle_rms", 1.0, [](RunConfig& c) -> double& { return c.sim.noise.pulse_angle_rms; }),
                 real("dark_count_rate_hz", 1.0, [](RunConfig& c) -> double& { return c.sim.noise.dark_count_rate_hz; }),
                 real("mode_overlap_error", 1.0, [](RunConfig& c) -> double& { return c.sim.noise.mode_overlap_error; }),
                 real("readout_error", 1.0, [](RunConfig& c) -> double& { return c.sim.noise.readout_error; }),
                 {"veto",
                  [](RunConfig& c, const std::string& v, const std::string& w) { c.sim.noise.veto = parse_bool(v, w); },
                  [](const RunConfig& c) { return std::string(c.sim.noise.veto ? "true" : "false"); }},
                 real("veto_failure", 1.0, [](RunConfig& c) -> double& { return c.sim.noise.veto_failure; }),
             }});
        s.push_back(
            {"timing",
             {
                 real("sync_to_early_ns", 1e-9, [](RunConfig& c) -> double& { return c.sim.timing.sync_to_early_s; }),
                 real("gate_ns", 1e-9, [](RunConfig& c) -> double& { return c.sim.timing.gate_s; }),
                 real("path_delay_0_ns", 1e-9, [](RunConfig& c) -> double& { return c.sim.timing.path_delay_s[0]; }),
                 real("path_delay_1_ns", 1e-9, [](RunConfig& c) -> double& { return c.sim.timing.path_delay_s[1]; }),
             }});
        s.push_back({"reference",
                     {
                         real("p_odd", 1.0, [](RunConfig& c) -> double& { return c.reference.p_odd; }),
                         real("contrast", 1.0, [](RunConfig& c) -> double& { return c.reference.contrast; }),
                         real("angle_uncertainty_deg", 1.0, [](RunConfig& c) -> double& { return c.angle_uncertainty_deg; }),
                     }});
        s.push_back({"tomography",
                     {
                         real("base_contrast", 1.0, [](RunConfig& c) -> double& { return c.tomography.base_contrast; }),
                         real("phase_offset_deg", pi / 180.0, [](RunConfig& c) -> double& { return c.tomography.phase_offset_rad; }),
                     }});
        s.push_back(
            {"run",
             {
                 {"seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.seed = parse_u64(v, w); },
                  [](const RunConfig& c) { return std::to_string(c.seed); }},
                 {"workers",
                  [](RunConfig& c, const std::string& v, const std::string& w) {
                      const auto n = parse_u64(v, w);
                      if (n == 0 || n > 1024)
                          throw ConfigError(w + ": workers must be in [1, 1024]");
                      c.workers = static_cast<unsigned>(n);
                  },
                  [](const RunConfig& c) { return std::to_string(c.workers); }},
                 {"attempts", [](RunConfig& c, const std::string& v, const std::string& w) { c.attempts = parse_u64(v, w); },
                  [](const RunConfig& c) { return std::to_string(c.attempts); }},
             }});
        return s;
    }();
    return sections;
}

inline std::string budget_value(const ErrorBudgetEntry& e) {
    return (e.bound == BoundKind::upper_bound ? "<" : "") + fmt(e.fidelity_error);
}

} // namespace detail

/// Reads a configuration. A [budget] section, when present, replaces the
/// default error budget; each key is an entry label and a leading '<' marks
/// an upper bound.
inline RunConfig load_config(std::istream& is, const std::string& source = "config") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }

    RunConfig cfg;
    const auto& schema = detail::schema();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError(source + ": key '" + section + "' outside any section");
        if (section == "budget") {
            cfg.budget.clear();
            for (const auto& [label, value] : body) {
                std::string v = value.data();
                ErrorBudgetEntry e{label, 0.0, BoundKind::measured};
                if (!v.empty() && v.front() == '<') {
                    e.bound = BoundKind::upper_bound;
                    v.erase(0, 1);
                }
                e.fidelity_error = detail::parse_double(v, source + ": [budget] " + label);
                cfg.budget.push_back(std::move(e));
            }
            continue;
        }
        auto sec = std::find_if(schema.begin(), schema.end(), [&](const auto& s) { return s.name == section; });
        if (sec == schema.end())
            throw ConfigError(source + ": unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            auto k = std::find_if(sec->keys.begin(), sec->keys.end(), [&](const auto& kk) { return kk.name == key; });
            if (k == sec->keys.end())
                throw ConfigError(source + ": unknown key '" + key + "' in [" + section + "]");
            k->set(cfg, value.data(), source + ": [" + section + "] " + key);
        }
    }
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return load_config(in, path);
}

/// Complete configuration as INI text; load_config(to_ini(c)) reproduces c.
inline std::string to_ini(const RunConfig& cfg) {
    std::ostringstream os;
    bool first = true;
    for (const auto& sec : detail::schema()) {
        os << (first ? "" : "\n") << '[' << sec.name << "]\n";
        first = false;
        for (const auto& k : sec.keys)
            os << k.name << " = " << k.get(cfg) << '\n';
    }
    os << "\n[budget]\n";
    for (const auto& e : cfg.budget)
        os << e.label << " = " << detail::budget_value(e) << '\n';
    return os.str();
}

} // namespace timebin
