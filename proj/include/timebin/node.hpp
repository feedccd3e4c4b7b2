#pragma once

// A trap node bundles the emitter, beam geometry, collection optics and the
// three motional modes of one ion. paper_node_a()/paper_node_b() carry the
// measured Alice/Bob parameter set used as the shipped defaults.

#include "timebin/physics.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace timebin {

struct ModeSetting {
    double freq_hz = 1e6;
    std::optional<double> nbar; // unset: Doppler limit from the cooling settings
};

struct NodeSpec {
    Node id = Node::A;
    EmitterSpec emitter;
    BeamGeometry geometry;
    CollectionChain chain;
    std::array<ModeSetting, 3> modes{}; // indexed by axis_index(), order z, x, y

    void validate() const {
        emitter.validate();
        geometry.validate();
        chain.validate();
        for (const auto& m : modes) {
            if (!(m.freq_hz > 0.0))
                throw std::invalid_argument("node: mode frequency must be positive");
            if (m.nbar && *m.nbar < 0.0)
                throw std::invalid_argument("node: nbar must be non-negative");
        }
    }

    [[nodiscard]] AxisAngles angles() const { return derive_beam_angles(geometry); }

    [[nodiscard]] double collection() const { return collection_prob(emitter, chain); }

    /// The node's modes in z, x, y order with recoil parameters derived from
    /// the geometry and unset occupations filled with the Doppler limit.
    [[nodiscard]] std::vector<TrapMode> trap_modes(const CoolingParams& cooling = {}) const {
        const AxisAngles ang = angles();
        std::vector<TrapMode> out;
        out.reserve(3);
        for (Axis ax : all_axes) {
            const ModeSetting& s = modes[axis_index(ax)];
            TrapMode m;
            m.ion = id;
            m.axis = ax;
            m.freq_hz = s.freq_hz;
            const auto r = recoil_params(s.freq_hz, ang.at(ax), emitter);
            m.eta = r.eta;
            m.zeta = r.zeta;
            m.nbar = s.nbar ? *s.nbar : doppler_nbar(s.freq_hz, ang.at(ax).theta_deg, emitter, cooling);
            out.push_back(m);
        }
        return out;
    }
};

inline std::vector<TrapMode> all_modes(const NodeSpec& a, const NodeSpec& b, const CoolingParams& cooling = {}) {
    auto modes = a.trap_modes(cooling);
    auto mb = b.trap_modes(cooling);
    modes.insert(modes.end(), mb.begin(), mb.end());
    canonical_order(modes);
    return modes;
}

inline NodeSpec paper_node_a() {
    NodeSpec n;
    n.id = Node::A;
    n.geometry = {45.0, 45.0};
    n.chain.solid_angle_frac = 0.10;
    n.modes[axis_index(Axis::z)] = {991.5e3, 13.0};
    n.modes[axis_index(Axis::x)] = {1157.5e3, 15.0};
    n.modes[axis_index(Axis::y)] = {1488.0e3, 12.0};
    return n;
}

inline NodeSpec paper_node_b() {
    NodeSpec n;
    n.id = Node::B;
    n.geometry = {85.5, 45.0};
    n.chain.solid_angle_frac = 0.20;
    n.modes[axis_index(Axis::z)] = {330.3e3, 38.0};
    n.modes[axis_index(Axis::x)] = {826.7e3, 15.0};
    n.modes[axis_index(Axis::y)] = {992.0e3, 826.0};
    return n;
}

inline ProtocolParams paper_protocol() { return {6048e-9, 10e-9, 70e3, 0.3}; }

inline std::vector<TrapMode> paper_modes() { return all_modes(paper_node_a(), paper_node_b()); }

} // namespace timebin
