#pragma once

#include "timebin/physics.hpp"

#include <cmath>
#include <cstdint>
#include <string_view>

namespace timebin {

enum class HeraldKind : std::uint8_t { psi_plus, psi_minus, rejected, erasure_flagged };

enum class RejectReason : std::uint8_t { none, same_bin, missing_photon, out_of_window };

struct HeraldResult {
    HeraldKind kind = HeraldKind::rejected;
    RejectReason reason = RejectReason::missing_photon;

    static constexpr HeraldResult psi_plus() { return {HeraldKind::psi_plus, RejectReason::none}; }
    static constexpr HeraldResult psi_minus() { return {HeraldKind::psi_minus, RejectReason::none}; }
    static constexpr HeraldResult erasure() { return {HeraldKind::erasure_flagged, RejectReason::none}; }
    static constexpr HeraldResult rejected(RejectReason why) { return {HeraldKind::rejected, why}; }

    [[nodiscard]] constexpr bool is_herald() const {
        return kind == HeraldKind::psi_plus || kind == HeraldKind::psi_minus;
    }

    friend constexpr bool operator==(const HeraldResult&, const HeraldResult&) = default;
};

inline std::string_view to_string(HeraldResult r) {
    switch (r.kind) {
    case HeraldKind::psi_plus:
        return "psi+";
    case HeraldKind::psi_minus:
        return "psi-";
    case HeraldKind::erasure_flagged:
        return "erasure";
    case HeraldKind::rejected:
        break;
    }
    switch (r.reason) {
    case RejectReason::same_bin:
        return "rejected:same-bin";
    case RejectReason::out_of_window:
        return "rejected:out-of-window";
    default:
        return "rejected:missing-photon";
    }
}

/// Early and late detections on the same beamsplitter output herald psi+,
/// on opposite outputs psi-. tau_star_s is the measured late-minus-early
/// detection interval; it must lie within +-delta_t of tau.
inline HeraldResult herald_classify(int early_channel, int late_channel, double tau_star_s,
                                    const ProtocolParams& protocol) {
    if (std::abs(tau_star_s - protocol.tau_s) > protocol.delta_t_s)
        return HeraldResult::rejected(RejectReason::out_of_window);
    return early_channel == late_channel ? HeraldResult::psi_plus() : HeraldResult::psi_minus();
}

} // namespace timebin
