// coupling.hpp: closed-form field and coupling-strength estimates for the
// CPW resonator / persistent-current loop / NV spin chain.
//
// Inputs follow the SI/angular convention of units.hpp. The coupling
// functions return cyclic frequencies (g/2pi, eta/2pi, gbar/2pi in Hz),
// which is how these numbers are quoted and tabulated.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvbus/errors.hpp"
#include "nvbus/units.hpp"

namespace nvbus {

struct ResonatorParams {
    double omega_r{angular(6e9)};   // rad/s
    double L_r{2e-9};               // H
    std::optional<double> Q;        // only informational once kappa is set
    double kappa{angular(26e3)};    // rad/s
    double zeta{2.0 * angular(26e3)}; // rad/s
    double omega_drive{angular(6e9)}; // rad/s

    static ResonatorParams with_quality(double omega_r, double L_r, double Q) {
        ResonatorParams r;
        r.omega_r = omega_r;
        r.omega_drive = omega_r;
        r.L_r = L_r;
        r.Q = Q;
        r.kappa = omega_r / Q;
        r.zeta = 2.0 * r.kappa;
        return r;
    }

    void validate() const {
        require(omega_r > 0, ErrorKind::ValidationError, "omega_r must be > 0");
        require(L_r > 0, ErrorKind::ValidationError, "L_r must be > 0");
        require(kappa > 0, ErrorKind::ValidationError, "kappa must be > 0");
        require(zeta >= 0, ErrorKind::ValidationError, "zeta must be >= 0");
        if (Q) {
            require(*Q > 0, ErrorKind::ValidationError, "Q must be > 0");
            require(std::abs(kappa - omega_r / *Q) <= 1e-6 * kappa, ErrorKind::ValidationError,
                    "kappa inconsistent with omega_r/Q");
        }
    }
};

struct LoopParams {
    double r_loop{0.4e-6};          // m
    int n_turns{1};
    double I_p{600e-9};             // A
    double Delta{angular(5.2e9)};   // rad/s
    double Phi_x{0.5 * constants::flux_quantum}; // Wb
    double T1{20e-6};               // s
    double T2{2e-6};                // s
    std::optional<double> alpha;    // junction ratio, metadata only

    double area() const { return std::numbers::pi * r_loop * r_loop; }
    double magnetic_moment() const { return n_turns * I_p * area(); }

    void validate() const {
        require(r_loop > 0, ErrorKind::ValidationError, "r_loop must be > 0");
        require(I_p >= 0, ErrorKind::ValidationError, "I_p must be >= 0");
        require(n_turns >= 1, ErrorKind::ValidationError, "n_turns must be >= 1");
        require(!alpha || *alpha > 0.5, ErrorKind::ValidationError, "alpha must exceed 0.5");
        require(T1 > 0 && T2 > 0, ErrorKind::ValidationError, "PCQ coherence times must be > 0");
        require(T2 <= 2.0 * T1 * (1 + 1e-12), ErrorKind::UnphysicalT2, "PCQ T2 > 2 T1");
    }
};

struct NVParams {
    double D{angular(2870e6)};      // rad/s
    double slope{2.0 * constants::bohr_magneton_over_h}; // |d nu / d B_z|, Hz/T
    double B_bias{0.0};             // T
    double T1{4e-3};                // s
    double T2{600e-6};              // s

    void validate() const {
        require(D > 0, ErrorKind::ValidationError, "D must be > 0");
        require(slope > 0, ErrorKind::ValidationError, "slope must be > 0");
        require(T1 > 0 && T2 > 0, ErrorKind::ValidationError, "NV coherence times must be > 0");
        require(T2 <= 2.0 * T1 * (1 + 1e-12), ErrorKind::UnphysicalT2, "NV T2 > 2 T1");
    }
};

/// RMS vacuum current of the resonator mode, sqrt(hbar omega_r / 2 L_r).
inline double rms_vacuum_current(const ResonatorParams& r) {
    require(r.omega_r >= 0 && r.L_r > 0, ErrorKind::InvalidParameter,
            "rms_vacuum_current needs omega_r >= 0 and L_r > 0");
    return std::sqrt(constants::hbar * r.omega_r / (2.0 * r.L_r));
}

/// Vacuum RMS field a distance d from a thin-strip centre conductor.
inline double cpw_field_at(const ResonatorParams& r, double d) {
    require(d > 0, ErrorKind::NonpositiveDistance, "distance must be > 0");
    return constants::mu0 * rms_vacuum_current(r) / (std::numbers::pi * d);
}

/// Direct Zeeman coupling of an NV at distance d, gbar/2pi in Hz.
inline double direct_nv_cpw_coupling(const ResonatorParams& r, const NVParams& nv, double d) {
    return cpw_field_at(r, d) * nv.slope;
}

/// Loop/resonator coupling g/2pi in Hz: (I_p mu0 / hbar)(r^2/d) I_rms, times n_turns.
inline double pcq_cpw_coupling(const ResonatorParams& r, const LoopParams& loop, double d) {
    require(d > 0, ErrorKind::NonpositiveDistance, "distance must be > 0");
    const double g = loop.n_turns * loop.I_p * constants::mu0 / constants::hbar *
                     (loop.r_loop * loop.r_loop / d) * rms_vacuum_current(r);
    return cyclic(g);
}

/// Field on the loop axis at its centre from the persistent current.
/// The two circulating-current states give opposite signs; branch selects one.
inline double loop_center_field(const LoopParams& loop, int branch = +1) {
    const double b = loop.n_turns * constants::mu0 * loop.I_p / (2.0 * loop.r_loop);
    return branch < 0 ? -b : b;
}

/// NV/loop coupling eta/2pi in Hz. The NV line shift is eta/4pi = |B| * slope.
inline double nv_pcq_coupling(const LoopParams& loop, const NVParams& nv) {
    return 2.0 * std::abs(loop_center_field(loop)) * nv.slope;
}

/// Static field at the loop centre from the half-flux-quantum bias, Phi0 / (2A).
inline double static_bias_field(const LoopParams& loop) {
    return constants::flux_quantum / (2.0 * loop.area());
}

/// PCQ transition frequency sqrt(Delta^2 + eps^2), eps = (2 I_p / hbar)(Phi_x - Phi0/2).
inline double pcq_frequency(const LoopParams& loop) {
    const double eps = 2.0 * loop.I_p / constants::hbar * (loop.Phi_x - 0.5 * constants::flux_quantum);
    return std::hypot(loop.Delta, eps);
}

/// How the loop-to-conductor distance (and the NV distance for the direct
/// coupling) follows the loop radius in a coupling map.
struct DistanceRule {
    enum class Kind { LoopRadius, Fixed };
    Kind kind{Kind::LoopRadius};
    double fixed{0.0};

    static DistanceRule loop_radius() { return {}; }
    static DistanceRule fixed_distance(double d) { return {Kind::Fixed, d}; }

    double operator()(double r_loop) const { return kind == Kind::LoopRadius ? r_loop : fixed; }
    std::string describe() const {
        return kind == Kind::LoopRadius ? "r_loop" : std::to_string(fixed) + " m";
    }
};

struct CouplingRow {
    double r_loop{};
    double I_p{};
    double g_hz{};      // g/2pi
    double eta_hz{};    // eta/2pi
    double gbar_hz{};   // direct coupling / 2pi
};

/// One row per (r_loop, I_p) grid point, r_loop outermost.
inline std::vector<CouplingRow> coupling_map(const ResonatorParams& r, const NVParams& nv,
                                             const LoopParams& loop_template,
                                             std::span<const double> r_loop_grid,
                                             std::span<const double> I_p_grid,
                                             DistanceRule d_rule = {}) {
    require(!r_loop_grid.empty() && !I_p_grid.empty(), ErrorKind::EmptyGrid,
            "coupling_map needs nonempty grids");
    auto monotone = [](std::span<const double> v) {
        return std::is_sorted(v.begin(), v.end()) || std::is_sorted(v.rbegin(), v.rend());
    };
    require(monotone(r_loop_grid) && monotone(I_p_grid), ErrorKind::InvalidParameter,
            "coupling_map grids must be monotone");
    std::vector<CouplingRow> rows;
    rows.reserve(r_loop_grid.size() * I_p_grid.size());
    for (double rl : r_loop_grid) {
        for (double ip : I_p_grid) {
            LoopParams loop = loop_template;
            loop.r_loop = rl;
            loop.I_p = ip;
            const double d = d_rule(rl);
            rows.push_back({rl, ip, pcq_cpw_coupling(r, loop, d), nv_pcq_coupling(loop, nv),
                            direct_nv_cpw_coupling(r, nv, d)});
        }
    }
    return rows;
}

} // namespace nvbus
