// model.hpp: Hamiltonians and collapse operators of the driven
// cavity / PCQ / NV system.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nvbus/coupling.hpp"
#include "nvbus/operators.hpp"
#include "nvbus/units.hpp"

namespace nvbus {

/// All frequencies angular (rad/s).
struct ModelParams {
    double omega_r{angular(6e9)};
    double omega_0{angular(6e9)};
    double delta{0.0};   // omega_0 - omega_r
    double g{0.0};
    double eta{0.0};
    double zeta{0.0};
    int N_fock{4};

    void validate() const {
        require(N_fock >= 2, ErrorKind::DimensionTooSmall, "N_fock must be >= 2");
        require(g >= 0 && eta >= 0 && zeta >= 0, ErrorKind::ValidationError,
                "g, eta and zeta must be >= 0");
        if (omega_r > 0 && omega_0 > 0) {
            const double expect = omega_0 - omega_r;
            require(std::abs(delta - expect) <= 1e-6 * std::max(std::abs(omega_0), std::abs(omega_r)),
                    ErrorKind::ValidationError, "delta != omega_0 - omega_r");
        }
    }
};

enum class RateConvention {
    paper_2pi, // gamma = 2pi / T1, gamma_phi = 2pi (1/T2 - 1/2T1)
    plain,     // gamma = 1 / T1,   gamma_phi = 1/T2 - 1/2T1
};

enum class NvRelaxation {
    as_printed, // sqrt(gamma_nv) S_+
    lowering,   // sqrt(gamma_nv) S_-
};

inline std::string_view to_string(RateConvention c) {
    return c == RateConvention::paper_2pi ? "paper_2pi" : "plain";
}
inline std::string_view to_string(NvRelaxation r) {
    return r == NvRelaxation::as_printed ? "as_printed" : "lowering";
}

struct DecoherenceRates {
    double kappa{0.0};
    double gamma_pcq{0.0};
    double gamma_nv{0.0};
    double gamma_phi_pcq{0.0};
    double gamma_phi_nv{0.0};

    void validate() const {
        require(kappa >= 0 && gamma_pcq >= 0 && gamma_nv >= 0 && gamma_phi_pcq >= 0 && gamma_phi_nv >= 0,
                ErrorKind::ValidationError, "decoherence rates must be >= 0");
    }
};

struct RatePair {
    double gamma{};
    double gamma_phi{};
};

/// Relaxation and pure-dephasing rates (rad/s) from T1, T2 with
/// 1/T_phi = 1/T2 - 1/(2 T1).
inline RatePair rates_from_times(double T1, double T2, RateConvention conv = RateConvention::plain) {
    require(T1 > 0 && T2 > 0, ErrorKind::InvalidParameter, "T1 and T2 must be > 0");
    require(T2 <= 2.0 * T1 * (1 + 1e-12), ErrorKind::UnphysicalT2,
            "T2 = " + std::to_string(T2) + " s exceeds 2 T1 = " + std::to_string(2 * T1) + " s");
    const double f = conv == RateConvention::paper_2pi ? two_pi : 1.0;
    const double inv_tphi = std::max(0.0, 1.0 / T2 - 1.0 / (2.0 * T1));
    return {f / T1, f * inv_tphi};
}

inline DecoherenceRates rates_from(double kappa, const LoopParams& loop, const NVParams& nv,
                                   RateConvention conv) {
    const auto pcq = rates_from_times(loop.T1, loop.T2, conv);
    const auto spin = rates_from_times(nv.T1, nv.T2, conv);
    return {kappa, pcq.gamma, spin.gamma, pcq.gamma_phi, spin.gamma_phi};
}

/// NV ground-triplet Hamiltonian / hbar: g_e beta_e B_z S_z + D (S_z^2 - 2/3).
/// g_e beta_e = -2pi * slope (g_e < 0).
inline LabeledOperator build_nv_lab_hamiltonian(const NVParams& nv, double B_z) {
    const auto s = spin1_operators();
    const Mat zfs = s.z * s.z - (2.0 / 3.0) * Mat::Identity(3, 3);
    const double zeeman = -angular(nv.slope) * B_z;
    return LabeledOperator(zeeman * s.z + nv.D * zfs, SpaceLayout::nv_only(), true);
}

namespace detail {

struct CompositeOps {
    Mat a, ad, sz, sp, sm;
    Mat Sz, Sp, Sm;   // empty when the layout has no nv factor
};

inline CompositeOps composite_ops(const SpaceLayout& layout) {
    CompositeOps o;
    const auto p = pauli_operators();
    o.a = embed(fock_annihilation(layout.dim_of(Slot::cavity)), Slot::cavity, layout).matrix();
    o.ad = o.a.adjoint();
    o.sz = embed(p.z, Slot::pcq, layout).matrix();
    o.sp = embed(p.plus, Slot::pcq, layout).matrix();
    o.sm = embed(p.minus, Slot::pcq, layout).matrix();
    if (layout.has(Slot::nv)) {
        const auto s = spin1_operators();
        o.Sz = embed(s.z, Slot::nv, layout).matrix();
        o.Sp = embed(s.plus, Slot::nv, layout).matrix();
        o.Sm = embed(s.minus, Slot::nv, layout).matrix();
    }
    return o;
}

inline void check_layout(const ModelParams& p, const SpaceLayout& layout) {
    require(layout.has(Slot::cavity) && layout.has(Slot::pcq), ErrorKind::LayoutMismatch,
            "model layout needs cavity and pcq factors");
    require(layout.dim_of(Slot::cavity) == p.N_fock, ErrorKind::LayoutMismatch,
            "layout cavity dimension " + std::to_string(layout.dim_of(Slot::cavity)) +
                " != N_fock " + std::to_string(p.N_fock));
}

} // namespace detail

/// Lab-frame Hamiltonian split into a static part and the drive, which
/// contributes zeta (e^{-i w t} raising + e^{+i w t} lowering).
struct FullHamiltonian {
    LabeledOperator static_part;
    LabeledOperator drive_raising;   // zeta a^dagger
    LabeledOperator drive_lowering;  // zeta a
    double drive_frequency;          // rad/s

    Mat at(double t) const {
        const cplx ph = std::exp(-I_unit * drive_frequency * t);
        return static_part.matrix() + ph * drive_raising.matrix() + std::conj(ph) * drive_lowering.matrix();
    }
};

inline FullHamiltonian build_full_hamiltonian(const ModelParams& p, const NVParams& nv,
                                              const SpaceLayout& layout, double drive_frequency) {
    p.validate();
    detail::check_layout(p, layout);
    require(layout.has(Slot::nv), ErrorKind::LayoutMismatch, "full Hamiltonian needs the nv factor");
    const auto o = detail::composite_ops(layout);
    const int n = layout.total();
    const Mat id = Mat::Identity(n, n);
    const Mat zfs = o.Sz * o.Sz - (2.0 / 3.0) * id;
    const double zeeman = -angular(nv.slope) * nv.B_bias;

    Mat h = p.omega_r * (o.ad * o.a + 0.5 * id) + 0.5 * p.omega_0 * o.sz + zeeman * o.Sz + nv.D * zfs +
            p.g * (o.ad * o.sm + o.a * o.sp) + 0.5 * p.eta * o.sz * o.Sz;
    return {LabeledOperator(std::move(h), layout, true), LabeledOperator(p.zeta * o.ad, layout),
            LabeledOperator(p.zeta * o.a, layout), drive_frequency};
}

/// Rotating-frame Hamiltonian for a drive resonant with the cavity:
/// (delta/2) sz + zeta (a + a^dag) + g (a^dag s- + a s+) + (eta/2) sz Sz.
/// The NV Zeeman and zero-field terms commute with all of these and are
/// absorbed into the frame.
inline LabeledOperator build_interaction_hamiltonian(const ModelParams& p, const SpaceLayout& layout) {
    p.validate();
    detail::check_layout(p, layout);
    const auto o = detail::composite_ops(layout);
    Mat h = 0.5 * p.delta * o.sz + p.zeta * (o.a + o.ad) + p.g * (o.ad * o.sm + o.a * o.sp);
    if (layout.has(Slot::nv)) h += 0.5 * p.eta * o.sz * o.Sz;
    else require(p.eta == 0.0, ErrorKind::LayoutMismatch, "eta coupling needs the nv factor");
    return LabeledOperator(std::move(h), layout, true);
}

/// H_I restricted to a frozen NV sector S_z = m_s on the cavity+pcq layout.
/// The eta term becomes an extra qubit detuning eta * m_s.
inline LabeledOperator build_sector_hamiltonian(const ModelParams& p, int m_s, const SpaceLayout& layout) {
    require(m_s >= -1 && m_s <= 1, ErrorKind::InvalidParameter, "m_s must be -1, 0 or +1");
    require(!layout.has(Slot::nv), ErrorKind::LayoutMismatch, "sector Hamiltonian acts on cavity+pcq");
    ModelParams q = p;
    q.delta = p.delta + p.eta * m_s;
    q.omega_0 = q.omega_r + q.delta;
    q.eta = 0.0;
    return build_interaction_hamiltonian(q, layout);
}

/// Collapse operators in the fixed order
///   sqrt(kappa) a, sqrt(gamma_pcq) s-, sqrt(gamma_nv) S+ (or S-),
///   sqrt(gamma_phi_pcq) sz, sqrt(gamma_phi_nv) Sz.
/// Zero rates give zero operators so the list length is stable. On a layout
/// without the nv factor the two NV channels are omitted.
inline std::vector<LabeledOperator> build_collapse_operators(const DecoherenceRates& d, const SpaceLayout& layout,
                                                             NvRelaxation nv_relax = NvRelaxation::as_printed) {
    d.validate();
    const auto o = detail::composite_ops(layout);
    std::vector<LabeledOperator> c;
    c.emplace_back(std::sqrt(d.kappa) * o.a, layout);
    c.emplace_back(std::sqrt(d.gamma_pcq) * o.sm, layout);
    if (layout.has(Slot::nv))
        c.emplace_back(std::sqrt(d.gamma_nv) * (nv_relax == NvRelaxation::as_printed ? o.Sp : o.Sm), layout);
    c.emplace_back(std::sqrt(d.gamma_phi_pcq) * o.sz, layout);
    if (layout.has(Slot::nv)) c.emplace_back(std::sqrt(d.gamma_phi_nv) * o.Sz, layout);
    return c;
}

} // namespace nvbus
