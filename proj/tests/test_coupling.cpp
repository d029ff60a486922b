#include <gtest/gtest.h>

#include <random>

#include "nvbus/coupling.hpp"

using namespace nvbus;

namespace {

ResonatorParams reference_resonator() {
    ResonatorParams r;
    r.omega_r = angular(6e9);
    r.L_r = 2e-9;
    return r;
}

LoopParams loop_at(double r_loop, double I_p, int turns = 1) {
    LoopParams l;
    l.r_loop = r_loop;
    l.I_p = I_p;
    l.n_turns = turns;
    return l;
}

double radius_for_area(double a) { return std::sqrt(a / std::numbers::pi); }

} // namespace

TEST(RmsCurrent, SixGigahertzTwoNanohenry) {
    EXPECT_NEAR(rms_vacuum_current(reference_resonator()), 3.1526346e-8, 1e-14);
}

TEST(RmsCurrent, FourfoldInductanceHalvesCurrent) {
    auto r = reference_resonator();
    const double i1 = rms_vacuum_current(r);
    r.L_r *= 4;
    EXPECT_NEAR(rms_vacuum_current(r), 0.5 * i1, 1e-20);
}

TEST(RmsCurrent, ZeroFrequencyLimit) {
    auto r = reference_resonator();
    r.omega_r = 0;
    EXPECT_EQ(rms_vacuum_current(r), 0.0);
}

TEST(CpwField, FiftyNanometres) {
    // 2.5 milligauss quoted
    EXPECT_NEAR(cpw_field_at(reference_resonator(), 50e-9), 2.5e-7, 0.05 * 2.5e-7);
}

TEST(CpwField, InverseDistanceLaw) {
    const auto r = reference_resonator();
    EXPECT_NEAR(cpw_field_at(r, 100e-9), 0.5 * cpw_field_at(r, 50e-9), 1e-20);
    EXPECT_NEAR(cpw_field_at(r, 5e-6), cpw_field_at(r, 50e-9) / 100, 1e-22);
    EXPECT_NEAR(cpw_field_at(r, 5e-6), 2.5e-9, 0.05 * 2.5e-9);
}

TEST(CpwField, NonpositiveDistance) {
    try {
        cpw_field_at(reference_resonator(), 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonpositiveDistance);
    }
    EXPECT_THROW(cpw_field_at(reference_resonator(), -1e-9), Error);
    EXPECT_THROW(pcq_cpw_coupling(reference_resonator(), loop_at(0.4e-6, 600e-9), 0.0), Error);
}

TEST(DirectCoupling, QuotedValues) {
    const NVParams nv;
    EXPECT_NEAR(direct_nv_cpw_coupling(reference_resonator(), nv, 50e-9), 7e3, 0.1 * 7e3);
    EXPECT_NEAR(direct_nv_cpw_coupling(reference_resonator(), nv, 5e-6), 70.0, 0.1 * 70.0);
}

TEST(DirectCoupling, ZeroSlope) {
    NVParams nv;
    nv.slope = 0;
    EXPECT_EQ(direct_nv_cpw_coupling(reference_resonator(), nv, 50e-9), 0.0);
}

TEST(PcqCoupling, QuotedValues) {
    const auto r = reference_resonator();
    EXPECT_NEAR(pcq_cpw_coupling(r, loop_at(0.8e-6, 600e-9), 0.8e-6), 28.7e6, 0.02 * 28.7e6);
    EXPECT_NEAR(pcq_cpw_coupling(r, loop_at(0.4e-6, 600e-9), 0.4e-6), 14e6, 0.05 * 14e6);
}

TEST(PcqCoupling, TwoTurnsDoubles) {
    const auto r = reference_resonator();
    EXPECT_DOUBLE_EQ(pcq_cpw_coupling(r, loop_at(0.4e-6, 600e-9, 2), 0.4e-6),
                     2 * pcq_cpw_coupling(r, loop_at(0.4e-6, 600e-9, 1), 0.4e-6));
}

TEST(LoopField, Values) {
    EXPECT_EQ(loop_center_field(loop_at(0.4e-6, 0.0)), 0.0);
    EXPECT_NEAR(loop_center_field(loop_at(0.4e-6, 600e-9)), 9.4247780e-7, 1e-14);
    EXPECT_DOUBLE_EQ(loop_center_field(loop_at(0.4e-6, 600e-9, 3)), 3 * loop_center_field(loop_at(0.4e-6, 600e-9)));
    EXPECT_DOUBLE_EQ(loop_center_field(loop_at(0.4e-6, 600e-9), -1), -loop_center_field(loop_at(0.4e-6, 600e-9)));
}

TEST(LoopField, MatchesDipoleFormWithArea) {
    // 2 mu0 A I / (4 pi r^3) with A = pi r^2
    const auto l = loop_at(0.37e-6, 713e-9);
    const double dipole = 2 * constants::mu0 * l.area() * l.I_p / (4 * std::numbers::pi * std::pow(l.r_loop, 3));
    EXPECT_NEAR(loop_center_field(l), dipole, 1e-12 * dipole);
}

TEST(NvPcqCoupling, Values) {
    const NVParams nv;
    const double eta = nv_pcq_coupling(loop_at(0.4e-6, 600e-9), nv);
    EXPECT_NEAR(eta, 52778.8, 0.5);
    EXPECT_NEAR(eta, 60e3, 0.2 * 60e3);
    EXPECT_EQ(nv_pcq_coupling(loop_at(0.4e-6, 0.0), nv), 0.0);
    EXPECT_NEAR(nv_pcq_coupling(loop_at(0.2e-6, 600e-9), nv), 2 * eta, 1e-9);
}

TEST(StaticBias, Values) {
    const auto l2 = loop_at(radius_for_area(2e-12), 600e-9);
    EXPECT_NEAR(static_bias_field(l2), 5e-4, 0.05 * 5e-4);
    const auto l4 = loop_at(radius_for_area(4e-12), 600e-9);
    EXPECT_NEAR(static_bias_field(l4), 0.5 * static_bias_field(l2), 1e-15);
    const auto l1 = loop_at(radius_for_area(1e-12), 600e-9);
    EXPECT_NEAR(static_bias_field(l1) * 1e4, 10.339, 1e-3);
}

TEST(PcqFrequency, SymmetryPointAndPythagoras) {
    LoopParams l;
    l.Delta = angular(5.2e9);
    l.Phi_x = 0.5 * constants::flux_quantum;
    EXPECT_DOUBLE_EQ(pcq_frequency(l), l.Delta);
    EXPECT_NEAR(cyclic(pcq_frequency(l)), 5.2e9, 1e-3);
    // eps = Delta  =>  Phi_x - Phi0/2 = hbar Delta / (2 I_p)
    l.Phi_x = 0.5 * constants::flux_quantum + constants::hbar * l.Delta / (2 * l.I_p);
    EXPECT_NEAR(pcq_frequency(l), std::sqrt(2.0) * l.Delta, 1e-9 * l.Delta);
    EXPECT_GE(pcq_frequency(l), l.Delta);
}

TEST(CouplingMap, SinglePointTriple) {
    const std::vector<double> r{0.4e-6}, ip{600e-9};
    const auto rows = coupling_map(reference_resonator(), NVParams{}, LoopParams{}, r, ip);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_NEAR(rows[0].g_hz, 14e6, 0.05 * 14e6);
    EXPECT_NEAR(rows[0].eta_hz, 60e3, 0.2 * 60e3);
    EXPECT_NEAR(rows[0].gbar_hz, 1e3, 0.2 * 1e3);
}

TEST(CouplingMap, ZeroCurrentColumn) {
    const std::vector<double> r{0.2e-6, 0.4e-6, 0.8e-6}, ip{0.0};
    for (const auto& row : coupling_map(reference_resonator(), NVParams{}, LoopParams{}, r, ip)) {
        EXPECT_EQ(row.g_hz, 0.0);
        EXPECT_EQ(row.eta_hz, 0.0);
        EXPECT_GT(row.gbar_hz, 0.0);
    }
}

TEST(CouplingMap, RowsEqualPointEvaluations) {
    const std::vector<double> r{0.3e-6, 0.9e-6}, ip{450e-9, 800e-9};
    const auto res = reference_resonator();
    const NVParams nv;
    const auto rows = coupling_map(res, nv, LoopParams{}, r, ip);
    ASSERT_EQ(rows.size(), 4u);
    std::size_t k = 0;
    for (double rl : r)
        for (double i : ip) {
            const auto l = loop_at(rl, i);
            EXPECT_EQ(rows[k].g_hz, pcq_cpw_coupling(res, l, rl));
            EXPECT_EQ(rows[k].eta_hz, nv_pcq_coupling(l, nv));
            EXPECT_EQ(rows[k].gbar_hz, direct_nv_cpw_coupling(res, nv, rl));
            ++k;
        }
}

TEST(CouplingMap, Errors) {
    const std::vector<double> empty, one{1e-6}, unsorted{1e-6, 3e-6, 2e-6};
    try {
        coupling_map(reference_resonator(), NVParams{}, LoopParams{}, empty, one);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyGrid);
    }
    EXPECT_THROW(coupling_map(reference_resonator(), NVParams{}, LoopParams{}, unsorted, one), Error);
}

TEST(ScalingLaws, RandomizedProperty) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    const NVParams nv;
    for (int trial = 0; trial < 200; ++trial) {
        ResonatorParams res = reference_resonator();
        res.L_r *= u(rng);
        const auto base = loop_at(0.4e-6 * u(rng), 600e-9 * u(rng), 1 + trial % 3);
        const double d = 0.5e-6 * u(rng);
        const double g = pcq_cpw_coupling(res, base, d);
        const double eta = nv_pcq_coupling(base, nv);
        const double s = u(rng);

        auto l = base;
        l.I_p *= s;
        EXPECT_NEAR(pcq_cpw_coupling(res, l, d), s * g, 1e-9 * g);
        EXPECT_NEAR(nv_pcq_coupling(l, nv), s * eta, 1e-9 * eta);

        l = base;
        l.r_loop *= s;
        EXPECT_NEAR(pcq_cpw_coupling(res, l, d), s * s * g, 1e-9 * g);
        EXPECT_NEAR(nv_pcq_coupling(l, nv), eta / s, 1e-9 * eta / s);

        EXPECT_NEAR(pcq_cpw_coupling(res, base, s * d), g / s, 1e-9 * g / s);

        l = base;
        l.n_turns *= 2;
        EXPECT_DOUBLE_EQ(pcq_cpw_coupling(res, l, d), 2 * g);
        EXPECT_DOUBLE_EQ(nv_pcq_coupling(l, nv), 2 * eta);
        EXPECT_DOUBLE_EQ(static_bias_field(l), static_bias_field(base));
        EXPECT_DOUBLE_EQ(direct_nv_cpw_coupling(res, nv, d), direct_nv_cpw_coupling(res, nv, d));

        // d = r_loop: g * eta independent of r_loop
        auto a = base, b = base;
        b.r_loop *= s;
        const double prod_a = pcq_cpw_coupling(res, a, a.r_loop) * nv_pcq_coupling(a, nv);
        const double prod_b = pcq_cpw_coupling(res, b, b.r_loop) * nv_pcq_coupling(b, nv);
        EXPECT_NEAR(prod_a, prod_b, 1e-9 * prod_a);
        EXPECT_GE(g, 0);
        EXPECT_GE(eta, 0);
    }
}

TEST(Params, Invariants) {
    auto r = ResonatorParams::with_quality(angular(6e9), 2e-9, 2.3e5);
    EXPECT_NO_THROW(r.validate());
    EXPECT_NEAR(cyclic(r.kappa), 26e3, 0.02 * 26e3);
    r.kappa *= 1.001;
    EXPECT_THROW(r.validate(), Error);

    LoopParams l;
    l.T1 = 20e-6;
    l.T2 = 50e-6;
    try {
        l.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnphysicalT2);
    }
    l.T2 = 40e-6;
    EXPECT_NO_THROW(l.validate());
    l.alpha = 0.4;
    EXPECT_THROW(l.validate(), Error);
    NVParams nv;
    EXPECT_NO_THROW(nv.validate());
}
