// check.hpp: quick self-test suite behind `nvbus check`.

#pragma once

#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "nvbus/scan.hpp"

namespace nvbus {

struct CheckResult {
    std::string name;
    bool pass{false};
    std::string detail;
};

namespace detail {

inline std::string rel(double got, double want) {
    return "got " + format_double(got) + ", want " + format_double(want);
}

inline CheckResult within(std::string name, double got, double want, double rel_tol) {
    return {std::move(name), std::abs(got - want) <= rel_tol * std::abs(want), rel(got, want)};
}

} // namespace detail

inline std::vector<CheckResult> run_checks() {
    std::vector<CheckResult> out;
    auto guarded = [&](std::string name, const std::function<CheckResult()>& f) {
        try {
            out.push_back(f());
        } catch (const std::exception& e) {
            out.push_back({std::move(name), false, e.what()});
        }
    };

    ResonatorParams res;
    LoopParams loop;
    NVParams nv;
    loop.I_p = 600e-9;

    guarded("g at 0.8 um", [&] {
        LoopParams l = loop;
        l.r_loop = 0.8e-6;
        return detail::within("g at 0.8 um", pcq_cpw_coupling(res, l, l.r_loop), 28.7e6, 0.02);
    });
    guarded("g at 0.4 um", [&] {
        return detail::within("g at 0.4 um", pcq_cpw_coupling(res, loop, loop.r_loop), 14e6, 0.05);
    });
    guarded("eta at 0.4 um", [&] { return detail::within("eta at 0.4 um", nv_pcq_coupling(loop, nv), 60e3, 0.2); });
    guarded("gbar at 0.4 um", [&] {
        return detail::within("gbar at 0.4 um", direct_nv_cpw_coupling(res, nv, 0.4e-6), 1e3, 0.2);
    });
    guarded("field at 50 nm", [&] { return detail::within("field at 50 nm", cpw_field_at(res, 50e-9), 2.5e-7, 0.05); });
    guarded("bias field, 2 um^2", [&] {
        LoopParams l;
        l.r_loop = std::sqrt(2e-12 / std::numbers::pi);
        return detail::within("bias field, 2 um^2", static_bias_field(l), 5e-4, 0.05);
    });

    guarded("Liouvillian vs master equation", [&] {
        ModelParams p;
        p.N_fock = 3;
        p.g = 1.0;
        p.eta = 0.3;
        p.zeta = 0.2;
        p.delta = 0.1;
        p.omega_0 = p.omega_r + p.delta;
        const auto layout = SpaceLayout::full(p.N_fock);
        const auto H = build_interaction_hamiltonian(p, layout);
        const auto C = build_collapse_operators({0.5, 0.2, 0.1, 0.05, 0.02}, layout);
        const auto L = build_liouvillian(H, C);
        std::mt19937_64 rng(7);
        std::normal_distribution<double> nd;
        double worst = 0;
        const int n = layout.total();
        for (int k = 0; k < 5; ++k) {
            Mat x(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) x(i, j) = {nd(rng), nd(rng)};
            Mat rho = x * x.adjoint();
            rho /= rho.trace();
            const Mat& h = H.matrix();
            Mat direct = -I_unit * (h * rho - rho * h);
            for (const auto& c : C) {
                const Mat& m = c.matrix();
                const Mat mdm = m.adjoint() * m;
                direct += m * rho * m.adjoint() - 0.5 * (mdm * rho + rho * mdm);
            }
            worst = std::max(worst, (nvbus::apply(L, rho) - direct).cwiseAbs().maxCoeff());
        }
        return CheckResult{"Liouvillian vs master equation", worst < 1e-10, "max deviation " + format_double(worst)};
    });

    guarded("bare cavity linewidth", [&] {
        const double kappa = 1.0;
        const auto layout = SpaceLayout::cavity_only(3);
        const std::vector<LabeledOperator> c{LabeledOperator(std::sqrt(kappa) * fock_annihilation(3), layout)};
        const auto L = build_liouvillian(LabeledOperator(Mat::Zero(3, 3), layout, true), c);
        Mat one = Mat::Zero(3, 3);
        one(1, 1) = 1.0;
        const auto s = spectrum_resolvent(L, LabeledOperator(fock_annihilation(3), layout), DensityMatrix(one, layout),
                                          linear_grid(-10, 10, 801), SpectrumMode::full);
        return detail::within("bare cavity linewidth", fit_lorentzian(s).fwhm, kappa, 0.02);
    });

    guarded("vacuum Rabi peaks", [&] {
        ModelParams p;
        p.N_fock = 4;
        p.g = 50.0;
        p.zeta = 0.05;
        const auto layout = SpaceLayout::cavity_pcq(p.N_fock);
        const auto L = build_liouvillian(build_interaction_hamiltonian(p, layout),
                                         build_collapse_operators({1.0, 0.1, 0, 0, 0}, layout));
        const auto rho = steady_state(L);
        const auto a = embed(fock_annihilation(p.N_fock), Slot::cavity, layout);
        const auto s = spectrum_resolvent(L, a, rho, linear_grid(-80, 80, 4001));
        const auto rep = find_peaks(s, 0.1);
        const double step = s.step();
        double top = 0;
        for (const auto& pk : rep.peaks) top = std::max(top, pk.height);
        std::vector<double> main;
        for (const auto& pk : rep.peaks)
            if (pk.height > 0.1 * top) main.push_back(pk.position);
        bool ok = main.size() == 2 && std::abs(main[0] + p.g) <= step && std::abs(main[1] - p.g) <= step;
        std::string d = "dominant peaks";
        for (double x : main) d += " " + format_double(x);
        return CheckResult{"vacuum Rabi peaks", ok, d};
    });

    guarded("steady state of fig7 base point", [&] {
        auto c = load_preset("fig7", {"tau=20us"});
        const auto p = at_point(c, axis_point(c, 0));
        const auto pt = solve_point(p, 4);
        bool ok = !pt.spectrum.steady_states.empty();
        double worst = 0;
        for (const auto& s : pt.spectrum.steady_states) {
            ok &= s.trace_error < 1e-10 && s.hermiticity_error < 1e-10 && s.min_eigenvalue > -1e-8 &&
                  s.residual < 1e-9 && s.kernel_dim == 1;
            worst = std::max(worst, s.residual);
        }
        return CheckResult{"steady state of fig7 base point", ok, "max residual " + format_double(worst)};
    });

    guarded("override round trip", [&] {
        const auto c = load_preset("fig4a");
        const auto c2 = load_preset("fig4a", {"resonator.kappa=26 kHz"});
        return CheckResult{"override round trip", c.hash() == c2.hash(), "hash " + c.hash()};
    });
    return out;
}

inline bool print_checks(const std::vector<CheckResult>& results, std::ostream& os) {
    std::size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    bool all = true;
    for (const auto& r : results) {
        all &= r.pass;
        os << (r.pass ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ') << r.detail
           << '\n';
    }
    os << (all ? "all checks passed" : "some checks FAILED") << '\n';
    return all;
}

} // namespace nvbus
