// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <iostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "nvbus/scan.hpp"

using namespace nvbus;

namespace {

struct Verdict {
    bool pass{true};
    std::string detail;

    void add(bool ok, const std::string& what) {
        pass &= ok;
        detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [FAIL]");
    }
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

bool near_rel(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_rel_dev(const Spectrum& a, const Spectrum& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]) / std::abs(b.values[i]));
    return m;
}

ModelParams model(int n, double g, double zeta, double delta = 0, double eta = 0) {
    ModelParams p;
    p.N_fock = n;
    p.g = g;
    p.zeta = zeta;
    p.delta = delta;
    p.omega_0 = p.omega_r + delta;
    p.eta = eta;
    return p;
}

// ---------------------------------------------------------------------------

Verdict couplings() {
    Verdict v;
    ResonatorParams r;
    NVParams nv;
    LoopParams l;
    l.I_p = 600e-9;
    l.r_loop = 0.8e-6;
    const double g08 = pcq_cpw_coupling(r, l, l.r_loop);
    v.add(near_rel(g08, 28.7e6, 0.02), "g(0.8 um) " + fmt(g08 * 1e-6) + " MHz");
    l.r_loop = 0.4e-6;
    const double g = pcq_cpw_coupling(r, l, l.r_loop), eta = nv_pcq_coupling(l, nv),
                 gbar = direct_nv_cpw_coupling(r, nv, l.r_loop);
    v.add(near_rel(g, 14e6, 0.05) && near_rel(eta, 60e3, 0.2) && near_rel(gbar, 1e3, 0.2),
          "triple " + fmt(g * 1e-6) + " MHz, " + fmt(eta * 1e-3) + " kHz, " + fmt(gbar * 1e-3) + " kHz");
    const double b50 = cpw_field_at(r, 50e-9);
    v.add(near_rel(b50, 2.5e-7, 0.05), "B(50 nm) " + fmt(b50 * 1e7) + " mG");
    const double d50 = direct_nv_cpw_coupling(r, nv, 50e-9), d5 = direct_nv_cpw_coupling(r, nv, 5e-6);
    v.add(near_rel(d50, 7e3, 0.1) && near_rel(d5, 70, 0.1),
          "gbar " + fmt(d50 * 1e-3) + " kHz, " + fmt(d5) + " Hz");
    LoopParams a;
    a.r_loop = std::sqrt(2e-12 / std::numbers::pi);
    const double bs = static_bias_field(a);
    v.add(near_rel(bs, 5e-4, 0.05), "B_s " + fmt(bs * 1e4) + " G");
    return v;
}

Verdict analytic_spectra() {
    Verdict v;
    {
        const auto t0 = std::chrono::steady_clock::now();
        const double kappa = 1.0;
        const auto layout = SpaceLayout::cavity_only(3);
        const std::vector<LabeledOperator> c{LabeledOperator(std::sqrt(kappa) * fock_annihilation(3), layout)};
        const auto L = build_liouvillian(LabeledOperator(Mat::Zero(3, 3), layout, true), c);
        Mat one = Mat::Zero(3, 3);
        one(1, 1) = 1.0;
        const DensityMatrix rho(one, layout);
        const LabeledOperator a(fock_annihilation(3), layout);
        const auto grid = linear_grid(-10, 10, 401);
        const double fr = fit_lorentzian(spectrum_resolvent(L, a, rho, grid, SpectrumMode::full)).fwhm;
        const double ff =
            fit_lorentzian(spectrum_fft_crosscheck(L, a, rho, grid, 40, 2e-3, SpectrumMode::full)).fwhm;
        const double t = seconds_since(t0);
        v.add(near_rel(fr, kappa, 0.02) && near_rel(ff, kappa, 0.02) && t < 1.0,
              "bare FWHM/kappa " + fmt(fr, 6) + " (resolvent), " + fmt(ff, 6) + " (time domain), " + fmt(t, 2) + " s");
    }
    {
        const double kappa = angular(26e3), g = angular(14e6);
        const auto pr = rates_from_times(20e-6, 40e-6);
        const DecoherenceRates d{kappa, pr.gamma, 0, pr.gamma_phi, 0};
        const auto p = model(3, g, kappa / 10);
        const auto layout = SpaceLayout::cavity_pcq(3);
        const auto L = build_liouvillian(build_interaction_hamiltonian(p, layout), build_collapse_operators(d, layout));
        const auto rho = steady_state(L);
        const auto a = embed(fock_annihilation(3), Slot::cavity, layout);

        // oracle: single-excitation eigenvalues of H_I - (i/2) sum C^dag C
        auto q = p;
        q.zeta = 0;
        Mat heff = build_interaction_hamiltonian(q, layout).matrix();
        for (const auto& c : build_collapse_operators(d, layout)) heff -= 0.5 * I_unit * c.matrix().adjoint() * c.matrix();
        const Eigen::ComplexEigenSolver<Mat> es(heff);
        const Eigen::VectorXcd ev = es.eigenvalues();

        bool ok = true;
        std::string info;
        double worst_t = 0;
        for (double sign : {-1.0, 1.0}) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto s = spectrum_resolvent(L, a, rho, centered_grid(sign * g, 20 * kappa, 2001),
                                              SpectrumMode::incoherent, sign * g);
            worst_t = std::max(worst_t, seconds_since(t0));
            const auto rep = find_peaks(s, 0.1);
            Eigen::Index best = 0;
            for (Eigen::Index k = 0; k < ev.size(); ++k)
                if (std::abs(ev[k].real() - sign * g) < std::abs(ev[best].real() - sign * g)) best = k;
            Eigen::Index ground = 0;
            for (Eigen::Index k = 0; k < ev.size(); ++k)
                if (std::abs(ev[k].real()) < std::abs(ev[ground].real())) ground = k;
            const double oracle = ev[best].real() - ev[ground].real() - sign * g;
            const double half_width = std::abs(ev[best].imag() - ev[ground].imag());
            const bool one = rep.peaks.size() == 1;
            const double pos = one ? rep.peaks[0].position : 1e300;
            ok &= one && std::abs(pos) <= s.step() && std::abs(pos - oracle) <= half_width;
            info += (info.empty() ? "" : ", ") + fmt(cyclic(pos), 3) + " Hz";
        }
        v.add(ok && worst_t < 30, "Rabi peaks offset from -g, +g by " + info + " (step " +
                                      fmt(cyclic(40 * kappa / 2000), 3) + " Hz), " + fmt(worst_t, 2) +
                                      " s per spectrum");
    }
    return v;
}

Verdict method_equivalence() {
    Verdict v;
    {
        // sector problems of the fig4a parameter set at r_loop = 0.4 um
        auto c = load_preset("fig4a", {"r_loop=0.4 um"});
        const auto pp = point_problem(at_point(c, axis_point(c, 0)), 3);
        const auto grid = centered_grid(pp.model.g, 20 * c.resonator.kappa, 201);
        Spectrum res, td;
        res.values.assign(grid.size(), 0.0);
        td.values = res.values;
        for (int m : {+1, 0, -1}) {
            const auto layout = SpaceLayout::cavity_pcq(3);
            DecoherenceRates r = pp.rates;
            r.gamma_nv = r.gamma_phi_nv = 0;
            const auto L = build_liouvillian(build_sector_hamiltonian(pp.model, m, layout),
                                             build_collapse_operators(r, layout));
            const auto rho = steady_state(L);
            const auto a = embed(fock_annihilation(3), Slot::cavity, layout);
            const auto s1 = spectrum_resolvent(L, a, rho, grid);
            const auto s2 = spectrum_fft_crosscheck(L, a, rho, grid, 7e-4, 1e-9);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                res.values[i] += s1.values[i] / 3;
                td.values[i] += s2.values[i] / 3;
            }
        }
        const double dev = max_rel_dev(td, res);
        v.add(dev < 1e-4, "resolvent vs time domain max rel " + fmt(dev, 3));
    }
    {
        auto p = model(3, 1.3, 0.4, 0.2, 0.5);
        const auto layout = SpaceLayout::full(3);
        const auto H = build_interaction_hamiltonian(p, layout);
        const auto C = build_collapse_operators({0.7, 0.3, 0.2, 0.1, 0.05}, layout);
        const auto L = build_liouvillian(H, C);
        std::mt19937_64 rng(2024);
        std::normal_distribution<double> nd;
        const int n = layout.total();
        double worst = 0;
        for (int k = 0; k < 20; ++k) {
            Mat x(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) x(i, j) = {nd(rng), nd(rng)};
            Mat rho = x * x.adjoint();
            rho /= rho.trace();
            const Mat& h = H.matrix();
            Mat direct = -I_unit * (h * rho - rho * h);
            for (const auto& c : C) {
                const Mat& m = c.matrix();
                direct += m * rho * m.adjoint() - 0.5 * (m.adjoint() * m * rho + rho * m.adjoint() * m);
            }
            worst = std::max(worst, (nvbus::apply(L, rho) - direct).cwiseAbs().maxCoeff());
        }
        v.add(worst < 1e-10, "dense master equation vs Liouvillian on 20 states " + fmt(worst, 3));
    }
    return v;
}

struct PresetRun {
    std::string name;
    SpectrumScanResult result;
};

Verdict steady_state_invariants(const std::vector<PresetRun>& runs) {
    Verdict v;
    for (const auto& run : runs) {
        double trace = 0, herm = 0, resid = 0, min_eig = 1;
        int kernel = 1;
        for (const auto& pt : run.result.points)
            for (const auto& s : pt.spectrum.steady_states) {
                trace = std::max(trace, s.trace_error);
                herm = std::max(herm, s.hermiticity_error);
                resid = std::max(resid, s.residual);
                min_eig = std::min(min_eig, s.min_eigenvalue);
                kernel = std::max(kernel, s.kernel_dim);
            }
        v.add(trace < 1e-10 && herm < 1e-10 && min_eig > -1e-8 && resid < 1e-9 && kernel == 1,
              run.name + " tr " + fmt(trace, 2) + " herm " + fmt(herm, 2) + " eig " + fmt(min_eig, 2) + " res " +
                  fmt(resid, 2));
    }
    return v;
}

const PresetRun& find_run(const std::vector<PresetRun>& runs, const std::string& name) {
    for (const auto& r : runs)
        if (r.name == name) return r;
    fail(ErrorKind::InvalidParameter, "no run " + name);
}

Verdict morphology(const std::vector<PresetRun>& runs, double fig7_seconds) {
    Verdict v;
    {
        const double kappa = angular(26e3), g = angular(14e6), eta = angular(1e6);
        const auto pr = rates_from_times(20e-6, 40e-6);
        const DecoherenceRates d{kappa, pr.gamma, 0, pr.gamma_phi, 0};
        SpectrumRequest req;
        req.omega_grid = centered_grid(g, 1.5 * eta, 3001);
        req.frame_offset = g;
        const auto s = nv_sector_spectrum(model(3, g, kappa / 10, 0, eta), d, uniform_weights(), req);
        const auto rep = find_peaks(s, 0.1);
        bool ok = rep.peaks.size() == 3 && rep.resolved;
        std::string info = std::to_string(rep.peaks.size()) + " peaks";
        if (rep.peaks.size() == 3) {
            const double s1 = rep.peaks[1].position - rep.peaks[0].position;
            const double s2 = rep.peaks[2].position - rep.peaks[1].position;
            ok &= near_rel(s1, eta / 2, 0.1) && near_rel(s2, eta / 2, 0.1);
            for (int k = 0; k < 3; ++k) ok &= std::abs(rep.peaks[k].position - (k - 1) * eta / 2) <= 0.1 * eta / 2;
            info += ", spacings " + fmt(s1 / (eta / 2)) + " and " + fmt(s2 / (eta / 2)) + " x eta/2";
        }
        v.add(ok, "multiplet " + info);
    }
    {
        const auto& f7 = find_run(runs, "fig7").result;
        bool ok = f7.points.size() == 5 && !f7.points.front().peaks.resolved && f7.points.back().peaks.resolved;
        std::string dips;
        for (const auto& pt : f7.points) dips += (dips.empty() ? "" : "/") + fmt(pt.peaks.dip_depth, 3);
        v.add(ok && fig7_seconds < 600,
              "fig7 tau 0.5..20 us dips " + dips + ", " + fmt(fig7_seconds, 3) + " s");
    }
    {
        const auto& a = find_run(runs, "fig4a").result;
        const auto& b = find_run(runs, "fig4b").result;
        bool ok = a.points.size() == b.points.size();
        std::size_t compared = 0;
        for (std::size_t i = 0; ok && i < a.points.size(); ++i) {
            if (a.points[i].peaks.dip_depth <= 0) continue;
            ok &= b.points[i].peaks.dip_depth <= a.points[i].peaks.dip_depth;
            ++compared;
        }
        // intermediate T2 at fixed r_loop
        auto c = load_preset("fig4a", {"scan.r_loop=0.4 um", "scan.T2_pcq=40, 35, 30, 25, 20 us"});
        const auto r = run_spectrum_scan(c);
        std::string dips;
        for (std::size_t i = 0; i < r.points.size(); ++i) {
            dips += (dips.empty() ? "" : "/") + fmt(r.points[i].peaks.dip_depth, 3);
            if (i) ok &= r.points[i].peaks.dip_depth <= r.points[i - 1].peaks.dip_depth;
        }
        v.add(ok && compared > 0, "fig4 T2=2T1 vs T2=T1 dips ordered at " + std::to_string(compared) +
                                      " radii; r=0.4 um T2 40..20 us dips " + dips);
    }
    return v;
}

Verdict truncation(const std::vector<PresetRun>& runs) {
    Verdict v;
    for (const char* name : {"fig4a", "fig7"}) {
        const auto c = load_preset(name);
        const auto& run = find_run(runs, name).result;
        double worst = 0;
        bool same_count = true;
        for (std::size_t i = 0; i < run.points.size(); ++i) {
            const auto p = at_point(c, axis_point(c, i));
            const auto up = solve_point(p, run.points[i].N_fock + 2);
            const auto& base = run.points[i].peaks.peaks;
            if (up.peaks.peaks.size() != base.size()) {
                same_count = false;
                continue;
            }
            for (std::size_t k = 0; k < base.size(); ++k)
                worst = std::max(worst, std::abs(up.peaks.peaks[k].position - base[k].position) / c.resonator.kappa);
        }
        v.add(same_count && worst <= 1e-2, std::string(name) + " max shift " + fmt(worst, 3) + " kappa");
    }
    return v;
}

std::string data_of(const SpectrumScanResult& r) {
    std::ostringstream os;
    emit_csv(r.spectrum, os);
    emit_csv(r.peaks, os);
    return os.str();
}

Verdict determinism(const std::vector<PresetRun>& runs, const std::vector<std::string>& names) {
    Verdict v;
    for (const auto& name : names) {
        auto c = load_preset(name);
        c.threads = 2;
        const auto again = run_spectrum_scan(c);
        std::ostringstream couplings_a, couplings_b;
        emit_csv(run_couplings_scan(load_preset(name)), couplings_a);
        emit_csv(run_couplings_scan(load_preset(name)), couplings_b);
        const bool same = data_of(again) == data_of(find_run(runs, name).result) &&
                          couplings_a.str() == couplings_b.str();
        v.add(same, name + (same ? " identical" : " differs"));
    }
    return v;
}

} // namespace

int main() {
    const std::vector<std::string> presets{"fig3", "fig4a", "fig4b", "fig6a", "fig6b", "fig7"};
    std::vector<PresetRun> runs;
    double fig7_seconds = 0;
    bool all = true;
    auto report = [&](int n, const char* title, const std::function<Verdict()>& f) {
        Verdict v;
        try {
            v = f();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = e.what();
        }
        all &= v.pass;
        std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << title << ": " << v.detail
                  << std::endl;
    };

    try {
        for (const auto& name : presets) {
            auto c = load_preset(name);
            c.threads = 1;
            const auto t0 = std::chrono::steady_clock::now();
            runs.push_back({name, run_spectrum_scan(c)});
            if (name == "fig7") fig7_seconds = seconds_since(t0);
        }
    } catch (const std::exception& e) {
        std::cout << "preset runs failed: " << e.what() << std::endl;
    }

    report(1, "coupling reproduction", couplings);
    report(2, "analytic spectrum oracles", analytic_spectra);
    report(3, "method equivalence", method_equivalence);
    report(4, "steady-state invariants", [&] { return steady_state_invariants(runs); });
    report(5, "NV-splitting morphology", [&] { return morphology(runs, fig7_seconds); });
    report(6, "truncation robustness", [&] { return truncation(runs); });
    report(7, "determinism", [&] { return determinism(runs, presets); });
    return all ? 0 : 1;
}
