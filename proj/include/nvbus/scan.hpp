// scan.hpp: sweeps over config axes and the tables they produce.

#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "nvbus/config.hpp"
#include "nvbus/parallel.hpp"

namespace nvbus {

using Cell = std::variant<double, std::string>;

struct ResultTable {
    std::string product;
    std::vector<std::string> columns;        // "name (unit)"
    std::vector<std::vector<Cell>> rows;
    std::vector<std::string> provenance;     // written as leading '#' lines
    std::size_t axis_columns{0};             // leading columns holding scan axes
    std::size_t block_columns{0};            // leading columns whose change starts a plot block

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name || columns[i].substr(0, columns[i].find(" (")) == name) return i;
        fail(ErrorKind::InvalidParameter, "no column '" + std::string(name) + "' in " + product + " table");
    }
    double number(std::size_t row, std::string_view name) const { return std::get<double>(rows.at(row).at(column(name))); }
    const std::string& text(std::size_t row, std::string_view name) const {
        return std::get<std::string>(rows.at(row).at(column(name)));
    }
};

// ---------------------------------------------------------------------------
// common table pieces

namespace detail {

inline std::vector<std::string> axis_columns(const ScanConfig& c) {
    std::vector<std::string> cols;
    for (const auto& a : c.axes) cols.push_back(a.name + " (" + std::string(si_symbol(axis_spec(a.name).dim)) + ")");
    return cols;
}

inline std::vector<std::string> provenance(const ScanConfig& c, std::string_view product) {
    std::vector<std::string> p{
        "nvbus " + std::string(version),
        "product: " + std::string(product),
        "config_hash: fnv1a64:" + c.hash(),
        "conventions: config and report frequencies cyclic (Hz), dynamics angular (rad/s); S in s/rad; "
        "basis cavity x pcq x nv",
        "solver: steady state bordered sparse LU, kernel_tolerance " + format_double(c.model.kernel_tolerance) +
            "; spectrum by resolvent; truncation_tolerance " + format_double(c.model.truncation_tolerance) +
            "; N_max " + std::to_string(c.model.N_max),
        "config:",
    };
    for (const auto& line : c.echo()) p.push_back("  " + line);
    return p;
}

inline std::vector<Cell> axis_cells(const std::vector<double>& values) {
    return {values.begin(), values.end()};
}

} // namespace detail

// ---------------------------------------------------------------------------
// couplings

/// g/2pi, eta/2pi and gbar/2pi at every scan point. Without axes this is the
/// single base point.
inline ResultTable run_couplings_scan(const ScanConfig& c) {
    ResultTable t;
    t.product = "couplings";
    t.columns = detail::axis_columns(c);
    t.axis_columns = t.columns.size();
    const bool r_axis = c.axis("r_loop") != nullptr, i_axis = c.axis("I_p") != nullptr;
    if (!r_axis) t.columns.emplace_back("r_loop (m)");
    if (!i_axis) t.columns.emplace_back("I_p (A)");
    for (const char* col : {"d (m)", "g_over_2pi (MHz)", "eta_over_2pi (kHz)", "gbar_over_2pi (kHz)", "B_s (T)"})
        t.columns.emplace_back(col);
    t.block_columns = t.axis_columns ? t.axis_columns - 1 : 0;
    t.provenance = detail::provenance(c, t.product);
    for (std::size_t i = 0; i < c.point_count(); ++i) {
        const auto v = axis_point(c, i);
        const auto p = at_point(c, v);
        const double d = p.model.d_rule(p.loop.r_loop);
        auto row = detail::axis_cells(v);
        if (!r_axis) row.emplace_back(p.loop.r_loop);
        if (!i_axis) row.emplace_back(p.loop.I_p);
        for (double x : {d, pcq_cpw_coupling(p.resonator, p.loop, d) * 1e-6, nv_pcq_coupling(p.loop, p.nv) * 1e-3,
                         direct_nv_cpw_coupling(p.resonator, p.nv, d) * 1e-3, static_bias_field(p.loop)})
            row.emplace_back(x);
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------
// spectra

struct PointSpectrum {
    std::vector<double> axis_values;
    int N_fock{};
    double g{};         // rad/s
    double eta{};       // rad/s
    double kappa{};     // rad/s
    Spectrum spectrum;  // axis relative to the frame offset
    PeakReport peaks;
    std::vector<double> cavity_populations;
};

struct SpectrumScanResult {
    std::vector<PointSpectrum> points;
    ResultTable spectrum;
    ResultTable peaks;
};

/// Model parameters, rates and grid of one scan point at a given truncation.
struct PointProblem {
    ModelParams model;
    DecoherenceRates rates;
    SpectrumRequest request;
};

inline PointProblem point_problem(const ScanConfig& p, int N_fock) {
    PointProblem pp;
    const double d = p.model.d_rule(p.loop.r_loop);
    pp.model.omega_r = p.resonator.omega_r;
    pp.model.delta = p.model.delta;
    pp.model.omega_0 = p.resonator.omega_r + p.model.delta;
    pp.model.g = angular(pcq_cpw_coupling(p.resonator, p.loop, d));
    pp.model.eta = angular(nv_pcq_coupling(p.loop, p.nv));
    pp.model.zeta = p.resonator.zeta;
    pp.model.N_fock = N_fock;
    pp.rates = rates_from(p.resonator.kappa, p.loop, p.nv, p.model.rate_convention);
    const double center = p.spectrum.center_on_g ? pp.model.g : p.spectrum.center;
    const double half = p.spectrum.half_span ? *p.spectrum.half_span : p.spectrum.half_span_kappa * p.resonator.kappa;
    pp.request.omega_grid = centered_grid(center, half, p.spectrum.points);
    pp.request.frame_offset = center;
    pp.request.mode = p.spectrum.mode;
    pp.request.threads = 1;
    pp.request.steady.kernel_tolerance = p.model.kernel_tolerance;
    return pp;
}

/// Spectrum, peaks and cavity populations of one point at fixed N_fock.
inline PointSpectrum solve_point(const ScanConfig& p, int N_fock) {
    const auto pp = point_problem(p, N_fock);
    PointSpectrum out;
    out.N_fock = N_fock;
    out.g = pp.model.g;
    out.eta = pp.model.eta;
    out.kappa = p.resonator.kappa;
    out.cavity_populations.assign(N_fock, 0.0);
    if (p.model.nv_mode == NvMode::sector) {
        validate_weights(p.model.weights);
        constexpr std::array<int, 3> ms{+1, 0, -1};
        bool first = true;
        for (int k = 0; k < 3; ++k) {
            const double w = p.model.weights[k];
            if (w == 0.0) continue;
            const auto sol = solve_sector(pp.model, pp.rates, ms[k], pp.request);
            const auto layout = SpaceLayout::cavity_pcq(N_fock);
            const Mat cav = partial_trace(sol.steady.rho.matrix(), layout, {Slot::cavity});
            for (int n = 0; n < N_fock; ++n) out.cavity_populations[n] += w * cav(n, n).real();
            if (first) {
                out.spectrum = sol.spectrum;
                for (auto& v : out.spectrum.values) v *= w;
                first = false;
            } else {
                for (std::size_t i = 0; i < out.spectrum.values.size(); ++i)
                    out.spectrum.values[i] += w * sol.spectrum.values[i];
                out.spectrum.clipped += sol.spectrum.clipped;
                out.spectrum.most_negative = std::min(out.spectrum.most_negative, sol.spectrum.most_negative);
            }
            out.spectrum.steady_states.push_back(summarize(sol.steady));
        }
    } else {
        std::optional<SteadyStateResult> ss;
        out.spectrum = full_space_spectrum(pp.model, pp.rates, p.model.nv_relaxation, pp.request, &ss);
        const Mat cav = partial_trace(ss->rho.matrix(), SpaceLayout::full(N_fock), {Slot::cavity});
        for (int n = 0; n < N_fock; ++n) out.cavity_populations[n] = cav(n, n).real();
    }
    out.peaks = find_peaks(out.spectrum, p.spectrum.dip_fraction);
    return out;
}

/// Cavity Fock populations of the steady state alone, without spectra.
inline std::vector<double> point_populations(const ScanConfig& p, int N_fock) {
    const auto pp = point_problem(p, N_fock);
    std::vector<double> pops(N_fock, 0.0);
    auto accumulate = [&](const DensityMatrix& rho, const SpaceLayout& layout, double w) {
        const Mat cav = partial_trace(rho.matrix(), layout, {Slot::cavity});
        for (int n = 0; n < N_fock; ++n) pops[n] += w * cav(n, n).real();
    };
    if (p.model.nv_mode == NvMode::sector) {
        constexpr std::array<int, 3> ms{+1, 0, -1};
        const auto layout = SpaceLayout::cavity_pcq(N_fock);
        DecoherenceRates r = pp.rates;
        r.gamma_nv = r.gamma_phi_nv = 0.0;
        for (int k = 0; k < 3; ++k) {
            if (p.model.weights[k] == 0.0) continue;
            const auto L = build_liouvillian(build_sector_hamiltonian(pp.model, ms[k], layout),
                                             build_collapse_operators(r, layout));
            accumulate(steady_state(L, pp.request.steady), layout, p.model.weights[k]);
        }
    } else {
        const auto layout = SpaceLayout::full(N_fock);
        const auto L = build_liouvillian(build_interaction_hamiltonian(pp.model, layout),
                                         build_collapse_operators(pp.rates, layout, p.model.nv_relaxation));
        accumulate(steady_state(L, pp.request.steady), layout, 1.0);
    }
    return pops;
}

/// solve_point at the configured N_fock, or at the smallest N whose
/// populations and peak positions (in units of kappa) agree with N + 2.
/// Populations are screened first so spectra are only computed where they
/// can decide the outcome.
inline PointSpectrum solve_point_adaptive(const ScanConfig& p) {
    if (p.model.N_fock) return solve_point(p, *p.model.N_fock);
    const double tol = p.model.truncation_tolerance;
    const int start = adaptive_truncation([&](int n) { return TruncationProbe{point_populations(p, n), {}}; },
                                          p.model.N_start, tol, p.model.N_max);
    std::map<int, PointSpectrum> cache;
    auto probe = [&](int n) {
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, solve_point(p, n)).first;
        TruncationProbe tp;
        tp.populations = it->second.cavity_populations;
        for (const auto& pk : it->second.peaks.peaks) tp.peak_positions.push_back(pk.position / p.resonator.kappa);
        return tp;
    };
    const int n = adaptive_truncation(probe, start, tol, p.model.N_max);
    return std::move(cache.at(n));
}

inline std::string join_positions(const PeakReport& r) {
    std::string s;
    for (const auto& pk : r.peaks) s += (s.empty() ? "" : ";") + format_double(cyclic(pk.position));
    return s;
}

inline SpectrumScanResult run_spectrum_scan(const ScanConfig& c) {
    SpectrumScanResult res;
    const std::size_t n = c.point_count();
    res.points.resize(n);
    parallel_for(n, c.threads, [&](std::size_t i) {
        const auto v = axis_point(c, i);
        try {
            res.points[i] = solve_point_adaptive(at_point(c, v));
        } catch (const Error& e) {
            fail(e.kind(), "at " + describe_point(c, v) + ": " + e.detail());
        }
        res.points[i].axis_values = v;
    });

    auto& s = res.spectrum;
    s.product = "spectrum";
    s.columns = detail::axis_columns(c);
    s.axis_columns = s.block_columns = s.columns.size();
    for (const char* col : {"delta_omega_g_over_2pi (Hz)", "S (s/rad)", "log10_S (1)"}) s.columns.emplace_back(col);
    s.provenance = detail::provenance(c, s.product);

    auto& pk = res.peaks;
    pk.product = "peaks";
    pk.columns = detail::axis_columns(c);
    pk.axis_columns = pk.columns.size();
    pk.block_columns = pk.axis_columns ? pk.axis_columns - 1 : 0;
    for (const char* col : {"N_fock (1)", "g_over_2pi (Hz)", "eta_over_2pi (Hz)", "n_peaks (1)",
                            "peak_positions (Hz)", "resolved (1)", "dip_depth (1)", "max_residual (1)",
                            "max_trace_error (1)", "max_hermiticity_error (1)", "min_eigenvalue (1)",
                            "clipped (1)"})
        pk.columns.emplace_back(col);
    pk.provenance = detail::provenance(c, pk.product);

    for (const auto& pt : res.points) {
        const auto logs = pt.spectrum.log10_values(c.spectrum.log_floor);
        for (std::size_t k = 0; k < pt.spectrum.omega.size(); ++k) {
            auto row = detail::axis_cells(pt.axis_values);
            row.emplace_back(cyclic(pt.spectrum.omega[k]));
            row.emplace_back(pt.spectrum.values[k]);
            row.emplace_back(logs[k]);
            s.rows.push_back(std::move(row));
        }
        double residual = 0, trace = 0, herm = 0, min_eig = std::numeric_limits<double>::infinity();
        for (const auto& ss : pt.spectrum.steady_states) {
            residual = std::max(residual, ss.residual);
            trace = std::max(trace, ss.trace_error);
            herm = std::max(herm, ss.hermiticity_error);
            min_eig = std::min(min_eig, ss.min_eigenvalue);
        }
        auto row = detail::axis_cells(pt.axis_values);
        row.emplace_back(double(pt.N_fock));
        row.emplace_back(cyclic(pt.g));
        row.emplace_back(cyclic(pt.eta));
        row.emplace_back(double(pt.peaks.peaks.size()));
        row.emplace_back(join_positions(pt.peaks));
        row.emplace_back(pt.peaks.resolved ? 1.0 : 0.0);
        row.emplace_back(pt.peaks.dip_depth);
        row.emplace_back(residual);
        row.emplace_back(trace);
        row.emplace_back(herm);
        row.emplace_back(min_eig);
        row.emplace_back(double(pt.spectrum.clipped));
        pk.rows.push_back(std::move(row));
    }
    return res;
}

// ---------------------------------------------------------------------------
// output

namespace detail {

inline std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    return std::get<std::string>(c);
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + '"';
}

} // namespace detail

inline void emit_csv(const ResultTable& t, std::ostream& out) {
    for (const auto& p : t.provenance) out << "# " << p << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << detail::csv_field(t.columns[i]);
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            // strings are always quoted so that numeric-looking text survives a re-parse
            if (i) out << ',';
            if (std::holds_alternative<std::string>(row[i])) {
                std::string q = "\"";
                for (char ch : std::get<std::string>(row[i])) {
                    if (ch == '"') q += '"';
                    q += ch;
                }
                out << q << '"';
            } else {
                out << detail::cell_text(row[i]);
            }
        }
        out << '\n';
    }
    require(static_cast<bool>(out), ErrorKind::IoError, "write failed");
}

/// Whitespace-delimited blocks for gnuplot. Rows are split into datasets
/// (two blank lines) when the first block column changes and into
/// sub-blocks (one blank line) when a later one does.
inline void emit_plotdata(const ResultTable& t, std::ostream& out) {
    for (const auto& p : t.provenance) out << "# " << p << '\n';
    out << '#';
    for (const auto& c : t.columns) out << " \"" << c << '"';
    out << '\n';
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (r > 0 && t.block_columns > 0) {
            const auto& prev = t.rows[r - 1];
            const auto& cur = t.rows[r];
            if (prev[0] != cur[0]) out << "\n\n";
            else if (!std::equal(prev.begin(), prev.begin() + t.block_columns, cur.begin())) out << '\n';
        }
        const auto& row = t.rows[r];
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ' ';
            if (const auto* s = std::get_if<std::string>(&row[i])) out << '"' << (s->empty() ? "-" : *s) << '"';
            else out << detail::cell_text(row[i]);
        }
        out << '\n';
    }
    require(static_cast<bool>(out), ErrorKind::IoError, "write failed");
}

inline void emit(const ResultTable& t, std::ostream& out, OutputFormat f) {
    f == OutputFormat::csv ? emit_csv(t, out) : emit_plotdata(t, out);
}

inline void emit_file(const ResultTable& t, const std::string& path, OutputFormat f) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::IoError, "cannot write '" + path + "'");
    emit(t, out, f);
}

/// Reads back a table written by emit_csv. Quoted fields stay strings,
/// everything else is parsed as a double.
inline ResultTable parse_csv(std::istream& in) {
    ResultTable t;
    std::string line;
    bool header = true;
    auto split = [](const std::string& text) {
        std::vector<std::pair<std::string, bool>> fields;  // value, was quoted
        std::string cur;
        bool quoted = false, in_quotes = false;
        for (std::size_t i = 0; i < text.size(); ++i) {
            const char ch = text[i];
            if (in_quotes) {
                if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') cur += '"', ++i;
                else if (ch == '"') in_quotes = false;
                else cur += ch;
            } else if (ch == '"') {
                in_quotes = quoted = true;
            } else if (ch == ',') {
                fields.emplace_back(cur, quoted);
                cur.clear();
                quoted = false;
            } else {
                cur += ch;
            }
        }
        require(!in_quotes, ErrorKind::ParseError, "unterminated quote in CSV");
        fields.emplace_back(cur, quoted);
        return fields;
    };
    std::string pending;
    while (std::getline(in, line)) {
        if (pending.empty() && !line.empty() && line.front() == '#') {
            t.provenance.push_back(line.size() > 2 ? line.substr(2) : std::string{});
            continue;
        }
        pending += line;
        if (std::count(pending.begin(), pending.end(), '"') % 2 == 1) {
            pending += '\n';
            continue;
        }
        const auto fields = split(pending);
        pending.clear();
        if (header) {
            for (const auto& [v, q] : fields) t.columns.push_back(v);
            header = false;
            continue;
        }
        require(fields.size() == t.columns.size(), ErrorKind::ParseError, "CSV row width differs from header");
        std::vector<Cell> row;
        for (const auto& [v, q] : fields) {
            if (q) {
                row.emplace_back(v);
                continue;
            }
            double x = 0;
            const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
            if (r.ec == std::errc{} && r.ptr == v.data() + v.size()) row.emplace_back(x);
            else if (v == "inf" || v == "-inf" || v == "nan") row.emplace_back(std::stod(v));
            else row.emplace_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    for (const auto& p : t.provenance)
        if (p.rfind("product: ", 0) == 0) t.product = p.substr(9);
    return t;
}

} // namespace nvbus
