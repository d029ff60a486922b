// nvbus: coupling maps, cavity spectra and scans from a config or preset.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nvbus/check.hpp"
#include "nvbus/scan.hpp"

namespace {

struct Options {
    std::string config;
    std::string preset;
    std::string out;
    std::vector<std::string> overrides;
    int threads{0};
    std::string format;
};

nvbus::ScanConfig load(const Options& o) {
    using nvbus::ErrorKind;
    nvbus::require(o.config.empty() != o.preset.empty(), ErrorKind::UsageError,
                   "give exactly one of --config or --preset");
    auto c = o.config.empty() ? nvbus::load_preset(o.preset, o.overrides) : nvbus::load_config(o.config, o.overrides);
    int threads = 1;
    if (const char* env = std::getenv("THREADS")) {
        const std::string_view s(env);
        int v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        nvbus::require(r.ec == std::errc{} && r.ptr == s.data() + s.size() && v >= 1, ErrorKind::UsageError,
                       "THREADS must be a positive integer");
        threads = v;
    }
    if (o.threads > 0) threads = o.threads;
    c.threads = threads;
    if (o.format == "csv") c.format = nvbus::OutputFormat::csv;
    else if (o.format == "plotdata") c.format = nvbus::OutputFormat::plotdata;
    return c;
}

/// One table goes to --out as given; several get the product name spliced
/// in before the extension. Without --out everything goes to stdout.
void write_tables(const std::vector<const nvbus::ResultTable*>& tables, const Options& o, nvbus::OutputFormat f) {
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (o.out.empty()) {
            if (i) std::cout << "\n\n";
            nvbus::emit(*tables[i], std::cout, f);
            continue;
        }
        std::string path = o.out;
        if (tables.size() > 1) {
            const auto slash = path.find_last_of('/');
            const auto dot = path.find_last_of('.');
            const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
            const std::string stem = has_ext ? path.substr(0, dot) : path;
            const std::string ext = has_ext ? path.substr(dot) : std::string{};
            path = stem + "." + tables[i]->product + ext;
        }
        nvbus::emit_file(*tables[i], path, f);
        std::cerr << "wrote " << path << '\n';
    }
}

void report_peaks(const nvbus::SpectrumScanResult& r, std::ostream& os) {
    for (std::size_t i = 0; i < r.peaks.rows.size(); ++i) {
        std::string where;
        for (std::size_t k = 0; k < r.peaks.axis_columns; ++k)
            where += (k ? ", " : "") + r.peaks.columns[k] + " = " + nvbus::format_double(std::get<double>(r.peaks.rows[i][k]));
        const auto& pt = r.points[i];
        os << (where.empty() ? "base point" : where) << ": " << pt.peaks.peaks.size() << " peaks, dip "
           << nvbus::format_double(pt.peaks.dip_depth) << ", " << (pt.peaks.resolved ? "resolved" : "unresolved")
           << ", N_fock " << pt.N_fock << '\n';
    }
}

int run_couplings(const Options& o) {
    const auto c = load(o);
    const auto t = nvbus::run_couplings_scan(c);
    write_tables({&t}, o, c.format);
    return 0;
}

int run_spectrum(const Options& o, bool all_products) {
    auto c = load(o);
    const bool want_couplings =
        all_products && std::find(c.products.begin(), c.products.end(), nvbus::Product::couplings) != c.products.end();
    const bool want_spectrum =
        std::find(c.products.begin(), c.products.end(), nvbus::Product::spectrum) != c.products.end();
    const bool want_peaks = std::find(c.products.begin(), c.products.end(), nvbus::Product::peaks) != c.products.end();

    std::vector<const nvbus::ResultTable*> tables;
    nvbus::ResultTable couplings;
    if (want_couplings) {
        couplings = nvbus::run_couplings_scan(c);
        tables.push_back(&couplings);
    }
    nvbus::SpectrumScanResult spectra;
    if (want_spectrum || want_peaks || !all_products) {
        spectra = nvbus::run_spectrum_scan(c);
        if (want_spectrum || !all_products) tables.push_back(&spectra.spectrum);
        if (want_peaks || !all_products) tables.push_back(&spectra.peaks);
        report_peaks(spectra, o.out.empty() ? std::cerr : std::cout);
    }
    write_tables(tables, o, c.format);
    return 0;
}

int run_check() {
    return nvbus::print_checks(nvbus::run_checks(), std::cout) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nvbus: NV / flux-qubit / resonator coupling and cavity spectra"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "config file");
        sub->add_option("--preset", o.preset, "built-in preset")
            ->check(CLI::IsMember({"fig3", "fig4a", "fig4b", "fig6a", "fig6b", "fig7"}));
        sub->add_option("--out", o.out, "output path (default stdout)");
        sub->add_option("--override", o.overrides, "key=value or section.key=value")->allow_extra_args(false);
        sub->add_option("--threads", o.threads, "worker threads (default THREADS or 1)")->check(CLI::PositiveNumber);
        sub->add_option("--format", o.format, "csv or plotdata")->check(CLI::IsMember({"csv", "plotdata"}));
    };
    auto* couplings = app.add_subcommand("couplings", "coupling strengths over the scan axes");
    auto* spectrum = app.add_subcommand("spectrum", "cavity spectra and peak reports");
    auto* scan = app.add_subcommand("scan", "every product listed in the config");
    auto* check = app.add_subcommand("check", "built-in oracle suite");
    add_common(couplings);
    add_common(spectrum);
    add_common(scan);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "nvbus: error[UsageError]: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*couplings) return run_couplings(o);
        if (*spectrum) return run_spectrum(o, false);
        if (*scan) return run_spectrum(o, true);
        if (*check) return run_check();
    } catch (const nvbus::Error& e) {
        std::cerr << "nvbus: error[" << nvbus::to_string(e.kind()) << "]: " << e.detail() << '\n';
        return e.kind() == nvbus::ErrorKind::UsageError ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "nvbus: error[Internal]: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
