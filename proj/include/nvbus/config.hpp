// config.hpp: the sectioned key = value configuration format, presets,
// command-line overrides and the canonical echo.
//
//   # comment             (also ';')
//   [section]
//   key = 0.4 um          scalar with unit suffix
//   key = 1, 2, 5 us      list, unit after the last value
//   key = 0.1 .. 1.0 : 32 um
//                         inclusive linear range with 32 points
//
// Frequencies are cyclic (Hz) in the file and angular inside nvbus. Every
// dimensioned key must carry a unit; a bare number is a ParseError.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nvbus/coupling.hpp"
#include "nvbus/model.hpp"
#include "nvbus/preset_data.hpp"
#include "nvbus/spectrum.hpp"
#include "nvbus/units.hpp"

namespace nvbus {

inline constexpr std::string_view version = "0.3.0";

enum class Dim { frequency, length, current, inductance, time, field, flux, slope, none };

struct UnitDef {
    std::string_view symbol;
    Dim dim;
    int exp10;           // decimal prefix, applied on the decimal text
    double factor{1.0};  // non-decimal units only
};

inline constexpr std::array<UnitDef, 33> unit_table{{
    {"Hz", Dim::frequency, 0},   {"kHz", Dim::frequency, 3},  {"MHz", Dim::frequency, 6},
    {"GHz", Dim::frequency, 9},  {"m", Dim::length, 0},       {"mm", Dim::length, -3},
    {"um", Dim::length, -6},     {"\u00b5m", Dim::length, -6}, {"\u03bcm", Dim::length, -6},
    {"nm", Dim::length, -9},     {"A", Dim::current, 0},      {"mA", Dim::current, -3},
    {"uA", Dim::current, -6},    {"nA", Dim::current, -9},    {"H", Dim::inductance, 0},
    {"nH", Dim::inductance, -9}, {"pH", Dim::inductance, -12}, {"s", Dim::time, 0},
    {"ms", Dim::time, -3},       {"us", Dim::time, -6},       {"\u00b5s", Dim::time, -6},
    {"\u03bcs", Dim::time, -6},  {"ns", Dim::time, -9},       {"T", Dim::field, 0},
    {"mT", Dim::field, -3},      {"uT", Dim::field, -6},      {"G", Dim::field, -4},
    {"mG", Dim::field, -7},      {"Wb", Dim::flux, 0},        {"Phi0", Dim::flux, 0, constants::flux_quantum},
    {"Hz/T", Dim::slope, 0},     {"MHz/T", Dim::slope, 6},    {"GHz/T", Dim::slope, 9},
}};

constexpr std::string_view dim_name(Dim d) {
    switch (d) {
    case Dim::frequency: return "frequency (Hz, kHz, MHz, GHz)";
    case Dim::length: return "length (m, mm, um, nm)";
    case Dim::current: return "current (A, mA, uA, nA)";
    case Dim::inductance: return "inductance (H, nH, pH)";
    case Dim::time: return "time (s, ms, us, ns)";
    case Dim::field: return "field (T, mT, uT, G, mG)";
    case Dim::flux: return "flux (Wb, Phi0)";
    case Dim::slope: return "slope (Hz/T, MHz/T, GHz/T)";
    case Dim::none: return "dimensionless";
    }
    return "?";
}

constexpr std::string_view si_symbol(Dim d) {
    switch (d) {
    case Dim::frequency: return "Hz";
    case Dim::length: return "m";
    case Dim::current: return "A";
    case Dim::inductance: return "H";
    case Dim::time: return "s";
    case Dim::field: return "T";
    case Dim::flux: return "Wb";
    case Dim::slope: return "Hz/T";
    case Dim::none: return "1";
    }
    return "?";
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x) {
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), r.ptr);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// typed configuration

enum class NvMode { sector, full };
enum class Product { couplings, spectrum, peaks };
enum class OutputFormat { csv, plotdata };

inline std::string_view to_string(NvMode m) { return m == NvMode::sector ? "sector" : "full"; }
inline std::string_view to_string(Product p) {
    switch (p) {
    case Product::couplings: return "couplings";
    case Product::spectrum: return "spectrum";
    case Product::peaks: return "peaks";
    }
    return "?";
}
inline std::string_view to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "plotdata"; }

struct ModelSettings {
    double delta{0.0};                 // rad/s, omega_0 - omega_r
    std::optional<int> N_fock;         // empty: adaptive
    int N_start{2};
    int N_max{30};
    double truncation_tolerance{1e-3}; // populations, and peak positions in units of kappa
    DistanceRule d_rule{};
    RateConvention rate_convention{RateConvention::plain};
    NvRelaxation nv_relaxation{NvRelaxation::as_printed};
    NvMode nv_mode{NvMode::sector};
    SectorWeights weights{uniform_weights()};
    double kernel_tolerance{1e-11};
};

struct SpectrumSettings {
    SpectrumMode mode{SpectrumMode::incoherent};
    bool center_on_g{true};            // frame offset omega_g = g per point
    double center{0.0};                // rad/s, used when !center_on_g
    double half_span_kappa{20.0};      // used when half_span is empty
    std::optional<double> half_span;   // rad/s
    int points{2001};
    double dip_fraction{0.1};
    double log_floor{-30.0};
};

struct ScanAxis {
    std::string name;
    std::vector<double> values;        // SI
};

struct AxisSpec {
    std::string_view name;
    Dim dim;
};

inline constexpr std::array<AxisSpec, 7> axis_specs{{
    {"r_loop", Dim::length}, {"I_p", Dim::current}, {"n_turns", Dim::none}, {"T2_pcq", Dim::time},
    {"T2_ratio", Dim::none}, {"tau", Dim::time},    {"d", Dim::length},
}};

inline const AxisSpec& axis_spec(std::string_view name) {
    for (const auto& a : axis_specs)
        if (a.name == name) return a;
    fail(ErrorKind::ValidationError, "unknown scan axis '" + std::string(name) + "'");
}

struct ScanConfig {
    ResonatorParams resonator{};
    LoopParams loop{};
    NVParams nv{};
    ModelSettings model{};
    SpectrumSettings spectrum{};
    std::vector<ScanAxis> axes;
    std::vector<Product> products{Product::spectrum, Product::peaks};
    OutputFormat format{OutputFormat::csv};
    int threads{1};
    std::string source;

    std::size_t point_count() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.values.size();
        return n;
    }
    const ScanAxis* axis(std::string_view name) const {
        for (const auto& a : axes)
            if (a.name == name) return &a;
        return nullptr;
    }
    std::vector<std::string> echo() const;
    std::string hash() const;
};

/// Values of every axis at flat point index i (first axis outermost).
inline std::vector<double> axis_point(const ScanConfig& c, std::size_t i) {
    std::vector<double> v(c.axes.size());
    for (std::size_t k = c.axes.size(); k-- > 0;) {
        const auto n = c.axes[k].values.size();
        v[k] = c.axes[k].values[i % n];
        i /= n;
    }
    return v;
}

/// Base parameters with one point's axis values applied.
inline ScanConfig at_point(const ScanConfig& c, const std::vector<double>& values) {
    ScanConfig p = c;
    // tau before T2_ratio so that T2 = ratio * T1 sees the scanned T1
    for (std::string_view name : {"r_loop", "I_p", "n_turns", "d", "tau", "T2_pcq", "T2_ratio"}) {
        for (std::size_t k = 0; k < c.axes.size(); ++k) {
            if (c.axes[k].name != name) continue;
            const double v = values[k];
            if (name == "r_loop") p.loop.r_loop = v;
            else if (name == "I_p") p.loop.I_p = v;
            else if (name == "n_turns") p.loop.n_turns = static_cast<int>(std::lround(v));
            else if (name == "d") p.model.d_rule = DistanceRule::fixed_distance(v);
            else if (name == "tau") p.loop.T1 = p.loop.T2 = v;
            else if (name == "T2_pcq") p.loop.T2 = v;
            else if (name == "T2_ratio") p.loop.T2 = v * p.loop.T1;
        }
    }
    return p;
}

inline std::string describe_point(const ScanConfig& c, const std::vector<double>& values) {
    std::string s;
    for (std::size_t k = 0; k < c.axes.size(); ++k) {
        if (k) s += ", ";
        const Dim d = axis_spec(c.axes[k].name).dim;
        s += c.axes[k].name + " = " + format_double(values[k]);
        if (d != Dim::none) s += " " + std::string(si_symbol(d));
    }
    return s.empty() ? "base point" : s;
}

inline std::vector<std::string> ScanConfig::echo() const {
    std::vector<std::string> out;
    auto q = [&](std::string key, double v, std::string_view unit) {
        out.push_back(std::move(key) + " = " + format_double(v) + " " + std::string(unit));
    };
    auto t = [&](std::string key, std::string_view v) { out.push_back(std::move(key) + " = " + std::string(v)); };

    q("resonator.omega_r", cyclic(resonator.omega_r), "Hz");
    q("resonator.L_r", resonator.L_r, "H");
    q("resonator.kappa", cyclic(resonator.kappa), "Hz");
    if (resonator.Q) t("resonator.Q", format_double(*resonator.Q));
    q("resonator.zeta", cyclic(resonator.zeta), "Hz");
    t("resonator.zeta_over_kappa", format_double(resonator.zeta / resonator.kappa));
    q("resonator.omega_drive", cyclic(resonator.omega_drive), "Hz");

    q("loop.r_loop", loop.r_loop, "m");
    t("loop.n_turns", std::to_string(loop.n_turns));
    q("loop.I_p", loop.I_p, "A");
    q("loop.Delta", cyclic(loop.Delta), "Hz");
    q("loop.Phi_x", loop.Phi_x, "Wb");
    q("loop.T1", loop.T1, "s");
    q("loop.T2", loop.T2, "s");
    if (loop.alpha) t("loop.alpha", format_double(*loop.alpha));

    q("nv.D", cyclic(nv.D), "Hz");
    q("nv.slope", nv.slope, "Hz/T");
    q("nv.B_bias", nv.B_bias, "T");
    q("nv.T1", nv.T1, "s");
    q("nv.T2", nv.T2, "s");

    q("model.delta", cyclic(model.delta), "Hz");
    q("model.omega_0", cyclic(resonator.omega_r + model.delta), "Hz");
    t("model.N_fock", model.N_fock ? std::to_string(*model.N_fock) : "auto");
    t("model.N_start", std::to_string(model.N_start));
    t("model.N_max", std::to_string(model.N_max));
    t("model.truncation_tolerance", format_double(model.truncation_tolerance));
    t("model.d_rule", model.d_rule.kind == DistanceRule::Kind::LoopRadius
                          ? std::string("r_loop")
                          : format_double(model.d_rule.fixed) + " m");
    t("model.rate_convention", to_string(model.rate_convention));
    t("model.nv_relaxation", to_string(model.nv_relaxation));
    t("model.nv_mode", to_string(model.nv_mode));
    t("model.nv_weights", format_double(model.weights[0]) + ", " + format_double(model.weights[1]) + ", " +
                              format_double(model.weights[2]));
    t("model.kernel_tolerance", format_double(model.kernel_tolerance));

    t("spectrum.mode", to_string(spectrum.mode));
    t("spectrum.center", spectrum.center_on_g ? std::string("g") : format_double(cyclic(spectrum.center)) + " Hz");
    t("spectrum.half_span", spectrum.half_span ? format_double(cyclic(*spectrum.half_span)) + " Hz"
                                               : format_double(spectrum.half_span_kappa) + " kappa");
    t("spectrum.points", std::to_string(spectrum.points));
    t("spectrum.dip_fraction", format_double(spectrum.dip_fraction));
    t("spectrum.log_floor", format_double(spectrum.log_floor));

    for (const auto& a : axes) {
        std::string v;
        for (std::size_t i = 0; i < a.values.size(); ++i) v += (i ? ", " : "") + format_double(a.values[i]);
        const auto dim = axis_spec(a.name).dim;
        t("scan." + a.name, dim == Dim::none ? v : v + " " + std::string(si_symbol(dim)));
    }
    std::string prods;
    for (std::size_t i = 0; i < products.size(); ++i) prods += (i ? ", " : "") + std::string(to_string(products[i]));
    t("output.products", prods);
    t("output.format", to_string(format));
    return out;
}

inline std::string ScanConfig::hash() const {
    std::string all;
    for (const auto& line : echo()) all += line + '\n';
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(fnv1a(all)));
    return std::string(buf.data());
}

// ---------------------------------------------------------------------------
// raw parse

struct RawEntry {
    std::string section;
    std::string key;
    std::string value;
    int line{0};          // 0 for command-line overrides
};

struct SectionSpec {
    std::string_view name;
    std::vector<std::string_view> keys;
};

inline const std::vector<SectionSpec>& schema() {
    static const std::vector<SectionSpec> s{
        {"resonator", {"omega_r", "L_r", "kappa", "Q", "zeta", "zeta_over_kappa", "omega_drive"}},
        {"loop", {"r_loop", "n_turns", "I_p", "Delta", "Phi_x", "T1", "T2", "alpha"}},
        {"nv", {"D", "slope", "B_bias", "T1", "T2"}},
        {"model",
         {"delta", "omega_0", "N_fock", "N_start", "N_max", "truncation_tolerance", "d_rule", "rate_convention",
          "nv_relaxation", "nv_mode", "nv_weights", "kernel_tolerance"}},
        {"spectrum", {"mode", "center", "half_span", "points", "dip_fraction", "log_floor"}},
        {"scan", {"r_loop", "I_p", "n_turns", "T2_pcq", "T2_ratio", "tau", "d"}},
        {"output", {"products", "format"}},
    };
    return s;
}

inline bool schema_has(std::string_view section, std::string_view key) {
    for (const auto& s : schema())
        if (s.name == section) return std::find(s.keys.begin(), s.keys.end(), key) != s.keys.end();
    return false;
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<RawEntry> parse_raw(std::string_view text) {
    std::vector<RawEntry> out;
    std::string section;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            require(line.back() == ']', ErrorKind::ParseError, where + "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            const bool known = std::any_of(schema().begin(), schema().end(),
                                           [&](const SectionSpec& s) { return s.name == section; });
            require(known, ErrorKind::ParseError, where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string_view::npos, ErrorKind::ParseError, where + "expected key = value");
        require(!section.empty(), ErrorKind::ParseError, where + "key outside of any section");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        require(schema_has(section, key), ErrorKind::ParseError,
                where + "unknown key '" + key + "' in [" + section + "]");
        require(!value.empty(), ErrorKind::ParseError, where + key + ": empty value");
        out.push_back({section, key, value, lineno});
    }
    return out;
}

/// Applies "key=value" or "section.key=value". A bare key resolves to the
/// scan axis of that name when one is active, otherwise to the single
/// section whose schema defines it.
inline void apply_override(std::vector<RawEntry>& raw, std::string_view spec) {
    const auto eq = spec.find('=');
    require(eq != std::string_view::npos, ErrorKind::UsageError,
            "override '" + std::string(spec) + "' is not key=value");
    std::string key(trim(spec.substr(0, eq)));
    const std::string value(trim(spec.substr(eq + 1)));
    require(!value.empty(), ErrorKind::UsageError, "override '" + key + "' has an empty value");
    std::string section;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
        section = key.substr(0, dot);
        key = key.substr(dot + 1);
        require(schema_has(section, key), ErrorKind::UsageError, "unknown override key " + section + "." + key);
    } else {
        const bool scan_active = std::any_of(raw.begin(), raw.end(), [&](const RawEntry& e) {
            return e.section == "scan" && e.key == key;
        });
        if (scan_active) {
            section = "scan";
        } else {
            std::vector<std::string_view> hits;
            for (const auto& s : schema())
                if (s.name != "scan" && schema_has(s.name, key)) hits.push_back(s.name);
            if (hits.empty() && schema_has("scan", key)) hits.push_back("scan");
            require(!hits.empty(), ErrorKind::UsageError, "unknown override key '" + key + "'");
            if (hits.size() > 1) {
                std::string opts;
                for (auto h : hits) opts += (opts.empty() ? "" : " or ") + std::string(h) + "." + key;
                fail(ErrorKind::UsageError, "override key '" + key + "' is ambiguous; use " + opts);
            }
            section = std::string(hits.front());
        }
    }
    // An override replaces the entry in place so axis order is kept.
    for (auto& e : raw)
        if (e.section == section && e.key == key) {
            e.value = value;
            e.line = 0;
            return;
        }
    raw.push_back({section, key, value, 0});
}

// ---------------------------------------------------------------------------
// value grammar

namespace detail {

inline std::string where(const RawEntry& e) {
    return (e.line > 0 ? "line " + std::to_string(e.line) : std::string("override")) + ": " + e.section + "." + e.key +
           ": ";
}

/// Parses a leading number; returns the rest of the string.
inline std::string_view take_number(std::string_view s, double& out, const RawEntry& e) {
    s = trim(s);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    require(r.ec == std::errc{} && std::isfinite(out), ErrorKind::ParseError,
            where(e) + "expected a number in '" + e.value + "'");
    return s.substr(static_cast<std::size_t>(r.ptr - s.data()));
}

// Shifting the exponent of the shortest decimal form keeps "600 nA" equal
// to the literal 600e-9.
struct Scale {
    int exp10{0};
    double factor{1.0};
    double operator()(double v) const {
        if (exp10 != 0) {
            std::string t = format_double(v);
            int e = exp10;
            if (const auto pos = t.find('e'); pos != std::string::npos) {
                e += std::stoi(t.substr(pos + 1));
                t.resize(pos);
            }
            t += "e" + std::to_string(e);
            std::from_chars(t.data(), t.data() + t.size(), v);
        }
        return v * factor;
    }
};

inline Scale unit_scale(std::string_view unit, Dim dim, const RawEntry& e) {
    unit = trim(unit);
    if (dim == Dim::none) {
        require(unit.empty(), ErrorKind::ParseError, where(e) + "dimensionless value takes no unit");
        return {};
    }
    require(!unit.empty(), ErrorKind::ParseError,
            where(e) + "missing unit, expected a " + std::string(dim_name(dim)));
    for (const auto& u : unit_table)
        if (u.symbol == unit) {
            require(u.dim == dim, ErrorKind::ParseError,
                    where(e) + "unit '" + std::string(unit) + "' is not a " + std::string(dim_name(dim)));
            return {u.exp10, u.factor};
        }
    fail(ErrorKind::ParseError, where(e) + "unknown unit '" + std::string(unit) + "'");
}

inline double scalar(const RawEntry& e, Dim dim) {
    double v = 0;
    const auto rest = take_number(e.value, v, e);
    return unit_scale(rest, dim, e)(v);
}

inline int integer(const RawEntry& e) {
    const double v = scalar(e, Dim::none);
    require(v == std::floor(v) && std::abs(v) < 1e9, ErrorKind::ParseError, where(e) + "expected an integer");
    return static_cast<int>(v);
}

/// "a .. b : n unit" or "a, b, c unit" or "a unit".
inline std::vector<double> value_list(const RawEntry& e, Dim dim) {
    std::string_view s = e.value;
    std::vector<double> out;
    if (s.find("..") != std::string_view::npos) {
        double a = 0, b = 0, n = 0;
        s = take_number(s, a, e);
        s = trim(s);
        require(s.substr(0, 2) == "..", ErrorKind::ParseError, where(e) + "expected 'a .. b : n unit'");
        s = take_number(s.substr(2), b, e);
        s = trim(s);
        require(!s.empty() && s.front() == ':', ErrorKind::ParseError, where(e) + "expected ': n' after the range");
        s = take_number(s.substr(1), n, e);
        require(n >= 1 && n == std::floor(n), ErrorKind::ParseError, where(e) + "point count must be a positive integer");
        const auto scale = unit_scale(s, dim, e);
        const int count = static_cast<int>(n);
        if (count == 1) return {scale(a)};
        for (int i = 0; i < count; ++i) out.push_back(scale(a + (b - a) * i / (count - 1)));
        return out;
    }
    while (true) {
        double v = 0;
        s = trim(take_number(s, v, e));
        out.push_back(v);
        if (!s.empty() && s.front() == ',') {
            s = s.substr(1);
            continue;
        }
        const auto scale = unit_scale(s, dim, e);
        for (auto& x : out) x = scale(x);
        return out;
    }
}

inline std::vector<std::string> word_list(const RawEntry& e) {
    std::vector<std::string> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = trim(item);
        require(!t.empty(), ErrorKind::ParseError, where(e) + "empty list item");
        out.emplace_back(t);
    }
    return out;
}

template <typename Enum, std::size_t N>
Enum choice(const RawEntry& e, const std::array<std::pair<std::string_view, Enum>, N>& options) {
    std::string allowed;
    for (const auto& [name, value] : options) {
        if (e.value == name) return value;
        allowed += (allowed.empty() ? "" : " | ") + std::string(name);
    }
    fail(ErrorKind::ParseError, where(e) + "expected one of " + allowed);
}

} // namespace detail

/// Builds a validated ScanConfig from parsed entries. Later entries win.
inline ScanConfig resolve_config(const std::vector<RawEntry>& raw, std::string source) {
    using namespace detail;
    ScanConfig c;
    c.source = std::move(source);
    c.axes.clear();
    std::optional<double> kappa, Q, zeta, zeta_ratio, omega_0;

    for (const auto& e : raw) {
        const auto& k = e.key;
        if (e.section == "resonator") {
            if (k == "omega_r") c.resonator.omega_r = angular(scalar(e, Dim::frequency));
            else if (k == "L_r") c.resonator.L_r = scalar(e, Dim::inductance);
            else if (k == "kappa") kappa = angular(scalar(e, Dim::frequency));
            else if (k == "Q") Q = scalar(e, Dim::none);
            else if (k == "zeta") zeta = angular(scalar(e, Dim::frequency));
            else if (k == "zeta_over_kappa") zeta_ratio = scalar(e, Dim::none);
            else if (k == "omega_drive") c.resonator.omega_drive = angular(scalar(e, Dim::frequency));
        } else if (e.section == "loop") {
            if (k == "r_loop") c.loop.r_loop = scalar(e, Dim::length);
            else if (k == "n_turns") c.loop.n_turns = integer(e);
            else if (k == "I_p") c.loop.I_p = scalar(e, Dim::current);
            else if (k == "Delta") c.loop.Delta = angular(scalar(e, Dim::frequency));
            else if (k == "Phi_x") c.loop.Phi_x = scalar(e, Dim::flux);
            else if (k == "T1") c.loop.T1 = scalar(e, Dim::time);
            else if (k == "T2") c.loop.T2 = scalar(e, Dim::time);
            else if (k == "alpha") c.loop.alpha = scalar(e, Dim::none);
        } else if (e.section == "nv") {
            if (k == "D") c.nv.D = angular(scalar(e, Dim::frequency));
            else if (k == "slope") c.nv.slope = scalar(e, Dim::slope);
            else if (k == "B_bias") c.nv.B_bias = scalar(e, Dim::field);
            else if (k == "T1") c.nv.T1 = scalar(e, Dim::time);
            else if (k == "T2") c.nv.T2 = scalar(e, Dim::time);
        } else if (e.section == "model") {
            if (k == "delta") c.model.delta = angular(scalar(e, Dim::frequency));
            else if (k == "omega_0") omega_0 = angular(scalar(e, Dim::frequency));
            else if (k == "N_fock") {
                if (e.value == "auto") c.model.N_fock.reset();
                else c.model.N_fock = integer(e);
            } else if (k == "N_start") c.model.N_start = integer(e);
            else if (k == "N_max") c.model.N_max = integer(e);
            else if (k == "truncation_tolerance") c.model.truncation_tolerance = scalar(e, Dim::none);
            else if (k == "kernel_tolerance") c.model.kernel_tolerance = scalar(e, Dim::none);
            else if (k == "d_rule") {
                if (e.value == "r_loop") c.model.d_rule = DistanceRule::loop_radius();
                else c.model.d_rule = DistanceRule::fixed_distance(scalar(e, Dim::length));
            } else if (k == "rate_convention")
                c.model.rate_convention = choice<RateConvention, 2>(
                    e, {{{"plain", RateConvention::plain}, {"paper_2pi", RateConvention::paper_2pi}}});
            else if (k == "nv_relaxation")
                c.model.nv_relaxation = choice<NvRelaxation, 2>(
                    e, {{{"as_printed", NvRelaxation::as_printed}, {"lowering", NvRelaxation::lowering}}});
            else if (k == "nv_mode")
                c.model.nv_mode = choice<NvMode, 2>(e, {{{"sector", NvMode::sector}, {"full", NvMode::full}}});
            else if (k == "nv_weights") {
                if (e.value == "uniform") c.model.weights = uniform_weights();
                else {
                    const auto w = value_list(e, Dim::none);
                    require(w.size() == 3, ErrorKind::ParseError, where(e) + "expected three weights for m_s = +1, 0, -1");
                    c.model.weights = {w[0], w[1], w[2]};
                }
            }
        } else if (e.section == "spectrum") {
            if (k == "mode")
                c.spectrum.mode = choice<SpectrumMode, 2>(
                    e, {{{"incoherent", SpectrumMode::incoherent}, {"full", SpectrumMode::full}}});
            else if (k == "center") {
                c.spectrum.center_on_g = e.value == "g";
                if (!c.spectrum.center_on_g) c.spectrum.center = angular(scalar(e, Dim::frequency));
            } else if (k == "half_span") {
                double v = 0;
                const auto rest = trim(take_number(e.value, v, e));
                if (rest == "kappa") {
                    c.spectrum.half_span_kappa = v;
                    c.spectrum.half_span.reset();
                } else {
                    c.spectrum.half_span = angular(unit_scale(rest, Dim::frequency, e)(v));
                }
            } else if (k == "points") c.spectrum.points = integer(e);
            else if (k == "dip_fraction") c.spectrum.dip_fraction = scalar(e, Dim::none);
            else if (k == "log_floor") c.spectrum.log_floor = scalar(e, Dim::none);
        } else if (e.section == "scan") {
            const auto values = value_list(e, axis_spec(k).dim);
            auto it = std::find_if(c.axes.begin(), c.axes.end(), [&](const ScanAxis& a) { return a.name == k; });
            if (it == c.axes.end()) c.axes.push_back({k, values});
            else it->values = values;
        } else if (e.section == "output") {
            if (k == "products") {
                c.products.clear();
                for (const auto& w : word_list(e)) {
                    RawEntry item = e;
                    item.value = w;
                    c.products.push_back(choice<Product, 3>(item, {{{"couplings", Product::couplings},
                                                                     {"spectrum", Product::spectrum},
                                                                     {"peaks", Product::peaks}}}));
                }
            } else if (k == "format")
                c.format = choice<OutputFormat, 2>(e, {{{"csv", OutputFormat::csv}, {"plotdata", OutputFormat::plotdata}}});
        }
    }

    // defaults that depend on other values
    if (kappa) c.resonator.kappa = *kappa;
    if (Q) {
        c.resonator.Q = *Q;
        if (!kappa) c.resonator.kappa = c.resonator.omega_r / *Q;
    }
    require(!(zeta && zeta_ratio), ErrorKind::ValidationError, "give either zeta or zeta_over_kappa, not both");
    c.resonator.zeta = zeta ? *zeta : (zeta_ratio ? *zeta_ratio : 2.0) * c.resonator.kappa;
    bool drive_given = false;
    for (const auto& e : raw) drive_given |= e.section == "resonator" && e.key == "omega_drive";
    if (!drive_given) c.resonator.omega_drive = c.resonator.omega_r;
    if (omega_0) {
        const bool delta_given = std::any_of(raw.begin(), raw.end(),
                                             [](const RawEntry& e) { return e.section == "model" && e.key == "delta"; });
        const double d = *omega_0 - c.resonator.omega_r;
        require(!delta_given || std::abs(d - c.model.delta) <= 1e-6 * *omega_0, ErrorKind::ValidationError,
                "model.delta != model.omega_0 - resonator.omega_r");
        c.model.delta = d;
    }

    // invariants
    auto validated = [](auto&& f) {
        try {
            f();
        } catch (const Error& err) {
            if (err.kind() == ErrorKind::ValidationError) throw;
            fail(ErrorKind::ValidationError, std::string(to_string(err.kind())) + ": " + err.detail());
        }
    };
    validated([&] { c.resonator.validate(); });
    validated([&] { c.nv.validate(); });
    require(std::abs(c.resonator.omega_drive - c.resonator.omega_r) <= 1e-9 * c.resonator.omega_r,
            ErrorKind::ValidationError, "the rotating-frame model needs omega_drive = omega_r");
    validated([&] { validate_weights(c.model.weights); });
    require(!c.model.N_fock || *c.model.N_fock >= 2, ErrorKind::ValidationError, "model.N_fock must be >= 2");
    require(c.model.N_start >= 2 && c.model.N_max >= c.model.N_start + 2, ErrorKind::ValidationError,
            "need 2 <= model.N_start and N_start + 2 <= model.N_max");
    require(c.model.truncation_tolerance > 0 && c.model.kernel_tolerance > 0, ErrorKind::ValidationError,
            "tolerances must be > 0");
    require(c.model.d_rule.kind == DistanceRule::Kind::LoopRadius || c.model.d_rule.fixed > 0,
            ErrorKind::ValidationError, "model.d_rule distance must be > 0");
    require(c.spectrum.points >= 3, ErrorKind::ValidationError, "spectrum.points must be >= 3");
    require(c.spectrum.dip_fraction > 0 && c.spectrum.dip_fraction < 1, ErrorKind::ValidationError,
            "spectrum.dip_fraction must lie in (0, 1)");
    require(c.spectrum.half_span ? *c.spectrum.half_span > 0 : c.spectrum.half_span_kappa > 0,
            ErrorKind::ValidationError, "spectrum.half_span must be > 0");
    require(!c.products.empty(), ErrorKind::ValidationError, "output.products is empty");
    require(!(c.axis("tau") && c.axis("T2_pcq")), ErrorKind::ValidationError, "scan axes tau and T2_pcq conflict");
    require(!(c.axis("T2_ratio") && c.axis("T2_pcq")), ErrorKind::ValidationError,
            "scan axes T2_ratio and T2_pcq conflict");
    for (const auto& a : c.axes) {
        require(!a.values.empty(), ErrorKind::ValidationError, "scan axis " + a.name + " is empty");
        for (double v : a.values) {
            require(std::isfinite(v), ErrorKind::ValidationError, "scan axis " + a.name + " has a non-finite value");
            if (a.name == "n_turns")
                require(v >= 1 && v == std::floor(v), ErrorKind::ValidationError, "scan.n_turns needs integers >= 1");
        }
    }
    // every point must be a valid parameter set
    for (std::size_t i = 0; i < c.point_count(); ++i) {
        const auto v = axis_point(c, i);
        const auto p = at_point(c, v);
        try {
            p.loop.validate();
            rates_from_times(p.loop.T1, p.loop.T2, p.model.rate_convention);
            rates_from_times(p.nv.T1, p.nv.T2, p.model.rate_convention);
        } catch (const Error& err) {
            fail(ErrorKind::ValidationError, std::string(to_string(err.kind())) + ": " + err.detail() +
                                                 (c.axes.empty() ? "" : " (at " + describe_point(c, v) + ")"));
        }
    }
    return c;
}

inline ScanConfig parse_config(std::string_view text, std::string source,
                               const std::vector<std::string>& overrides = {}) {
    auto raw = parse_raw(text);
    for (const auto& o : overrides) apply_override(raw, o);
    return resolve_config(raw, std::move(source));
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ScanConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    return parse_config(read_file(path), path, overrides);
}

inline std::string_view preset_text(std::string_view name) {
    for (const auto& [n, text] : presets::embedded)
        if (n == name) return text;
    std::string names;
    for (const auto& p : presets::embedded) names += (names.empty() ? "" : ", ") + std::string(p.first);
    fail(ErrorKind::UsageError, "unknown preset '" + std::string(name) + "' (available: " + names + ")");
}

inline ScanConfig load_preset(std::string_view name, const std::vector<std::string>& overrides = {}) {
    return parse_config(preset_text(name), "preset:" + std::string(name), overrides);
}

} // namespace nvbus
