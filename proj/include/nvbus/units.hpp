// units.hpp: physical constants and a small tagged-quantity type
//
// Everything inside nvbus is SI. Frequencies are cyclic (Hz) at the
// configuration/report boundary and angular (rad/s) in the dynamics code.

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "nvbus/errors.hpp"

namespace nvbus {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

namespace constants {

inline constexpr double planck = 6.62607015e-34;           // J s
inline constexpr double hbar = planck / two_pi;            // J s
inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double mu0 = 1.25663706212e-6;            // T m / A
inline constexpr double flux_quantum = planck / (2.0 * elementary_charge); // Wb
// beta_e / 2pi as used for the NV Zeeman term (the rounded literature value).
inline constexpr double bohr_magneton_over_h = 1.4e10;     // Hz / T
inline constexpr double nv_g_factor = -2.0;

} // namespace constants

enum class Unit {
    Hertz,
    RadPerSecond,
    Tesla,
    Gauss,
    Ampere,
    Meter,
    Second,
    Henry,
    Weber,
    TeslaSquareMeter,
    Dimensionless,
};

constexpr std::string_view to_string(Unit u) {
    switch (u) {
    case Unit::Hertz: return "Hz";
    case Unit::RadPerSecond: return "rad/s";
    case Unit::Tesla: return "T";
    case Unit::Gauss: return "G";
    case Unit::Ampere: return "A";
    case Unit::Meter: return "m";
    case Unit::Second: return "s";
    case Unit::Henry: return "H";
    case Unit::Weber: return "Wb";
    case Unit::TeslaSquareMeter: return "T*m^2";
    case Unit::Dimensionless: return "1";
    }
    return "?";
}

struct Quantity {
    double value{0.0};
    Unit unit{Unit::Dimensionless};

    friend Quantity operator+(Quantity a, Quantity b) {
        require(a.unit == b.unit, ErrorKind::DimensionMismatch,
                std::string(to_string(a.unit)) + " + " + std::string(to_string(b.unit)));
        return {a.value + b.value, a.unit};
    }
    friend Quantity operator-(Quantity a, Quantity b) {
        require(a.unit == b.unit, ErrorKind::DimensionMismatch,
                std::string(to_string(a.unit)) + " - " + std::string(to_string(b.unit)));
        return {a.value - b.value, a.unit};
    }
    friend Quantity operator*(double s, Quantity q) { return {s * q.value, q.unit}; }
    friend Quantity operator*(Quantity q, double s) { return {s * q.value, q.unit}; }
    friend bool operator==(const Quantity&, const Quantity&) = default;
};

namespace detail {

// Factor taking `from` to `to`, or NaN when the pair is not a legal conversion.
constexpr double conversion_factor(Unit from, Unit to) {
    if (from == to) return 1.0;
    if (from == Unit::Hertz && to == Unit::RadPerSecond) return two_pi;
    if (from == Unit::RadPerSecond && to == Unit::Hertz) return 1.0 / two_pi;
    if (from == Unit::Tesla && to == Unit::Gauss) return 1e4;
    if (from == Unit::Gauss && to == Unit::Tesla) return 1e-4;
    if (from == Unit::Weber && to == Unit::TeslaSquareMeter) return 1.0;
    if (from == Unit::TeslaSquareMeter && to == Unit::Weber) return 1.0;
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

inline bool convertible(Unit from, Unit to) {
    return !std::isnan(detail::conversion_factor(from, to));
}

inline Quantity convert(Quantity q, Unit target) {
    const double f = detail::conversion_factor(q.unit, target);
    require(!std::isnan(f), ErrorKind::DimensionMismatch,
            "cannot convert " + std::string(to_string(q.unit)) + " to " +
                std::string(to_string(target)));
    return {q.value * f, target};
}

inline constexpr double angular(double hz) { return two_pi * hz; }
inline constexpr double cyclic(double rad_per_s) { return rad_per_s / two_pi; }

} // namespace nvbus
