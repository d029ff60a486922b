#include <gtest/gtest.h>

#include <random>

#include "nvbus/units.hpp"

using namespace nvbus;

TEST(Constants, AllPositive) {
    EXPECT_GT(constants::hbar, 0);
    EXPECT_GT(constants::mu0, 0);
    EXPECT_GT(constants::flux_quantum, 0);
    EXPECT_GT(constants::bohr_magneton_over_h, 0);
}

TEST(Constants, FluxQuantumIsHOver2e) {
    // CODATA: 2.067833848...e-15 Wb
    EXPECT_NEAR(constants::flux_quantum / 2.06783e-15, 1.0, 5e-6);
}

TEST(Convert, CyclicToAngular) {
    const auto q = convert({6e9, Unit::Hertz}, Unit::RadPerSecond);
    EXPECT_EQ(q.unit, Unit::RadPerSecond);
    EXPECT_DOUBLE_EQ(q.value, 2 * std::numbers::pi * 6e9);
}

TEST(Convert, TeslaToGauss) {
    const auto q = convert({5.17e-4, Unit::Tesla}, Unit::Gauss);
    EXPECT_NEAR(q.value, 5.17, 1e-12);
}

TEST(Convert, Identity) {
    const auto q = convert({1.0, Unit::Hertz}, Unit::Hertz);
    EXPECT_EQ(q, (Quantity{1.0, Unit::Hertz}));
}

TEST(Convert, WeberToTeslaSquareMeter) {
    EXPECT_DOUBLE_EQ(convert({2e-15, Unit::Weber}, Unit::TeslaSquareMeter).value, 2e-15);
}

TEST(Convert, IllegalPairsRejected) {
    const std::array all{Unit::Hertz, Unit::RadPerSecond, Unit::Tesla,  Unit::Gauss,
                         Unit::Ampere, Unit::Meter,       Unit::Second, Unit::Henry,
                         Unit::Weber, Unit::TeslaSquareMeter, Unit::Dimensionless};
    auto legal = [](Unit a, Unit b) {
        if (a == b) return true;
        auto pair = [&](Unit x, Unit y) { return (a == x && b == y) || (a == y && b == x); };
        return pair(Unit::Hertz, Unit::RadPerSecond) || pair(Unit::Tesla, Unit::Gauss) ||
               pair(Unit::Weber, Unit::TeslaSquareMeter);
    };
    for (Unit a : all)
        for (Unit b : all) {
            if (legal(a, b)) {
                EXPECT_NO_THROW(convert({1.0, a}, b));
            } else {
                try {
                    convert({1.0, a}, b);
                    ADD_FAILURE() << to_string(a) << " -> " << to_string(b) << " accepted";
                } catch (const Error& e) {
                    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
                }
            }
        }
}

TEST(Convert, HzRadRoundTripProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> exp10(-3, 12);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::pow(10.0, exp10(rng));
        const double back = convert(convert({v, Unit::Hertz}, Unit::RadPerSecond), Unit::Hertz).value;
        EXPECT_NEAR(back, v, 2 * std::numeric_limits<double>::epsilon() * v);
    }
}

TEST(Quantity, MismatchedArithmeticRejected) {
    const Quantity f{1.0, Unit::Hertz}, w{1.0, Unit::RadPerSecond};
    EXPECT_THROW(f + w, Error);
    EXPECT_THROW(f - w, Error);
    EXPECT_DOUBLE_EQ((f + f).value, 2.0);
    EXPECT_DOUBLE_EQ((3.0 * f).value, 3.0);
}
