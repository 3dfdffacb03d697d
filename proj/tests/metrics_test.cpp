#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "ldelock/builtin.hpp"
#include "ldelock/error.hpp"
#include "ldelock/metrics.hpp"
#include "ldelock/sweep.hpp"

using namespace ldelock;

namespace {

using cd = std::complex<double>;

// a0 / ((1 + s/p1)(1 + s/p2)) sampled on a log grid.
std::vector<AcPoint> two_pole(double a0, double p1, double p2, double f0 = 1.0, double f1 = 1e9) {
    std::vector<AcPoint> out;
    for (double f : log_frequency_grid(f0, f1, 50)) {
        const cd s(0.0, f);
        out.push_back({f, a0 / ((1.0 + s / p1) * (1.0 + s / p2))});
    }
    return out;
}

}  // namespace

TEST(Gain, ReadsLowestFrequency) {
    std::vector<AcPoint> unity{{1.0, 1.0}, {10.0, 0.5}};
    EXPECT_NEAR(extract_gain_db(unity), 0.0, 1e-12);
    std::vector<AcPoint> hundred{{1.0, cd(0, 100)}};
    EXPECT_NEAR(extract_gain_db(hundred), 40.0, 1e-12);
    EXPECT_THROW(extract_gain_db({}), EmptySweep);
}

TEST(PhaseMargin, OnePoleIsNinety) {
    const auto pm = extract_phase_margin(two_pole(100.0, 1e3, 1e15));
    ASSERT_TRUE(pm);
    EXPECT_NEAR(*pm, 90.0, 1.0);
}

TEST(PhaseMargin, TwoPoleAnalytic) {
    // Unity crossing of a0 / ((1+jf/p1)(1+jf/p2)) solved in closed form.
    const double a0 = 100, p1 = 1e3, p2 = 1e5;
    const double b = 1.0 / (p1 * p1) + 1.0 / (p2 * p2), c4 = 1.0 / (p1 * p1 * p2 * p2);
    const double u = (-b + std::sqrt(b * b + 4 * c4 * (a0 * a0 - 1))) / (2 * c4);
    const double fu = std::sqrt(u);
    const double expect = 180.0 - (std::atan(fu / p1) + std::atan(fu / p2)) * 180 / std::numbers::pi;
    const auto pm = extract_phase_margin(two_pole(a0, p1, p2));
    ASSERT_TRUE(pm);
    EXPECT_NEAR(*pm, expect, 2.0);
}

TEST(PhaseMargin, UndefinedBelowUnity) {
    EXPECT_FALSE(extract_phase_margin(two_pole(0.5, 1e3, 1e6)));
}

TEST(Bandwidth, RcPole) {
    const double fp = 1.0 / (2 * std::numbers::pi * 1e3 * 1e-6);
    EXPECT_NEAR(extract_bw_3db(two_pole(1.0, fp, 1e15)) / fp, 1.0, 0.01);
    std::vector<AcPoint> flat{{1.0, 1.0}, {10.0, 1.0}, {100.0, 1.0}};
    EXPECT_THROW(extract_bw_3db(flat), NoRolloffInRange);
}

TEST(Gm, SingleDeviceHarness) {
    // NMOS with its drain clamped; k (vgs - vth) = 1 mS.
    const Circuit c = parse_netlist(".supply vdd 1.2\n.input inp inn\n.output out\nVP inp 0 DC 0.5\nVN inn 0 DC 0\n"
                                    "RL vdd out 1k\nM1 out inp 0 0 NMOS W=1u L=1u\n");
    DeviceParams p;
    p.vth0 = 0.4;
    p.k = 0.01;
    const auto op = dc_operating_point(c, {p});
    const double gm = extract_gm(c, {p}, op, *c.input, *c.output);
    EXPECT_NEAR(std::abs(gm), 1e-3, 1e-6);
}

TEST(Gm, OffPairIsZero) {
    const Circuit c = parse_netlist(".supply vdd 1.2\n.input inp inn\n.output out\nVP inp 0 DC 0.1\nVN inn 0 DC 0\n"
                                    "RL vdd out 1k\nM1 out inp 0 0 NMOS W=1u L=1u\n");
    DeviceParams p;
    p.vth0 = 0.4;
    p.k = 0.01;
    const auto op = dc_operating_point(c, {p});
    EXPECT_NEAR(extract_gm(c, {p}, op, *c.input, *c.output), 0.0, 1e-9);
}

TEST(Classify, Bands) {
    SpecWindow s;
    MetricsReport m;
    m.gain_db = 73.6;
    EXPECT_EQ(classify(m, s), KeyClass::Correct);
    m.gain_db = 65;
    EXPECT_EQ(classify(m, s), KeyClass::NearlyCorrect);
    m.gain_db = 62;
    EXPECT_EQ(classify(m, s), KeyClass::NearlyCorrect);
    m.gain_db = -57;
    EXPECT_EQ(classify(m, s), KeyClass::Incorrect);
    m.gain_db = 80;
    s.power_window = {{0.0, 1e-3}};
    m.power_w = 2e-3;
    EXPECT_EQ(classify(m, s), KeyClass::Incorrect);
}

TEST(Classify, SpecWindowFromConfig) {
    const auto s = load_spec_window(Config::parse("gain_min = 60\nnearly_correct_low = 55\npm_min = 45\npm_max = 90\n"));
    EXPECT_DOUBLE_EQ(s.gain_min_correct, 60);
    EXPECT_DOUBLE_EQ(s.nearly_correct_low, 55);
    ASSERT_TRUE(s.pm_window);
    EXPECT_DOUBLE_EQ(s.pm_window->second, 90);
    EXPECT_EQ(parse_key_class(to_string(KeyClass::NearlyCorrect)), KeyClass::NearlyCorrect);
}

TEST(Ota, CorrectKeyMeetsTargets) {
    const Circuit c = builtin_ota();
    std::vector<Arrangement> arr;
    for (const auto& m : c.mosfets) arr.push_back(std::get<Arrangement>(m.arrangement));
    const auto params = resolve_params(c, arr, EvalContext{});
    const auto m = measure(c, params, dc_operating_point(c, params));
    EXPECT_GE(m.gain_db, 70.0);
    EXPECT_GE(m.power_w, 0.3e-3);
    EXPECT_LE(m.power_w, 2e-3);
    ASSERT_TRUE(m.bw_3db_hz);
    ASSERT_TRUE(m.phase_margin_deg);
    EXPECT_GT(m.gm_s, 0.0);
}

TEST(RingOscillator, StrongerPmosRaisesFrequency) {
    const Circuit ring = builtin_ro(5);
    auto freq = [&](Arrangement pmos) {
        std::vector<Arrangement> arr;
        for (const auto& m : ring.mosfets) arr.push_back(m.polarity == Polarity::PMOS ? pmos : Arrangement::BL);
        return ro_frequency_estimate(ring, resolve_params(ring, arr, EvalContext{}));
    };
    EXPECT_GT(freq(Arrangement::BL), freq(Arrangement::SP));
    EXPECT_GT(freq(Arrangement::SP), freq(Arrangement::SOD));
}

TEST(RingOscillator, DoublingStagesHalvesFrequency) {
    auto freq = [](int n) {
        const Circuit ring = builtin_ro(n);
        std::vector<Arrangement> arr(ring.mosfets.size(), Arrangement::BL);
        return ro_frequency_estimate(ring, resolve_params(ring, arr, EvalContext{}));
    };
    EXPECT_NEAR(freq(3) / freq(7), 7.0 / 3.0, 1e-9);
}
