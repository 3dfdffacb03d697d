#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ldelock/builtin.hpp"
#include "ldelock/engine.hpp"
#include "ldelock/error.hpp"
#include "ldelock/sweep.hpp"

using namespace ldelock;

namespace {

DeviceParams plain(double vth0, double k, double lambda = 0.0) {
    DeviceParams p;
    p.vth0 = vth0;
    p.k = k;
    p.lambda = lambda;
    return p;
}

// Root of k/2 (v - vth)^2 = (vdd - v) / r in v > vth.
double diode_voltage(double vth, double k, double vdd, double r) {
    const double a = k * r / 2.0;
    const double x = (-1.0 + std::sqrt(1.0 + 4.0 * a * (vdd - vth))) / (2.0 * a);
    return vth + x;
}

}  // namespace

TEST(Mosfet, SquareLawSaturation) {
    const auto p = plain(0.4, 1e-3);
    const auto e = mosfet_eval(p, Polarity::NMOS, 1.0, 1.0, 0.0);
    EXPECT_NEAR(e.id, 180e-6, 1e-12);
    EXPECT_NEAR(e.did_dvgs, 6e-4, 1e-12);
    const double h = 1e-6;
    const double fd = (mosfet_eval(p, Polarity::NMOS, 1.0 + h, 1.0, 0.0).id -
                       mosfet_eval(p, Polarity::NMOS, 1.0 - h, 1.0, 0.0).id) / (2 * h);
    EXPECT_NEAR(fd / e.did_dvgs, 1.0, 1e-8);
}

TEST(Mosfet, CutoffLeaksGminOnly) {
    const auto e = mosfet_eval(plain(0.4, 1e-3), Polarity::NMOS, 0.2, 0.5, 0.0, 1e-12);
    EXPECT_NEAR(e.id, 1e-12 * 0.5, 1e-20);
}

TEST(Mosfet, PmosMirrorsNmos) {
    const auto p = plain(0.4, 1e-3, 0.1);
    const auto n = mosfet_eval(p, Polarity::NMOS, 0.9, 0.7, 0.0);
    const auto q = mosfet_eval(p, Polarity::PMOS, -0.9, -0.7, 0.0);
    EXPECT_NEAR(q.id, -n.id, 1e-15);
}

TEST(Mosfet, DerivativesMatchFiniteDifferences) {
    auto p = plain(0.4, 2e-3, 0.2);
    p.gamma = 0.3;
    for (double vds : {0.1, 0.3, 1.0, -0.2}) {
        const auto e = mosfet_eval(p, Polarity::NMOS, 0.8, vds, -0.1);
        const double h = 1e-7;
        auto id = [&](double g, double d, double b) { return mosfet_eval(p, Polarity::NMOS, g, d, b).id; };
        EXPECT_NEAR(e.did_dvds, (id(0.8, vds + h, -0.1) - id(0.8, vds - h, -0.1)) / (2 * h), 1e-7);
        EXPECT_NEAR(e.did_dvgs, (id(0.8 + h, vds, -0.1) - id(0.8 - h, vds, -0.1)) / (2 * h), 1e-7);
        EXPECT_NEAR(e.did_dvbs, (id(0.8, vds, -0.1 + h) - id(0.8, vds, -0.1 - h)) / (2 * h), 1e-7);
    }
}

TEST(Dc, ResistorDivider) {
    const Circuit c = parse_netlist(".supply vdd 1.2\nR1 vdd mid 10k\nR2 mid 0 10k\n");
    const auto op = dc_operating_point(c, {});
    EXPECT_NEAR(op.node_voltages[c.node("mid")], 0.6, 1e-6);
    // The node-to-ground gmin draws a few pW on top of the resistors.
    EXPECT_NEAR(dc_power(c, op), 1.2 * 1.2 / 20e3, 1e-10);
}

TEST(Dc, DiodeConnectedNmos) {
    const Circuit c = parse_netlist(".supply vdd 1.2\nR1 vdd d 10k\nM1 d d 0 0 NMOS W=1u L=1u\n");
    const auto op = dc_operating_point(c, {plain(0.4, 1e-3)});
    const double v = diode_voltage(0.4, 1e-3, 1.2, 1e4);
    EXPECT_NEAR(op.node_voltages[c.node("d")], v, 1e-6);
    EXPECT_NEAR(branch_current(c, op, "M1"), (1.2 - v) / 1e4, 1e-9);
    EXPECT_EQ(op.devices[0].region, Region::Saturation);
}

TEST(Dc, BuiltinOtaConverges) {
    const Circuit c = builtin_ota();
    std::vector<Arrangement> arr;
    for (const auto& m : c.mosfets) arr.push_back(std::get<Arrangement>(m.arrangement));
    const auto op = dc_operating_point(c, resolve_params(c, arr, EvalContext{}));
    EXPECT_EQ(op.devices.size(), c.mosfets.size());
    EXPECT_LT(op.max_residual, 1e-9);
    EXPECT_THROW(branch_current(c, op, "MX9"), UnknownDevice);
}

TEST(Dc, DeterministicOperatingPoint) {
    const Circuit c = parse_netlist(".supply vdd 1.2\nR1 vdd d 10k\nM1 d d 0 0 NMOS W=1u L=1u\n");
    const auto a = dc_operating_point(c, {plain(0.4, 1e-3)});
    const auto b = dc_operating_point(c, {plain(0.4, 1e-3)});
    EXPECT_EQ(a.node_voltages, b.node_voltages);
}

TEST(Ac, SinglePoleRcIsAnalytic) {
    const Circuit c = parse_netlist(".input in 0\n.output out\nVIN in 0 DC 0 AC 1\nR1 in out 1k\nC1 out 0 1u\n");
    const auto op = dc_operating_point(c, {});
    const auto sweep = ac_sweep(c, {}, op, 1.0, 1e6, 20);
    ASSERT_EQ(sweep.size(), 121u);
    const double rc = 1e3 * 1e-6;
    for (const auto& pt : sweep) {
        const std::complex<double> h = 1.0 / std::complex<double>(1.0, 2 * std::numbers::pi * pt.frequency * rc);
        EXPECT_NEAR(20 * std::log10(std::abs(pt.transfer)), 20 * std::log10(std::abs(h)), 0.05);
        EXPECT_NEAR(std::arg(pt.transfer) * 180 / std::numbers::pi, std::arg(h) * 180 / std::numbers::pi, 0.5);
    }
}

TEST(Ac, IdealTransconductorGain) {
    // Common-source stage with a resistive load: gain = gm R.
    const Circuit c = parse_netlist(".supply vdd 1.2\n.input in 0\n.output out\nVIN in 0 DC 0.41 AC 1\n"
                                    "R1 vdd out 100k\nM1 out in 0 0 NMOS W=1u L=1u\n");
    // gm = k (vgs - vth) = 1 mS at 5 uA, well inside saturation
    const auto p = plain(0.4, 0.1);
    const auto op = dc_operating_point(c, {p});
    const auto sweep = ac_sweep(c, {p}, op, 1.0, 10.0, 2);
    EXPECT_NEAR(20 * std::log10(std::abs(sweep.front().transfer)), 40.0, 1e-3);
}

TEST(Ac, MissingDirectiveThrows) {
    const Circuit c = parse_netlist(".supply vdd 1.2\nR1 vdd 0 1k\n");
    EXPECT_THROW(ac_sweep(c, {}, dc_operating_point(c, {}), 1, 10, 2), MissingDirective);
}
