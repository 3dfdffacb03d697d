#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ldelock/engine.hpp"
#include "ldelock/error.hpp"
#include "ldelock/lde_model.hpp"

using namespace ldelock;

namespace {

// Published variation magnitudes, {HVT, SVT, LVT}, percent.
struct Row {
    Polarity pol;
    Arrangement arr;
    double v[3];
};
constexpr Row kVth[] = {{Polarity::PMOS, Arrangement::SP, {2.85, 3.7, 4.59}},
                        {Polarity::NMOS, Arrangement::SP, {4.05, 4.38, 5.0}},
                        {Polarity::PMOS, Arrangement::SOD, {6.08, 7.9, 9.79}},
                        {Polarity::NMOS, Arrangement::SOD, {8.53, 9.28, 10.61}}};
constexpr Row kGm[] = {{Polarity::PMOS, Arrangement::SP, {4.76, 4.72, 4.68}},
                       {Polarity::NMOS, Arrangement::SP, {1.72, 2.54, 2.42}},
                       {Polarity::PMOS, Arrangement::SOD, {10.4, 10.19, 10.16}},
                       {Polarity::NMOS, Arrangement::SOD, {3.7, 5.41, 5.09}}};

constexpr Flavor kFlavors[] = {Flavor::HVT, Flavor::SVT, Flavor::LVT};

DeviceParams nominal(Polarity pol, Flavor f) {
    MosInstance m;
    m.polarity = pol;
    m.flavor = f;
    m.width = 1e-6;
    m.length = 100e-9;
    return device_params(model_card("n65"), m);
}

// Central difference of the square-law current in saturation.
double numeric_gm(const DeviceParams& p, double vgs) {
    const double h = 1e-6, vds = 1.2;
    const double up = mosfet_eval(p, Polarity::NMOS, vgs + h, vds, 0.0, 0.0).id;
    const double dn = mosfet_eval(p, Polarity::NMOS, vgs - h, vds, 0.0, 0.0).id;
    return (up - dn) / (2 * h);
}

// Threshold from the sqrt(Id) line through two saturation points.
double numeric_vth(const DeviceParams& p) {
    const double a = 0.9, b = 1.1, vds = 1.2;
    const double sa = std::sqrt(mosfet_eval(p, Polarity::NMOS, a, vds, 0.0, 0.0).id);
    const double sb = std::sqrt(mosfet_eval(p, Polarity::NMOS, b, vds, 0.0, 0.0).id);
    return a - sa * (b - a) / (sb - sa);
}

}  // namespace

TEST(LdeTable, DefaultsFollowPublishedMagnitudes) {
    const auto t = default_lde_table();
    EXPECT_DOUBLE_EQ(t.at({Polarity::PMOS, Flavor::SVT}, Arrangement::SP).vth_shift, 0.037);
    EXPECT_DOUBLE_EQ(t.at({Polarity::NMOS, Flavor::LVT}, Arrangement::SOD).vth_shift, 0.1061);
    EXPECT_DOUBLE_EQ(t.at({Polarity::PMOS, Flavor::HVT}, Arrangement::SOD).gm_shift, -0.104);
    for (auto pol : {Polarity::NMOS, Polarity::PMOS})
        for (auto f : kFlavors) {
            EXPECT_EQ(t.at({pol, f}, Arrangement::BL), LdeShift{});
            const auto sp = t.at({pol, f}, Arrangement::SP), sod = t.at({pol, f}, Arrangement::SOD);
            EXPECT_GT(std::abs(sod.vth_shift), std::abs(sp.vth_shift));
            EXPECT_GT(std::abs(sod.gm_shift), std::abs(sp.gm_shift));
            EXPECT_GT(std::abs(sp.vth_shift), 0.0);
        }
}

TEST(MismatchTable, Defaults) {
    const auto m = default_mismatch_table();
    EXPECT_DOUBLE_EQ(m.at({Polarity::PMOS, Flavor::SVT}, Arrangement::BL).vth_sd, 0.1064);
    EXPECT_DOUBLE_EQ(m.at({Polarity::NMOS, Flavor::HVT}, Arrangement::BL).vth_sd, 0.1534);
    EXPECT_DOUBLE_EQ(m.at({Polarity::NMOS, Flavor::LVT}, Arrangement::SOD).gm_sd, 0.0605);
}

TEST(Calibration, IdentityAndClosedForm) {
    DeviceParams p;
    p.vth0 = 0.4;
    p.k = 1e-3;
    EXPECT_DOUBLE_EQ(calibrate_mobility_factor(p, {}, 1.0), 1.0);
    EXPECT_NEAR(calibrate_mobility_factor(p, {0.05, 0.0}, 1.0), 0.6 / 0.58, 1e-12);
    EXPECT_THROW(calibrate_mobility_factor(p, {0.05, 0.0}, 0.41), DeviceOffAtCalibration);
}

TEST(Calibration, NumericGmAndVthMatchTable) {
    const auto t = default_lde_table(1.0);
    for (std::size_t i = 0; i < std::size(kVth); ++i)
        for (int fi = 0; fi < 3; ++fi) {
            const auto& r = kVth[i];
            const DeviceClass dc{r.pol, kFlavors[fi]};
            const auto base = nominal(r.pol, kFlavors[fi]);
            const auto shifted = apply_arrangement(base, dc, r.arr, t);
            const double vth_ratio = numeric_vth(shifted) / numeric_vth(base);
            const double gm_ratio = numeric_gm(shifted, 1.0) / numeric_gm(base, 1.0);
            EXPECT_NEAR(vth_ratio / (1.0 + r.v[fi] / 100), 1.0, 1e-4) << to_string(r.pol) << " " << to_string(r.arr);
            EXPECT_NEAR(gm_ratio / (1.0 - kGm[i].v[fi] / 100), 1.0, 1e-4) << to_string(r.pol) << " " << to_string(r.arr);
        }
}

TEST(Calibration, BaselineIsExactIdentity) {
    const auto t = default_lde_table();
    for (auto pol : {Polarity::NMOS, Polarity::PMOS})
        for (auto f : kFlavors) {
            const auto p = nominal(pol, f);
            EXPECT_EQ(apply_arrangement(p, {pol, f}, Arrangement::BL, t), p);
        }
}

TEST(Calibration, NmosSvtSodThreshold) {
    DeviceParams p;
    p.vth0 = 0.4;
    p.k = 1e-3;
    const auto s = apply_arrangement(p, {Polarity::NMOS, Flavor::SVT}, Arrangement::SOD, default_lde_table());
    EXPECT_NEAR(s.vth0, 0.43712, 1e-9);
}

TEST(Calibration, DriveOrderingAtCalibrationBias) {
    const auto t = default_lde_table();
    for (auto pol : {Polarity::NMOS, Polarity::PMOS})
        for (auto f : kFlavors) {
            const auto p = nominal(pol, f);
            auto id = [&](Arrangement a) {
                return mosfet_eval(apply_arrangement(p, {pol, f}, a, t), Polarity::NMOS, 1.0, 1.2, 0.0, 0.0).id;
            };
            EXPECT_LT(id(Arrangement::SOD), id(Arrangement::SP));
            EXPECT_LT(id(Arrangement::SP), id(Arrangement::BL));
        }
}

TEST(Calibration, WidthScalingKeepsMargin) {
    const auto t = default_lde_table();
    const DeviceClass dc{Polarity::NMOS, Flavor::SVT};
    auto margin = [&](double w) {
        MosInstance m;
        m.width = w;
        m.length = 100e-9;
        const auto p = device_params(model_card("n65"), m);
        return numeric_vth(apply_arrangement(p, dc, Arrangement::SOD, t)) / numeric_vth(p) - 1.0;
    };
    const double ratio = margin(4e-6) / margin(1e-6);
    EXPECT_GE(ratio, 0.5);
    EXPECT_LE(ratio, 1.5);
}

TEST(Mismatch, ZeroSdIsIdentityAndSeedsRepeat) {
    MismatchTable zero;
    auto rng = seed_stream(5, 1, 2);
    const auto p = nominal(Polarity::NMOS, Flavor::SVT);
    EXPECT_EQ(sample_mismatch(rng, p, {Polarity::NMOS, Flavor::SVT}, Arrangement::SP, zero), p);

    const auto m = default_mismatch_table();
    auto a = seed_stream(9, 3, 4), b = seed_stream(9, 3, 4);
    EXPECT_EQ(sample_mismatch(a, p, {Polarity::NMOS, Flavor::SVT}, Arrangement::SP, m),
              sample_mismatch(b, p, {Polarity::NMOS, Flavor::SVT}, Arrangement::SP, m));
    auto c = seed_stream(10, 3, 4);
    EXPECT_NE(sample_mismatch(c, p, {Polarity::NMOS, Flavor::SVT}, Arrangement::SP, m).vth0, p.vth0);
}

TEST(Mismatch, PmosSvtBaselineSpread) {
    const auto m = default_mismatch_table();
    const auto p = nominal(Polarity::PMOS, Flavor::SVT);
    auto rng = seed_stream(2024);
    std::vector<double> v;
    for (int i = 0; i < 10000; ++i)
        v.push_back(sample_mismatch(rng, p, {Polarity::PMOS, Flavor::SVT}, Arrangement::BL, m).vth0);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(std::sqrt(ss / (v.size() - 1)) / mean * 100, 10.64, 0.5);
}

TEST(LdeConfig, OverridesAndRejectsUnknownKeys) {
    auto cfg = Config::parse("pmos.svt.sp.vth = -2.5\ncalibration_vgs = 0.9\n");
    const auto t = load_lde_table(cfg, default_lde_table());
    EXPECT_DOUBLE_EQ(t.at({Polarity::PMOS, Flavor::SVT}, Arrangement::SP).vth_shift, -0.025);
    EXPECT_DOUBLE_EQ(t.calibration_vgs, 0.9);
    EXPECT_THROW(load_lde_table(Config::parse("pmos.svt.xx.vth = 1\n"), default_lde_table()), ConfigError);
    EXPECT_THROW(model_card("n7"), ConfigError);
}
