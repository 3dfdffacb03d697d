#include "ldelock/lde_model.hpp"

#include <cmath>

#include "ldelock/error.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

namespace {

// Rows are {HVT, SVT, LVT}, values in percent.
struct PercentRow {
    Polarity polarity;
    Arrangement arrangement;
    std::array<double, 3> by_flavor;
};

// Variations of |Vth| and gm against BL at the calibration bias.
constexpr PercentRow kVthShift[] = {
    {Polarity::PMOS, Arrangement::SP, {2.85, 3.7, 4.59}},
    {Polarity::NMOS, Arrangement::SP, {4.05, 4.38, 5.0}},
    {Polarity::PMOS, Arrangement::SOD, {6.08, 7.9, 9.79}},
    {Polarity::NMOS, Arrangement::SOD, {8.53, 9.28, 10.61}},
};
constexpr PercentRow kGmShift[] = {
    {Polarity::PMOS, Arrangement::SP, {4.76, 4.72, 4.68}},
    {Polarity::NMOS, Arrangement::SP, {1.72, 2.54, 2.42}},
    {Polarity::PMOS, Arrangement::SOD, {10.4, 10.19, 10.16}},
    {Polarity::NMOS, Arrangement::SOD, {3.7, 5.41, 5.09}},
};

// Process plus mismatch standard deviations relative to the mean.
constexpr PercentRow kVthSd[] = {
    {Polarity::PMOS, Arrangement::BL, {9.78, 10.64, 12.95}},
    {Polarity::NMOS, Arrangement::BL, {15.34, 12.29, 9.73}},
    {Polarity::PMOS, Arrangement::SP, {9.38, 10.12, 12.17}},
    {Polarity::NMOS, Arrangement::SP, {14.07, 11.28, 9.16}},
    {Polarity::PMOS, Arrangement::SOD, {8.97, 9.58, 11.37}},
    {Polarity::NMOS, Arrangement::SOD, {12.88, 10.34, 8.61}},
};
constexpr PercentRow kGmSd[] = {
    {Polarity::PMOS, Arrangement::BL, {3.55, 3.98, 2.90}},
    {Polarity::NMOS, Arrangement::BL, {3.78, 2.85, 5.93}},
    {Polarity::PMOS, Arrangement::SP, {3.35, 3.94, 2.83}},
    {Polarity::NMOS, Arrangement::SP, {3.63, 2.84, 5.98}},
    {Polarity::PMOS, Arrangement::SOD, {3.17, 3.91, 2.75}},
    {Polarity::NMOS, Arrangement::SOD, {3.45, 2.85, 6.05}},
};

struct TableKey {
    DeviceClass dc;
    Arrangement arrangement;
    std::string field;
};

// "pmos.svt.sp.vth" -> ({PMOS, SVT}, SP, "vth")
TableKey parse_table_key(const std::string& key) {
    auto parts = split(key, '.');
    if (parts.size() != 4) throw ConfigError("bad table key '" + key + "'");
    auto pol = parse_polarity(parts[0]);
    auto fl = parse_flavor(parts[1]);
    auto arr = parse_arrangement(parts[2]);
    if (!pol || !fl || !arr) throw ConfigError("bad table key '" + key + "'");
    return {{*pol, *fl}, *arr, parts[3]};
}

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

ModelCard model_card(std::string_view id) {
    ModelCard c;
    if (iequals(id, "n65")) {
        c.id = "n65";
        c.calibration_vgs = 1.0;
        c.nominal_vdd = 1.2;
        c.nmos = {300e-6, {0.45, 0.35, 0.25}, 0.02e-6, 0.30, 0.80, 11.5e-3, 0.30e-9};
        c.pmos = {100e-6, {0.45, 0.35, 0.25}, 0.025e-6, 0.30, 0.80, 11.5e-3, 0.30e-9};
    } else if (iequals(id, "n28")) {
        c.id = "n28";
        c.calibration_vgs = 0.9;
        c.nominal_vdd = 1.0;
        c.nmos = {450e-6, {0.38, 0.30, 0.22}, 0.015e-6, 0.25, 0.80, 22.0e-3, 0.25e-9};
        c.pmos = {180e-6, {0.38, 0.30, 0.22}, 0.018e-6, 0.25, 0.80, 22.0e-3, 0.25e-9};
    } else {
        throw ConfigError("unknown model card '" + std::string(id) + "' (expected n65 or n28)");
    }
    return c;
}

DeviceParams device_params(const ModelCard& card, const MosInstance& m) {
    const PolarityCard& pc = card.card(m.polarity);
    DeviceParams p;
    const double w = m.width * m.multiplier;
    p.vth0 = pc.vth0[static_cast<std::size_t>(m.flavor)];
    p.k = pc.kp * w / m.length;
    p.lambda = pc.lambda_length / m.length;
    p.gamma = pc.gamma;
    p.phi = pc.phi;
    p.cox_area_cap = pc.cox * w * m.length;
    p.overlap_cap_per_width = pc.overlap_cap_per_width;
    p.width = w;
    return p;
}

LdeTable default_lde_table(double calibration_vgs) {
    LdeTable t;
    t.calibration_vgs = calibration_vgs;
    for (const auto& row : kVthShift)
        for (Flavor f : kAllFlavors) {
            LdeShift s = t.at({row.polarity, f}, row.arrangement);
            s.vth_shift = row.by_flavor[static_cast<std::size_t>(f)] / 100.0;
            t.set({row.polarity, f}, row.arrangement, s);
        }
    for (const auto& row : kGmShift)
        for (Flavor f : kAllFlavors) {
            LdeShift s = t.at({row.polarity, f}, row.arrangement);
            s.gm_shift = -row.by_flavor[static_cast<std::size_t>(f)] / 100.0;
            t.set({row.polarity, f}, row.arrangement, s);
        }
    return t;
}

MismatchTable default_mismatch_table() {
    MismatchTable t;
    for (const auto& row : kVthSd)
        for (Flavor f : kAllFlavors) {
            MismatchSd s = t.at({row.polarity, f}, row.arrangement);
            s.vth_sd = row.by_flavor[static_cast<std::size_t>(f)] / 100.0;
            t.set({row.polarity, f}, row.arrangement, s);
        }
    for (const auto& row : kGmSd)
        for (Flavor f : kAllFlavors) {
            MismatchSd s = t.at({row.polarity, f}, row.arrangement);
            s.gm_sd = row.by_flavor[static_cast<std::size_t>(f)] / 100.0;
            t.set({row.polarity, f}, row.arrangement, s);
        }
    return t;
}

LdeTable load_lde_table(const Config& cfg, LdeTable base) {
    for (const auto& [key, value] : cfg.entries()) {
        if (key == "calibration_vgs") {
            base.calibration_vgs = *cfg.get_double(key);
            continue;
        }
        auto tk = parse_table_key(key);
        double pct = *cfg.get_double(key);
        LdeShift s = base.at(tk.dc, tk.arrangement);
        if (tk.field == "vth")
            s.vth_shift = pct / 100.0;
        else if (tk.field == "gm")
            s.gm_shift = pct / 100.0;
        else
            throw ConfigError("bad LDE field in '" + key + "' (expected vth or gm)");
        base.set(tk.dc, tk.arrangement, s);
    }
    return base;
}

MismatchTable load_mismatch_table(const Config& cfg, MismatchTable base) {
    for (const auto& [key, value] : cfg.entries()) {
        auto tk = parse_table_key(key);
        double pct = *cfg.get_double(key);
        if (pct < 0) throw ConfigError("negative SD in '" + key + "'");
        MismatchSd s = base.at(tk.dc, tk.arrangement);
        if (tk.field == "vth_sd")
            s.vth_sd = pct / 100.0;
        else if (tk.field == "gm_sd")
            s.gm_sd = pct / 100.0;
        else
            throw ConfigError("bad mismatch field in '" + key + "' (expected vth_sd or gm_sd)");
        base.set(tk.dc, tk.arrangement, s);
    }
    return base;
}

double calibrate_mobility_factor(const DeviceParams& p, LdeShift shift, double vcal) {
    const double vth_eff = p.vth0 * (1.0 + shift.vth_shift);
    if (!(vcal > vth_eff) || !(vcal > p.vth0))
        throw DeviceOffAtCalibration("device is off at the calibration bias (vgs=" + format_exact(vcal) +
                                     " V, vth=" + format_exact(vth_eff) + " V)");
    // Square-law saturation: gm = k (vgs - vth) (1 + lambda vds).
    return (1.0 + shift.gm_shift) * (vcal - p.vth0) / (vcal - vth_eff);
}

DeviceParams apply_arrangement(const DeviceParams& p, DeviceClass dc, Arrangement a, const LdeTable& t) {
    if (a == Arrangement::BL) return p;
    const LdeShift& s = t.at(dc, a);
    if (s == LdeShift{}) return p;
    DeviceParams out = p;
    out.k = p.k * calibrate_mobility_factor(p, s, t.calibration_vgs);
    out.vth0 = p.vth0 * (1.0 + s.vth_shift);
    return out;
}

DeviceParams sample_mismatch(std::mt19937_64& rng, const DeviceParams& p, DeviceClass dc, Arrangement a,
                             const MismatchTable& m) {
    const MismatchSd& sd = m.at(dc, a);
    std::normal_distribution<double> unit(0.0, 1.0);
    // Both draws are taken unconditionally so streams stay aligned across SD overrides.
    const double zv = unit(rng);
    const double zk = unit(rng);
    DeviceParams out = p;
    out.vth0 = p.vth0 * (1.0 + sd.vth_sd * zv);
    out.k = p.k * (1.0 + sd.gm_sd * zk);
    return out;
}

std::mt19937_64 seed_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = seed;
    std::uint64_t s0 = splitmix64(x);
    x ^= a * 0xd1342543de82ef95ull;
    std::uint64_t s1 = splitmix64(x);
    x ^= b * 0x9e3779b97f4a7c15ull;
    std::uint64_t s2 = splitmix64(x);
    std::seed_seq seq{static_cast<std::uint32_t>(s0), static_cast<std::uint32_t>(s0 >> 32),
                      static_cast<std::uint32_t>(s1), static_cast<std::uint32_t>(s1 >> 32),
                      static_cast<std::uint32_t>(s2), static_cast<std::uint32_t>(s2 >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace ldelock
