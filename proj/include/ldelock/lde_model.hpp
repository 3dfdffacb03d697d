#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "ldelock/config.hpp"
#include "ldelock/device.hpp"
#include "ldelock/netlist.hpp"

namespace ldelock {

/// Relative shift of a device parameter against the baseline arrangement.
/// `vth_shift` scales |Vth|, `gm_shift` is the total observed gm change at the
/// calibration bias. Both are signed fractions.
struct LdeShift {
    double vth_shift = 0.0;
    double gm_shift = 0.0;
    friend bool operator==(const LdeShift&, const LdeShift&) = default;
};

struct MismatchSd {
    double vth_sd = 0.0;  // fraction of mean
    double gm_sd = 0.0;
};

namespace detail {
inline std::size_t table_index(DeviceClass dc, Arrangement a) {
    return (static_cast<std::size_t>(dc.polarity) * 3 + static_cast<std::size_t>(dc.flavor)) * 3 +
           static_cast<std::size_t>(a);
}
}  // namespace detail

/// 2 polarities x 3 flavors x 3 arrangements of LDE shifts.
class LdeTable {
public:
    const LdeShift& at(DeviceClass dc, Arrangement a) const { return entries_[detail::table_index(dc, a)]; }
    void set(DeviceClass dc, Arrangement a, LdeShift s) { entries_[detail::table_index(dc, a)] = s; }

    double calibration_vgs = 1.0;

private:
    std::array<LdeShift, 18> entries_{};
};

class MismatchTable {
public:
    const MismatchSd& at(DeviceClass dc, Arrangement a) const { return entries_[detail::table_index(dc, a)]; }
    void set(DeviceClass dc, Arrangement a, MismatchSd s) { entries_[detail::table_index(dc, a)] = s; }

private:
    std::array<MismatchSd, 18> entries_{};
};

/// Square-law carrier model parameters of one resolved device. Voltages are
/// magnitudes; polarity is applied by the evaluator.
struct DeviceParams {
    double vth0 = 0.4;                  // V
    double k = 1e-3;                    // A/V^2, mu*Cox*W/L (times fingers)
    double lambda = 0.0;                // 1/V
    double gamma = 0.0;                 // sqrt(V)
    double phi = 0.7;                   // V
    double cox_area_cap = 0.0;          // F, Cox*W*L
    double overlap_cap_per_width = 0.0; // F/m
    double width = 0.0;                 // m, effective (W*M)

    friend bool operator==(const DeviceParams&, const DeviceParams&) = default;
};

/// Technology card for one polarity.
struct PolarityCard {
    double kp = 0.0;                   // mu*Cox, A/V^2
    std::array<double, 3> vth0{};      // indexed by Flavor
    double lambda_length = 0.0;        // lambda*L, m/V
    double gamma = 0.0;
    double phi = 0.7;
    double cox = 0.0;                  // F/m^2
    double overlap_cap_per_width = 0.0;
};

struct ModelCard {
    std::string id;
    double calibration_vgs = 1.0;
    double nominal_vdd = 1.2;
    PolarityCard nmos;
    PolarityCard pmos;

    const PolarityCard& card(Polarity p) const { return p == Polarity::NMOS ? nmos : pmos; }
};

/// "n65" or "n28"; throws ConfigError otherwise.
ModelCard model_card(std::string_view id);

/// Nominal (baseline-arrangement) parameters for an instance.
DeviceParams device_params(const ModelCard& card, const MosInstance& m);

/// Table 1 magnitudes with drive-weakening signs (|Vth| up, gm down).
LdeTable default_lde_table(double calibration_vgs = 1.0);
MismatchTable default_mismatch_table();

/// Overrides entries from keys like "pmos.svt.sp.vth" (signed percent) and
/// "calibration_vgs". Unknown keys throw ConfigError.
LdeTable load_lde_table(const Config& cfg, LdeTable base);
/// Keys like "nmos.lvt.sod.gm_sd" (percent).
MismatchTable load_mismatch_table(const Config& cfg, MismatchTable base);

/// Mobility multiplier that makes the shifted device show gm*(1+gm_shift) at
/// vgs = vcal in saturation. Throws DeviceOffAtCalibration.
double calibrate_mobility_factor(const DeviceParams& p, LdeShift shift, double vcal);

/// vth0 scaled by (1+vth_shift), k scaled by the calibrated mobility factor.
/// BL is returned unchanged.
DeviceParams apply_arrangement(const DeviceParams& p, DeviceClass dc, Arrangement a, const LdeTable& t);

/// Multiplies vth0 and k by independent N(1, sd^2) draws.
DeviceParams sample_mismatch(std::mt19937_64& rng, const DeviceParams& p, DeviceClass dc, Arrangement a,
                             const MismatchTable& m);

/// Deterministic per-purpose stream, e.g. seed_stream(seed, instance, class_id).
std::mt19937_64 seed_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace ldelock
