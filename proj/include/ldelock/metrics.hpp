#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "ldelock/config.hpp"
#include "ldelock/engine.hpp"

namespace ldelock {

struct MetricsReport {
    double gain_db = 0.0;
    std::optional<double> phase_margin_deg;  // undefined without a unity-gain crossing
    std::optional<double> bw_3db_hz;         // undefined without roll-off in range
    double power_w = 0.0;
    double gm_s = 0.0;
};

/// Acceptance windows for one key. The nearly-correct band always ends at
/// `gain_min_correct`.
struct SpecWindow {
    double gain_min_correct = 70.0;   // dB
    double nearly_correct_low = 62.0; // dB, band is [low, gain_min_correct)
    std::optional<std::pair<double, double>> pm_window;     // deg, inclusive
    std::optional<std::pair<double, double>> bw_window;     // Hz
    std::optional<std::pair<double, double>> power_window;  // W
};

/// Reads `gain_min`, `nearly_correct_low`, `pm_min`/`pm_max`, `bw_min`/`bw_max`,
/// `power_min`/`power_max` from a config subtree.
SpecWindow load_spec_window(const Config& cfg);

/// Ordered by how well the key satisfies the spec.
enum class KeyClass { Incorrect = 0, NearlyCorrect = 1, Correct = 2 };
std::string_view to_string(KeyClass k);
std::optional<KeyClass> parse_key_class(std::string_view s);

struct FrequencyGrid {
    double f_start = 1.0;
    double f_stop = 1e9;
    int points_per_decade = 20;
};

/// 20*log10|H| at the lowest frequency. Throws EmptySweep.
double extract_gain_db(std::span<const AcPoint> sweep);

/// 180 deg plus the unwrapped phase where |H| first falls through 1.
std::optional<double> extract_phase_margin(std::span<const AcPoint> sweep);

/// Lowest frequency 3.0103 dB below the low-frequency gain. Throws
/// NoRolloffInRange (and EmptySweep).
double extract_bw_3db(std::span<const AcPoint> sweep);

/// Short-circuit output current per differential input volt. The output is
/// clamped at its operating-point voltage and the inputs are moved by
/// +/- delta/2 around their operating-point values.
double extract_gm(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op, InputPair pair,
                  NodeId output, double delta = 1e-3, const SolverOptions& opt = {});

/// All five metrics from a converged operating point.
MetricsReport measure(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op,
                      const FrequencyGrid& grid = {}, const SolverOptions& opt = {});

KeyClass classify(const MetricsReport& m, const SpecWindow& s);

/// First-order ring-oscillator frequency: f = 1 / (2 * sum(tp_i)) with
/// tp_i = C_node * VDD / (2 * I_on) and I_on the mean of the driving NMOS and
/// PMOS saturation currents at full swing.
double ro_frequency_estimate(const Circuit& ring, const ResolvedParams& params);

}  // namespace ldelock
