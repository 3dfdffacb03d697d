#include "ldelock/metrics.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "ldelock/error.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

namespace {

double db(std::complex<double> h) { return 20.0 * std::log10(std::abs(h)); }

std::vector<double> unwrapped_phase_deg(std::span<const AcPoint> sweep) {
    std::vector<double> out;
    out.reserve(sweep.size());
    for (const auto& p : sweep) {
        double ph = std::arg(p.transfer) * 180.0 / std::numbers::pi;
        if (!out.empty()) {
            while (ph - out.back() > 180.0) ph -= 360.0;
            while (ph - out.back() < -180.0) ph += 360.0;
        }
        out.push_back(ph);
    }
    return out;
}

bool in_window(double v, const std::optional<std::pair<double, double>>& w) {
    return !w || (v >= w->first && v <= w->second);
}

bool in_window(const std::optional<double>& v, const std::optional<std::pair<double, double>>& w) {
    return !w || (v && *v >= w->first && *v <= w->second);
}

// Sets the DC value of the grounded voltage source on `node`, or adds one.
void force_node(Circuit& c, NodeId node, double volts, const std::string& fresh_name) {
    if (node == kGround) throw Error("cannot force the ground node");
    if (c.supply && c.supply->node == node) throw Error("cannot force the supply node");
    for (auto& e : c.elements) {
        if (!e.is_voltage_source()) continue;
        if (e.pos == node && e.neg == kGround) {
            e.value = volts;
            return;
        }
        if (e.neg == node && e.pos == kGround) {
            e.value = -volts;
            return;
        }
    }
    Element e;
    e.name = fresh_name;
    e.kind = ElementKind::Vdc;
    e.pos = node;
    e.neg = kGround;
    e.value = volts;
    c.elements.push_back(e);
}

}  // namespace

SpecWindow load_spec_window(const Config& cfg) {
    SpecWindow s;
    s.gain_min_correct = cfg.get_double_or("gain_min", s.gain_min_correct);
    s.nearly_correct_low = cfg.get_double_or("nearly_correct_low", s.nearly_correct_low);
    if (s.nearly_correct_low > s.gain_min_correct)
        throw ConfigError("nearly_correct_low must not exceed gain_min");
    auto window = [&](const char* lo, const char* hi) -> std::optional<std::pair<double, double>> {
        auto a = cfg.get_double(lo);
        auto b = cfg.get_double(hi);
        if (!a && !b) return std::nullopt;
        return std::pair{a ? *a : -INFINITY, b ? *b : INFINITY};
    };
    s.pm_window = window("pm_min", "pm_max");
    s.bw_window = window("bw_min", "bw_max");
    s.power_window = window("power_min", "power_max");
    return s;
}

std::string_view to_string(KeyClass k) {
    switch (k) {
        case KeyClass::Correct: return "correct";
        case KeyClass::NearlyCorrect: return "nearly_correct";
        case KeyClass::Incorrect: return "incorrect";
    }
    return "?";
}

std::optional<KeyClass> parse_key_class(std::string_view s) {
    if (s == "correct") return KeyClass::Correct;
    if (s == "nearly_correct") return KeyClass::NearlyCorrect;
    if (s == "incorrect") return KeyClass::Incorrect;
    return std::nullopt;
}

double extract_gain_db(std::span<const AcPoint> sweep) {
    if (sweep.empty()) throw EmptySweep("empty AC sweep");
    return db(sweep.front().transfer);
}

std::optional<double> extract_phase_margin(std::span<const AcPoint> sweep) {
    if (sweep.size() < 2) return std::nullopt;
    const auto phase = unwrapped_phase_deg(sweep);
    for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
        const double g0 = db(sweep[i].transfer), g1 = db(sweep[i + 1].transfer);
        if (g0 >= 0.0 && g1 < 0.0) {
            const double t = g0 / (g0 - g1);
            return 180.0 + phase[i] + t * (phase[i + 1] - phase[i]);
        }
    }
    return std::nullopt;
}

double extract_bw_3db(std::span<const AcPoint> sweep) {
    const double target = extract_gain_db(sweep) - 3.0103;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        const double g1 = db(sweep[i].transfer);
        if (g1 <= target) {
            const double g0 = db(sweep[i - 1].transfer);
            const double t = (g0 - target) / (g0 - g1);
            const double l0 = std::log10(sweep[i - 1].frequency), l1 = std::log10(sweep[i].frequency);
            return std::pow(10.0, l0 + t * (l1 - l0));
        }
    }
    throw NoRolloffInRange("gain never drops 3 dB below its low-frequency value in the sweep");
}

double extract_gm(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op, InputPair pair,
                  NodeId output, double delta, const SolverOptions& opt) {
    const double vp = op.node_voltages(pair.positive);
    const double vn = op.node_voltages(pair.negative);
    const double vout = op.node_voltages(output);

    auto output_current = [&](double sign) {
        Circuit probe = c;
        force_node(probe, pair.positive, vp + sign * delta / 2, "VGM_INP");
        force_node(probe, pair.negative, vn - sign * delta / 2, "VGM_INN");
        Element clamp;
        clamp.name = "VGM_OUT";
        clamp.kind = ElementKind::Vdc;
        clamp.pos = output;
        clamp.neg = kGround;
        clamp.value = vout;
        probe.elements.push_back(clamp);

        SolverOptions o = opt;
        o.initial_guess = op.node_voltages;
        OperatingPoint p = dc_operating_point(probe, params, o);
        // The clamp is the last element voltage source (before the supply).
        const auto srcs = voltage_sources(probe);
        for (std::size_t k = 0; k < srcs.size(); ++k)
            if (srcs[k].element && probe.elements[*srcs[k].element].name == "VGM_OUT") return p.source_currents[k];
        throw Error("output clamp missing");
    };
    return (output_current(+1.0) - output_current(-1.0)) / delta;
}

MetricsReport measure(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op,
                      const FrequencyGrid& grid, const SolverOptions& opt) {
    if (!c.input) throw MissingDirective("circuit has no .input directive");
    if (!c.output) throw MissingDirective("circuit has no .output directive");
    MetricsReport m;
    auto sweep = ac_sweep(c, params, op, grid.f_start, grid.f_stop, grid.points_per_decade);
    m.gain_db = extract_gain_db(sweep);
    m.phase_margin_deg = extract_phase_margin(sweep);
    try {
        m.bw_3db_hz = extract_bw_3db(sweep);
    } catch (const NoRolloffInRange&) {
        m.bw_3db_hz.reset();
    }
    m.power_w = dc_power(c, op);
    m.gm_s = extract_gm(c, params, op, *c.input, *c.output, 1e-3, opt);
    return m;
}

KeyClass classify(const MetricsReport& m, const SpecWindow& s) {
    const bool others = in_window(m.phase_margin_deg, s.pm_window) && in_window(m.bw_3db_hz, s.bw_window) &&
                        in_window(m.power_w, s.power_window);
    if (!others) return KeyClass::Incorrect;
    if (m.gain_db >= s.gain_min_correct) return KeyClass::Correct;
    if (m.gain_db >= s.nearly_correct_low) return KeyClass::NearlyCorrect;
    return KeyClass::Incorrect;
}

double ro_frequency_estimate(const Circuit& ring, const ResolvedParams& params) {
    if (!ring.supply) throw MissingDirective("ring oscillator has no .supply");
    if (params.size() != ring.mosfets.size()) throw Error("resolved parameter count does not match the MOSFET count");
    const double vdd = ring.supply->voltage;
    const std::size_t n = ring.node_count();

    std::vector<double> cap(n, 0.0), i_n(n, 0.0), i_p(n, 0.0);
    std::vector<bool> has_n(n, false), has_p(n, false);
    for (std::size_t d = 0; d < ring.mosfets.size(); ++d) {
        const auto& m = ring.mosfets[d];
        const auto& p = params[d];
        const double cov = p.overlap_cap_per_width * p.width;
        cap[static_cast<std::size_t>(m.gate)] += 2.0 / 3.0 * p.cox_area_cap + 2.0 * cov;
        cap[static_cast<std::size_t>(m.drain)] += cov;
        const double sign = m.polarity == Polarity::NMOS ? 1.0 : -1.0;
        const double ion = std::abs(mosfet_eval(p, m.polarity, sign * vdd, sign * vdd, 0.0).id);
        auto dn = static_cast<std::size_t>(m.drain);
        if (m.polarity == Polarity::NMOS) {
            i_n[dn] += ion;
            has_n[dn] = true;
        } else {
            i_p[dn] += ion;
            has_p[dn] = true;
        }
    }
    for (const auto& e : ring.elements)
        if (e.kind == ElementKind::C) {
            cap[static_cast<std::size_t>(e.pos)] += e.value;
            cap[static_cast<std::size_t>(e.neg)] += e.value;
        }

    double total_delay = 0.0;
    int stages = 0;
    for (std::size_t node = 1; node < n; ++node) {
        if (!has_n[node] || !has_p[node]) continue;
        const double ion = 0.5 * (i_n[node] + i_p[node]);
        if (!(ion > 0)) throw Error("inverter at node " + ring.node_name(static_cast<NodeId>(node)) + " never turns on");
        total_delay += cap[node] * vdd / (2.0 * ion);
        ++stages;
    }
    if (stages == 0) throw Error("no inverter stages found");
    return 1.0 / (2.0 * total_delay);
}

}  // namespace ldelock
