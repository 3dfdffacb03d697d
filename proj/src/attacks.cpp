#include "ldelock/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ldelock/error.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

Oracle::Oracle(const LockedCircuit& lc, EvalContext ctx, std::optional<std::uint64_t> instance_seed) {
    ctx.mismatch_seed = instance_seed;
    ctx.branch_device.reset();
    auto rec = evaluate_key(lc, correct_key(lc), ctx);
    if (!rec.metrics) throw NonConvergence("oracle instance does not converge (" + rec.solver_status + ")", "", 0.0);
    metrics_ = *rec.metrics;
}

const MetricsReport& Oracle::query() const {
    ++queries_;
    return metrics_;
}

std::string to_json(const AttackReport& r) {
    nlohmann::ordered_json j;
    j["kind"] = r.kind;
    j["queries"] = r.queries;
    j["simulations"] = r.simulations;
    j["success"] = r.success;
    j["projected_seconds"] = r.projected_seconds ? nlohmann::ordered_json(*r.projected_seconds) : nullptr;
    j["figures"] = r.figures;
    j["candidates"] = r.candidates;
    j["notes"] = r.notes;
    return j.dump(2) + "\n";
}

std::string to_text(const AttackReport& r) {
    std::ostringstream os;
    os << "attack: " << r.kind << "\n";
    for (const auto& n : r.notes) os << "  " << n << "\n";
    os << "queries: " << r.queries << "\nsimulations: " << r.simulations << "\n";
    for (const auto& [k, v] : r.figures) os << k << ": " << format_exact(v) << "\n";
    if (r.projected_seconds)
        os << "projected time: " << format_exact(*r.projected_seconds) << " s ("
           << format_exact(std::round(*r.projected_seconds / 864.0) / 100.0) << " days)\n";
    os << "candidates: " << r.candidates.size() << "\nsuccess: " << (r.success ? "yes" : "no") << "\n";
    return os.str();
}

double projected_seconds(double keys, double seconds_per_key, unsigned parallelism) {
    return keys * seconds_per_key / static_cast<double>(std::max(1u, parallelism));
}

namespace {

bool close(double a, double ref, double tol) {
    if (std::isinf(tol)) return true;
    return std::abs(a - ref) <= tol * std::abs(ref);
}

bool close(const std::optional<double>& a, const std::optional<double>& ref, double tol) {
    if (std::isinf(tol)) return true;
    if (!a || !ref) return a.has_value() == ref.has_value();
    return close(*a, *ref, tol);
}

bool decodes_correctly(const LockedCircuit& lc, const Key& k) {
    if (!correct_key_known(lc)) return false;
    try {
        return decode_key(lc, k) == base_assignment(lc);
    } catch (const InvalidKey&) {
        return false;
    }
}

}  // namespace

MetricMask MetricMask::parse(std::string_view s) {
    MetricMask m;
    for (const auto& t : split(s, ',')) {
        const auto w = to_lower(t);
        if (w == "all") m = all();
        else if (w == "gain") m.gain = true;
        else if (w == "pm") m.pm = true;
        else if (w == "bw") m.bw = true;
        else if (w == "power") m.power = true;
        else if (w == "gm") m.gm = true;
        else throw ConfigError("unknown metric '" + t + "' (gain, pm, bw, power, gm, all)");
    }
    if (!(m.gain || m.pm || m.bw || m.power || m.gm)) throw ConfigError("empty metric list");
    return m;
}

std::string MetricMask::describe() const {
    std::string s;
    auto add = [&](bool on, const char* n) {
        if (on) s += (s.empty() ? "" : ",") + std::string(n);
    };
    add(gain, "gain");
    add(pm, "pm");
    add(bw, "bw");
    add(power, "power");
    add(gm, "gm");
    return s;
}

bool metrics_match(const MetricsReport& c, const MetricsReport& ref, MetricMask mask, double tol) {
    return (!mask.gain || close(c.gain_db, ref.gain_db, tol)) && (!mask.pm || close(c.phase_margin_deg, ref.phase_margin_deg, tol)) &&
           (!mask.bw || close(c.bw_3db_hz, ref.bw_3db_hz, tol)) && (!mask.power || close(c.power_w, ref.power_w, tol)) &&
           (!mask.gm || close(c.gm_s, ref.gm_s, tol));
}

AttackReport brute_force_projection(const LockedCircuit& lc, double seconds_per_key, unsigned parallelism,
                                    double budget_seconds, const Oracle* oracle, const EvalContext* ctx,
                                    double rel_tol) {
    if (!(seconds_per_key > 0.0)) throw ConfigError("per-key time must be positive");
    AttackReport r;
    r.kind = "brute-force";
    const double space = valid_keyspace(lc.plan);
    r.projected_seconds = projected_seconds(space, seconds_per_key, parallelism);
    r.figures["valid_keyspace"] = space;
    r.figures["seconds_per_key"] = seconds_per_key;
    r.figures["parallelism"] = parallelism;
    r.figures["key_bits"] = static_cast<double>(key_length(lc.plan));
    r.notes.push_back("projection: valid keyspace x per-key time / parallelism");
    if (!oracle || !ctx || budget_seconds <= 0.0 || *r.projected_seconds > budget_seconds) {
        r.notes.push_back("projection only; search not run");
        return r;
    }
    const auto keys = enumerate_keys(lc);
    SweepOptions so;
    so.jobs = parallelism;
    const auto recs = run_sweep(lc, keys, *ctx, so);
    const auto& ref = oracle->query();
    r.queries = 1;
    r.simulations = recs.size();
    for (const auto& rec : recs)
        if (rec.metrics && metrics_match(*rec.metrics, ref, MetricMask::all(), rel_tol)) {
            r.candidates.push_back(rec.key.hex());
            r.success = r.success || decodes_correctly(lc, rec.key);
        }
    r.notes.push_back("exhaustive search executed against the oracle");
    return r;
}

AttackReport divide_and_conquer(const LockedCircuit& lc, const Oracle& oracle, const std::vector<std::string>& block,
                                MetricMask mask, double rel_tol, const EvalContext& ctx, unsigned jobs) {
    std::set<std::size_t> touched;
    for (const auto& raw : block) {
        const auto name = to_upper(raw);
        lc.circuit.mosfet(name);  // UnknownDevice
        bool found = false;
        for (std::size_t g = 0; g < lc.plan.groups.size(); ++g) {
            const auto& mem = lc.plan.groups[g].members;
            if (std::find(mem.begin(), mem.end(), name) != mem.end()) {
                touched.insert(g);
                found = true;
            }
        }
        if (!found) throw ConfigError("device " + name + " is not in any key group");
    }
    const auto base = decode_indices(lc.plan, correct_key(lc));
    std::vector<std::size_t> gs(touched.begin(), touched.end());

    std::vector<Key> keys;
    std::vector<std::vector<std::size_t>> combos{{}};
    for (auto g : gs) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& c : combos)
            for (std::size_t o = 0; o < lc.plan.groups[g].options.size(); ++o) {
                auto d = c;
                d.push_back(o);
                next.push_back(std::move(d));
            }
        combos = std::move(next);
    }
    for (const auto& c : combos) {
        auto idx = base;
        for (std::size_t i = 0; i < gs.size(); ++i) idx[gs[i]] = c[i];
        keys.push_back(encode_key(lc.plan, idx));
    }
    SweepOptions so;
    so.jobs = jobs;
    const auto recs = run_sweep(lc, keys, ctx, so);
    const auto& ref = oracle.query();

    AttackReport r;
    r.kind = "divide-and-conquer";
    r.queries = 1;
    r.simulations = recs.size();
    std::size_t false_accepts = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (!recs[i].metrics || !metrics_match(*recs[i].metrics, ref, mask, rel_tol)) continue;
        r.candidates.push_back(recs[i].key.hex());
        bool right = true;
        for (std::size_t j = 0; j < gs.size(); ++j) right = right && combos[i][j] == base[gs[j]];
        if (right)
            r.success = true;
        else
            ++false_accepts;
    }
    r.figures["combinations"] = static_cast<double>(combos.size());
    r.figures["matches"] = static_cast<double>(r.candidates.size());
    r.figures["false_accepts"] = static_cast<double>(false_accepts);
    r.figures["relative_tolerance"] = rel_tol;
    r.notes.push_back("matched metrics: " + mask.describe());
    r.notes.push_back("groups outside the block held at their correct option");
    return r;
}

AttackReport power_window_analysis(const std::vector<SweepRecord>& records) {
    if (records.empty()) throw EmptyRecords("no sweep records for the power window");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t correct = 0;
    for (const auto& r : records)
        if (r.cls == KeyClass::Correct && r.metrics) {
            lo = std::min(lo, r.metrics->power_w);
            hi = std::max(hi, r.metrics->power_w);
            ++correct;
        }
    AttackReport rep;
    rep.kind = "power-window";
    rep.simulations = records.size();
    std::size_t inside = 0;
    if (correct)
        for (const auto& r : records)
            if (r.valid && r.metrics && r.metrics->power_w >= lo && r.metrics->power_w <= hi) {
                ++inside;
                if (r.cls != KeyClass::Correct) rep.candidates.push_back(r.key.hex());
            }
    rep.figures["correct_keys"] = static_cast<double>(correct);
    rep.figures["in_window_keys"] = static_cast<double>(inside);
    rep.figures["misleading_ratio"] = correct ? static_cast<double>(inside) / static_cast<double>(correct) : 0.0;
    if (correct) {
        rep.figures["window_low_w"] = lo;
        rep.figures["window_high_w"] = hi;
    }
    rep.notes.push_back("power alone cannot single out correct keys when the ratio exceeds 1");
    return rep;
}

AttackReport removal_analysis(const LockedCircuit& lc) {
    std::size_t keyed = 0;
    for (const auto& m : lc.circuit.mosfets) keyed += m.keyed() ? 1 : 0;
    AttackReport r;
    r.kind = "removal";
    const double total = static_cast<double>(lc.circuit.mosfets.size());
    r.figures["devices"] = total;
    r.figures["keyed_devices"] = static_cast<double>(keyed);
    r.figures["keyed_fraction"] = total > 0 ? static_cast<double>(keyed) / total : 0.0;
    r.notes.push_back("keyed devices carry signal or bias; removing them means redesigning that fraction");
    return r;
}

BranchSeries branch_current_sweep(const LockedCircuit& lc, const std::vector<Key>& keys, const std::string& device,
                                  const EvalContext& ctx, unsigned jobs) {
    const auto name = to_upper(device);
    lc.circuit.mosfet(name);
    EvalContext local = ctx;
    local.branch_device = name;
    SweepOptions so;
    so.jobs = jobs;
    const auto recs = run_sweep(lc, keys, local, so);
    BranchSeries s;
    s.device = name;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : recs) {
        const double i = r.branch_current.value_or(std::numeric_limits<double>::quiet_NaN());
        s.currents.push_back(i);
        if (std::isnan(i)) continue;
        lo = std::min(lo, std::abs(i));
        hi = std::max(hi, std::abs(i));
    }
    if (hi > 0.0) {
        s.min = lo;
        s.max = hi;
        s.spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    }
    return s;
}

}  // namespace ldelock
