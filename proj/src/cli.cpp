#include "ldelock/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldelock/attacks.hpp"
#include "ldelock/builtin.hpp"
#include "ldelock/error.hpp"
#include "ldelock/locking.hpp"
#include "ldelock/metrics.hpp"
#include "ldelock/sweep.hpp"
#include "ldelock/units.hpp"

namespace fs = std::filesystem;

namespace ldelock {

namespace {

struct Run {
    Config cfg;
    fs::path out_dir;
    unsigned jobs = 1;
    std::string hash;
    std::ostream& out;
};

std::optional<std::uint64_t> resolve_seed(const Config& cfg) {
    std::string text;
    if (auto s = cfg.get("seed"))
        text = *s;
    else if (const char* env = std::getenv("LDELOCK_SEED"))
        text = env;
    else
        return std::nullopt;
    try {
        std::size_t used = 0;
        auto v = std::stoull(trim(text), &used);
        if (used != trim(text).size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("seed must be a non-negative integer, got '" + text + "'");
    }
}

std::uint64_t require_seed(const Config& cfg, const char* why) {
    auto s = resolve_seed(cfg);
    if (!s) throw ConfigError(std::string(why) + " needs a seed (--seed, 'seed =' or LDELOCK_SEED)");
    return *s;
}

Circuit load_circuit(const Config& cfg) {
    auto src = cfg.get("netlist");
    if (!src) throw ConfigError("no netlist given (--netlist or 'netlist =')");
    Circuit c;
    if (iequals(*src, "builtin:ota")) {
        c = builtin_ota();
    } else {
        if (!fs::exists(*src)) throw ConfigError("netlist not found: " + *src);
        c = parse_netlist(read_text_file(*src));
    }
    if (cfg.get_bool_or("merge_fingers", false)) c = merge_fingers(std::move(c));
    auto diags = validate_circuit(c);
    if (!diags.empty()) {
        std::string msg = "netlist has problems:";
        for (const auto& d : diags) msg += "\n  " + std::string(to_string(d.kind)) + " " + d.subject + ": " + d.message;
        throw ConfigError(msg);
    }
    return c;
}

EvalContext eval_context(const Config& cfg) {
    EvalContext ctx;
    ctx.card = model_card(cfg.get_or("model", "n65"));
    ctx.lde = load_lde_table(cfg.subtree("lde"), default_lde_table(ctx.card.calibration_vgs));
    ctx.mismatch = load_mismatch_table(cfg.subtree("mismatch"), default_mismatch_table());
    ctx.spec = load_spec_window(cfg.subtree("spec"));
    ctx.grid.f_start = cfg.get_double_or("grid.f_start", ctx.grid.f_start);
    ctx.grid.f_stop = cfg.get_double_or("grid.f_stop", ctx.grid.f_stop);
    ctx.grid.points_per_decade = static_cast<int>(cfg.get_int_or("grid.points_per_decade", ctx.grid.points_per_decade));
    if (!(ctx.grid.f_start > 0 && ctx.grid.f_stop > ctx.grid.f_start && ctx.grid.points_per_decade > 0))
        throw ConfigError("frequency grid needs 0 < f_start < f_stop and points_per_decade > 0");
    if (auto b = cfg.get("sweep.branch"); b && !trim(*b).empty()) ctx.branch_device = to_upper(trim(*b));
    return ctx;
}

LockingPlan builtin_plan(std::string_view name, const Config& cfg) {
    const auto n = to_lower(name);
    if (n == "desk") return desk_plan();
    const auto seed = static_cast<std::uint64_t>(cfg.get_int_or("lock.plan_seed", n == "36" ? 36 : 41));
    if (n == "36") return plan_36bit(seed);
    if (n == "41") return plan_41bit(seed);
    throw ConfigError("unknown builtin plan '" + std::string(name) + "' (desk, 36, 41)");
}

LockedCircuit load_locked(const Config& cfg, const Circuit& c) {
    auto src = cfg.get("plan");
    if (!src) throw ConfigError("no lock plan given (--plan or 'plan =')");
    LockingPlan plan;
    if (src->rfind("builtin:", 0) == 0) {
        plan = builtin_plan(src->substr(8), cfg);
    } else {
        if (!fs::exists(*src)) throw ConfigError("lock plan not found: " + *src);
        plan = parse_plan(Config::load(*src));
    }
    auto lc = lock(c, std::move(plan));
    if (auto sec = cfg.get("secret")) {
        if (!fs::exists(*sec)) throw ConfigError("secret file not found: " + *sec);
        apply_secret(lc, Config::load(*sec));
    }
    return lc;
}

void echo_config(Run& run, const std::string& command) {
    run.cfg.set("command", command);
    const std::string body = run.cfg.serialize();
    run.hash = content_hash(body);
    fs::create_directories(run.out_dir);
    write_text_file(run.out_dir / "resolved_config.ini", "# config_hash = " + run.hash + "\n" + body);
    run.out << "config hash " << run.hash << " -> " << (run.out_dir / "resolved_config.ini").string() << "\n";
}

std::vector<std::vector<std::string>> parse_pairing(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    if (iequals(trim(text), "auto")) return out;
    for (const auto& grp : split(text, ',')) {
        if (grp.empty()) continue;
        std::vector<std::string> members;
        for (const auto& m : split(grp, '+')) members.push_back(to_upper(m));
        out.push_back(std::move(members));
    }
    return out;
}

std::vector<std::size_t> parse_counts(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& t : split(text, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoul(t, &used));
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw ConfigError("bad count '" + t + "'");
        }
    }
    return out;
}

std::vector<Key> sweep_keys(const Config& cfg, const LockedCircuit& lc, std::ostream& out) {
    const auto cap = static_cast<std::size_t>(cfg.get_int_or("sweep.cap", 1'000'000));
    const auto mode = to_lower(cfg.get_or("sweep.mode", "exhaustive"));
    if (mode == "exhaustive") {
        try {
            return enumerate_keys(lc, cap);
        } catch (const KeyspaceTooLarge& e) {
            throw ConfigError(std::string(e.what()) + "; use --sample N");
        }
    }
    if (mode != "sample") throw ConfigError("sweep.mode must be exhaustive or sample");
    const auto n = cfg.get_int("sweep.sample");
    if (!n || *n < 0) throw ConfigError("sample mode needs sweep.sample = N");
    const auto seed = require_seed(cfg, "sampling");
    out << "sampling " << *n << " keys with seed " << seed << "\n";
    try {
        return sample_keys(lc, static_cast<std::size_t>(*n), seed, correct_key_known(lc));
    } catch (const SampleTooLarge& e) {
        throw ConfigError(e.what());
    }
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

std::string summary_text(const SweepSummary& s) {
    std::ostringstream os;
    os << "keys " << s.total << ": correct " << s.correct << ", nearly-correct " << s.nearly_correct << ", incorrect "
       << s.incorrect << " (invalid " << s.invalid << ", failed " << s.failed << ")\n";
    os << "correct-key rate " << fmt(100.0 * s.correct_rate) << " %\n";
    if (s.gain_range) os << "gain range " << fmt(s.gain_range->first) << " .. " << fmt(s.gain_range->second) << " dB\n";
    if (s.correct_power)
        os << "correct-key power " << fmt(s.correct_power->first * 1e3) << " .. " << fmt(s.correct_power->second * 1e3)
           << " mW\n";
    if (s.wrong_power)
        os << "wrong-key power " << fmt(s.wrong_power->first * 1e3) << " .. " << fmt(s.wrong_power->second * 1e3)
           << " mW\n";
    if (s.gap_below_threshold)
        os << "empty band below threshold [" << fmt(s.gap_below_threshold->first) << ", "
           << fmt(s.gap_below_threshold->second) << ") dB\n";
    os << "mean time per key " << fmt(s.mean_key_seconds * 1e3) << " ms\n";
    return os.str();
}

std::vector<SweepRecord> sweep_and_export(Run& run, const LockedCircuit& lc, const std::vector<Key>& keys,
                                          const EvalContext& ctx, const std::string& stem, bool checkpoint) {
    SweepOptions so;
    so.jobs = run.jobs;
    so.config_hash = run.hash;
    if (checkpoint) so.checkpoint = run.out_dir / (stem + ".checkpoint");
    const auto t0 = std::chrono::steady_clock::now();
    auto recs = run_sweep(lc, keys, ctx, so);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    export_csv(recs, run.out_dir / (stem + ".csv"));
    if (!recs.empty()) {
        auto s = summarize(recs, ctx.spec);
        export_summary_json(s, run.out_dir / (stem + "_summary.json"));
        export_plotdata(recs, run.out_dir, stem + "_gain", ctx.spec);
        write_text_file(run.out_dir / (stem + "_summary.txt"), summary_text(s));
        run.out << summary_text(s);
    }
    run.out << "swept " << recs.size() << " keys in " << fmt(wall) << " s with " << run.jobs << " worker(s)\n";
    return recs;
}

std::string report_text(const LockReport& r) {
    std::ostringstream os;
    os << "initial key length " << r.initial_key_length << " bits, arrangements added "
       << r.initial_arrangements_added << "\n";
    os << "key_length=" << r.key_length << "\narrangements_added=" << r.arrangements_added << "\n";
    os << "valid keyspace " << format_exact(r.valid_keyspace) << ", raw arrangement space 2^" << r.raw_bits << "\n";
    if (r.correct_rate) os << "correct-key rate " << fmt(100.0 * *r.correct_rate) << " % over " << r.swept_keys << " keys\n";
    os << "technique 1 is realized by pairing same-role devices and balancing group sizes\n";
    for (const auto& l : r.log) os << "  " << l << "\n";
    return os.str();
}

std::string report_json(const LockReport& r) {
    nlohmann::ordered_json j;
    j["initial_key_length"] = r.initial_key_length;
    j["initial_arrangements_added"] = r.initial_arrangements_added;
    j["key_length"] = r.key_length;
    j["arrangements_added"] = r.arrangements_added;
    j["valid_keyspace"] = r.valid_keyspace;
    j["raw_keyspace_bits"] = r.raw_bits;
    j["correct_rate"] = r.correct_rate ? nlohmann::ordered_json(*r.correct_rate) : nullptr;
    j["swept_keys"] = r.swept_keys;
    j["log"] = r.log;
    return j.dump(2) + "\n";
}

// Sweep, prune outliers and nearly-correct keys, shuffle; for preset plans.
LockReport finish_preset(LockedCircuit lc, const Config& cfg, const EvalContext& ctx, unsigned jobs,
                         std::uint64_t seed) {
    LockReport rep;
    rep.initial_key_length = key_length(lc.plan);
    rep.initial_arrangements_added = arrangements_added(lc.plan);
    if (cfg.get_bool_or("lock.prune", true)) {
        auto eval = make_evaluator(ctx, jobs);
        const auto cap = static_cast<std::size_t>(cfg.get_int_or("lock.sweep_cap", 100000));
        const double space = valid_keyspace(lc.plan);
        auto keys = space <= static_cast<double>(cap)
                        ? enumerate_keys(lc, cap)
                        : sample_keys(lc, static_cast<std::size_t>(cfg.get_int_or("lock.sample_size", 2000)), seed, true);
        auto recs = eval(lc, keys);
        rep.log.push_back("swept " + std::to_string(keys.size()) + " keys");
        auto a = prune_asymmetric_outliers(lc, std::move(recs));
        rep.log.insert(rep.log.end(), a.log.begin(), a.log.end());
        auto n = prune_nearly_correct(a.locked, std::move(a.records), ctx.spec, eval);
        rep.log.insert(rep.log.end(), n.log.begin(), n.log.end());
        lc = std::move(n.locked);
        rep.swept_keys = n.records.size();
        if (!n.records.empty())
            rep.correct_rate = static_cast<double>(std::count_if(n.records.begin(), n.records.end(),
                                                                 [](const SweepRecord& r) { return r.cls == KeyClass::Correct; })) /
                               static_cast<double>(n.records.size());
    }
    lc = shuffle_layout_order(seed, lc);
    rep.log.push_back("shuffled layout order");
    rep.key_length = key_length(lc.plan);
    rep.arrangements_added = arrangements_added(lc.plan);
    rep.valid_keyspace = valid_keyspace(lc.plan);
    std::size_t keyed = 0;
    for (const auto& g : lc.plan.groups) keyed += g.members.size();
    rep.raw_bits = raw_keyspace_bits(keyed);
    rep.locked = std::move(lc);
    return rep;
}

void write_lock_outputs(Run& run, const LockReport& rep, bool export_secret) {
    write_text_file(run.out_dir / "plan.ini", serialize_plan(rep.locked.plan));
    write_text_file(run.out_dir / "locked.sp", serialize_netlist(rep.locked.circuit));
    write_text_file(run.out_dir / "lock_report.txt", report_text(rep));
    write_text_file(run.out_dir / "lock_report.json", report_json(rep));
    if (export_secret) write_text_file(run.out_dir / "secret.ini", serialize_secret(rep.locked));
    run.out << report_text(rep);
}

int cmd_lock(Run& run, bool export_secret) {
    const auto& cfg = run.cfg;
    const auto seed = require_seed(cfg, "locking");
    const Circuit c = load_circuit(cfg);
    const EvalContext ctx = eval_context(cfg);
    LockReport rep;
    if (auto preset = cfg.get("lock.preset")) {
        rep = finish_preset(lock(c, builtin_plan(*preset, cfg)), cfg, ctx, run.jobs, seed);
    } else {
        ObfuscateOptions o;
        o.pairing = parse_pairing(cfg.get_or("lock.pairing", "auto"));
        o.decoys_per_group = parse_counts(cfg.get_or("lock.decoys", "3"));
        o.target_size = static_cast<std::size_t>(cfg.get_int_or("lock.target_size", 0));
        o.screen_decoys = cfg.get_bool_or("lock.screen", true);
        o.prune = cfg.get_bool_or("lock.prune", true);
        o.sweep_cap = static_cast<std::size_t>(cfg.get_int_or("lock.sweep_cap", 100000));
        o.sample_size = static_cast<std::size_t>(cfg.get_int_or("lock.sample_size", 2000));
        o.seed = seed;
        o.spec = ctx.spec;
        rep = obfuscate(c, o, make_evaluator(ctx, run.jobs));
    }
    write_lock_outputs(run, rep, export_secret);
    return kExitOk;
}

int cmd_sweep(Run& run) {
    const Circuit c = load_circuit(run.cfg);
    const auto lc = load_locked(run.cfg, c);
    const EvalContext ctx = eval_context(run.cfg);
    const auto keys = sweep_keys(run.cfg, lc, run.out);
    sweep_and_export(run, lc, keys, ctx, "records", run.cfg.get_bool_or("sweep.checkpoint", true));
    if (auto mc = run.cfg.get_int("sweep.mc_samples"); mc && *mc > 0) {
        const auto seed = require_seed(run.cfg, "Monte Carlo");
        auto p = monte_carlo_persistence(lc, correct_key(lc), ctx, static_cast<std::size_t>(*mc), seed, run.jobs);
        std::string line = "correct key stays Correct on " + std::to_string(p.correct) + " of " +
                           std::to_string(p.samples) + " mismatch instances (" + fmt(100.0 * p.fraction) + " %)\n";
        write_text_file(run.out_dir / "persistence.txt", line);
        run.out << line;
    }
    return kExitOk;
}

std::vector<std::string> block_devices(const std::string& spec, const Circuit& c) {
    std::vector<std::string> out;
    if (iequals(spec, "input_pair")) {
        for (const auto& m : c.mosfets)
            if (m.role == "input differential pair") out.push_back(m.name);
        return out;
    }
    for (const auto& t : split(spec, ',')) out.push_back(to_upper(t));
    return out;
}

void emit_attack(Run& run, const AttackReport& r, const std::string& stem) {
    write_text_file(run.out_dir / (stem + ".json"), to_json(r));
    write_text_file(run.out_dir / (stem + ".txt"), to_text(r));
    run.out << to_text(r);
}

int cmd_attack(Run& run, const std::string& kind) {
    const auto& cfg = run.cfg;
    const Circuit c = load_circuit(cfg);
    const auto lc = load_locked(cfg, c);
    const EvalContext ctx = eval_context(cfg);
    if (kind == "removal") {
        emit_attack(run, removal_analysis(lc), "attack_removal");
    } else if (kind == "dnc") {
        std::optional<std::uint64_t> instance;
        if (!cfg.get_bool_or("attack.noiseless", false)) instance = require_seed(cfg, "the oracle instance");
        Oracle oracle(lc, ctx, instance);
        const auto block = block_devices(cfg.get_or("attack.block", "input_pair"), c);
        const auto mask = MetricMask::parse(cfg.get_or("attack.match", "gm"));
        const double tol = cfg.get_double_or("attack.tol", 0.01);
        emit_attack(run, divide_and_conquer(lc, oracle, block, mask, tol, ctx, run.jobs), "attack_dnc");
    } else if (kind == "power") {
        auto path = cfg.get("attack.records");
        if (!path) throw ConfigError("power-window analysis needs attack.records = <sweep csv>");
        if (!fs::exists(*path)) throw ConfigError("records not found: " + *path);
        emit_attack(run, power_window_analysis(load_csv(*path, key_length(lc.plan))), "attack_power");
    } else if (kind == "brute") {
        double per_key = cfg.get_double_or("attack.seconds_per_key", 0.0);
        if (per_key <= 0.0) {
            // Measure throughput on a few keys.
            const auto n = static_cast<std::size_t>(cfg.get_int_or("attack.calibration_keys", 16));
            const auto keys = sample_keys(lc, std::min<std::size_t>(n, static_cast<std::size_t>(valid_keyspace(lc.plan))),
                                          resolve_seed(cfg).value_or(1), false);
            const auto recs = run_sweep(lc, keys, ctx, {});
            double total = 0.0;
            for (const auto& r : recs) total += r.seconds;
            per_key = total / static_cast<double>(std::max<std::size_t>(1, recs.size()));
        }
        std::optional<Oracle> oracle;
        const double budget = cfg.get_double_or("attack.budget", 0.0);
        if (budget > 0.0) oracle.emplace(lc, ctx, std::nullopt);
        auto r = brute_force_projection(lc, per_key, run.jobs, budget, oracle ? &*oracle : nullptr, &ctx,
                                        cfg.get_double_or("attack.tol", 0.01));
        if (auto k = cfg.get_double("attack.keys")) {
            r.figures["reference_keys"] = *k;
            r.figures["reference_projected_seconds"] = projected_seconds(*k, per_key, 1);
            r.figures["reference_projected_days"] = projected_seconds(*k, per_key, 1) / 86400.0;
        }
        emit_attack(run, r, "attack_brute");
    } else if (kind == "branch") {
        const auto device = cfg.get_or("attack.device", "MNB2");
        const auto keys = sweep_keys(cfg, lc, run.out);
        auto s = branch_current_sweep(lc, keys, device, ctx, run.jobs);
        std::string csv = "key_index,key_hex,current_a\n";
        for (std::size_t i = 0; i < keys.size(); ++i)
            csv += std::to_string(i) + ',' + keys[i].hex() + ',' +
                   (std::isnan(s.currents[i]) ? std::string() : format_exact(s.currents[i])) + '\n';
        write_text_file(run.out_dir / "branch_current.csv", csv);
        AttackReport r;
        r.kind = "branch-current";
        r.simulations = keys.size();
        r.figures["min_current_a"] = s.min;
        r.figures["max_current_a"] = s.max;
        r.figures["spread"] = s.spread;
        r.notes.push_back("device " + s.device + "; branch currents move with the key, so none is a fixed reference");
        emit_attack(run, r, "attack_branch");
    } else {
        throw ConfigError("unknown attack '" + kind + "'");
    }
    return kExitOk;
}

int cmd_demo_ota(Run& run, bool export_secret) {
    auto& cfg = run.cfg;
    const auto seed = require_seed(cfg, "the demo");
    const Circuit c = builtin_ota();
    const EvalContext ctx = eval_context(cfg);
    auto lc = shuffle_layout_order(seed, lock(c, desk_plan()));
    run.out << "desk lock: " << lc.plan.groups.size() << " groups, " << key_length(lc.plan) << " key bits, "
            << format_exact(valid_keyspace(lc.plan)) << " valid keys\n";
    const auto keys = enumerate_keys(lc);
    auto before = sweep_and_export(run, lc, keys, ctx, "records_before", false);

    auto a = prune_asymmetric_outliers(lc, before);
    auto n = prune_nearly_correct(a.locked, std::move(a.records), ctx.spec, make_evaluator(ctx, run.jobs));
    for (const auto& l : a.log) run.out << "  " << l << "\n";
    for (const auto& l : n.log) run.out << "  " << l << "\n";
    run.out << "after pruning: " << format_exact(valid_keyspace(n.locked.plan)) << " valid keys\n";
    sweep_and_export(run, n.locked, enumerate_keys(n.locked), ctx, "records_after", false);
    write_text_file(run.out_dir / "plan.ini", serialize_plan(n.locked.plan));
    if (export_secret) write_text_file(run.out_dir / "secret.ini", serialize_secret(n.locked));
    return kExitOk;
}

int cmd_demo_ro(Run& run) {
    const auto card = model_card(run.cfg.get_or("model", "n65"));
    const auto lde = load_lde_table(run.cfg.subtree("lde"), default_lde_table(card.calibration_vgs));
    const auto weak = parse_arrangement(run.cfg.get_or("ro.weak", "SOD"));
    if (!weak) throw ConfigError("ro.weak must be BL, SP or SOD");
    std::string csv = "stages,baseline_inverters,frequency_hz\n";
    for (const auto& t : split(run.cfg.get_or("ro.stages", "3,5,7"), ',')) {
        const int n = std::stoi(t);
        const Circuit ring = builtin_ro(n);
        run.out << n << "-stage ring, PMOS switched " << to_string(*weak) << " -> BL one inverter at a time\n";
        for (int k = 0; k <= n; ++k) {
            ResolvedParams p;
            for (const auto& m : ring.mosfets) {
                Arrangement a = Arrangement::BL;
                if (m.keyed()) {
                    const int inv = std::stoi(std::get<KeySlot>(m.arrangement).group.substr(3));
                    a = inv < k ? Arrangement::BL : *weak;
                }
                p.push_back(apply_arrangement(device_params(card, m), m.device_class(), a, lde));
            }
            const double f = ro_frequency_estimate(ring, p);
            csv += std::to_string(n) + ',' + std::to_string(k) + ',' + format_exact(f) + '\n';
            run.out << "  " << k << " baseline: " << fmt(f / 1e6, 6) << " MHz\n";
        }
    }
    write_text_file(run.out_dir / "ro_frequency.csv", csv);
    return kExitOk;
}

// Bad input rather than a failed procedure.
bool is_config_error(const Error& e) {
    return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SyntaxError*>(&e) ||
           dynamic_cast<const UnknownNode*>(&e) || dynamic_cast<const DuplicateName*>(&e) ||
           dynamic_cast<const MissingDirective*>(&e) || dynamic_cast<const UnknownDevice*>(&e) ||
           dynamic_cast<const ResumeMismatch*>(&e) || dynamic_cast<const InvalidKey*>(&e) ||
           dynamic_cast<const InconsistentPlan*>(&e) || dynamic_cast<const DoubleAssignment*>(&e) ||
           dynamic_cast<const TooManyDecoys*>(&e) || dynamic_cast<const NoCandidates*>(&e) ||
           dynamic_cast<const KeyspaceTooLarge*>(&e) || dynamic_cast<const SampleTooLarge*>(&e) ||
           dynamic_cast<const EvenStageCount*>(&e);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Analog locking with layout-dependent effects"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "ldelock 0.1");

    std::string config_path, netlist, model, plan, secret, out_dir = "ldelock_out";
    std::optional<std::uint64_t> seed;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_path, "key=value config file");
    app.add_option("--netlist", netlist, "netlist path or builtin:ota");
    app.add_option("--model", model, "model card (n65, n28)");
    app.add_option("--plan", plan, "lock plan file or builtin:desk|36|41");
    app.add_option("--secret", secret, "secret key file");
    app.add_option("--seed", seed, "seed (falls back to LDELOCK_SEED)");
    app.add_option("-o,--out", out_dir, "output directory");
    auto* jobs_opt = app.add_option("-j,--jobs", jobs, "worker count")->check(CLI::PositiveNumber);
    app.add_option("--set", sets, "extra key=value override (repeatable)");

    bool export_secret = false;
    auto* lock_cmd = app.add_subcommand("lock", "pair, add decoys, prune and shuffle");
    lock_cmd->add_flag("--export-secret", export_secret, "write the correct key to secret.ini");
    std::string preset, pairing, decoys;
    lock_cmd->add_option("--preset", preset, "use a bundled plan: desk, 36, 41");
    lock_cmd->add_option("--pairing", pairing, "groups like MN1+MN2,MP1+MP2,MNO or auto");
    lock_cmd->add_option("--decoys", decoys, "decoys per group, one value or one per group");
    bool no_prune = false;
    lock_cmd->add_flag("--no-prune", no_prune, "skip the sweep and pruning passes");

    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate keys and export CSV, JSON and SVG");
    std::optional<std::size_t> sample;
    std::string branch;
    sweep_cmd->add_option("--sample", sample, "sample N keys instead of enumerating");
    sweep_cmd->add_option("--branch", branch, "record this device's drain current");

    auto* attack_cmd = app.add_subcommand("attack", "run an attack analysis");
    std::string kind;
    attack_cmd->add_option("kind", kind, "removal, dnc, power, brute, branch")
        ->required()
        ->check(CLI::IsMember({"removal", "dnc", "power", "brute", "branch"}));
    std::string block, match, records;
    attack_cmd->add_option("--block", block, "devices or input_pair");
    attack_cmd->add_option("--match", match, "metrics to match, e.g. gm or all");
    attack_cmd->add_option("--records", records, "sweep CSV for the power window");
    bool noiseless = false;
    attack_cmd->add_flag("--noiseless", noiseless, "oracle without mismatch");

    auto* demo_cmd = app.add_subcommand("demo", "bundled end-to-end runs");
    std::string which;
    demo_cmd->add_option("which", which, "ota or ro")->required()->check(CLI::IsMember({"ota", "ro"}));
    demo_cmd->add_flag("--export-secret", export_secret, "write the correct key to secret.ini");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        Config cfg;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path);
            cfg = Config::load(config_path);
        }
        auto put = [&](const char* key, const std::string& v) {
            if (!v.empty()) cfg.set(key, v);
        };
        put("netlist", netlist);
        put("model", model);
        put("plan", plan);
        put("secret", secret);
        if (seed) cfg.set("seed", std::to_string(*seed));
        put("lock.preset", preset);
        put("lock.pairing", pairing);
        put("lock.decoys", decoys);
        if (no_prune) cfg.set("lock.prune", "false");
        if (sample) {
            cfg.set("sweep.mode", "sample");
            cfg.set("sweep.sample", std::to_string(*sample));
        }
        put("sweep.branch", branch);
        put("attack.block", block);
        put("attack.match", match);
        put("attack.records", records);
        if (noiseless) cfg.set("attack.noiseless", "true");
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
        }
        if (!jobs_opt->count() && cfg.contains("jobs")) jobs = static_cast<unsigned>(cfg.get_int_or("jobs", jobs));
        if (jobs < 1) throw ConfigError("jobs must be at least 1");
        cfg.set("jobs", std::to_string(jobs));
        if (auto s = resolve_seed(cfg)) cfg.set("seed", std::to_string(*s));
        if (auto o = cfg.get("out"); o && !app.get_option("--out")->count()) out_dir = *o;
        cfg.set("out", out_dir);

        Run run{cfg, out_dir, jobs, {}, out};
        if (*lock_cmd) {
            echo_config(run, "lock");
            return cmd_lock(run, export_secret);
        }
        if (*sweep_cmd) {
            echo_config(run, "sweep");
            return cmd_sweep(run);
        }
        if (*attack_cmd) {
            echo_config(run, "attack " + kind);
            return cmd_attack(run, kind);
        }
        echo_config(run, "demo " + which);
        return which == "ota" ? cmd_demo_ota(run, export_secret) : cmd_demo_ro(run);
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        if (is_config_error(e)) {
            err << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
        err << "failed: " << e.what() << "\n";
        return kExitProcedure;
    } catch (const std::exception& e) {
        err << "failed: " << e.what() << "\n";
        return kExitProcedure;
    }
}

}  // namespace ldelock
