#include "ldelock/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ldelock/error.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

namespace {

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lk(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = n;
                    }
                }
            });
    }
    if (failure) std::rethrow_exception(failure);
}

std::string opt_num(const std::optional<double>& v) { return v ? format_exact(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty() || s == "-") return std::nullopt;
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
}

// Lexicographic position to option indices, last group fastest.
std::vector<std::size_t> unrank(const LockingPlan& plan, std::uint64_t r) {
    std::vector<std::size_t> idx(plan.groups.size());
    for (std::size_t g = plan.groups.size(); g-- > 0;) {
        const auto n = plan.groups[g].options.size();
        idx[g] = static_cast<std::size_t>(r % n);
        r /= n;
    }
    return idx;
}

constexpr std::string_view kCheckpointMagic = "ldelock-checkpoint-v1";

std::string checkpoint_line(std::size_t index, const SweepRecord& r) {
    std::ostringstream os;
    os << index << ' ' << r.key.hex() << ' ' << (r.valid ? 1 : 0) << ' ' << to_string(r.cls) << ' '
       << r.solver_status;
    const auto* m = r.metrics ? &*r.metrics : nullptr;
    auto field = [&](const std::optional<double>& v) { os << ' ' << (v ? format_exact(*v) : "-"); };
    field(m ? std::optional<double>(m->gain_db) : std::nullopt);
    field(m ? m->phase_margin_deg : std::nullopt);
    field(m ? m->bw_3db_hz : std::nullopt);
    field(m ? std::optional<double>(m->power_w) : std::nullopt);
    field(m ? std::optional<double>(m->gm_s) : std::nullopt);
    field(r.branch_current);
    os << ' ' << format_exact(r.seconds) << '\n';
    return os.str();
}

// Returns nullopt on a torn or malformed line.
std::optional<std::pair<std::size_t, SweepRecord>> parse_checkpoint_line(const std::string& line, std::size_t bits) {
    std::istringstream is(line);
    std::size_t index;
    std::string hex, cls, status, f[6], secs;
    int valid;
    if (!(is >> index >> hex >> valid >> cls >> status)) return std::nullopt;
    for (auto& x : f)
        if (!(is >> x)) return std::nullopt;
    if (!(is >> secs)) return std::nullopt;
    try {
        SweepRecord r;
        r.key = Key::from_hex(hex, bits);
        r.valid = valid == 1;
        auto k = parse_key_class(cls);
        if (!k) return std::nullopt;
        r.cls = *k;
        r.solver_status = status;
        if (f[0] != "-") {
            MetricsReport m;
            m.gain_db = *parse_opt(f[0]);
            m.phase_margin_deg = parse_opt(f[1]);
            m.bw_3db_hz = parse_opt(f[2]);
            m.power_w = *parse_opt(f[3]);
            m.gm_s = *parse_opt(f[4]);
            r.metrics = m;
        }
        r.branch_current = parse_opt(f[5]);
        r.seconds = *parse_opt(secs);
        return std::pair{index, std::move(r)};
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

std::string EvalContext::describe() const {
    std::ostringstream os;
    os << "card=" << card.id << "\ncalibration_vgs=" << format_exact(lde.calibration_vgs) << '\n';
    for (auto p : kAllPolarities)
        for (auto f : kAllFlavors)
            for (auto a : kAllArrangements) {
                const auto& s = lde.at({p, f}, a);
                const auto& m = mismatch.at({p, f}, a);
                os << to_string(p) << '.' << to_string(f) << '.' << to_string(a) << '=' << format_exact(s.vth_shift)
                   << ',' << format_exact(s.gm_shift) << ',' << format_exact(m.vth_sd) << ',' << format_exact(m.gm_sd)
                   << '\n';
            }
    auto win = [&](const char* name, const std::optional<std::pair<double, double>>& w) {
        if (w) os << name << '=' << format_exact(w->first) << ',' << format_exact(w->second) << '\n';
    };
    os << "gain_min=" << format_exact(spec.gain_min_correct) << "\nnearly_low=" << format_exact(spec.nearly_correct_low)
       << '\n';
    win("pm", spec.pm_window);
    win("bw", spec.bw_window);
    win("power", spec.power_window);
    os << "grid=" << format_exact(grid.f_start) << ',' << format_exact(grid.f_stop) << ',' << grid.points_per_decade
       << "\nsolver=" << format_exact(solver.residual_tol) << ',' << format_exact(solver.step_tol) << ','
       << format_exact(solver.gmin) << ',' << format_exact(solver.max_step) << ',' << solver.max_iterations << ','
       << format_exact(solver.gmin_start) << ',' << solver.ramp_steps << '\n';
    os << "branch=" << branch_device.value_or("") << "\nmismatch_seed="
       << (mismatch_seed ? std::to_string(*mismatch_seed) : std::string("off")) << '\n';
    return os.str();
}

ResolvedParams resolve_params(const Circuit& c, const std::vector<Arrangement>& arrangements, const EvalContext& ctx) {
    if (arrangements.size() != c.mosfets.size()) throw Error("one arrangement per MOSFET is required");
    ResolvedParams out;
    out.reserve(c.mosfets.size());
    for (std::size_t i = 0; i < c.mosfets.size(); ++i) {
        const auto& m = c.mosfets[i];
        const auto dc = m.device_class();
        auto p = apply_arrangement(device_params(ctx.card, m), dc, arrangements[i], ctx.lde);
        if (ctx.mismatch_seed) {
            // Same stream for every device of a class and arrangement.
            auto rng = seed_stream(*ctx.mismatch_seed, 0x6d69736d61746368ull, detail::table_index(dc, arrangements[i]));
            p = sample_mismatch(rng, p, dc, arrangements[i], ctx.mismatch);
        }
        out.push_back(p);
    }
    return out;
}

std::vector<Key> enumerate_keys(const LockedCircuit& lc, std::size_t cap) {
    const double space = valid_keyspace(lc.plan);
    if (space > static_cast<double>(cap))
        throw KeyspaceTooLarge("valid keyspace " + format_exact(space) + " exceeds the cap of " + std::to_string(cap));
    std::vector<Key> out;
    const auto n = static_cast<std::uint64_t>(space);
    out.reserve(n);
    for (std::uint64_t r = 0; r < n; ++r) out.push_back(encode_key(lc.plan, unrank(lc.plan, r)));
    return out;
}

std::vector<Key> sample_keys(const LockedCircuit& lc, std::size_t n, std::uint64_t seed, bool include_correct) {
    const double space = valid_keyspace(lc.plan);
    if (static_cast<double>(n) > space)
        throw SampleTooLarge("sample of " + std::to_string(n) + " exceeds the valid keyspace of " + format_exact(space));
    if (n == 0) return {};
    auto rng = seed_stream(seed, 0x73616d706c65ull);
    std::vector<std::vector<std::size_t>> picks;
    if (space <= 4.0 * static_cast<double>(n)) {
        // Dense: partial Fisher-Yates over all ranks.
        std::vector<std::uint64_t> ranks(static_cast<std::size_t>(space));
        std::iota(ranks.begin(), ranks.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, ranks.size() - 1);
            std::swap(ranks[i], ranks[d(rng)]);
            picks.push_back(unrank(lc.plan, ranks[i]));
        }
    } else {
        std::set<std::vector<std::size_t>> seen;
        while (picks.size() < n) {
            std::vector<std::size_t> idx;
            for (const auto& g : lc.plan.groups)
                idx.push_back(std::uniform_int_distribution<std::size_t>(0, g.options.size() - 1)(rng));
            if (seen.insert(idx).second) picks.push_back(std::move(idx));
        }
    }
    if (include_correct) {
        const auto correct = decode_indices(lc.plan, correct_key(lc));
        if (std::find(picks.begin(), picks.end(), correct) == picks.end()) picks.back() = correct;
    }
    std::vector<Key> out;
    for (const auto& p : picks) out.push_back(encode_key(lc.plan, p));
    return out;
}

SweepRecord evaluate_key(const LockedCircuit& lc, const Key& key, const EvalContext& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepRecord r;
    r.key = key;
    r.cls = KeyClass::Incorrect;
    std::vector<Arrangement> arr;
    try {
        arr = decode_key(lc, key);
        r.valid = true;
    } catch (const InvalidKey&) {
        r.solver_status = "invalid-key";
    }
    if (r.valid) {
        try {
            const auto params = resolve_params(lc.circuit, arr, ctx);
            const auto op = dc_operating_point(lc.circuit, params, ctx.solver);
            r.solver_status = op.strategy;
            if (ctx.branch_device) r.branch_current = branch_current(lc.circuit, op, *ctx.branch_device);
            r.metrics = measure(lc.circuit, params, op, ctx.grid, ctx.solver);
            r.cls = classify(*r.metrics, ctx.spec);
        } catch (const NonConvergence&) {
            r.solver_status = "nonconvergence";
            r.metrics.reset();
        } catch (const SingularMatrix&) {
            r.solver_status = "singular-matrix";
            r.metrics.reset();
        }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<SweepRecord> run_sweep(const LockedCircuit& lc, const std::vector<Key>& keys, const EvalContext& ctx,
                                   const SweepOptions& opt) {
    std::vector<SweepRecord> out(keys.size());
    std::vector<char> done(keys.size(), 0);
    std::ofstream ck;
    std::size_t bits = keys.empty() ? 0 : keys.front().size();

    if (opt.checkpoint) {
        std::string keylist;
        for (const auto& k : keys) keylist += k.hex() + ',';
        const std::string header = std::string(kCheckpointMagic) + ' ' +
                                   content_hash(serialize_plan(lc.plan) + ctx.describe() + opt.config_hash + keylist);
        bool fresh = true;
        if (std::filesystem::exists(*opt.checkpoint)) {
            std::ifstream in(*opt.checkpoint);
            std::string line;
            if (std::getline(in, line)) {
                fresh = false;
                if (line != header) throw ResumeMismatch("checkpoint " + opt.checkpoint->string() +
                                                         " belongs to a different lock or configuration");
                while (std::getline(in, line)) {
                    auto rec = parse_checkpoint_line(line, bits);
                    if (!rec || rec->first >= keys.size() || !(rec->second.key == keys[rec->first])) continue;
                    out[rec->first] = std::move(rec->second);
                    done[rec->first] = 1;
                }
            }
        }
        if (fresh) {
            write_text_file(*opt.checkpoint, header + '\n');
        } else {
            // Drop a torn tail so appended lines start cleanly.
            std::string text = read_text_file(*opt.checkpoint);
            if (!text.empty() && text.back() != '\n') write_text_file(*opt.checkpoint, text.substr(0, text.rfind('\n') + 1));
        }
        ck.open(*opt.checkpoint, std::ios::app);
        if (!ck) throw IoError("cannot append to checkpoint " + opt.checkpoint->string());
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < keys.size(); ++i)
        if (!done[i]) todo.push_back(i);

    std::mutex ck_mutex;
    std::size_t since_flush = 0;
    parallel_for(todo.size(), opt.jobs, [&](std::size_t t) {
        const std::size_t i = todo[t];
        auto rec = evaluate_key(lc, keys[i], ctx);
        if (ck.is_open()) {
            const auto line = checkpoint_line(i, rec);
            std::lock_guard lk(ck_mutex);
            ck << line;
            if (++since_flush >= std::max<std::size_t>(1, opt.checkpoint_every)) {
                ck.flush();
                since_flush = 0;
            }
        }
        out[i] = std::move(rec);
    });
    if (ck.is_open()) ck.flush();
    return out;
}

KeyEvaluator make_evaluator(const EvalContext& ctx, unsigned jobs) {
    return [ctx, jobs](const LockedCircuit& lc, const std::vector<Key>& keys) {
        SweepOptions o;
        o.jobs = jobs;
        return run_sweep(lc, keys, ctx, o);
    };
}

SweepSummary summarize(const std::vector<SweepRecord>& records, const SpecWindow& spec) {
    if (records.empty()) throw EmptyRecords("no sweep records to summarize");
    SweepSummary s;
    s.total = records.size();
    auto widen = [](std::optional<std::pair<double, double>>& r, double v) {
        if (!r)
            r = std::pair{v, v};
        else
            r = std::pair{std::min(r->first, v), std::max(r->second, v)};
    };
    std::optional<double> best_below;
    for (const auto& r : records) {
        s.total_seconds += r.seconds;
        switch (r.cls) {
            case KeyClass::Correct: ++s.correct; break;
            case KeyClass::NearlyCorrect: ++s.nearly_correct; break;
            case KeyClass::Incorrect: ++s.incorrect; break;
        }
        if (!r.valid) {
            ++s.invalid;
            continue;
        }
        if (!r.metrics) {
            ++s.failed;
            continue;
        }
        const double g = r.metrics->gain_db;
        ++s.gain_histogram[static_cast<int>(std::floor(g))];
        widen(s.gain_range, g);
        widen(r.cls == KeyClass::Correct ? s.correct_power : s.wrong_power, r.metrics->power_w);
        if (g < spec.gain_min_correct) best_below = std::max(best_below.value_or(g), g);
    }
    s.correct_rate = static_cast<double>(s.correct) / static_cast<double>(s.total);
    s.mean_key_seconds = s.total_seconds / static_cast<double>(s.total);
    if (best_below) {
        const double low = std::floor(*best_below) + 1.0;
        if (low < spec.gain_min_correct) s.gap_below_threshold = std::pair{low, spec.gain_min_correct};
    }
    return s;
}

std::string csv_text(const std::vector<SweepRecord>& records) {
    std::string out = "key_hex,valid,gain_db,pm_deg,bw_hz,power_w,gm_s,class,solver_status\n";
    for (const auto& r : records) {
        const auto* m = r.metrics ? &*r.metrics : nullptr;
        out += r.key.hex();
        out += r.valid ? ",1," : ",0,";
        out += (m ? format_exact(m->gain_db) : "") + ',';
        out += (m ? opt_num(m->phase_margin_deg) : "") + ',';
        out += (m ? opt_num(m->bw_3db_hz) : "") + ',';
        out += (m ? format_exact(m->power_w) : "") + ',';
        out += (m ? format_exact(m->gm_s) : "") + ',';
        out += std::string(to_string(r.cls)) + ',' + r.solver_status + '\n';
    }
    return out;
}

void export_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path) {
    write_text_file(path, csv_text(records));
}

std::vector<SweepRecord> load_csv(const std::filesystem::path& path, std::size_t key_bits) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != "key_hex,valid,gain_db,pm_deg,bw_hz,power_w,gm_s,class,solver_status")
        throw ConfigError(path.string() + " is not a sweep CSV");
    std::vector<SweepRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(trim(cell));
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 9) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 9 columns");
        try {
            SweepRecord r;
            r.key = Key::from_hex(f[0], key_bits);
            r.valid = f[1] == "1";
            if (!f[2].empty()) {
                MetricsReport m;
                m.gain_db = *parse_opt(f[2]);
                m.phase_margin_deg = parse_opt(f[3]);
                m.bw_3db_hz = parse_opt(f[4]);
                m.power_w = *parse_opt(f[5]);
                m.gm_s = *parse_opt(f[6]);
                r.metrics = m;
            }
            auto k = parse_key_class(f[7]);
            if (!k) throw std::invalid_argument(f[7]);
            r.cls = *k;
            r.solver_status = f[8];
            out.push_back(std::move(r));
        } catch (const InvalidKey& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad field");
        }
    }
    return out;
}

std::string summary_json(const SweepSummary& s) {
    using nlohmann::ordered_json;
    auto range = [](const std::optional<std::pair<double, double>>& r) -> ordered_json {
        if (!r) return nullptr;
        return ordered_json::array({r->first, r->second});
    };
    ordered_json j;
    j["total"] = s.total;
    j["correct"] = s.correct;
    j["nearly_correct"] = s.nearly_correct;
    j["incorrect"] = s.incorrect;
    j["invalid"] = s.invalid;
    j["failed"] = s.failed;
    j["correct_rate"] = s.correct_rate;
    j["gain_range_db"] = range(s.gain_range);
    j["correct_power_w"] = range(s.correct_power);
    j["wrong_power_w"] = range(s.wrong_power);
    j["gap_below_threshold_db"] = range(s.gap_below_threshold);
    j["total_key_seconds"] = s.total_seconds;
    j["mean_key_seconds"] = s.mean_key_seconds;
    ordered_json h = ordered_json::array();
    for (const auto& [bin, n] : s.gain_histogram) h.push_back({{"low_db", bin}, {"count", n}});
    j["gain_histogram"] = std::move(h);
    return j.dump(2) + "\n";
}

void export_summary_json(const SweepSummary& s, const std::filesystem::path& path) {
    write_text_file(path, summary_json(s));
}

void export_plotdata(const std::vector<SweepRecord>& records, const std::filesystem::path& dir, const std::string& stem,
                     const SpecWindow& spec) {
    std::string csv = "key_index,gain_db,pm_deg,bw_hz,power_w,gm_s,class\n";
    double lo = spec.nearly_correct_low, hi = spec.gain_min_correct;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!r.valid) continue;
        const auto* m = r.metrics ? &*r.metrics : nullptr;
        csv += std::to_string(i) + ',' + (m ? format_exact(m->gain_db) : "") + ',' +
               (m ? opt_num(m->phase_margin_deg) : "") + ',' + (m ? opt_num(m->bw_3db_hz) : "") + ',' +
               (m ? format_exact(m->power_w) : "") + ',' + (m ? format_exact(m->gm_s) : "") + ',' +
               std::string(to_string(r.cls)) + '\n';
        if (m) {
            lo = std::min(lo, m->gain_db);
            hi = std::max(hi, m->gain_db);
        }
    }
    write_text_file(dir / (stem + ".csv"), csv);

    // Gain per key index; keys without metrics sit on the bottom edge.
    constexpr double W = 800, H = 400, L = 60, R = 20, T = 20, B = 40;
    lo = std::floor(lo / 10.0) * 10.0;
    hi = std::ceil(hi / 10.0) * 10.0;
    if (hi <= lo) hi = lo + 10.0;
    const double n = std::max<double>(1.0, static_cast<double>(records.size()) - 1.0);
    auto x = [&](double i) { return L + (W - L - R) * i / n; };
    auto y = [&](double g) { return T + (H - T - B) * (hi - g) / (hi - lo); };
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y(spec.gain_min_correct) << "\" y2=\""
        << y(spec.gain_min_correct) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (double g = lo; g <= hi + 1e-9; g += (hi - lo) / 5.0)
        svg << "<text x=\"" << L - 6 << "\" y=\"" << y(g) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << g
            << "</text>\n";
    svg << "<text x=\"" << (W + L) / 2 << "\" y=\"" << H - 8 << "\" font-size=\"12\" text-anchor=\"middle\">key index</text>\n";
    svg << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << H / 2
        << ")\" text-anchor=\"middle\">gain (dB)</text>\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!r.valid) continue;
        const double g = r.metrics ? r.metrics->gain_db : lo;
        const char* color = r.cls == KeyClass::Correct ? "#1a7f37" : r.cls == KeyClass::NearlyCorrect ? "#d4a017" : "#b62324";
        svg << "<circle cx=\"" << x(static_cast<double>(i)) << "\" cy=\"" << y(g) << "\" r=\"1.5\" fill=\"" << color
            << "\"/>\n";
    }
    svg << "</svg>\n";
    write_text_file(dir / (stem + ".svg"), svg.str());
}

Persistence monte_carlo_persistence(const LockedCircuit& lc, const Key& key, const EvalContext& ctx,
                                    std::size_t samples, std::uint64_t seed, unsigned jobs) {
    std::vector<char> ok(samples, 0);
    parallel_for(samples, jobs, [&](std::size_t s) {
        EvalContext local = ctx;
        local.mismatch_seed = seed_stream(seed, 0x696e7374616e6365ull, s)();
        ok[s] = evaluate_key(lc, key, local).cls == KeyClass::Correct;
    });
    Persistence p;
    p.samples = samples;
    p.correct = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
    p.fraction = samples ? static_cast<double>(p.correct) / static_cast<double>(samples) : 0.0;
    return p;
}

}  // namespace ldelock
