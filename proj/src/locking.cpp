#include "ldelock/locking.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ldelock/error.hpp"
#include "ldelock/lde_model.hpp"
#include "ldelock/sweep.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

namespace {

// All 3^m tuples in lexicographic BL < SP < SOD order.
std::vector<OptionTuple> all_tuples(std::size_t members) {
    std::vector<OptionTuple> out{{}};
    for (std::size_t i = 0; i < members; ++i) {
        std::vector<OptionTuple> next;
        for (const auto& t : out)
            for (auto a : kAllArrangements) {
                auto u = t;
                u.push_back(a);
                next.push_back(std::move(u));
            }
        out = std::move(next);
    }
    return out;
}

bool contains(const std::vector<OptionTuple>& v, const OptionTuple& t) {
    return std::find(v.begin(), v.end(), t) != v.end();
}

bool is_symmetric_tuple(const OptionTuple& t) {
    return std::adjacent_find(t.begin(), t.end(), std::not_equal_to<>()) == t.end();
}

std::size_t require_correct(const KeyGroup& g) {
    if (!g.correct_index) throw Error("correct option of group " + g.id + " is unknown (secret not loaded)");
    return *g.correct_index;
}

void check_plan(const LockingPlan& plan) {
    std::set<std::string> ids;
    for (const auto& g : plan.groups) {
        if (g.id.empty()) throw InconsistentPlan("key group without id");
        if (!ids.insert(g.id).second) throw InconsistentPlan("duplicate key group id " + g.id);
        if (g.members.empty() || g.members.size() > 2)
            throw InconsistentPlan("group " + g.id + " must have one or two members");
        if (g.options.empty()) throw InconsistentPlan("group " + g.id + " has no options");
        for (std::size_t i = 0; i < g.options.size(); ++i) {
            if (g.options[i].size() != g.members.size())
                throw InconsistentPlan("option " + std::to_string(i) + " of group " + g.id +
                                       " does not match the member count");
            for (std::size_t j = 0; j < i; ++j)
                if (g.options[i] == g.options[j])
                    throw InconsistentPlan("group " + g.id + " repeats option " + to_string(g.options[i]));
        }
        if (g.correct_index && *g.correct_index >= g.options.size())
            throw InconsistentPlan("correct index of group " + g.id + " out of range");
    }
}

// Records tagged with their decoded option indices while a plan is edited.
struct Indexed {
    std::vector<std::size_t> idx;
    SweepRecord rec;
};

std::vector<Indexed> index_records(const LockingPlan& plan, std::vector<SweepRecord> records) {
    std::vector<Indexed> out;
    out.reserve(records.size());
    for (auto& r : records) {
        if (!r.valid) continue;
        out.push_back({decode_indices(plan, r.key), std::move(r)});
    }
    return out;
}

std::vector<SweepRecord> rekey(const LockingPlan& plan, std::vector<Indexed> items) {
    std::vector<SweepRecord> out;
    out.reserve(items.size());
    for (auto& it : items) {
        it.rec.key = encode_key(plan, it.idx);
        out.push_back(std::move(it.rec));
    }
    return out;
}

bool is_outlier(const SweepRecord& r) { return !r.metrics || r.metrics->gain_db < 0.0; }

// Drops option `o` of group `g` and every record that selects it.
void remove_option(LockedCircuit& lc, std::vector<Indexed>& items, std::size_t g, std::size_t o) {
    auto& grp = lc.plan.groups[g];
    grp.options.erase(grp.options.begin() + static_cast<std::ptrdiff_t>(o));
    if (grp.correct_index && *grp.correct_index > o) --*grp.correct_index;
    std::erase_if(items, [&](const Indexed& it) { return it.idx[g] == o; });
    for (auto& it : items)
        if (it.idx[g] > o) --it.idx[g];
    lc.plan = LockingPlan::from_groups(std::move(lc.plan.groups));
}

}  // namespace

std::string to_string(const OptionTuple& t) {
    std::string s;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) s += '-';
        s += to_string(t[i]);
    }
    return s;
}

std::optional<OptionTuple> parse_option(std::string_view s) {
    OptionTuple t;
    for (const auto& part : split(s, '-')) {
        auto a = parse_arrangement(part);
        if (!a) return std::nullopt;
        t.push_back(*a);
    }
    return t;
}

LockingPlan LockingPlan::from_groups(std::vector<KeyGroup> groups) {
    LockingPlan p;
    for (const auto& g : groups) {
        const std::size_t decoys = g.options.empty() ? 0 : g.options.size() - 1;
        if (g.is_pair()) {
            ++p.base_pairs;
            p.decoy_pairs += decoys;
        } else {
            ++p.base_singles;
            p.decoy_singles += decoys;
        }
    }
    p.groups = std::move(groups);
    return p;
}

std::size_t key_length(const LockingPlan& plan) {
    if (!plan.groups.empty()) {
        auto derived = LockingPlan::from_groups(plan.groups);
        if (derived.base_pairs != plan.base_pairs || derived.base_singles != plan.base_singles ||
            derived.decoy_pairs != plan.decoy_pairs || derived.decoy_singles != plan.decoy_singles)
            throw InconsistentPlan("plan counts disagree with its key groups");
    }
    return plan.decoy_pairs + plan.base_pairs + plan.base_singles + plan.decoy_singles;
}

std::size_t arrangements_added(const LockingPlan& plan) {
    key_length(plan);  // consistency check
    return 2 * plan.decoy_pairs + plan.decoy_singles;
}

std::size_t raw_keyspace_bits(std::size_t n_devices) { return 3 * n_devices; }

double valid_keyspace(const LockingPlan& plan) {
    double n = 1.0;
    for (const auto& g : plan.groups) n *= static_cast<double>(g.options.size());
    return plan.groups.empty() ? 0.0 : n;
}

std::vector<GroupSpec> pair_transistors(const Circuit& c, const std::vector<std::vector<std::string>>& pairing) {
    std::set<std::string> used;
    std::vector<GroupSpec> out;
    for (const auto& entry : pairing) {
        if (entry.empty() || entry.size() > 2) throw InconsistentPlan("a group needs one or two devices");
        GroupSpec g;
        for (const auto& raw : entry) {
            const std::string name = to_upper(raw);
            const auto& m = c.mosfet(name);
            if (!used.insert(name).second) throw DoubleAssignment("device " + name + " is in two groups");
            g.members.push_back(name);
            g.roles.push_back(m.role);
        }
        g.symmetric = g.members.size() == 2 && !g.roles[0].empty() && g.roles[0] == g.roles[1];
        out.push_back(std::move(g));
    }
    return out;
}

LockingPlan generate_decoys(const Circuit& c, const std::vector<GroupSpec>& grouping,
                            const std::vector<std::size_t>& decoys_per_group, std::uint64_t seed) {
    if (decoys_per_group.size() != grouping.size())
        throw InconsistentPlan("need one decoy count per group");
    std::vector<KeyGroup> groups;
    for (std::size_t i = 0; i < grouping.size(); ++i) {
        const auto& spec = grouping[i];
        const std::size_t want = decoys_per_group[i];
        if (want < 1) throw InconsistentPlan("every group needs at least one decoy");

        OptionTuple correct;
        for (const auto& name : spec.members) {
            const auto& m = c.mosfet(name);
            if (m.keyed()) throw InconsistentPlan("device " + name + " is already keyed");
            correct.push_back(std::get<Arrangement>(m.arrangement));
        }
        auto pool = all_tuples(spec.members.size());
        std::erase(pool, correct);
        if (want > pool.size())
            throw TooManyDecoys("group of " + std::to_string(spec.members.size()) + " device(s) allows at most " +
                                std::to_string(pool.size()) + " decoys, " + std::to_string(want) + " requested");

        auto rng = seed_stream(seed, 0x6465636f79ull, i);
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(want);
        const auto pos = std::uniform_int_distribution<std::size_t>(0, want)(rng);
        pool.insert(pool.begin() + static_cast<std::ptrdiff_t>(pos), correct);

        KeyGroup g;
        g.id = "g" + std::to_string(i + 1);
        g.members = spec.members;
        g.options = std::move(pool);
        g.correct_index = pos;
        g.layout_order_seed = seed;
        g.symmetric = spec.symmetric;
        groups.push_back(std::move(g));
    }
    return LockingPlan::from_groups(std::move(groups));
}

LockedCircuit lock(const Circuit& base, LockingPlan plan) {
    check_plan(plan);
    key_length(plan);
    LockedCircuit lc{base, std::move(plan)};
    std::map<std::string, std::string> owner;
    for (auto& g : lc.plan.groups) {
        for (std::size_t j = 0; j < g.members.size(); ++j) {
            const std::string name = to_upper(g.members[j]);
            g.members[j] = name;
            auto idx = lc.circuit.find_mosfet(name);
            if (!idx) throw UnknownDevice("unknown device '" + name + "' in group " + g.id);
            if (!owner.emplace(name, g.id).second) throw DoubleAssignment("device " + name + " is in two groups");
            auto& m = lc.circuit.mosfets[*idx];
            if (auto* lit = std::get_if<Arrangement>(&m.arrangement)) {
                // A literal tells us the correct option.
                std::optional<std::size_t> found;
                if (g.correct_index) {
                    if (g.options[*g.correct_index][j] != *lit)
                        throw InconsistentPlan("device " + name + " is drawn " + std::string(to_string(*lit)) +
                                               " but the correct option of " + g.id + " says otherwise");
                } else if (j + 1 == g.members.size()) {
                    OptionTuple t;
                    for (const auto& mem : g.members) {
                        const auto& mm = lc.circuit.mosfet(mem);
                        if (mm.keyed()) {
                            t.clear();
                            break;
                        }
                        t.push_back(std::get<Arrangement>(mm.arrangement));
                    }
                    for (std::size_t o = 0; o < g.options.size() && !t.empty(); ++o)
                        if (g.options[o] == t) found = o;
                    if (!t.empty() && !found)
                        throw InconsistentPlan("drawn arrangements of group " + g.id + " are not among its options");
                    g.correct_index = found;
                }
            } else if (std::get<KeySlot>(m.arrangement).group != g.id) {
                throw InconsistentPlan("device " + name + " is slotted to @" + std::get<KeySlot>(m.arrangement).group +
                                       " but listed in group " + g.id);
            }
        }
    }
    // Literals are read above before any member is replaced.
    for (const auto& g : lc.plan.groups)
        for (const auto& name : g.members) lc.circuit.mosfets[*lc.circuit.find_mosfet(name)].arrangement = KeySlot{g.id};
    for (const auto& m : lc.circuit.mosfets)
        if (m.keyed() && !owner.contains(m.name))
            throw InconsistentPlan("device " + m.name + " references undeclared group @" +
                                   std::get<KeySlot>(m.arrangement).group);
    return lc;
}

std::vector<std::size_t> group_offsets(const LockingPlan& plan) {
    std::vector<std::size_t> out;
    std::size_t at = 0;
    for (const auto& g : plan.groups) {
        out.push_back(at);
        at += g.options.size();
    }
    return out;
}

Key encode_key(const LockingPlan& plan, std::span<const std::size_t> indices) {
    if (indices.size() != plan.groups.size()) throw Error("one option index per group is required");
    std::size_t len = 0;
    for (const auto& g : plan.groups) len += g.options.size();
    Key k(len);
    const auto off = group_offsets(plan);
    for (std::size_t g = 0; g < indices.size(); ++g) {
        if (indices[g] >= plan.groups[g].options.size()) throw Error("option index out of range");
        k.set(off[g] + indices[g]);
    }
    return k;
}

std::vector<std::size_t> decode_indices(const LockingPlan& plan, const Key& k) {
    std::size_t len = 0;
    for (const auto& g : plan.groups) len += g.options.size();
    if (k.size() != len)
        throw InvalidKey(0, InvalidKey::Reason::WrongLength,
                         "key has " + std::to_string(k.size()) + " bits, plan needs " + std::to_string(len));
    std::vector<std::size_t> out;
    std::size_t at = 0;
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
        std::optional<std::size_t> hot;
        for (std::size_t o = 0; o < plan.groups[g].options.size(); ++o) {
            if (!k[at + o]) continue;
            if (hot) throw InvalidKey(g, InvalidKey::Reason::MultiHot, "group " + plan.groups[g].id + " is multi-hot");
            hot = o;
        }
        if (!hot) throw InvalidKey(g, InvalidKey::Reason::NoneHot, "group " + plan.groups[g].id + " has no bit set");
        out.push_back(*hot);
        at += plan.groups[g].options.size();
    }
    return out;
}

namespace {

std::vector<Arrangement> assignment_for(const LockedCircuit& lc, std::span<const std::size_t> idx) {
    std::map<std::string, Arrangement> chosen;
    for (std::size_t g = 0; g < lc.plan.groups.size(); ++g) {
        const auto& grp = lc.plan.groups[g];
        for (std::size_t j = 0; j < grp.members.size(); ++j) chosen[grp.members[j]] = grp.options[idx[g]][j];
    }
    std::vector<Arrangement> out;
    out.reserve(lc.circuit.mosfets.size());
    for (const auto& m : lc.circuit.mosfets) {
        if (auto* lit = std::get_if<Arrangement>(&m.arrangement)) {
            out.push_back(*lit);
        } else {
            auto it = chosen.find(m.name);
            if (it == chosen.end()) throw InconsistentPlan("device " + m.name + " has no key group");
            out.push_back(it->second);
        }
    }
    return out;
}

}  // namespace

std::vector<Arrangement> decode_key(const LockedCircuit& lc, const Key& k) {
    return assignment_for(lc, decode_indices(lc.plan, k));
}

bool correct_key_known(const LockedCircuit& lc) {
    return std::all_of(lc.plan.groups.begin(), lc.plan.groups.end(),
                       [](const KeyGroup& g) { return g.correct_index.has_value(); });
}

Key correct_key(const LockedCircuit& lc) {
    std::vector<std::size_t> idx;
    for (const auto& g : lc.plan.groups) idx.push_back(require_correct(g));
    return encode_key(lc.plan, idx);
}

std::vector<Arrangement> base_assignment(const LockedCircuit& lc) { return decode_key(lc, correct_key(lc)); }

LockedCircuit shuffle_layout_order(std::uint64_t seed, const LockedCircuit& lc) {
    LockedCircuit out = lc;
    for (std::size_t g = 0; g < out.plan.groups.size(); ++g) {
        auto& grp = out.plan.groups[g];
        std::vector<std::size_t> perm(grp.options.size());
        std::iota(perm.begin(), perm.end(), 0);
        auto rng = seed_stream(seed, 0x6c61796f7574ull, g);
        std::shuffle(perm.begin(), perm.end(), rng);
        // New position i holds old option perm[i].
        std::vector<OptionTuple> opts;
        std::optional<std::size_t> correct;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            opts.push_back(grp.options[perm[i]]);
            if (grp.correct_index && perm[i] == *grp.correct_index) correct = i;
        }
        grp.options = std::move(opts);
        grp.correct_index = correct;
        grp.layout_order_seed = seed;
    }
    return out;
}

PruneResult prune_nearly_correct(const LockedCircuit& lc, std::vector<SweepRecord> records, const SpecWindow& spec,
                                 const KeyEvaluator& eval) {
    PruneResult res;
    res.locked = lc;
    res.keyspace_before = valid_keyspace(lc.plan);
    auto items = index_records(lc.plan, std::move(records));
    for (auto& it : items)
        if (it.rec.metrics) it.rec.cls = classify(*it.rec.metrics, spec);
    const auto correct = [&](std::size_t g) { return require_correct(res.locked.plan.groups[g]); };

    // Tuples already tried per group; a retired tuple is never offered again.
    std::vector<std::vector<OptionTuple>> retired(lc.plan.groups.size());
    for (std::size_t g = 0; g < lc.plan.groups.size(); ++g) retired[g] = lc.plan.groups[g].options;

    while (true) {
        const std::size_t n_groups = res.locked.plan.groups.size();
        std::vector<std::vector<std::size_t>> count(n_groups);
        for (std::size_t g = 0; g < n_groups; ++g) count[g].assign(res.locked.plan.groups[g].options.size(), 0);
        std::size_t nearly = 0;
        for (const auto& it : items) {
            if (it.rec.cls != KeyClass::NearlyCorrect) continue;
            ++nearly;
            bool all_correct = true;
            for (std::size_t g = 0; g < n_groups; ++g) {
                ++count[g][it.idx[g]];
                all_correct = all_correct && it.idx[g] == correct(g);
            }
            if (all_correct) throw CannotEliminate("the correct key itself is nearly correct");
        }
        if (nearly == 0) break;

        // Cheap removals first (group keeps two options), most implicated first.
        struct Candidate {
            bool removable;
            std::size_t n, g, o;
        };
        std::vector<Candidate> cands;
        for (std::size_t g = 0; g < n_groups; ++g)
            for (std::size_t o = 0; o < count[g].size(); ++o)
                if (o != correct(g) && count[g][o] > 0)
                    cands.push_back({res.locked.plan.groups[g].options.size() > 2, count[g][o], g, o});
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.removable != b.removable) return a.removable;
            return a.n > b.n;
        });
        if (cands.empty()) throw CannotEliminate("nearly-correct keys use only correct options");

        if (cands.front().removable) {
            const auto [_, n, g, o] = cands.front();
            const auto& grp = res.locked.plan.groups[g];
            const std::string victim = grp.id + ":" + to_string(grp.options[o]);
            remove_option(res.locked, items, g, o);
            res.log.push_back("removed " + victim + " (" + std::to_string(n) + " nearly-correct keys)");
            continue;
        }

        // Every implicated group is at two options: try fresh tuples in place
        // of a decoy, accepting one that lowers the nearly-correct count.
        bool replaced = false;
        for (const auto& cand_victim : cands) {
            const auto [_, n, g, o] = cand_victim;
            const auto& grp = res.locked.plan.groups[g];
            const std::string victim = grp.id + ":" + to_string(grp.options[o]);
            std::vector<std::size_t> affected;
            for (std::size_t i = 0; i < items.size(); ++i)
                if (items[i].idx[g] == o) affected.push_back(i);
            for (const auto& cand : all_tuples(grp.members.size())) {
                if (contains(retired[g], cand)) continue;
                if (grp.symmetric && grp.is_pair() && !is_symmetric_tuple(cand)) continue;
                retired[g].push_back(cand);
                LockedCircuit trial = res.locked;
                trial.plan.groups[g].options[o] = cand;
                std::vector<Key> keys;
                for (auto i : affected) keys.push_back(encode_key(trial.plan, items[i].idx));
                auto fresh = eval(trial, keys);
                const auto still = static_cast<std::size_t>(std::count_if(
                    fresh.begin(), fresh.end(), [](const SweepRecord& r) { return r.cls == KeyClass::NearlyCorrect; }));
                if (still >= n) continue;
                for (std::size_t j = 0; j < affected.size(); ++j) items[affected[j]].rec = std::move(fresh[j]);
                res.locked = std::move(trial);
                res.log.push_back("replaced " + victim + " with " + to_string(cand) + " (" + std::to_string(n) + " -> " +
                                  std::to_string(still) + " nearly-correct keys, " + std::to_string(keys.size()) +
                                  " keys re-evaluated)");
                replaced = true;
                break;
            }
            if (replaced) break;
        }
        if (!replaced) throw CannotEliminate("no decoy can be removed or replaced without nearly-correct keys");
    }
    // Slots keep their group ids; the circuit needs no edit.
    res.keyspace_after = valid_keyspace(res.locked.plan);
    res.records = rekey(res.locked.plan, std::move(items));
    return res;
}

PruneResult prune_asymmetric_outliers(const LockedCircuit& lc, std::vector<SweepRecord> records) {
    PruneResult res;
    res.locked = lc;
    res.keyspace_before = valid_keyspace(lc.plan);
    auto items = index_records(lc.plan, std::move(records));

    for (std::size_t g = 0; g < res.locked.plan.groups.size(); ++g) {
        const auto& grp0 = res.locked.plan.groups[g];
        if (!grp0.symmetric || !grp0.is_pair()) continue;
        // An asymmetric option is blamed when swapping it for a symmetric one,
        // all else equal, turns an outlier into a regular key.
        std::map<std::vector<std::size_t>, bool> outlier;
        for (const auto& it : items) outlier[it.idx] = is_outlier(it.rec);
        std::vector<std::size_t> sym;
        for (std::size_t o = 0; o < grp0.options.size(); ++o)
            if (is_symmetric_tuple(grp0.options[o])) sym.push_back(o);
        std::set<std::size_t> implicated;
        for (const auto& it : items) {
            const auto o = it.idx[g];
            if (is_symmetric_tuple(grp0.options[o]) || (grp0.correct_index && *grp0.correct_index == o)) continue;
            if (!is_outlier(it.rec) || implicated.contains(o)) continue;
            for (auto s : sym) {
                auto twin = it.idx;
                twin[g] = s;
                auto f = outlier.find(twin);
                if (f != outlier.end() && !f->second) {
                    implicated.insert(o);
                    break;
                }
            }
        }
        // Highest index first so the remaining indices stay valid.
        for (auto o = implicated.rbegin(); o != implicated.rend(); ++o) {
            const std::string victim = res.locked.plan.groups[g].id + ":" + to_string(res.locked.plan.groups[g].options[*o]);
            remove_option(res.locked, items, g, *o);
            res.log.push_back("removed asymmetric " + victim);
        }
        auto& grp = res.locked.plan.groups[g];
        for (const auto& t : all_tuples(2)) {
            if (grp.options.size() >= 2) break;
            if (is_symmetric_tuple(t) && !contains(grp.options, t)) {
                grp.options.push_back(t);
                res.log.push_back("padded " + grp.id + " with " + to_string(t));
            }
        }
        res.locked.plan = LockingPlan::from_groups(std::move(res.locked.plan.groups));
    }
    res.keyspace_after = valid_keyspace(res.locked.plan);
    res.records = rekey(res.locked.plan, std::move(items));
    return res;
}

LockedCircuit balance_groups(const LockedCircuit& lc, std::size_t target_size, std::uint64_t seed) {
    if (target_size < 2) throw InconsistentPlan("balanced groups need at least two options");
    LockedCircuit out = lc;
    for (std::size_t g = 0; g < out.plan.groups.size(); ++g) {
        auto& grp = out.plan.groups[g];
        const std::size_t limit = all_tuples(grp.members.size()).size();
        if (target_size > limit)
            throw TooManyDecoys("group " + grp.id + " has only " + std::to_string(limit) + " distinct options");
        while (grp.options.size() > target_size) {
            std::size_t o = grp.options.size() - 1;
            if (grp.correct_index && *grp.correct_index == o) --o;
            grp.options.erase(grp.options.begin() + static_cast<std::ptrdiff_t>(o));
            if (grp.correct_index && *grp.correct_index > o) --*grp.correct_index;
        }
        if (grp.options.size() < target_size) {
            auto pool = all_tuples(grp.members.size());
            std::erase_if(pool, [&](const OptionTuple& t) { return contains(grp.options, t); });
            auto rng = seed_stream(seed, 0x62616c616e6365ull, g);
            std::shuffle(pool.begin(), pool.end(), rng);
            for (std::size_t i = 0; grp.options.size() < target_size; ++i) grp.options.push_back(pool[i]);
        }
    }
    out.plan = LockingPlan::from_groups(std::move(out.plan.groups));
    return out;
}

std::string serialize_plan(const LockingPlan& plan) {
    std::ostringstream os;
    os << "# lock plan: option order is the layout order\n";
    os << "base_pairs = " << plan.base_pairs << "\n";
    os << "base_singles = " << plan.base_singles << "\n";
    os << "decoy_pairs = " << plan.decoy_pairs << "\n";
    os << "decoy_singles = " << plan.decoy_singles << "\n";
    std::string ids;
    for (const auto& g : plan.groups) ids += (ids.empty() ? "" : ",") + g.id;
    os << "groups = " << ids << "\n";
    for (const auto& g : plan.groups) {
        os << "\n[group." << g.id << "]\n";
        std::string mem, opts;
        for (const auto& m : g.members) mem += (mem.empty() ? "" : ",") + m;
        for (const auto& o : g.options) opts += (opts.empty() ? "" : ",") + to_string(o);
        os << "members = " << mem << "\n";
        os << "options = " << opts << "\n";
        os << "symmetric = " << (g.symmetric ? "true" : "false") << "\n";
        os << "layout_seed = " << g.layout_order_seed << "\n";
    }
    return os.str();
}

LockingPlan parse_plan(const Config& cfg) {
    auto ids = cfg.get("groups");
    if (!ids || trim(*ids).empty()) throw ConfigError("lock plan has no 'groups' entry");
    std::vector<KeyGroup> groups;
    for (const auto& id : split(*ids, ',')) {
        const std::string p = "group." + to_lower(id) + ".";
        KeyGroup g;
        g.id = id;
        auto mem = cfg.get(p + "members");
        auto opts = cfg.get(p + "options");
        if (!mem || !opts) throw ConfigError("group " + id + " needs 'members' and 'options'");
        for (const auto& m : split(*mem, ',')) g.members.push_back(to_upper(m));
        for (const auto& o : split(*opts, ',')) {
            auto t = parse_option(o);
            if (!t) throw ConfigError("group " + id + ": bad option '" + o + "'");
            g.options.push_back(*t);
        }
        g.symmetric = cfg.get_bool_or(p + "symmetric", false);
        g.layout_order_seed = static_cast<std::uint64_t>(cfg.get_int_or(p + "layout_seed", 0));
        groups.push_back(std::move(g));
    }
    auto plan = LockingPlan::from_groups(std::move(groups));
    try {
        check_plan(plan);
    } catch (const InconsistentPlan& e) {
        throw ConfigError(e.what());
    }
    auto expect = [&](const char* key, std::size_t v) {
        auto got = cfg.get_int(key);
        if (got && static_cast<std::size_t>(*got) != v)
            throw ConfigError(std::string("lock plan '") + key + "' disagrees with its groups");
    };
    expect("base_pairs", plan.base_pairs);
    expect("base_singles", plan.base_singles);
    expect("decoy_pairs", plan.decoy_pairs);
    expect("decoy_singles", plan.decoy_singles);
    return plan;
}

std::string serialize_secret(const LockedCircuit& lc) {
    const Key k = correct_key(lc);
    return "# correct key, one-hot per group in plan order\nkey_bits = " + std::to_string(k.size()) +
           "\nkey_hex = " + k.hex() + "\n";
}

void apply_secret(LockedCircuit& lc, const Config& secret) {
    auto hex = secret.get("key_hex");
    auto bits = secret.get_int("key_bits");
    if (!hex || !bits) throw ConfigError("secret file needs key_hex and key_bits");
    const auto idx = decode_indices(lc.plan, Key::from_hex(*hex, static_cast<std::size_t>(*bits)));
    for (std::size_t g = 0; g < idx.size(); ++g) lc.plan.groups[g].correct_index = idx[g];
}

LockReport obfuscate(const Circuit& c, const ObfuscateOptions& opt, const KeyEvaluator& eval) {
    LockReport rep;
    auto pairing = opt.pairing;
    if (pairing.empty()) {
        // Auto: role-tagged devices paired in netlist order within each role.
        std::map<std::string, std::vector<std::string>> by_role;
        std::vector<std::string> order;
        for (const auto& m : c.mosfets) {
            if (m.role.empty() || m.keyed()) continue;
            if (!by_role.contains(m.role)) order.push_back(m.role);
            by_role[m.role].push_back(m.name);
        }
        for (const auto& role : order) {
            const auto& names = by_role[role];
            for (std::size_t i = 0; i < names.size(); i += 2) {
                std::vector<std::string> e{names[i]};
                if (i + 1 < names.size()) e.push_back(names[i + 1]);
                pairing.push_back(std::move(e));
            }
        }
    }
    if (pairing.empty()) throw NoCandidates("no candidate devices to lock");

    const auto grouping = pair_transistors(c, pairing);
    std::vector<std::size_t> decoys = opt.decoys_per_group;
    if (decoys.empty()) decoys.assign(1, 3);
    if (decoys.size() == 1) decoys.assign(grouping.size(), decoys.front());
    LockedCircuit lc = lock(c, generate_decoys(c, grouping, decoys, opt.seed));
    rep.initial_key_length = key_length(lc.plan);
    rep.initial_arrangements_added = arrangements_added(lc.plan);
    rep.log.push_back("paired " + std::to_string(grouping.size()) + " groups, key length " +
                      std::to_string(rep.initial_key_length) + ", arrangements added " +
                      std::to_string(rep.initial_arrangements_added));

    if (opt.target_size) {
        lc = balance_groups(lc, opt.target_size, opt.seed);
        rep.log.push_back("balanced every group to " + std::to_string(opt.target_size) + " options");
    }

    if (opt.screen_decoys) {
        // Retain only decoys that break the spec on their own.
        const auto base = decode_indices(lc.plan, correct_key(lc));
        std::vector<Key> keys;
        std::vector<std::pair<std::size_t, std::size_t>> where;
        for (std::size_t g = 0; g < lc.plan.groups.size(); ++g)
            for (std::size_t o = 0; o < lc.plan.groups[g].options.size(); ++o) {
                if (o == base[g]) continue;
                auto idx = base;
                idx[g] = o;
                keys.push_back(encode_key(lc.plan, idx));
                where.emplace_back(g, o);
            }
        auto recs = eval(lc, keys);
        std::vector<std::pair<std::size_t, std::size_t>> benign;
        for (std::size_t i = 0; i < recs.size(); ++i)
            if (recs[i].cls == KeyClass::Correct) benign.push_back(where[i]);
        for (auto it = benign.rbegin(); it != benign.rend(); ++it) {
            auto& grp = lc.plan.groups[it->first];
            if (grp.options.size() <= 2) {
                rep.log.push_back("kept benign decoy " + grp.id + ":" + to_string(grp.options[it->second]) +
                                  " (group minimum)");
                continue;
            }
            rep.log.push_back("screened out benign decoy " + grp.id + ":" + to_string(grp.options[it->second]));
            std::vector<Indexed> none;
            remove_option(lc, none, it->first, it->second);
        }
    }

    std::vector<SweepRecord> records;
    if (opt.prune) {
        const double space = valid_keyspace(lc.plan);
        std::vector<Key> keys = space <= static_cast<double>(opt.sweep_cap)
                                    ? enumerate_keys(lc, opt.sweep_cap)
                                    : sample_keys(lc, std::min<std::size_t>(opt.sample_size, static_cast<std::size_t>(space)),
                                                  opt.seed, true);
        records = eval(lc, keys);
        rep.log.push_back("swept " + std::to_string(keys.size()) + " keys");

        auto asym = prune_asymmetric_outliers(lc, std::move(records));
        for (auto& l : asym.log) rep.log.push_back(l);
        lc = std::move(asym.locked);
        records = std::move(asym.records);

        auto nc = prune_nearly_correct(lc, std::move(records), opt.spec, eval);
        for (auto& l : nc.log) rep.log.push_back(l);
        lc = std::move(nc.locked);
        records = std::move(nc.records);
        rep.swept_keys = records.size();
        if (!records.empty()) {
            const auto ok = std::count_if(records.begin(), records.end(),
                                          [](const SweepRecord& r) { return r.cls == KeyClass::Correct; });
            rep.correct_rate = static_cast<double>(ok) / static_cast<double>(records.size());
        }
    }

    lc = shuffle_layout_order(opt.seed ^ 0x5eedull, lc);
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

}  // namespace ldelock
