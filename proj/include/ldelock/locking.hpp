#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldelock/config.hpp"
#include "ldelock/key.hpp"
#include "ldelock/metrics.hpp"
#include "ldelock/netlist.hpp"
#include "ldelock/record.hpp"

namespace ldelock {

/// One arrangement per group member.
using OptionTuple = std::vector<Arrangement>;

std::string to_string(const OptionTuple& t);        // "SP-SOD"
std::optional<OptionTuple> parse_option(std::string_view s);

struct KeyGroup {
    std::string id;
    std::vector<std::string> members;  // 1 or 2 device names
    std::vector<OptionTuple> options;  // layout order
    std::optional<std::size_t> correct_index;  // unknown when loaded without the secret
    std::uint64_t layout_order_seed = 0;
    bool symmetric = false;  // both members share a matched role

    bool is_pair() const { return members.size() == 2; }
    friend bool operator==(const KeyGroup&, const KeyGroup&) = default;
};

struct LockingPlan {
    std::size_t base_pairs = 0;
    std::size_t base_singles = 0;
    std::size_t decoy_pairs = 0;
    std::size_t decoy_singles = 0;
    std::vector<KeyGroup> groups;

    /// Counts derived from the groups.
    static LockingPlan from_groups(std::vector<KeyGroup> groups);
    friend bool operator==(const LockingPlan&, const LockingPlan&) = default;
};

/// decoy_pairs + base_pairs + base_singles + decoy_singles. Throws
/// InconsistentPlan when groups are present and disagree with the counts.
std::size_t key_length(const LockingPlan& plan);
/// 2 * decoy_pairs + decoy_singles. Throws InconsistentPlan.
std::size_t arrangements_added(const LockingPlan& plan);
/// 3 * n_devices; the exponent of the unconstrained arrangement space.
std::size_t raw_keyspace_bits(std::size_t n_devices);
/// Product of group option counts.
double valid_keyspace(const LockingPlan& plan);

/// Device grouping before decoys exist.
struct GroupSpec {
    std::vector<std::string> members;
    std::vector<std::string> roles;
    bool symmetric = false;
};

/// Validates a pairing against the circuit. Pairs whose members carry the
/// same non-empty role are flagged symmetric. Throws UnknownDevice,
/// DoubleAssignment, InconsistentPlan (empty or oversized entries).
std::vector<GroupSpec> pair_transistors(const Circuit& c, const std::vector<std::vector<std::string>>& pairing);

/// Correct tuple (read from the circuit's literal arrangements) plus distinct
/// random decoys; the correct position is randomized. Group ids are g1, g2, ...
/// Throws TooManyDecoys, InconsistentPlan.
LockingPlan generate_decoys(const Circuit& c, const std::vector<GroupSpec>& grouping,
                            const std::vector<std::size_t>& decoys_per_group, std::uint64_t seed);

/// Base circuit with keyed devices replaced by key slots.
struct LockedCircuit {
    Circuit circuit;
    LockingPlan plan;
};

/// Replaces every group member's arrangement with a slot for its group. A
/// literal arrangement must match the group's correct option. Throws
/// UnknownDevice, DoubleAssignment, InconsistentPlan.
LockedCircuit lock(const Circuit& base, LockingPlan plan);

/// Bit offset of each group's one-hot span.
std::vector<std::size_t> group_offsets(const LockingPlan& plan);
/// One-hot key for the given option index per group.
Key encode_key(const LockingPlan& plan, std::span<const std::size_t> indices);
/// Option index per group. Throws InvalidKey.
std::vector<std::size_t> decode_indices(const LockingPlan& plan, const Key& k);
/// Arrangement of every MOSFET (parallel to circuit.mosfets). Throws InvalidKey.
std::vector<Arrangement> decode_key(const LockedCircuit& lc, const Key& k);

/// Throws Error when the plan was loaded without its secret.
Key correct_key(const LockedCircuit& lc);
bool correct_key_known(const LockedCircuit& lc);

/// Arrangements of the base design (keyed devices at their correct option).
std::vector<Arrangement> base_assignment(const LockedCircuit& lc);

/// Permutes option order inside every group; correct_index follows.
LockedCircuit shuffle_layout_order(std::uint64_t seed, const LockedCircuit& lc);

/// Evaluates keys of a locked circuit; used by the pruning passes.
using KeyEvaluator = std::function<std::vector<SweepRecord>(const LockedCircuit&, const std::vector<Key>&)>;

struct PruneResult {
    LockedCircuit locked;
    std::vector<SweepRecord> records;  // re-keyed for `locked`
    std::vector<std::string> log;      // one line per removal or replacement
    double keyspace_before = 0.0;
    double keyspace_after = 0.0;
};

/// Greedily drops the decoy option that appears in the most nearly-correct
/// keys until none remain. When a group would fall below two options, fresh
/// unused tuples are tried instead (their keys are evaluated through `eval`).
/// Throws CannotEliminate when the correct option of some group cannot be
/// kept without a nearly-correct key.
PruneResult prune_nearly_correct(const LockedCircuit& lc, std::vector<SweepRecord> records, const SpecWindow& spec,
                                 const KeyEvaluator& eval);

/// For symmetric groups, removes asymmetric options that appear in any
/// outlier key (no metrics, or gain below 0 dB).
PruneResult prune_asymmetric_outliers(const LockedCircuit& lc, std::vector<SweepRecord> records);

/// Trims (highest-index decoys first) or pads (seeded fresh decoys) every
/// group to exactly `target_size` options. Throws TooManyDecoys.
LockedCircuit balance_groups(const LockedCircuit& lc, std::size_t target_size, std::uint64_t seed);

/// Plan file: public description without correct indices.
std::string serialize_plan(const LockingPlan& plan);
/// Reads a plan file; correct indices stay unknown. Throws ConfigError.
LockingPlan parse_plan(const Config& cfg);
/// Secret file: correct key in hex plus its bit length.
std::string serialize_secret(const LockedCircuit& lc);
/// Sets correct indices from a secret file. Throws InvalidKey, ConfigError.
void apply_secret(LockedCircuit& lc, const Config& secret);

struct ObfuscateOptions {
    std::vector<std::vector<std::string>> pairing;  // empty: all role-tagged devices, paired by role
    std::vector<std::size_t> decoys_per_group;      // one entry applies to all groups
    std::size_t target_size = 0;                    // 0: no balancing
    bool screen_decoys = true;                      // keep only decoys that break the spec alone
    bool prune = true;                              // techniques 2 and 3, needs a sweep
    std::size_t sweep_cap = 100000;                 // above this, pruning uses a sample
    std::size_t sample_size = 2000;
    std::uint64_t seed = 1;
    SpecWindow spec;
};

struct LockReport {
    LockedCircuit locked;
    std::size_t initial_key_length = 0;
    std::size_t initial_arrangements_added = 0;
    std::size_t key_length = 0;
    std::size_t arrangements_added = 0;
    double valid_keyspace = 0.0;
    std::size_t raw_bits = 0;
    std::optional<double> correct_rate;  // from the final sweep, when one ran
    std::size_t swept_keys = 0;
    std::vector<std::string> log;
};

/// Pair, generate decoys, screen them, sweep, prune (techniques 2 and 3),
/// balance (technique 1) and shuffle (technique 4). Throws NoCandidates and
/// propagates sub-operation errors.
LockReport obfuscate(const Circuit& c, const ObfuscateOptions& opt, const KeyEvaluator& eval);

}  // namespace ldelock
