#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ldelock/locking.hpp"
#include "ldelock/sweep.hpp"

namespace ldelock {

/// A working chip: answers metric queries, never the key.
class Oracle {
public:
    /// `instance_seed` selects a mismatch-sampled instance; nullopt is the
    /// noiseless nominal design. Needs the correct key in `lc`.
    Oracle(const LockedCircuit& lc, EvalContext ctx, std::optional<std::uint64_t> instance_seed);

    const MetricsReport& query() const;
    std::size_t queries() const { return queries_.load(); }

private:
    MetricsReport metrics_;
    mutable std::atomic<std::size_t> queries_{0};
};

struct AttackReport {
    std::string kind;
    std::size_t queries = 0;
    std::size_t simulations = 0;
    std::vector<std::string> candidates;  // key hex
    bool success = false;
    std::optional<double> projected_seconds;
    std::map<std::string, double> figures;
    std::vector<std::string> notes;
};

std::string to_json(const AttackReport& r);
std::string to_text(const AttackReport& r);

/// keys * seconds_per_key / parallelism.
double projected_seconds(double keys, double seconds_per_key, unsigned parallelism = 1);

/// Projects exhaustive search over the valid keyspace. When the projection
/// fits `budget_seconds` and an oracle is given, runs the search and reports
/// keys whose metrics all match the oracle within `rel_tol`.
AttackReport brute_force_projection(const LockedCircuit& lc, double seconds_per_key, unsigned parallelism,
                                    double budget_seconds, const Oracle* oracle = nullptr,
                                    const EvalContext* ctx = nullptr, double rel_tol = 0.01);

/// Which metrics a candidate must reproduce.
struct MetricMask {
    bool gain = false;
    bool pm = false;
    bool bw = false;
    bool power = false;
    bool gm = false;

    static MetricMask all() { return {true, true, true, true, true}; }
    /// Comma list of gain, pm, bw, power, gm or "all". Throws ConfigError.
    static MetricMask parse(std::string_view s);
    std::string describe() const;
};

/// True when every masked metric is within rel_tol of the reference.
bool metrics_match(const MetricsReport& candidate, const MetricsReport& reference, MetricMask mask, double rel_tol);

/// Enumerates the options of every group touching `block`; all other groups
/// stay at their correct option (the attacker's best case). Reports matches
/// and false accepts (matches whose block options are not the correct ones).
AttackReport divide_and_conquer(const LockedCircuit& lc, const Oracle& oracle, const std::vector<std::string>& block,
                                MetricMask mask, double rel_tol, const EvalContext& ctx, unsigned jobs);

/// Envelope of Correct-key power, then every valid key inside it. Throws
/// EmptyRecords.
AttackReport power_window_analysis(const std::vector<SweepRecord>& records);

/// Fraction of the design's transistors that sit in key groups.
AttackReport removal_analysis(const LockedCircuit& lc);

struct BranchSeries {
    std::string device;
    std::vector<double> currents;  // A, per key; NaN where the solver failed
    double min = 0.0;
    double max = 0.0;
    double spread = 1.0;  // max / min of |I| over converged keys
};

/// Throws UnknownDevice.
BranchSeries branch_current_sweep(const LockedCircuit& lc, const std::vector<Key>& keys, const std::string& device,
                                  const EvalContext& ctx, unsigned jobs);

}  // namespace ldelock
