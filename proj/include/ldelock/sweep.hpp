#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ldelock/engine.hpp"
#include "ldelock/lde_model.hpp"
#include "ldelock/locking.hpp"
#include "ldelock/metrics.hpp"
#include "ldelock/record.hpp"

namespace ldelock {

/// Everything needed to turn an arrangement assignment into metrics.
struct EvalContext {
    ModelCard card = model_card("n65");
    LdeTable lde = default_lde_table(1.0);
    MismatchTable mismatch = default_mismatch_table();
    SpecWindow spec;
    FrequencyGrid grid;
    SolverOptions solver;
    std::optional<std::string> branch_device;
    /// Evaluates a mismatch-sampled instance instead of the nominal one.
    std::optional<std::uint64_t> mismatch_seed;

    /// Stable text of every field, for hashing.
    std::string describe() const;
};

/// Per-device parameters with arrangements applied and, when the context
/// asks for it, one mismatch instance. Draws are shared by all devices of the
/// same (polarity, flavor, arrangement) in an instance.
ResolvedParams resolve_params(const Circuit& c, const std::vector<Arrangement>& arrangements, const EvalContext& ctx);

/// Valid keys in lexicographic order of group option indices. Throws
/// KeyspaceTooLarge.
std::vector<Key> enumerate_keys(const LockedCircuit& lc, std::size_t cap = 1'000'000);

/// Distinct valid keys, uniform without replacement, in draw order. With
/// `include_correct` the correct key replaces the last draw unless drawn
/// already. Throws SampleTooLarge.
std::vector<Key> sample_keys(const LockedCircuit& lc, std::size_t n, std::uint64_t seed, bool include_correct = false);

/// Never throws for key or solver problems; they are recorded.
SweepRecord evaluate_key(const LockedCircuit& lc, const Key& key, const EvalContext& ctx);

struct SweepOptions {
    unsigned jobs = 1;
    std::optional<std::filesystem::path> checkpoint;
    std::size_t checkpoint_every = 64;
    /// Mixed into the checkpoint header; callers pass their config hash.
    std::string config_hash;
};

/// Records in key order regardless of `jobs`. Resumes from a checkpoint with
/// a matching header, else throws ResumeMismatch.
std::vector<SweepRecord> run_sweep(const LockedCircuit& lc, const std::vector<Key>& keys, const EvalContext& ctx,
                                   const SweepOptions& opt = {});

/// Adapter for the pruning passes.
KeyEvaluator make_evaluator(const EvalContext& ctx, unsigned jobs);

struct SweepSummary {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t nearly_correct = 0;
    std::size_t incorrect = 0;
    std::size_t invalid = 0;
    std::size_t failed = 0;  // valid keys without metrics
    double correct_rate = 0.0;
    std::map<int, std::size_t> gain_histogram;  // 1 dB bins keyed by floor(gain)
    std::optional<std::pair<double, double>> correct_power;  // W
    std::optional<std::pair<double, double>> wrong_power;    // W, valid non-Correct keys
    std::optional<std::pair<double, double>> gain_range;     // dB
    /// Empty 1 dB bins directly below the correct threshold, as [low, high).
    std::optional<std::pair<double, double>> gap_below_threshold;
    double total_seconds = 0.0;
    double mean_key_seconds = 0.0;
};

/// Throws EmptyRecords.
SweepSummary summarize(const std::vector<SweepRecord>& records, const SpecWindow& spec);

/// key_hex,valid,gain_db,pm_deg,bw_hz,power_w,gm_s,class,solver_status
std::string csv_text(const std::vector<SweepRecord>& records);
void export_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path);
/// Reads a CSV written by export_csv. Key length comes from `key_bits`.
std::vector<SweepRecord> load_csv(const std::filesystem::path& path, std::size_t key_bits);

std::string summary_json(const SweepSummary& s);
void export_summary_json(const SweepSummary& s, const std::filesystem::path& path);

/// Writes <stem>.csv (key_index plus metrics) and <stem>.svg (gain scatter).
void export_plotdata(const std::vector<SweepRecord>& records, const std::filesystem::path& dir, const std::string& stem,
                     const SpecWindow& spec);

struct Persistence {
    std::size_t samples = 0;
    std::size_t correct = 0;
    double fraction = 0.0;
};

/// Re-evaluates one key on `samples` mismatch instances.
Persistence monte_carlo_persistence(const LockedCircuit& lc, const Key& key, const EvalContext& ctx,
                                    std::size_t samples, std::uint64_t seed, unsigned jobs);

}  // namespace ldelock
