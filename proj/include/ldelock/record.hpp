#pragma once

#include <optional>
#include <string>

#include "ldelock/key.hpp"
#include "ldelock/metrics.hpp"

namespace ldelock {

/// Outcome of evaluating one key.
struct SweepRecord {
    Key key;
    bool valid = false;
    std::optional<MetricsReport> metrics;  // absent for invalid or failed keys
    KeyClass cls = KeyClass::Incorrect;
    /// Convergence strategy on success ("newton", "gmin-stepping",
    /// "supply-ramp"), otherwise "invalid-key", "nonconvergence" or
    /// "singular-matrix".
    std::string solver_status;
    double seconds = 0.0;                  // wall time, not exported to CSV
    std::optional<double> branch_current;  // A, when a branch probe is configured
};

}  // namespace ldelock
