#pragma once

#include <string_view>

#include "ldelock/locking.hpp"
#include "ldelock/netlist.hpp"

namespace ldelock {

/// Netlist text of the bundled class-AB OTA (also shipped as data/ota.sp).
std::string_view builtin_ota_netlist();

/// 33-transistor class-AB OTA with folded summing stage, tagged by role.
/// The testbench closes a slow DC servo from out to inn so the open-loop
/// gain is read at the lowest grid frequency.
Circuit builtin_ota();

/// Ring of n inverters with 50 fF of wiring per stage. Inverter i drives
/// node n<i+1> and its PMOS sits in key slot @inv<i>; NMOS devices are
/// baseline. Throws EvenStageCount.
Circuit builtin_ro(int n_stages);

/// Six pair groups with four options each (4096 keys); correct option first.
/// The two summing-circuit groups are flagged symmetric.
LockingPlan desk_plan();

/// 6 pairs + 1 single, 28 decoy pairs and 1 decoy single: 36 key bits.
LockingPlan plan_36bit(std::uint64_t seed = 36);

/// 8 pairs + 1 single, 31 decoy pairs and 1 decoy single: 41 key bits.
LockingPlan plan_41bit(std::uint64_t seed = 41);

}  // namespace ldelock
