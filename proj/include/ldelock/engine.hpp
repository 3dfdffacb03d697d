#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldelock/lde_model.hpp"
#include "ldelock/netlist.hpp"

namespace ldelock {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One entry per `Circuit::mosfets` element, in the same order.
using ResolvedParams = std::vector<DeviceParams>;

inline constexpr double kDefaultGmin = 1e-12;

/// Drain current (into the drain terminal) and its partial derivatives with
/// respect to the terminal voltages vgs, vds, vbs.
struct MosfetEval {
    double id = 0.0;
    double did_dvgs = 0.0;
    double did_dvds = 0.0;
    double did_dvbs = 0.0;
};

/// Long-channel square law with channel-length modulation and body effect.
/// Symmetric in drain/source; PMOS by sign symmetry; gmin drain-source.
MosfetEval mosfet_eval(const DeviceParams& p, Polarity polarity, double vgs, double vds, double vbs,
                       double gmin = kDefaultGmin);

enum class Region { Cutoff, Triode, Saturation };
std::string_view to_string(Region r);

struct DeviceState {
    double id = 0.0;  // channel current, positive in the normal conduction direction
    double vgs = 0.0;
    double vds = 0.0;
    double vbs = 0.0;
    Region region = Region::Cutoff;
    bool reversed = false;  // drain and source exchanged roles
};

struct OperatingPoint {
    Eigen::VectorXd node_voltages;             // indexed by NodeId, ground = 0
    std::vector<double> source_currents;       // per voltage source, see voltage_sources()
    std::vector<DeviceState> devices;          // parallel to Circuit::mosfets
    double max_residual = 0.0;                 // A
    std::string worst_node;
    int iterations = 0;
    std::string strategy;                      // "newton", "gmin-stepping" or "supply-ramp"
};

struct SolverOptions {
    double residual_tol = 1e-9;    // A
    double step_tol = 1e-9;        // V
    double gmin = kDefaultGmin;    // S, drain-source and node-to-ground
    double max_step = 0.3;         // V per Newton iteration
    int max_iterations = 200;
    double gmin_start = 1e-2;
    int ramp_steps = 10;
    /// Node voltages indexed by NodeId; zeros when absent.
    std::optional<Eigen::VectorXd> initial_guess;
};

/// Voltage sources in MNA order: V elements in netlist order, then the supply.
struct VoltageSourceRef {
    std::optional<std::size_t> element;  // nullopt for the supply
    NodeId pos = kGround;
    NodeId neg = kGround;
    double dc = 0.0;
    double ac = 0.0;
};
std::vector<VoltageSourceRef> voltage_sources(const Circuit& c);

/// Newton-Raphson on the MNA equations; falls back to gmin stepping, then to
/// a supply ramp. Throws NonConvergence.
OperatingPoint dc_operating_point(const Circuit& c, const ResolvedParams& params, const SolverOptions& opt = {});

struct SmallSignalDevice {
    double gm = 0.0;
    double gds = 0.0;
    double gmb = 0.0;
    double cgs = 0.0;
    double cgd = 0.0;
    // Terminal-referred derivatives used for stamping.
    MosfetEval terminal;
};

struct SmallSignalModel {
    std::vector<SmallSignalDevice> devices;  // parallel to Circuit::mosfets
    double gmin = kDefaultGmin;
};

SmallSignalModel linearize(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op,
                           double gmin = kDefaultGmin);

struct AcPoint {
    double frequency = 0.0;
    std::complex<double> transfer;
};

/// Log-spaced frequencies from f_start to f_stop inclusive.
std::vector<double> log_frequency_grid(double f_start, double f_stop, int points_per_decade);

/// Solves (G + jwC) x = b at each grid frequency; transfer is
/// v(probe) / (v(stimulus.positive) - v(stimulus.negative)), driven by the
/// circuit's AC sources. Throws SingularMatrix.
std::vector<AcPoint> ac_sweep(const Circuit& c, const SmallSignalModel& ss, double f_start, double f_stop,
                              int points_per_decade, InputPair stimulus, NodeId probe);

/// Circuit-level convenience: linearizes at `op` and sweeps the declared
/// .input/.output. Throws MissingDirective when either is absent.
std::vector<AcPoint> ac_sweep(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op,
                              double f_start, double f_stop, int points_per_decade);

/// Power delivered by all voltage sources (W).
double dc_power(const Circuit& c, const OperatingPoint& op);

/// Channel current of a named device. Throws UnknownDevice.
double branch_current(const Circuit& c, const OperatingPoint& op, std::string_view device_name);

}  // namespace ldelock
