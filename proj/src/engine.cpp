#include "ldelock/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ldelock/error.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

namespace {

// Row of a node in the MNA system; ground has none.
inline int row(NodeId n) { return n - 1; }

template <typename Scalar>
void stamp_admittance(Matrix<Scalar>& A, NodeId a, NodeId b, Scalar y) {
    if (a != kGround) A(row(a), row(a)) += y;
    if (b != kGround) A(row(b), row(b)) += y;
    if (a != kGround && b != kGround) {
        A(row(a), row(b)) -= y;
        A(row(b), row(a)) -= y;
    }
}

// Current g*(v(cp) - v(cn)) leaves node `op` and enters node `on`.
template <typename Scalar>
void stamp_vccs(Matrix<Scalar>& A, NodeId op, NodeId on, NodeId cp, NodeId cn, Scalar g) {
    if (op != kGround) {
        if (cp != kGround) A(row(op), row(cp)) += g;
        if (cn != kGround) A(row(op), row(cn)) -= g;
    }
    if (on != kGround) {
        if (cp != kGround) A(row(on), row(cp)) -= g;
        if (cn != kGround) A(row(on), row(cn)) += g;
    }
}

template <typename Scalar>
void stamp_voltage_source(Matrix<Scalar>& A, int branch, NodeId pos, NodeId neg) {
    if (pos != kGround) {
        A(row(pos), branch) += Scalar(1);
        A(branch, row(pos)) += Scalar(1);
    }
    if (neg != kGround) {
        A(row(neg), branch) -= Scalar(1);
        A(branch, row(neg)) -= Scalar(1);
    }
}

// Linearized drain current of a MOSFET: id = dvgs*vgs + dvds*vds + dvbs*vbs.
template <typename Scalar>
void stamp_mosfet(Matrix<Scalar>& A, const MosInstance& m, const MosfetEval& ev) {
    stamp_vccs<Scalar>(A, m.drain, m.source, m.gate, m.source, Scalar(ev.did_dvgs));
    stamp_vccs<Scalar>(A, m.drain, m.source, m.drain, m.source, Scalar(ev.did_dvds));
    stamp_vccs<Scalar>(A, m.drain, m.source, m.bulk, m.source, Scalar(ev.did_dvbs));
}

struct NmosResult {
    MosfetEval ev;
    Region region;
};

// Normal-orientation NMOS with vds >= 0; magnitudes in `p`.
NmosResult nmos_forward(const DeviceParams& p, double vgs, double vds, double vbs) {
    const double floor_arg = 0.01 * p.phi;
    double arg = p.phi - vbs;
    double dvth_dvbs = 0.0;
    if (arg > floor_arg) {
        dvth_dvbs = -p.gamma / (2.0 * std::sqrt(arg));
    } else {
        arg = floor_arg;
    }
    const double vth = p.vth0 + p.gamma * (std::sqrt(arg) - std::sqrt(p.phi));
    const double vov = vgs - vth;

    NmosResult r{};
    if (vov <= 0.0) {
        r.region = Region::Cutoff;
        return r;
    }
    const double clm = 1.0 + p.lambda * vds;
    if (vds >= vov) {
        r.region = Region::Saturation;
        r.ev.id = 0.5 * p.k * vov * vov * clm;
        r.ev.did_dvgs = p.k * vov * clm;
        r.ev.did_dvds = 0.5 * p.k * vov * vov * p.lambda;
    } else {
        r.region = Region::Triode;
        const double core = vov * vds - 0.5 * vds * vds;
        r.ev.id = p.k * core * clm;
        r.ev.did_dvgs = p.k * vds * clm;
        r.ev.did_dvds = p.k * (vov - vds) * clm + p.k * core * p.lambda;
    }
    r.ev.did_dvbs = -r.ev.did_dvgs * dvth_dvbs;
    return r;
}

struct FullEval {
    MosfetEval ev;
    Region region;
    bool reversed;
};

FullEval eval_full(const DeviceParams& p, Polarity pol, double vgs, double vds, double vbs, double gmin) {
    const double s = pol == Polarity::NMOS ? 1.0 : -1.0;
    vgs *= s;
    vds *= s;
    vbs *= s;

    FullEval out{};
    if (vds >= 0.0) {
        auto r = nmos_forward(p, vgs, vds, vbs);
        out.ev = r.ev;
        out.region = r.region;
        out.reversed = false;
    } else {
        // Source and drain exchange roles.
        auto r = nmos_forward(p, vgs - vds, -vds, vbs - vds);
        out.ev.id = -r.ev.id;
        out.ev.did_dvgs = -r.ev.did_dvgs;
        out.ev.did_dvds = r.ev.did_dvgs + r.ev.did_dvds + r.ev.did_dvbs;
        out.ev.did_dvbs = -r.ev.did_dvbs;
        out.region = r.region;
        out.reversed = true;
    }
    out.ev.id += gmin * vds;
    out.ev.did_dvds += gmin;
    // PMOS: id_p(v) = -id_n(-v); derivatives keep their sign.
    out.ev.id *= s;
    return out;
}

class DcSystem {
public:
    DcSystem(const Circuit& c, const ResolvedParams& params, const SolverOptions& opt)
        : c_(c), params_(params), opt_(opt), sources_(voltage_sources(c)) {
        if (params.size() != c.mosfets.size())
            throw Error("resolved parameter count does not match the MOSFET count");
        nodes_ = static_cast<int>(c.node_count()) - 1;
        size_ = nodes_ + static_cast<int>(sources_.size());
    }

    int size() const { return size_; }
    int nodes() const { return nodes_; }
    const std::vector<VoltageSourceRef>& sources() const { return sources_; }

    double voltage(const Eigen::VectorXd& x, NodeId n) const { return n == kGround ? 0.0 : x(row(n)); }

    // Residual F (currents leaving each node; source equations) and Jacobian J.
    void assemble(const Eigen::VectorXd& x, double gshunt, double scale, Eigen::MatrixXd& J,
                  Eigen::VectorXd& F) const {
        J.setZero(size_, size_);
        F.setZero(size_);
        for (int i = 0; i < nodes_; ++i) {
            J(i, i) += gshunt;
            F(i) += gshunt * x(i);
        }
        for (const auto& e : c_.elements) {
            const double va = voltage(x, e.pos), vb = voltage(x, e.neg);
            switch (e.kind) {
                case ElementKind::R: {
                    const double g = 1.0 / e.value;
                    stamp_admittance<double>(J, e.pos, e.neg, g);
                    add(F, e.pos, g * (va - vb));
                    add(F, e.neg, -g * (va - vb));
                    break;
                }
                case ElementKind::Idc:
                    add(F, e.pos, scale * e.value);
                    add(F, e.neg, -scale * e.value);
                    break;
                case ElementKind::C:
                case ElementKind::Vdc:
                case ElementKind::Vac: break;
            }
        }
        for (std::size_t k = 0; k < sources_.size(); ++k) {
            const auto& s = sources_[k];
            const int br = nodes_ + static_cast<int>(k);
            stamp_voltage_source<double>(J, br, s.pos, s.neg);
            const double i = x(br);
            add(F, s.pos, i);
            add(F, s.neg, -i);
            F(br) = voltage(x, s.pos) - voltage(x, s.neg) - scale * s.dc;
        }
        for (std::size_t d = 0; d < c_.mosfets.size(); ++d) {
            const auto& m = c_.mosfets[d];
            const double vs = voltage(x, m.source);
            auto r = eval_full(params_[d], m.polarity, voltage(x, m.gate) - vs, voltage(x, m.drain) - vs,
                               voltage(x, m.bulk) - vs, opt_.gmin);
            stamp_mosfet<double>(J, m, r.ev);
            add(F, m.drain, r.ev.id);
            add(F, m.source, -r.ev.id);
        }
    }

    // Damped Newton from x. Returns true on convergence.
    bool newton(Eigen::VectorXd& x, double gshunt, double scale, int& iterations) const {
        Eigen::MatrixXd J;
        Eigen::VectorXd F;
        double last_step = std::numeric_limits<double>::infinity();
        for (int it = 0; it <= opt_.max_iterations; ++it) {
            assemble(x, gshunt, scale, J, F);
            if (!F.allFinite()) return false;
            const double kcl = nodes_ > 0 ? F.head(nodes_).cwiseAbs().maxCoeff() : 0.0;
            const double veq = size_ > nodes_ ? F.tail(size_ - nodes_).cwiseAbs().maxCoeff() : 0.0;
            if (last_step < opt_.step_tol && kcl < opt_.residual_tol && veq < opt_.step_tol) return true;
            if (it == opt_.max_iterations) break;

            Eigen::VectorXd dx = Eigen::PartialPivLU<Eigen::MatrixXd>(J).solve(-F);
            if (!dx.allFinite()) return false;
            const double biggest = nodes_ > 0 ? dx.head(nodes_).cwiseAbs().maxCoeff() : 0.0;
            if (biggest > opt_.max_step) dx *= opt_.max_step / biggest;
            x += dx;
            last_step = nodes_ > 0 ? dx.head(nodes_).cwiseAbs().maxCoeff() : 0.0;
            ++iterations;
        }
        return false;
    }

    // Largest KCL residual and its node at x with final gmin and full sources.
    std::pair<double, std::string> worst(const Eigen::VectorXd& x) const {
        Eigen::MatrixXd J;
        Eigen::VectorXd F;
        assemble(x, opt_.gmin, 1.0, J, F);
        double w = 0.0;
        std::string name = "-";
        for (int i = 0; i < nodes_; ++i) {
            double r = std::abs(F(i));
            if (!(r <= w)) {
                w = r;
                name = c_.node_name(static_cast<NodeId>(i + 1));
            }
        }
        return {w, name};
    }

    OperatingPoint finish(const Eigen::VectorXd& x, int iterations, std::string strategy) const {
        OperatingPoint op;
        op.node_voltages.setZero(static_cast<Eigen::Index>(c_.node_count()));
        for (int i = 0; i < nodes_; ++i) op.node_voltages(i + 1) = x(i);
        for (std::size_t k = 0; k < sources_.size(); ++k) op.source_currents.push_back(x(nodes_ + static_cast<int>(k)));
        for (std::size_t d = 0; d < c_.mosfets.size(); ++d) {
            const auto& m = c_.mosfets[d];
            const double vs = voltage(x, m.source);
            DeviceState st;
            st.vgs = voltage(x, m.gate) - vs;
            st.vds = voltage(x, m.drain) - vs;
            st.vbs = voltage(x, m.bulk) - vs;
            auto r = eval_full(params_[d], m.polarity, st.vgs, st.vds, st.vbs, opt_.gmin);
            st.region = r.region;
            st.reversed = r.reversed;
            st.id = m.polarity == Polarity::NMOS ? r.ev.id : -r.ev.id;
            op.devices.push_back(st);
        }
        auto [w, name] = worst(x);
        op.max_residual = w;
        op.worst_node = name;
        op.iterations = iterations;
        op.strategy = std::move(strategy);
        return op;
    }

private:
    void add(Eigen::VectorXd& F, NodeId n, double v) const {
        if (n != kGround) F(row(n)) += v;
    }

    const Circuit& c_;
    const ResolvedParams& params_;
    const SolverOptions& opt_;
    std::vector<VoltageSourceRef> sources_;
    int nodes_ = 0;
    int size_ = 0;
};

}  // namespace

MosfetEval mosfet_eval(const DeviceParams& p, Polarity polarity, double vgs, double vds, double vbs, double gmin) {
    return eval_full(p, polarity, vgs, vds, vbs, gmin).ev;
}

std::string_view to_string(Region r) {
    switch (r) {
        case Region::Cutoff: return "cutoff";
        case Region::Triode: return "triode";
        case Region::Saturation: return "saturation";
    }
    return "?";
}

std::vector<VoltageSourceRef> voltage_sources(const Circuit& c) {
    std::vector<VoltageSourceRef> out;
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
        const auto& e = c.elements[i];
        if (e.is_voltage_source()) out.push_back({i, e.pos, e.neg, e.value, e.ac_magnitude});
    }
    if (c.supply) out.push_back({std::nullopt, c.supply->node, kGround, c.supply->voltage, 0.0});
    return out;
}

OperatingPoint dc_operating_point(const Circuit& c, const ResolvedParams& params, const SolverOptions& opt) {
    DcSystem sys(c, params, opt);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(sys.size());
    if (opt.initial_guess) {
        const auto& g = *opt.initial_guess;
        if (g.size() != static_cast<Eigen::Index>(c.node_count()))
            throw Error("initial guess size does not match the node count");
        for (int i = 0; i < sys.nodes(); ++i) x0(i) = g(i + 1);
    }

    int iterations = 0;
    Eigen::VectorXd x = x0;
    if (sys.newton(x, opt.gmin, 1.0, iterations)) return sys.finish(x, iterations, "newton");

    // gmin stepping: node-to-ground shunt walked down to the final gmin.
    x = x0;
    bool ok = true;
    double g = opt.gmin_start;
    double factor = 10.0;
    if (!sys.newton(x, g, 1.0, iterations)) ok = false;
    while (ok && g > opt.gmin) {
        double next = std::max(g / factor, opt.gmin);
        Eigen::VectorXd trial = x;
        if (sys.newton(trial, next, 1.0, iterations)) {
            x = trial;
            g = next;
            factor = std::min(factor * 2.0, 10.0);
        } else {
            factor = std::sqrt(factor);
            if (factor < 1.05) ok = false;
        }
    }
    if (ok) return sys.finish(x, iterations, "gmin-stepping");

    // Supply ramp: all independent sources scaled from 1/steps to 1.
    x = Eigen::VectorXd::Zero(sys.size());
    ok = true;
    for (int s = 1; s <= opt.ramp_steps && ok; ++s) {
        const double scale = static_cast<double>(s) / opt.ramp_steps;
        ok = sys.newton(x, opt.gmin, scale, iterations);
    }
    if (ok) return sys.finish(x, iterations, "supply-ramp");

    auto [w, name] = sys.worst(x);
    throw NonConvergence("DC operating point did not converge (worst node " + name + ", residual " +
                             format_exact(w) + " A)",
                         name, w);
}

SmallSignalModel linearize(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op, double gmin) {
    SmallSignalModel ss;
    ss.gmin = gmin;
    for (std::size_t d = 0; d < c.mosfets.size(); ++d) {
        const auto& m = c.mosfets[d];
        const auto& p = params[d];
        const auto& st = op.devices.at(d);
        auto r = eval_full(p, m.polarity, st.vgs, st.vds, st.vbs, gmin);
        SmallSignalDevice dev;
        dev.terminal = r.ev;
        if (!r.reversed) {
            dev.gm = r.ev.did_dvgs;
            dev.gds = r.ev.did_dvds;
            dev.gmb = r.ev.did_dvbs;
        } else {
            dev.gm = -r.ev.did_dvgs;
            dev.gds = r.ev.did_dvgs + r.ev.did_dvds + r.ev.did_dvbs;
            dev.gmb = -r.ev.did_dvbs;
        }
        const double cov = p.overlap_cap_per_width * p.width;
        switch (r.region) {
            case Region::Saturation:
                dev.cgs = 2.0 / 3.0 * p.cox_area_cap + cov;
                dev.cgd = cov;
                break;
            case Region::Triode:
                dev.cgs = 0.5 * p.cox_area_cap + cov;
                dev.cgd = 0.5 * p.cox_area_cap + cov;
                break;
            case Region::Cutoff:
                dev.cgs = cov;
                dev.cgd = cov;
                break;
        }
        // cgs/cgd refer to the effective source/drain.
        if (r.reversed) std::swap(dev.cgs, dev.cgd);
        ss.devices.push_back(dev);
    }
    return ss;
}

std::vector<double> log_frequency_grid(double f_start, double f_stop, int points_per_decade) {
    if (!(f_start > 0) || !(f_stop > f_start) || points_per_decade < 1)
        throw Error("frequency grid needs 0 < f_start < f_stop and points_per_decade >= 1");
    const double decades = std::log10(f_stop / f_start);
    const int n = static_cast<int>(std::ceil(decades * points_per_decade - 1e-9));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        double f = f_start * std::pow(10.0, static_cast<double>(i) / points_per_decade);
        out.push_back(std::min(f, f_stop));
    }
    out.back() = f_stop;
    return out;
}

std::vector<AcPoint> ac_sweep(const Circuit& c, const SmallSignalModel& ss, double f_start, double f_stop,
                              int points_per_decade, InputPair stimulus, NodeId probe) {
    const auto sources = voltage_sources(c);
    const int nodes = static_cast<int>(c.node_count()) - 1;
    const int n = nodes + static_cast<int>(sources.size());

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n);
    for (int i = 0; i < nodes; ++i) G(i, i) += ss.gmin;
    for (const auto& e : c.elements) {
        if (e.kind == ElementKind::R) stamp_admittance<double>(G, e.pos, e.neg, 1.0 / e.value);
        if (e.kind == ElementKind::C) stamp_admittance<double>(C, e.pos, e.neg, e.value);
    }
    for (std::size_t k = 0; k < sources.size(); ++k) {
        const int br = nodes + static_cast<int>(k);
        stamp_voltage_source<double>(G, br, sources[k].pos, sources[k].neg);
        b(br) = sources[k].ac;
    }
    for (std::size_t d = 0; d < c.mosfets.size(); ++d) {
        const auto& m = c.mosfets[d];
        const auto& dev = ss.devices.at(d);
        stamp_mosfet<double>(G, m, dev.terminal);
        stamp_admittance<double>(C, m.gate, m.source, dev.cgs);
        stamp_admittance<double>(C, m.gate, m.drain, dev.cgd);
    }

    auto node_v = [&](const Eigen::VectorXcd& x, NodeId id) -> std::complex<double> {
        return id == kGround ? std::complex<double>{} : x(row(id));
    };

    std::vector<AcPoint> out;
    for (double f : log_frequency_grid(f_start, f_stop, points_per_decade)) {
        const double w = 2.0 * std::numbers::pi * f;
        Eigen::MatrixXcd A = G.cast<std::complex<double>>() + std::complex<double>(0.0, w) * C.cast<std::complex<double>>();
        Eigen::VectorXcd x = Eigen::PartialPivLU<Eigen::MatrixXcd>(A).solve(b);
        if (!x.allFinite()) throw SingularMatrix("singular AC system at " + format_exact(f) + " Hz", f);
        const auto vin = node_v(x, stimulus.positive) - node_v(x, stimulus.negative);
        if (std::abs(vin) == 0.0)
            throw SingularMatrix("no differential stimulus reaches the input at " + format_exact(f) + " Hz", f);
        out.push_back({f, node_v(x, probe) / vin});
    }
    return out;
}

std::vector<AcPoint> ac_sweep(const Circuit& c, const ResolvedParams& params, const OperatingPoint& op,
                              double f_start, double f_stop, int points_per_decade) {
    if (!c.input) throw MissingDirective("circuit has no .input directive");
    if (!c.output) throw MissingDirective("circuit has no .output directive");
    return ac_sweep(c, linearize(c, params, op), f_start, f_stop, points_per_decade, *c.input, *c.output);
}

double dc_power(const Circuit& c, const OperatingPoint& op) {
    const auto sources = voltage_sources(c);
    double p = 0.0;
    for (std::size_t k = 0; k < sources.size(); ++k) {
        const double v = op.node_voltages(sources[k].pos) - op.node_voltages(sources[k].neg);
        // Branch current flows from pos through the source, so delivered power is -v*i.
        p += -v * op.source_currents.at(k);
    }
    return p;
}

double branch_current(const Circuit& c, const OperatingPoint& op, std::string_view device_name) {
    auto idx = c.find_mosfet(device_name);
    if (!idx) throw UnknownDevice("unknown device '" + std::string(device_name) + "'");
    return op.devices.at(*idx).id;
}

}  // namespace ldelock
