#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ldelock/device.hpp"

namespace ldelock {

using NodeId = int;
inline constexpr NodeId kGround = 0;

/// Placeholder for an arrangement that is chosen by a key group at evaluation time.
struct KeySlot {
    std::string group;
    friend bool operator==(const KeySlot&, const KeySlot&) = default;
};

using ArrangementSlot = std::variant<Arrangement, KeySlot>;

struct MosInstance {
    std::string name;
    NodeId drain = kGround;
    NodeId gate = kGround;
    NodeId source = kGround;
    NodeId bulk = kGround;
    Polarity polarity = Polarity::NMOS;
    Flavor flavor = Flavor::SVT;
    double width = 0.0;   // m, per finger
    double length = 0.0;  // m
    int multiplier = 1;   // parallel fingers
    ArrangementSlot arrangement = Arrangement::BL;
    std::string role;     // subcircuit tag, e.g. "input differential pair"
    std::size_t line = 0;

    DeviceClass device_class() const { return {polarity, flavor}; }
    bool keyed() const { return std::holds_alternative<KeySlot>(arrangement); }
};

enum class ElementKind { R, C, Vdc, Idc, Vac };

/// Two-terminal passive or independent source. For V/I sources current flows
/// from `pos` through the element to `neg`.
struct Element {
    std::string name;
    ElementKind kind = ElementKind::R;
    NodeId pos = kGround;
    NodeId neg = kGround;
    double value = 0.0;         // ohms | farads | volts (DC) | amps (DC)
    double ac_magnitude = 0.0;  // Vac only
    std::size_t line = 0;

    bool is_voltage_source() const { return kind == ElementKind::Vdc || kind == ElementKind::Vac; }
};

struct Supply {
    NodeId node = kGround;
    double voltage = 0.0;
};

struct InputPair {
    NodeId positive = kGround;
    NodeId negative = kGround;
};

/// Flat transistor-level netlist. Nodes are created on first use; ground
/// ("0" or "gnd") is always index 0.
class Circuit {
public:
    Circuit();

    NodeId add_node(std::string_view name);
    /// Throws UnknownNode.
    NodeId node(std::string_view name) const;
    std::optional<NodeId> find_node(std::string_view name) const;
    const std::string& node_name(NodeId id) const { return node_names_.at(static_cast<std::size_t>(id)); }
    std::size_t node_count() const { return node_names_.size(); }

    /// Throws UnknownDevice.
    const MosInstance& mosfet(std::string_view name) const;
    std::optional<std::size_t> find_mosfet(std::string_view name) const;

    std::string title;
    std::vector<MosInstance> mosfets;
    std::vector<Element> elements;
    std::optional<Supply> supply;
    std::optional<InputPair> input;
    std::optional<NodeId> output;

private:
    std::vector<std::string> node_names_;
    std::unordered_map<std::string, NodeId> node_index_;
};

/// Name-based structural equality (node indices may differ).
bool structurally_equal(const Circuit& a, const Circuit& b);

/// Parses the SPICE-subset netlist. Throws SyntaxError, UnknownNode,
/// DuplicateName, MissingDirective.
Circuit parse_netlist(std::string_view text);

/// Canonical text form: cards sorted by kind then name, values in base units.
std::string serialize_netlist(const Circuit& c);

struct Diagnostic {
    enum class Kind { FloatingNode, DuplicateName, Disconnected, BadValue, MissingSupply };
    Kind kind;
    std::string subject;
    std::string message;

    friend bool operator==(const Diagnostic& a, const Diagnostic& b) {
        return a.kind == b.kind && a.subject == b.subject;
    }
};

std::string_view to_string(Diagnostic::Kind k);

/// Empty iff the circuit is well formed.
std::vector<Diagnostic> validate_circuit(const Circuit& c);

/// Folds M-fingers into width (W*M, M=1).
Circuit merge_fingers(Circuit c);

}  // namespace ldelock
