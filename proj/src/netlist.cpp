#include "ldelock/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "ldelock/error.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

namespace {

std::string canonical_node(std::string_view name) {
    std::string n = to_lower(name);
    if (n == "gnd") n = "0";
    return n;
}

struct Token {
    std::string text;
    std::size_t column = 0;
};

struct Line {
    std::vector<Token> tokens;
    std::size_t number = 0;
};

// Splits one physical line into tokens. Double quotes group whitespace;
// ';' starts a comment outside quotes.
std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size() || line[i] == ';') break;
        Token tok;
        tok.column = i + 1;
        bool quoted = false;
        while (i < line.size()) {
            char ch = line[i];
            if (ch == '"') {
                quoted = !quoted;
                ++i;
                continue;
            }
            if (!quoted && (std::isspace(static_cast<unsigned char>(ch)) || ch == ';')) break;
            tok.text.push_back(ch);
            ++i;
        }
        if (quoted) throw SyntaxError(line_no, tok.column, "unterminated quote");
        out.push_back(std::move(tok));
    }
    return out;
}

std::vector<Line> logical_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        ++line_no;
        pos = end + 1;

        std::size_t first = raw.find_first_not_of(" \t");
        if (first == std::string_view::npos) continue;
        if (raw[first] == '*') continue;
        if (raw[first] == '+') {
            if (lines.empty()) throw SyntaxError(line_no, first + 1, "continuation without a card");
            std::string body(raw);
            body[first] = ' ';
            auto more = tokenize(body, line_no);
            lines.back().tokens.insert(lines.back().tokens.end(), more.begin(), more.end());
            continue;
        }
        auto toks = tokenize(raw, line_no);
        if (!toks.empty()) lines.push_back({std::move(toks), line_no});
        if (end == text.size()) break;
    }
    return lines;
}

double value_or_throw(const Token& tok, std::size_t line, std::string_view what) {
    auto v = parse_si(tok.text);
    if (!v) throw SyntaxError(line, tok.column, "bad " + std::string(what) + " '" + tok.text + "'");
    return *v;
}

struct PendingDirective {
    std::vector<Token> tokens;
    std::size_t line;
};

class Parser {
public:
    Circuit parse(std::string_view text) {
        for (const auto& line : logical_lines(text)) card(line);
        resolve_directives();
        return std::move(circuit_);
    }

private:
    void claim_name(const std::string& name, const Line& line) {
        if (!names_.insert(name).second)
            throw DuplicateName("line " + std::to_string(line.number) + ": duplicate element name " + name);
    }

    NodeId node_of(const Token& tok) { return circuit_.add_node(canonical_node(tok.text)); }

    void card(const Line& line) {
        const auto& head = line.tokens.front();
        if (head.text[0] == '.') {
            directive(line);
            return;
        }
        switch (std::tolower(static_cast<unsigned char>(head.text[0]))) {
            case 'm': mosfet(line); break;
            case 'r':
            case 'c':
            case 'v':
            case 'i': two_terminal(line); break;
            default:
                throw SyntaxError(line.number, head.column, "unsupported card '" + head.text + "'");
        }
    }

    void mosfet(const Line& line) {
        const auto& t = line.tokens;
        if (t.size() < 6)
            throw SyntaxError(line.number, t.front().column, "MOSFET needs d g s b and a model");
        MosInstance m;
        m.name = to_upper(t[0].text);
        m.line = line.number;
        m.drain = node_of(t[1]);
        m.gate = node_of(t[2]);
        m.source = node_of(t[3]);
        m.bulk = node_of(t[4]);
        auto pol = parse_polarity(t[5].text);
        if (!pol) throw SyntaxError(line.number, t[5].column, "model must be NMOS or PMOS, got '" + t[5].text + "'");
        m.polarity = *pol;

        bool have_w = false, have_l = false;
        for (std::size_t i = 6; i < t.size(); ++i) {
            auto eq = t[i].text.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == t[i].text.size())
                throw SyntaxError(line.number, t[i].column, "expected KEY=VALUE, got '" + t[i].text + "'");
            std::string key = to_lower(std::string_view(t[i].text).substr(0, eq));
            std::string val = t[i].text.substr(eq + 1);
            Token vt{val, t[i].column + eq + 1};
            if (key == "w") {
                m.width = value_or_throw(vt, line.number, "width");
                have_w = true;
            } else if (key == "l") {
                m.length = value_or_throw(vt, line.number, "length");
                have_l = true;
            } else if (key == "vt") {
                auto f = parse_flavor(val);
                if (!f) throw SyntaxError(line.number, vt.column, "VT must be HVT, SVT or LVT");
                m.flavor = *f;
            } else if (key == "arr") {
                if (val[0] == '@') {
                    std::string id = val.substr(1);
                    bool ok = !id.empty() && std::all_of(id.begin(), id.end(), [](unsigned char c) {
                        return std::isalnum(c) || c == '_' || c == '-';
                    });
                    if (!ok) throw SyntaxError(line.number, vt.column, "bad key slot id '" + val + "'");
                    m.arrangement = KeySlot{to_lower(id)};
                } else {
                    auto a = parse_arrangement(val);
                    if (!a)
                        throw SyntaxError(line.number, vt.column,
                                          "arrangement must be BL, SP, SOD or @group, got '" + val + "'");
                    m.arrangement = *a;
                }
            } else if (key == "m") {
                double mult = value_or_throw(vt, line.number, "multiplier");
                if (mult < 1 || mult != static_cast<int>(mult))
                    throw SyntaxError(line.number, vt.column, "multiplier must be a positive integer");
                m.multiplier = static_cast<int>(mult);
            } else if (key == "role") {
                m.role = val;
            } else {
                throw SyntaxError(line.number, t[i].column, "unknown MOSFET parameter '" + key + "'");
            }
        }
        if (!have_w) throw SyntaxError(line.number, t.front().column, "missing W on " + m.name);
        if (!have_l) throw SyntaxError(line.number, t.front().column, "missing L on " + m.name);
        if (m.width <= 0 || m.length <= 0)
            throw SyntaxError(line.number, t.front().column, "W and L must be positive on " + m.name);
        claim_name(m.name, line);
        circuit_.mosfets.push_back(std::move(m));
    }

    void two_terminal(const Line& line) {
        const auto& t = line.tokens;
        Element e;
        e.name = to_upper(t[0].text);
        e.line = line.number;
        char kind = static_cast<char>(std::tolower(static_cast<unsigned char>(e.name[0])));
        if (t.size() < 4) throw SyntaxError(line.number, t[0].column, "element needs two nodes and a value");
        e.pos = node_of(t[1]);
        e.neg = node_of(t[2]);

        if (kind == 'r' || kind == 'c') {
            if (t.size() != 4) throw SyntaxError(line.number, t[4].column, "unexpected token '" + t[4].text + "'");
            e.kind = kind == 'r' ? ElementKind::R : ElementKind::C;
            e.value = value_or_throw(t[3], line.number, "value");
            if (e.kind == ElementKind::R && e.value <= 0)
                throw SyntaxError(line.number, t[3].column, "resistance must be positive");
            if (e.kind == ElementKind::C && e.value < 0)
                throw SyntaxError(line.number, t[3].column, "capacitance must be non-negative");
        } else {
            e.kind = kind == 'v' ? ElementKind::Vdc : ElementKind::Idc;
            std::size_t i = 3;
            bool have_dc = false;
            while (i < t.size()) {
                if (iequals(t[i].text, "dc")) {
                    if (i + 1 >= t.size()) throw SyntaxError(line.number, t[i].column, "DC needs a value");
                    e.value = value_or_throw(t[i + 1], line.number, "DC value");
                    have_dc = true;
                    i += 2;
                } else if (iequals(t[i].text, "ac")) {
                    if (kind != 'v') throw SyntaxError(line.number, t[i].column, "AC only supported on V sources");
                    if (i + 1 >= t.size()) throw SyntaxError(line.number, t[i].column, "AC needs a magnitude");
                    e.ac_magnitude = value_or_throw(t[i + 1], line.number, "AC magnitude");
                    e.kind = ElementKind::Vac;
                    i += 2;
                } else if (!have_dc) {
                    e.value = value_or_throw(t[i], line.number, "value");
                    have_dc = true;
                    ++i;
                } else {
                    throw SyntaxError(line.number, t[i].column, "unexpected token '" + t[i].text + "'");
                }
            }
        }
        claim_name(e.name, line);
        circuit_.elements.push_back(std::move(e));
    }

    void directive(const Line& line) {
        std::string d = to_lower(line.tokens.front().text);
        const auto& t = line.tokens;
        if (d == ".title") {
            std::string title;
            for (std::size_t i = 1; i < t.size(); ++i) title += (i > 1 ? " " : "") + t[i].text;
            circuit_.title = title;
        } else if (d == ".supply" || d == ".input" || d == ".output") {
            std::size_t want = d == ".output" ? 2 : 3;
            if (t.size() != want)
                throw SyntaxError(line.number, t.front().column, d + " expects " + std::to_string(want - 1) + " arguments");
            if (d == ".supply" && supply_) throw SyntaxError(line.number, t.front().column, "duplicate .supply");
            if (d == ".input" && input_) throw SyntaxError(line.number, t.front().column, "duplicate .input");
            if (d == ".output" && output_) throw SyntaxError(line.number, t.front().column, "duplicate .output");
            PendingDirective p{t, line.number};
            if (d == ".supply") supply_ = p;
            if (d == ".input") input_ = p;
            if (d == ".output") output_ = p;
        } else if (d == ".end") {
            // ignored; everything after .end is still parsed
        } else {
            throw SyntaxError(line.number, t.front().column, "unknown directive '" + t.front().text + "'");
        }
    }

    NodeId existing(const Token& tok, std::size_t line) const {
        auto id = circuit_.find_node(canonical_node(tok.text));
        if (!id)
            throw UnknownNode("line " + std::to_string(line) + ": node '" + tok.text + "' is not connected to any element");
        return *id;
    }

    void resolve_directives() {
        // A missing supply is a validation diagnostic, not a parse error.
        if (supply_) {
            circuit_.supply = Supply{existing(supply_->tokens[1], supply_->line),
                                     value_or_throw(supply_->tokens[2], supply_->line, "supply voltage")};
            if (circuit_.supply->node == kGround)
                throw SyntaxError(supply_->line, supply_->tokens[1].column, "supply cannot be ground");
        }
        if (input_)
            circuit_.input = InputPair{existing(input_->tokens[1], input_->line),
                                       existing(input_->tokens[2], input_->line)};
        if (output_) circuit_.output = existing(output_->tokens[1], output_->line);
    }

    Circuit circuit_;
    std::set<std::string> names_;
    std::optional<PendingDirective> supply_, input_, output_;
};

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(" \t;") != std::string::npos) return "\"" + s + "\"";
    return s;
}

}  // namespace

Circuit::Circuit() {
    node_names_.push_back("0");
    node_index_.emplace("0", kGround);
}

NodeId Circuit::add_node(std::string_view name) {
    std::string key = canonical_node(name);
    auto it = node_index_.find(key);
    if (it != node_index_.end()) return it->second;
    auto id = static_cast<NodeId>(node_names_.size());
    node_names_.push_back(key);
    node_index_.emplace(key, id);
    return id;
}

std::optional<NodeId> Circuit::find_node(std::string_view name) const {
    auto it = node_index_.find(canonical_node(name));
    if (it == node_index_.end()) return std::nullopt;
    return it->second;
}

NodeId Circuit::node(std::string_view name) const {
    auto id = find_node(name);
    if (!id) throw UnknownNode("unknown node '" + std::string(name) + "'");
    return *id;
}

std::optional<std::size_t> Circuit::find_mosfet(std::string_view name) const {
    for (std::size_t i = 0; i < mosfets.size(); ++i)
        if (iequals(mosfets[i].name, name)) return i;
    return std::nullopt;
}

const MosInstance& Circuit::mosfet(std::string_view name) const {
    auto i = find_mosfet(name);
    if (!i) throw UnknownDevice("unknown device '" + std::string(name) + "'");
    return mosfets[*i];
}

bool structurally_equal(const Circuit& a, const Circuit& b) {
    auto nn = [](const Circuit& c, NodeId id) { return c.node_name(id); };
    if (a.mosfets.size() != b.mosfets.size() || a.elements.size() != b.elements.size()) return false;
    for (const auto& ma : a.mosfets) {
        auto j = b.find_mosfet(ma.name);
        if (!j) return false;
        const auto& mb = b.mosfets[*j];
        if (nn(a, ma.drain) != nn(b, mb.drain) || nn(a, ma.gate) != nn(b, mb.gate) ||
            nn(a, ma.source) != nn(b, mb.source) || nn(a, ma.bulk) != nn(b, mb.bulk))
            return false;
        if (ma.polarity != mb.polarity || ma.flavor != mb.flavor || ma.width != mb.width ||
            ma.length != mb.length || ma.multiplier != mb.multiplier ||
            ma.arrangement != mb.arrangement || ma.role != mb.role)
            return false;
    }
    for (const auto& ea : a.elements) {
        auto it = std::find_if(b.elements.begin(), b.elements.end(),
                               [&](const Element& e) { return e.name == ea.name; });
        if (it == b.elements.end()) return false;
        if (it->kind != ea.kind || nn(a, ea.pos) != nn(b, it->pos) || nn(a, ea.neg) != nn(b, it->neg) ||
            it->value != ea.value || it->ac_magnitude != ea.ac_magnitude)
            return false;
    }
    if (a.supply.has_value() != b.supply.has_value()) return false;
    if (a.supply && (nn(a, a.supply->node) != nn(b, b.supply->node) || a.supply->voltage != b.supply->voltage))
        return false;
    if (a.input.has_value() != b.input.has_value()) return false;
    if (a.input && (nn(a, a.input->positive) != nn(b, b.input->positive) ||
                    nn(a, a.input->negative) != nn(b, b.input->negative)))
        return false;
    if (a.output.has_value() != b.output.has_value()) return false;
    if (a.output && nn(a, *a.output) != nn(b, *b.output)) return false;
    return true;
}

Circuit parse_netlist(std::string_view text) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw SyntaxError(1, 1, "empty netlist");
    return Parser{}.parse(text);
}

std::string serialize_netlist(const Circuit& c) {
    std::ostringstream os;
    if (!c.title.empty()) os << ".title " << c.title << "\n";

    std::vector<const MosInstance*> ms;
    for (const auto& m : c.mosfets) ms.push_back(&m);
    std::sort(ms.begin(), ms.end(), [](auto* a, auto* b) { return a->name < b->name; });
    for (const auto* m : ms) {
        os << m->name << ' ' << c.node_name(m->drain) << ' ' << c.node_name(m->gate) << ' '
           << c.node_name(m->source) << ' ' << c.node_name(m->bulk) << ' ' << to_string(m->polarity)
           << " W=" << format_exact(m->width) << " L=" << format_exact(m->length)
           << " VT=" << to_string(m->flavor) << " ARR=";
        if (const auto* slot = std::get_if<KeySlot>(&m->arrangement))
            os << '@' << slot->group;
        else
            os << to_string(std::get<Arrangement>(m->arrangement));
        if (m->multiplier != 1) os << " M=" << m->multiplier;
        if (!m->role.empty()) os << " ROLE=" << quote_if_needed(m->role);
        os << "\n";
    }

    auto rank = [](ElementKind k) {
        switch (k) {
            case ElementKind::R: return 0;
            case ElementKind::C: return 1;
            case ElementKind::Vdc: return 2;
            case ElementKind::Vac: return 2;
            case ElementKind::Idc: return 3;
        }
        return 4;
    };
    std::vector<const Element*> es;
    for (const auto& e : c.elements) es.push_back(&e);
    std::sort(es.begin(), es.end(), [&](auto* a, auto* b) {
        return std::pair(rank(a->kind), a->name) < std::pair(rank(b->kind), b->name);
    });
    for (const auto* e : es) {
        os << e->name << ' ' << c.node_name(e->pos) << ' ' << c.node_name(e->neg) << ' ';
        switch (e->kind) {
            case ElementKind::R:
            case ElementKind::C: os << format_exact(e->value); break;
            case ElementKind::Vdc:
            case ElementKind::Idc: os << "DC " << format_exact(e->value); break;
            case ElementKind::Vac:
                os << "DC " << format_exact(e->value) << " AC " << format_exact(e->ac_magnitude);
                break;
        }
        os << "\n";
    }
    if (c.supply) os << ".supply " << c.node_name(c.supply->node) << ' ' << format_exact(c.supply->voltage) << "\n";
    if (c.input) os << ".input " << c.node_name(c.input->positive) << ' ' << c.node_name(c.input->negative) << "\n";
    if (c.output) os << ".output " << c.node_name(*c.output) << "\n";
    os << ".end\n";
    return os.str();
}

std::string_view to_string(Diagnostic::Kind k) {
    switch (k) {
        case Diagnostic::Kind::FloatingNode: return "FloatingNode";
        case Diagnostic::Kind::DuplicateName: return "DuplicateName";
        case Diagnostic::Kind::Disconnected: return "Disconnected";
        case Diagnostic::Kind::BadValue: return "BadValue";
        case Diagnostic::Kind::MissingSupply: return "MissingSupply";
    }
    return "?";
}

std::vector<Diagnostic> validate_circuit(const Circuit& c) {
    std::vector<Diagnostic> out;
    const std::size_t n = c.node_count();

    std::map<std::string, int> seen;
    for (const auto& m : c.mosfets) ++seen[to_upper(m.name)];
    for (const auto& e : c.elements) ++seen[to_upper(e.name)];
    for (const auto& [name, count] : seen)
        if (count > 1) out.push_back({Diagnostic::Kind::DuplicateName, name, "name used " + std::to_string(count) + " times"});

    for (const auto& m : c.mosfets)
        if (!(m.width > 0) || !(m.length > 0) || m.multiplier < 1)
            out.push_back({Diagnostic::Kind::BadValue, m.name, "W, L and M must be positive"});
    for (const auto& e : c.elements) {
        if (e.kind == ElementKind::R && !(e.value > 0))
            out.push_back({Diagnostic::Kind::BadValue, e.name, "resistance must be positive"});
        if (e.kind == ElementKind::C && !(e.value >= 0))
            out.push_back({Diagnostic::Kind::BadValue, e.name, "capacitance must be non-negative"});
    }
    if (!c.supply) out.push_back({Diagnostic::Kind::MissingSupply, "", "no supply declared"});

    // A node needs a DC path through a conducting terminal; gates, bulks and
    // capacitors alone leave it floating.
    std::vector<int> conducting(n, 0);
    std::vector<std::vector<NodeId>> adj(n);
    auto link = [&](NodeId a, NodeId b) {
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    };
    for (const auto& m : c.mosfets) {
        ++conducting[static_cast<std::size_t>(m.drain)];
        ++conducting[static_cast<std::size_t>(m.source)];
        link(m.drain, m.source);
        link(m.gate, m.source);
        link(m.bulk, m.source);
    }
    for (const auto& e : c.elements) {
        if (e.kind != ElementKind::C) {
            ++conducting[static_cast<std::size_t>(e.pos)];
            ++conducting[static_cast<std::size_t>(e.neg)];
        }
        link(e.pos, e.neg);
    }
    if (c.supply) {
        ++conducting[static_cast<std::size_t>(c.supply->node)];
        link(c.supply->node, kGround);
    }
    for (std::size_t i = 1; i < n; ++i)
        if (conducting[i] == 0)
            out.push_back({Diagnostic::Kind::FloatingNode, c.node_name(static_cast<NodeId>(i)),
                           "no DC path (only gates, bulks or capacitors attached)"});

    std::vector<bool> reached(n, false);
    std::vector<NodeId> stack{kGround};
    reached[0] = true;
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        for (NodeId w : adj[static_cast<std::size_t>(v)])
            if (!reached[static_cast<std::size_t>(w)]) {
                reached[static_cast<std::size_t>(w)] = true;
                stack.push_back(w);
            }
    }
    for (std::size_t i = 1; i < n; ++i)
        if (!reached[i])
            out.push_back({Diagnostic::Kind::Disconnected, c.node_name(static_cast<NodeId>(i)),
                           "not connected to ground"});
    return out;
}

Circuit merge_fingers(Circuit c) {
    for (auto& m : c.mosfets) {
        m.width *= m.multiplier;
        m.multiplier = 1;
    }
    return c;
}

}  // namespace ldelock
