#include "ldelock/builtin.hpp"

#include <string>

#include "ldelock/error.hpp"

namespace ldelock {

namespace {

constexpr std::string_view kOta = R"(.title class-AB OTA
.supply vdd 1.2
.input inp inn
.output out
I1 vdd bn1 10u
MNB1 bn1 bn1 0 0 NMOS W=1.5u L=0.5u VT=SVT ARR=BL ROLE="bias"
MNB2 bp1 bn1 0 0 NMOS W=2.4u L=0.5u VT=SVT ARR=SOD ROLE="bias"
MPB1 bp1 bp1 vdd vdd PMOS W=10u L=0.5u VT=SVT ARR=BL ROLE="bias"
MNB3 bp2 bn1 0 0 NMOS W=1.5u L=0.5u VT=SVT ARR=BL ROLE="bias"
MPB2 bp2 bp2 vdd vdd PMOS W=1.15u L=0.5u VT=SVT ARR=BL ROLE="bias"
MPB3 bn2 bp1 vdd vdd PMOS W=10u L=0.5u VT=SVT ARR=BL ROLE="bias"
MNB4 bn2 bn2 0 0 NMOS W=0.52u L=0.7u VT=SVT ARR=BL ROLE="bias"
MPB4 bn3 bp1 vdd vdd PMOS W=10u L=0.5u VT=SVT ARR=BL ROLE="bias"
MNB5 bn3 bn3 x1 0 NMOS W=3.3u L=0.5u VT=SVT ARR=BL ROLE="bias"
MNB6 x1 x1 0 0 NMOS W=3.3u L=0.5u VT=SVT ARR=BL ROLE="bias"
MNB7 bp3 bn1 0 0 NMOS W=1.5u L=0.5u VT=SVT ARR=BL ROLE="bias"
MPB5 bp3 bp3 y1 vdd PMOS W=10u L=0.5u VT=SVT ARR=BL ROLE="bias"
MPB6 y1 y1 vdd vdd PMOS W=10u L=0.5u VT=SVT ARR=BL ROLE="bias"
MN0 tn bn1 0 0 NMOS W=1.5u L=0.5u VT=SVT ARR=BL ROLE="bias"
MN1 f1 inn tn 0 NMOS W=0.33u L=0.1u VT=LVT ARR=SP ROLE="input differential pair"
MN2 f2 inp tn 0 NMOS W=0.33u L=0.1u VT=LVT ARR=SP ROLE="input differential pair"
MP0 tp bp1 vdd vdd PMOS W=10u L=0.5u VT=SVT ARR=BL ROLE="bias"
MP1 g1 inn tp vdd PMOS W=1u L=0.1u VT=LVT ARR=SP ROLE="input differential pair"
MP2 g2 inp tp vdd PMOS W=1u L=0.1u VT=LVT ARR=SP ROLE="input differential pair"
MP3 f1 bp1 vdd vdd PMOS W=36u L=0.1u VT=SVT ARR=SOD ROLE="summing circuit"
MP4 f2 bp1 vdd vdd PMOS W=36u L=0.1u VT=SVT ARR=SOD ROLE="summing circuit"
MP5 a1 bp2 f1 vdd PMOS W=20u L=0.1u VT=SVT ARR=BL ROLE="summing circuit"
MP6 gp bp2 f2 vdd PMOS W=20u L=0.1u VT=SVT ARR=BL ROLE="summing circuit"
MN3 g1 a2 0 0 NMOS W=6.6u L=0.1u VT=SVT ARR=BL ROLE="summing circuit"
MN4 g2 a2 0 0 NMOS W=6.6u L=0.1u VT=SVT ARR=BL ROLE="summing circuit"
MN5 a2 bn2 g1 0 NMOS W=6.6u L=0.1u VT=SVT ARR=BL ROLE="summing circuit"
MN6 gn bn2 g2 0 NMOS W=6.6u L=0.1u VT=SVT ARR=BL ROLE="summing circuit"
MP8 a2 bp3 a1 vdd PMOS W=45u L=0.5u VT=SVT ARR=BL ROLE="class-AB output"
MN8 a1 bn3 a2 0 NMOS W=15u L=0.5u VT=SVT ARR=BL ROLE="class-AB output"
MP7 gn bp3 gp vdd PMOS W=45u L=0.5u VT=SVT ARR=BL ROLE="class-AB output"
MN7 gp bn3 gn 0 NMOS W=15u L=0.5u VT=SVT ARR=BL ROLE="class-AB output"
MPO out gp vdd vdd PMOS W=30u L=0.1u VT=SVT ARR=BL ROLE="class-AB output"
MNO out gn 0 0 NMOS W=9.9u L=0.1u VT=SVT ARR=BL ROLE="class-AB output"
CC1 out gp 1p
CC2 out gn 1p
CL out 0 2p
VINP inp 0 DC 0.6 AC 1
RF out inn 1g
CF inn 0 1
VCM vcm 0 DC 0.6
RL out vcm 1.3k
.end
)";

KeyGroup group(std::string id, std::vector<std::string> members, std::initializer_list<std::string_view> options,
               bool symmetric) {
    KeyGroup g;
    g.id = std::move(id);
    g.members = std::move(members);
    for (auto o : options) g.options.push_back(*parse_option(o));
    g.correct_index = 0;
    g.symmetric = symmetric;
    return g;
}

LockingPlan bundled_plan(const std::vector<std::vector<std::string>>& pairing, const std::vector<std::size_t>& decoys,
                         std::uint64_t seed) {
    const Circuit c = builtin_ota();
    return generate_decoys(c, pair_transistors(c, pairing), decoys, seed);
}

}  // namespace

std::string_view builtin_ota_netlist() { return kOta; }

Circuit builtin_ota() { return parse_netlist(kOta); }

Circuit builtin_ro(int n_stages) {
    if (n_stages < 3 || n_stages % 2 == 0)
        throw EvenStageCount("a ring oscillator needs an odd stage count of at least 3, got " +
                             std::to_string(n_stages));
    std::string text = ".title " + std::to_string(n_stages) + "-stage ring oscillator\n.supply vdd 1.2\n";
    for (int i = 0; i < n_stages; ++i) {
        const std::string in = "n" + std::to_string(i);
        const std::string out = "n" + std::to_string((i + 1) % n_stages);
        const std::string id = std::to_string(i);
        text += "MP" + id + " " + out + " " + in + " vdd vdd PMOS W=1u L=60n VT=SVT ARR=@inv" + id + " ROLE=\"inverter\"\n";
        text += "MN" + id + " " + out + " " + in + " 0 0 NMOS W=0.5u L=60n VT=SVT ARR=BL ROLE=\"inverter\"\n";
        text += "C" + id + " " + out + " 0 50f\n";
    }
    text += ".end\n";
    return parse_netlist(text);
}

LockingPlan desk_plan() {
    std::vector<KeyGroup> g;
    g.push_back(group("g1", {"MN1", "MN2"}, {"SP-SP", "BL-BL", "SOD-SP", "BL-SOD"}, false));
    g.push_back(group("g2", {"MP1", "MP2"}, {"SP-SP", "SOD-SOD", "SP-BL", "BL-SP"}, false));
    g.push_back(group("g3", {"MP3", "MP4"}, {"SOD-SOD", "BL-BL", "SP-SP", "SP-SOD"}, true));
    g.push_back(group("g4", {"MN3", "MN4"}, {"BL-BL", "SP-SP", "SOD-BL", "BL-SP"}, true));
    g.push_back(group("g5", {"MNB2", "MPB1"}, {"SOD-BL", "BL-SOD", "SP-SP", "BL-BL"}, false));
    g.push_back(group("g6", {"MN0", "MP0"}, {"BL-BL", "SP-SOD", "SOD-SOD", "SOD-BL"}, false));
    return LockingPlan::from_groups(std::move(g));
}

LockingPlan plan_36bit(std::uint64_t seed) {
    return bundled_plan({{"MN1", "MN2"}, {"MP1", "MP2"}, {"MP3", "MP4"}, {"MN3", "MN4"}, {"MNB2", "MPB1"},
                         {"MN0", "MP0"}, {"MNO"}},
                        {5, 5, 5, 5, 4, 4, 1}, seed);
}

LockingPlan plan_41bit(std::uint64_t seed) {
    return bundled_plan({{"MN1", "MN2"}, {"MP1", "MP2"}, {"MP3", "MP4"}, {"MN3", "MN4"}, {"MP5", "MP6"},
                         {"MN5", "MN6"}, {"MNB2", "MPB1"}, {"MN0", "MP0"}, {"MNO"}},
                        {4, 4, 4, 4, 4, 4, 4, 3, 1}, seed);
}

}  // namespace ldelock
