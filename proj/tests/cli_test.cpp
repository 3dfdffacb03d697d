#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <unistd.h>

#include "ldelock/cli.hpp"
#include "ldelock/config.hpp"

using namespace ldelock;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ldelock_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, kExitConfig);
    EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
    EXPECT_EQ(run({"sweep", "--jobs", "x"}).code, kExitConfig);
}

TEST(Cli, UnknownAttackKind) {
    const auto r = run({"attack", "bogus", "--netlist", "builtin:ota", "--plan", "builtin:desk", "-o", scratch("bogus").string()});
    EXPECT_EQ(r.code, kExitConfig);
}

TEST(Cli, MissingNetlist) {
    const auto r = run({"sweep", "--netlist", "/no/such/file.sp", "--plan", "builtin:desk", "-o", scratch("missing").string()});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("netlist"), std::string::npos);
}

TEST(Cli, LockNeedsSeed) {
    ::unsetenv("LDELOCK_SEED");
    const auto r = run({"lock", "--netlist", "builtin:ota", "--preset", "36", "--no-prune", "-o", scratch("noseed").string()});
    EXPECT_EQ(r.code, kExitConfig);
}

// Asking for more decoys than a group can hold is bad input.
TEST(Cli, TooManyDecoysIsConfigError) {
    const auto r = run({"lock", "--netlist", "builtin:ota", "--pairing", "MNO", "--decoys", "5", "--seed", "1", "-o",
                        scratch("toomany").string()});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("decoys"), std::string::npos);
}

TEST(Cli, UnwritableOutput) {
    const auto blocker = scratch("blocker");
    write_text_file(blocker, "not a directory\n");
    const auto r = run({"attack", "removal", "--netlist", "builtin:ota", "--plan", "builtin:41", "-o", (blocker / "sub").string()});
    EXPECT_EQ(r.code, kExitIo);
}

TEST(Cli, RemovalWritesReportAndConfigEcho) {
    const auto dir = scratch("removal");
    const auto r = run({"attack", "removal", "--netlist", "builtin:ota", "--plan", "builtin:41", "-o", dir.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto echo = read_text_file(dir / "resolved_config.ini");
    EXPECT_EQ(echo.rfind("# config_hash = ", 0), 0u);
    EXPECT_NE(echo.find("plan=builtin:41"), std::string::npos);
    EXPECT_NE(read_text_file(dir / "attack_removal.txt").find("keyed_fraction"), std::string::npos);
}

TEST(Cli, PresetLockWithSeedFromEnvironment) {
    const auto dir = scratch("lock36");
    ::setenv("LDELOCK_SEED", "17", 1);
    const auto r = run({"lock", "--netlist", "builtin:ota", "--preset", "36", "--no-prune", "--export-secret", "-o", dir.string()});
    ::unsetenv("LDELOCK_SEED");
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto report = read_text_file(dir / "lock_report.txt");
    EXPECT_NE(report.find("key_length=36"), std::string::npos) << report;
    EXPECT_NE(report.find("arrangements_added=57"), std::string::npos) << report;
    EXPECT_TRUE(fs::exists(dir / "secret.ini"));
    EXPECT_TRUE(fs::exists(dir / "plan.ini"));
    EXPECT_EQ(read_text_file(dir / "plan.ini").find("key_hex"), std::string::npos);
}

TEST(Cli, SweepOverCapWithoutSample) {
    const auto r = run({"sweep", "--netlist", "builtin:ota", "--plan", "builtin:desk", "--set", "sweep.cap=1000", "-o",
                        scratch("overcap").string()});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("--sample"), std::string::npos);
}

TEST(Cli, SweepIsReproducible) {
    const auto a = scratch("sweep_a"), b = scratch("sweep_b");
    const std::vector<std::string> common{"sweep", "--netlist", "builtin:ota", "--plan", "builtin:desk", "--sample", "12", "--seed", "4"};
    auto args = common;
    args.insert(args.end(), {"-o", a.string(), "-j", "1"});
    ASSERT_EQ(run(args).code, kExitOk);
    args = common;
    args.insert(args.end(), {"-o", b.string(), "-j", "3"});
    ASSERT_EQ(run(args).code, kExitOk);
    const auto csv = read_text_file(a / "records.csv");
    EXPECT_EQ(csv, read_text_file(b / "records.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(Cli, RingDemoIsMonotone) {
    const auto dir = scratch("ro");
    const auto r = run({"demo", "ro", "-o", dir.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_TRUE(fs::exists(dir / "ro_frequency.csv"));
}
