// test_cli.cpp - Unit tests for config parsing, artifacts and the command-line runner

#include "spinorbit/experiments.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace spinorbit;
using cli::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "spinorbit_test_cli";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

std::string schema_error_path(const json& j) {
    try {
        (void)cli::parse_config(j);
    } catch (const cli::SchemaError& e) {
        return e.path;
    }
    return "";
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPINORBIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_config(const std::string& name, const json& j) {
    const auto p = scratch(name);
    std::ofstream(p) << j.dump(2);
    return p.string();
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_EQ(io::format_double(1e-20), "1e-20");
    EXPECT_EQ(io::format_double(std::nan("")), "nan");
    const double x = 0.1 + 0.2;
    EXPECT_EQ(std::stod(io::format_double(x)), x);
}

TEST(Csv, QuotesAndColumnCount) {
    io::CsvTable t("x", {"a", "b"});
    t.add_row({1.5, "p,q"});
    EXPECT_EQ(t.str(), "a,b\n1.5,\"p,q\"\n");
    EXPECT_THROW(t.add_row({1.0}), std::invalid_argument);
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
    const auto p = scratch("atomic.txt");
    io::write_atomic(p, "hello\n");
    EXPECT_EQ(read_file(p), "hello\n");
    EXPECT_FALSE(std::filesystem::exists(p.string() + ".tmp"));
}

TEST(Io, HashIsStable) {
    EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_NE(io::fnv1a_hex("a"), io::fnv1a_hex("b"));
}

TEST(Schema, UnknownKindListsSuggestions) {
    try {
        (void)cli::parse_config({{"schema_version", 1}, {"experiment", "spin-chek"}});
        FAIL();
    } catch (const cli::SchemaError& e) {
        EXPECT_EQ(e.path, "$.experiment");
        EXPECT_NE(std::string(e.what()).find("did you mean 'spin-check'"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("dicke-purity"), std::string::npos);
    }
}

TEST(Schema, FieldPathsInErrors) {
    EXPECT_EQ(schema_error_path({{"experiment", "classical"}}), "$.schema_version");
    EXPECT_EQ(schema_error_path({{"schema_version", 2}, {"experiment", "classical"}}), "$.schema_version");
    EXPECT_EQ(schema_error_path({{"schema_version", 1}, {"experiment", "classical"}, {"hbar", -1}}), "$.hbar");
    EXPECT_EQ(schema_error_path({{"schema_version", 1}, {"experiment", "classical"}, {"field", {{"alpha", {1, 0}}}}}),
              "$.field.alpha");
    EXPECT_EQ(schema_error_path({{"schema_version", 1}, {"experiment", "spin-check"}, {"spins", {1, 0.3}}}), "$.spins[1]");
    EXPECT_EQ(schema_error_path({{"schema_version", 1}, {"experiment", "convergence"}, {"hbar", {0.1}}}), "$");
    EXPECT_EQ(schema_error_path({{"schema_version", 1}, {"experiment", "classical"}, {"hbarr", 0.1}}), "$.hbarr");
}

TEST(Schema, DefaultsAreFilled) {
    const auto cfg = cli::parse_config({{"schema_version", 1}, {"experiment", "dicke-purity"}});
    const auto& d = std::get<cli::DickePurityConfig>(cfg.body);
    EXPECT_EQ(d.experiment.spin.s(), 50.0);
    EXPECT_EQ(d.experiment.M, 256);
    EXPECT_EQ(cfg.name, "dicke-purity");
}

TEST(Feasibility, TruncationGuardIsNamed) {
    const auto cfg = cli::parse_config(
        {{"schema_version", 1}, {"experiment", "dicke-purity"}, {"M", 16}, {"z0", {1.0, 0.0}}, {"hbar", 0.01}});
    try {
        (void)cli::validate_feasibility(cfg);
        FAIL();
    } catch (const cli::FeasibilityError& e) {
        EXPECT_NE(std::string(e.what()).find("|zeta|^2 < M/4"), std::string::npos);
    }
}

TEST(Runner, SpinCheckIsDeterministicAndReportsResidual) {
    const auto cfg = cli::parse_config({{"schema_version", 1}, {"experiment", "spin-check"}, {"spins", {5}}});
    const auto a = cli::run_experiment(cfg), b = cli::run_experiment(cfg);
    EXPECT_TRUE(a.all_pass());
    EXPECT_EQ(a.tables.at(0).str(), b.tables.at(0).str());
    EXPECT_LT(a.metadata.at("max_commutator_residual").get<double>(), 1e-12);
    const json prov = cli::provenance(cfg, a, {});
    EXPECT_EQ(prov.at("config_hash").get<std::string>().size(), 16u);
    EXPECT_TRUE(prov.contains("runtime_s"));
}

TEST(Runner, ClassicalTrajectoryTable) {
    const auto cfg = cli::parse_config({{"schema_version", 1}, {"experiment", "classical"}, {"intervals", 10}});
    const auto out = cli::run_experiment(cfg);
    EXPECT_TRUE(out.all_pass());
    EXPECT_EQ(out.tables.at(0).size(), 11u);
    EXPECT_EQ(out.tables.at(0).header().front(), "t");
}

TEST(Cli, ExitCodes) {
    const std::string dir = scratch("out").string();
    const std::string ok = write_config("ok.json", {{"schema_version", 1}, {"experiment", "spin-check"}, {"spins", {5}}});
    EXPECT_EQ(run_cli("validate " + ok), 0);
    EXPECT_EQ(run_cli("run " + ok + " --out-dir " + dir), 0);
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / "spin-check_algebra.csv"));
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / "spin-check.json"));

    const std::string strict = write_config(
        "strict.json", {{"schema_version", 1}, {"experiment", "spin-check"}, {"spins", {5}}, {"tolerance", 1e-30}});
    EXPECT_EQ(run_cli("run " + strict + " --out-dir " + dir), 1);

    const std::string bad = write_config("bad.json", {{"schema_version", 1}, {"experiment", "nope"}});
    EXPECT_EQ(run_cli("validate " + bad), 2);
    EXPECT_EQ(run_cli("run " + bad), 2);

    const std::string infeasible = write_config(
        "infeasible.json", {{"schema_version", 1}, {"experiment", "dicke-purity"}, {"M", 16}, {"z0", {1.0, 0.0}}});
    EXPECT_EQ(run_cli("validate " + infeasible), 3);
}

TEST(Configs, ShippedConfigsValidate) {
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(SPINORBIT_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream f(entry.path());
        const auto cfg = cli::parse_config(json::parse(f));
        EXPECT_NO_THROW((void)cli::validate_feasibility(cfg)) << entry.path();
        ++count;
    }
    EXPECT_GE(count, 6);
}
