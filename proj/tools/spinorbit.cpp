// spinorbit.cpp - Command-line runner for spin-orbit experiments

#include "spinorbit/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using spinorbit::cli::ExperimentConfig;
using spinorbit::cli::json;

enum ExitCode { ok = 0, check_failed = 1, schema_error = 2, numerical_error = 3 };

ExperimentConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw spinorbit::cli::SchemaError("$", "cannot read config file '" + path + "'");
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw spinorbit::cli::SchemaError("$", std::string("invalid JSON: ") + e.what());
    }
    return spinorbit::cli::parse_config(j);
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const spinorbit::cli::SchemaError& e) {
        std::cerr << "schema error at " << e.what() << "\n";
        return schema_error;
    } catch (const spinorbit::NumericalError& e) {
        std::cerr << "numerical guard: " << e.what() << "\n";
        return numerical_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return schema_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return numerical_error;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical spin-orbit experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    spinorbit::cli::RunOptions opts;

    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out-dir", out_dir, "Directory for CSV and JSON artifacts");
    run->add_option("--threads", opts.threads, "Worker threads for independent scan rows")->check(CLI::Range(1, 256));
    run->add_option("--seed", opts.seed, "Reserved; experiments are deterministic");

    auto* validate = app.add_subcommand("validate", "Check config schema and feasibility without computing");
    validate->add_option("config", config_path, "Experiment config (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) {
        return guarded([&] {
            const ExperimentConfig cfg = load(config_path);
            for (const auto& note : spinorbit::cli::validate_feasibility(cfg)) std::cout << "  " << note << "\n";
            std::cout << "ok: " << cfg.kind << " config '" << cfg.name << "'\n";
            return static_cast<int>(ok);
        });
    }

    return guarded([&] {
        const ExperimentConfig cfg = load(config_path);
        (void)spinorbit::cli::validate_feasibility(cfg);
        const auto outcome = spinorbit::cli::run_experiment(cfg, opts);
        for (const auto& c : outcome.checks)
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        for (const auto& p : spinorbit::cli::write_artifacts(cfg, outcome, out_dir, opts))
            std::cout << "wrote " << p.string() << "\n";
        return static_cast<int>(outcome.all_pass() ? ok : check_failed);
    });
}
