#include <cstdlib>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "adaptpoc/cli/commands.hpp"

namespace cli = adaptpoc::cli;

int main(int argc, char** argv) {
    CLI::App app{"Adaptive two-stage proof-of-concept testing with multiple contrast tests"};
    app.require_subcommand(1);

    std::string data_path;
    std::string config_path;
    std::string out_dir;
    auto* analyze = app.add_subcommand("analyze", "Analyze a stage,dose,response dataset");
    analyze->add_option("data", data_path, "Subject data CSV")->required();
    analyze->add_option("config", config_path, "JSON config")->required();
    analyze->add_option("-o,--out", out_dir, "Also write analysis.json and analysis.txt here");

    cli::SimulateOptions sim;
    const unsigned hw = std::thread::hardware_concurrency();
    sim.threads = hw == 0 ? 1 : static_cast<int>(hw);
    std::string sim_config;
    std::string sim_out;
    std::uint64_t seed = 0;
    int replications = 0;
    std::uint64_t dump = 0;
    auto* simulate = app.add_subcommand("simulate", "Run a simulation study");
    simulate->add_option("config", sim_config, "JSON config (optional)");
    simulate->add_option("-o,--out", sim_out, "Output directory")->required();
    simulate->add_option("--threads", sim.threads, "Worker threads")->envname("ADAPTPOC_THREADS")->check(CLI::PositiveNumber);
    auto* seed_opt = simulate->add_option("--seed", seed, "Scenario seed");
    auto* reps_opt = simulate->add_option("--replications", replications, "Replicates per scenario")->check(CLI::PositiveNumber);
    simulate->add_flag("--paper-tables", sim.study_tables,
                       "All true models at N1 = N2 in {60, 120, 180, 240}; writes type I error tables and power CSVs");
    simulate->add_option("--true-model", sim.true_models, "True model name (repeatable)");
    simulate->add_option("--n", sim.n_per_stage, "Subjects per stage (repeatable)")->check(CLI::PositiveNumber);
    auto* dump_opt = simulate->add_option("--dump-one-replicate", dump,
                                          "Write the data, an analyze config and the decisions of one replicate");

    auto* models = app.add_subcommand("models", "Model catalog");
    models->require_subcommand(1);
    auto* models_list = models->add_subcommand("list", "List families, default candidates and true models");

    std::string contrasts_config;
    auto* contrasts = app.add_subcommand("contrasts", "Contrast utilities");
    contrasts->require_subcommand(1);
    auto* contrasts_show = contrasts->add_subcommand("show", "Optimal contrasts and their correlation");
    contrasts_show->add_option("config", contrasts_config, "JSON config (design and candidates)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kExitInputError;
    }

    if (analyze->parsed()) {
        std::optional<std::filesystem::path> out;
        if (!out_dir.empty()) out = out_dir;
        return cli::run_analyze(data_path, config_path, out, std::cout, std::cerr);
    }
    if (simulate->parsed()) {
        if (!sim_config.empty()) sim.config_path = sim_config;
        sim.out_dir = sim_out;
        if (*seed_opt) sim.seed = seed;
        if (*reps_opt) sim.replications = replications;
        if (*dump_opt) sim.dump_replicate = dump;
        return cli::run_simulate(sim, std::cout, std::cerr);
    }
    if (models_list->parsed()) return cli::run_models_list(std::cout);
    if (contrasts_show->parsed()) {
        std::optional<std::filesystem::path> cfg;
        if (!contrasts_config.empty()) cfg = contrasts_config;
        return cli::run_contrasts_show(cfg, std::cout, std::cerr);
    }
    return cli::kExitInputError;
}
