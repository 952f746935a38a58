#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adaptpoc/cli/config.hpp"
#include "adaptpoc/cli/dataset.hpp"
#include "adaptpoc/simharness.hpp"
#include "json.hpp"

namespace adaptpoc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericalError = 3;

/// 3 for numerical failures of the statistical computation, 2 otherwise.
int exit_code_for(const std::exception& e);

/// Per-method outcome fields, as written to reports and replicate dumps.
nlohmann::json outcome_json(const MethodOutcome& outcome);

/// Full analysis of a two-stage (or stage-1 only) dataset: stage-wise
/// contrasts and statistics, the interim decision, stage and overall p-values
/// of the GMCTs and the AMCT decision with its conditional error diagnostics.
/// `decisions` maps method labels to outcome_json records.
nlohmann::json analyze(const TrialDataset& data, const RunConfig& config);
std::string render_analysis(const nlohmann::json& report);

int run_analyze(const std::filesystem::path& data_path, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out_dir, std::ostream& out, std::ostream& err);

struct SimulateOptions {
    std::optional<std::filesystem::path> config_path;
    std::filesystem::path out_dir;
    int threads = 1;
    std::optional<std::uint64_t> seed;
    std::optional<int> replications;
    bool study_tables = false;
    std::vector<std::string> true_models;
    std::vector<int> n_per_stage;
    std::optional<std::uint64_t> dump_replicate;
};

/// Applies the command-line overrides to a config.
RunConfig simulation_config(const SimulateOptions& options);

/// Writes subject data, an analyze config and the in-process decisions of
/// one replicate of `scenario` into `dir`. Returns the decisions document.
nlohmann::json dump_replicate(const SimulationScenario& scenario, const RunConfig& config, std::uint64_t replicate,
                              const std::filesystem::path& dir);

/// Type I error tables (flat scenarios) and per-true-model power CSVs.
/// Returns the file names written.
std::vector<std::string> write_study_tables(const SimulationReport& report, const std::filesystem::path& dir);
std::string render_simulation(const SimulationReport& report);

int run_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);
int run_models_list(std::ostream& out);
int run_contrasts_show(const std::optional<std::filesystem::path>& config_path, std::ostream& out, std::ostream& err);

/// Program and library versions recorded in run manifests.
nlohmann::json version_info();

}  // namespace adaptpoc::cli
