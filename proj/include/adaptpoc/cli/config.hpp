#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adaptpoc/adapt.hpp"
#include "adaptpoc/gmct.hpp"
#include "adaptpoc/simharness.hpp"
#include "json.hpp"

namespace adaptpoc::cli {

enum class VarianceMode { Known, Unknown, Both };

struct DesignSection {
    std::vector<double> doses;  // empty: taken from the stage-1 data
    std::optional<int> n1;
    std::optional<int> n2;
    std::optional<double> sigma;  // known sigma, and the reference sigma of the unknown-variance AMCT
};

/// A stage-2 design fixed before the data were seen. When present, analyze
/// uses it instead of rerunning the interim adaptation.
struct RecordedDecision {
    bool futility_stop = false;
    std::vector<double> retained_doses;
    std::vector<std::vector<double>> contrasts;  // one row per candidate
};

struct MethodSection {
    std::vector<TestKind> tests{TestKind::GmctTippett, TestKind::GmctFisher, TestKind::GmctInverseNormal,
                                TestKind::Amct};
    VarianceMode variance = VarianceMode::Unknown;
    double alpha = 0.05;
    CombinationMethod cross_stage = CombinationMethod::InverseNormal;
    std::uint64_t seed = 1;
    int calibration_draws = 200000;
    /// Unset: 0 for analyze (absolute tolerance only), 0.01 for simulate.
    std::optional<double> pvalue_rel_tol;
    /// Analyze also solves for the adaptive critical value of the AMCT.
    bool solve_critical = true;
};

struct TrueModelSpec {
    std::string name;
    DoseResponseModel model;
};

struct SimulationSection {
    std::vector<TrueModelSpec> true_models;  // empty: flat only
    std::vector<int> n_per_stage;            // empty: design n1 (and n2), else 120
    int replications = 10000;
    std::vector<MethodId> methods;  // empty: default_methods()
};

struct RunConfig {
    DesignSection design;
    std::vector<NamedModel> candidates;  // empty: the default five
    AdaptationConfig adaptation;
    std::optional<RecordedDecision> recorded;
    MethodSection method;
    SimulationSection simulation;

    /// Candidates, falling back to the default catalog.
    std::vector<DoseResponseModel> candidate_models() const;
    std::vector<std::string> candidate_names() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ConfigError naming the offending path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
/// Inverse of parse_config; every field is written explicitly.
nlohmann::json to_json(const RunConfig& config);

/// One scenario per (true model, n per stage).
std::vector<SimulationScenario> build_scenarios(const RunConfig& config);

std::string variance_mode_name(VarianceMode mode);
std::string_view model_policy_name(ModelPolicy policy);

/// 64-bit FNV-1a of the compact JSON text, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

}  // namespace adaptpoc::cli
