#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "adaptpoc/adapt.hpp"
#include "adaptpoc/amct_crp.hpp"
#include "adaptpoc/contrast.hpp"
#include "adaptpoc/gmct.hpp"
#include "adaptpoc/model_lib.hpp"

namespace adaptpoc {

enum class TestKind { GmctTippett, GmctFisher, GmctInverseNormal, Amct };
/// NaivePooled runs a one-stage GMCT on the pooled data of the retained doses
/// with the adapted contrasts, ignoring that they were chosen at the interim.
enum class DesignKind { Adaptive, NonAdaptive, NaivePooled };

struct MethodId {
    TestKind test = TestKind::GmctTippett;
    DesignKind design = DesignKind::Adaptive;
    bool known_variance = true;

    /// e.g. "agmct-t/adaptive/known", "amct/non-adaptive/known".
    std::string label() const;
    friend bool operator==(const MethodId&, const MethodId&) = default;
};

std::string_view test_name(TestKind test);
std::string_view design_name(DesignKind design);
std::optional<MethodId> parse_method_id(std::string_view label);
std::optional<CombinationMethod> combination_of(TestKind test);

/// AGMCT T/F/N in both designs and both variance modes, the known-variance
/// AMCT in both designs, and the naive pooled Tippett test.
std::vector<MethodId> default_methods();

struct NamedModel {
    std::string name;
    DoseResponseModel model;
};

std::vector<double> default_doses();
std::vector<NamedModel> candidate_catalog();
/// The simulation truths plus "flat" (constant 0.2) for the null.
std::vector<NamedModel> true_model_catalog();
std::optional<DoseResponseModel> find_true_model(std::string_view name);

struct SimulationScenario {
    std::string name;
    std::string true_model_name = "flat";
    DoseResponseModel true_model{ModelFamily::Linear, {0.2, 0.0}};
    std::vector<DoseResponseModel> candidates;
    std::vector<double> doses;
    double sigma = 1.478;
    int n1 = 120;
    int n2 = 120;
    double alpha = 0.05;
    std::vector<MethodId> methods;
    AdaptationConfig adaptation;
    int replications = 10000;
    std::uint64_t seed = 1;
    int calibration_draws = 200000;
    /// Relative tolerance on Tippett p-values (see StageTester).
    double pvalue_rel_tol = 0.01;

    void validate() const;
};

/// Defaults: the five candidates, five doses, sigma 1.478, all default methods.
SimulationScenario make_scenario(std::string_view true_model, int n_per_stage, int replications, std::uint64_t seed);

/// Per-thread numerical state. Both members are seeded from the one seed, so
/// any thread evaluates a given input identically.
struct Engines {
    Engines(std::uint64_t seed, int calibration_draws, double pvalue_rel_tol = 0.0);

    StageTester tester;
    AmctEngine amct;
};

struct MethodOutcome {
    bool reject = false;
    bool futility = false;
    double p1 = -1.0;  // stage-1 (or single-stage) p-value, -1 when not applicable
    double p2 = -1.0;
    double overall_p = -1.0;
    double conditional_error = -1.0;  // AMCT
    double critical = 0.0;            // AMCT adaptive/base critical value
    double max_stat = 0.0;
    bool floored = false;
};

/// Two-stage adaptive analysis of one method. `stage2` may be null only on a
/// futility stop. The AMCT decision uses the tail comparison unless
/// solve_critical is set.
MethodOutcome evaluate_adaptive(const MethodId& method, const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                                const AdaptationOutcome& outcome, const StageSummary* stage2, double sigma,
                                double alpha, Engines& engines, bool solve_critical = false);

/// One-stage analysis; `fixed_design` caches the null calibration for this
/// correlation.
MethodOutcome evaluate_single_stage(const MethodId& method, const StageSummary& data, const ContrastSet& contrasts,
                                    double sigma, double alpha, Engines& engines, bool fixed_design);

struct TrialData {
    std::vector<std::vector<double>> stage1;  // per stage-1 dose
    AdaptationOutcome outcome;
    std::vector<std::vector<double>> stage2;  // per retained dose, empty on futility
    std::vector<std::vector<double>> extra;   // non-adaptive top-up per stage-1 dose
};

struct TrialResult {
    std::uint64_t replicate = 0;
    bool failed = false;
    std::string error;
    std::vector<MethodOutcome> outcomes;  // aligned with scenario.methods
    bool futility_stop = false;
    std::size_t k2 = 0;
    std::vector<Provenance> provenance;
};

/// Runs replicates of one scenario, caching what is shared across them.
class TrialRunner {
   public:
    explicit TrialRunner(const SimulationScenario& scenario);

    /// Subject-level data, a deterministic function of (seed, replicate).
    TrialData generate(std::uint64_t replicate) const;
    TrialResult run(std::uint64_t replicate);

    const ContrastSet& stage1_contrasts() const { return stage1_contrasts_; }

   private:
    const SimulationScenario* scenario_;
    std::vector<int> n1_;
    std::vector<int> n_single_;
    ContrastSet stage1_contrasts_;
    ContrastSet single_contrasts_;
    Engines engines_;
};

TrialResult run_trial(const SimulationScenario& scenario, std::uint64_t replicate);

struct MethodSummary {
    MethodId method;
    int replications = 0;  // successful replicates
    int rejections = 0;
    double rate = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
};

struct ScenarioReport {
    std::string scenario;
    std::string true_model;
    int n1 = 0;
    int n2 = 0;
    int replications = 0;
    int failed = 0;
    double mean_k2 = 0.0;
    double futility_rate = 0.0;
    double refit_rate = 0.0;  // per model slot, over continuing trials
    double isotonic_rate = 0.0;
    double carry_over_rate = 0.0;
    double negative_slope_rate = 0.0;
    std::vector<MethodSummary> rows;
    std::vector<TrialResult> trials;  // kept on request
    double wall_seconds = 0.0;
};

struct SimulationReport {
    std::vector<ScenarioReport> scenarios;
};

/// Wald interval clipped to [0, 1].
std::pair<double, double> binomial_ci(int successes, int trials, double level = 0.95);

/// Replicates run on `threads` workers; the report does not depend on the
/// thread count. Throws NumericalDomain when more than 0.1% of a scenario's
/// replicates fail.
SimulationReport run_study(const std::vector<SimulationScenario>& scenarios, int threads, bool keep_trials = false);

/// One row per (scenario, method) in a fixed column order. Wall times are
/// left out so the file is reproducible.
void write_report_csv(const SimulationReport& report, std::ostream& out);

}  // namespace adaptpoc
