#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptpoc/contrast.hpp"
#include "adaptpoc/model_lib.hpp"

namespace adaptpoc {

enum class ModelPolicy { RefitWithFallbacks, NoModelAdaptation };

struct AdaptationConfig {
    double delta = 0.0;
    /// Use delta_ii' = S1 sqrt(1/n_i + 1/n_i') (one standard error of the
    /// difference) instead of the fixed delta.
    bool se_rule = false;
    ModelPolicy model_policy = ModelPolicy::RefitWithFallbacks;
    /// Per-family overrides of the default nonlinear fitting bounds.
    std::vector<std::pair<ModelFamily, FitBounds>> bounds;

    void validate() const;
    FitBounds bounds_for(ModelFamily family, double d_max) const;
};

enum class Provenance { Refit, IsotonicFallback, CarryOver, NegativeSlopeNoAdapt, NotAdapted };

std::string_view provenance_name(Provenance p);

struct DoseSelection {
    std::vector<std::size_t> retained;  // indices into the stage-1 doses, starting with 0
    bool futility_stop = false;
};

struct AdaptationOutcome {
    std::vector<double> retained_doses;
    std::vector<std::size_t> retained_index;
    bool futility_stop = false;
    std::optional<ContrastSet> stage2_contrasts;  // empty on futility
    std::vector<Provenance> provenance;
    std::vector<std::optional<FitStatus>> fit_status;  // per model, when a fit was attempted
    std::vector<std::string> notes;

    std::size_t k2() const { return retained_doses.size(); }
};

/// Interim dose selection: placebo always kept; an active dose is dropped when
/// its mean falls more than delta below placebo (all dropped means futility);
/// the survivors are then screened in increasing dose order against the last
/// retained group.
DoseSelection adapt_doses(const StageSummary& stage1, const AdaptationConfig& config);

/// Stage-2 contrasts for each candidate at the retained doses, refitting the
/// candidates to stage-1 data with the fallback rules for failed fits and for
/// a negative estimated linear trend.
AdaptationOutcome adapt_models(const StageSummary& stage1, std::span<const DoseResponseModel> candidates,
                               const DoseSelection& selection, std::span<const int> n2,
                               const AdaptationConfig& config);

/// Splits n_total over k groups, remainder to the lowest doses first.
std::vector<int> allocate(int n_total, std::size_t k);

/// Stage-1 contrast restricted to a subset of doses, re-centered to zero sum
/// and rescaled to unit norm.
std::vector<double> carry_over_contrast(std::span<const double> stage1_contrast, std::span<const std::size_t> index);

/// Dose selection followed by model adaptation with equal stage-2 allocation.
AdaptationOutcome adapt(const StageSummary& stage1, std::span<const DoseResponseModel> candidates, int n2_total,
                        const AdaptationConfig& config);

}  // namespace adaptpoc
