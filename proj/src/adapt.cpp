#include "adaptpoc/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adaptpoc/errors.hpp"

namespace adaptpoc {

void AdaptationConfig::validate() const {
    require(std::isfinite(delta) && delta >= 0.0, "delta must be finite and nonnegative");
    for (const auto& [family, b] : bounds) {
        require(b.nonlinear.size() == nonlinear_arity(family), "bounds override has the wrong number of intervals");
    }
}

FitBounds AdaptationConfig::bounds_for(ModelFamily family, double d_max) const {
    for (const auto& [f, b] : bounds) {
        if (f == family) return b;
    }
    return FitBounds::defaults(family, d_max);
}

std::string_view provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Refit: return "refit";
        case Provenance::IsotonicFallback: return "isotonic";
        case Provenance::CarryOver: return "carry-over";
        case Provenance::NegativeSlopeNoAdapt: return "negative-slope-no-adapt";
        case Provenance::NotAdapted: return "not-adapted";
    }
    return "unknown";
}

DoseSelection adapt_doses(const StageSummary& stage1, const AdaptationConfig& config) {
    stage1.validate();
    config.validate();
    const std::size_t k = stage1.groups();
    double s = 0.0;
    if (config.se_rule) s = std::sqrt(stage1.pooled_variance());
    auto threshold = [&](std::size_t i, std::size_t j) {
        if (!config.se_rule) return config.delta;
        return s * std::sqrt(1.0 / stage1.n[i] + 1.0 / stage1.n[j]);
    };

    std::vector<std::size_t> survivors;
    for (std::size_t i = 1; i < k; ++i) {
        if (!(stage1.means[i] - stage1.means[0] < -threshold(i, 0))) survivors.push_back(i);
    }
    DoseSelection out;
    out.retained.push_back(0);
    if (survivors.empty()) {
        out.futility_stop = true;
        return out;
    }
    for (std::size_t i : survivors) {
        const std::size_t last = out.retained.back();
        if (stage1.means[i] - stage1.means[last] > -threshold(i, last)) out.retained.push_back(i);
    }
    // Step 3 can only empty the active set on an exact tie with placebo at the
    // threshold; treat that like the Step 2 futility stop.
    if (out.retained.size() == 1) out.futility_stop = true;
    return out;
}

std::vector<int> allocate(int n_total, std::size_t k) {
    require(k >= 1, "at least one group is needed");
    require(n_total >= static_cast<int>(k), "each group needs at least one subject");
    std::vector<int> n(k, n_total / static_cast<int>(k));
    const int rem = n_total % static_cast<int>(k);
    for (int i = 0; i < rem; ++i) ++n[i];
    return n;
}

std::vector<double> carry_over_contrast(std::span<const double> stage1_contrast, std::span<const std::size_t> index) {
    require(index.size() >= 2, "a contrast needs at least two groups");
    std::vector<double> c;
    c.reserve(index.size());
    for (auto i : index) {
        require(i < stage1_contrast.size(), "dose index out of range");
        c.push_back(stage1_contrast[i]);
    }
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
    double norm2 = 0.0;
    for (double& v : c) {
        v -= mean;
        norm2 += v * v;
    }
    if (!(norm2 > 1e-24)) raise(ErrorCode::DegenerateContrast, "restricted stage-1 contrast is constant");
    const double norm = std::sqrt(norm2);
    for (double& v : c) v /= norm;
    return c;
}

AdaptationOutcome adapt_models(const StageSummary& stage1, std::span<const DoseResponseModel> candidates,
                               const DoseSelection& selection, std::span<const int> n2,
                               const AdaptationConfig& config) {
    stage1.validate();
    config.validate();
    require(!candidates.empty(), "no candidate models");
    AdaptationOutcome out;
    out.retained_index = selection.retained;
    for (auto i : selection.retained) {
        require(i < stage1.groups(), "retained dose index out of range");
        out.retained_doses.push_back(stage1.doses[i]);
    }
    require(!out.retained_index.empty() && out.retained_index[0] == 0, "placebo must be retained");
    out.futility_stop = selection.futility_stop;
    const std::size_t m_count = candidates.size();
    out.provenance.assign(m_count, Provenance::Refit);
    out.fit_status.assign(m_count, std::nullopt);
    if (out.futility_stop) return out;
    require(n2.size() == out.retained_doses.size(), "stage-2 group sizes must match the retained doses");

    const std::vector<int> n2v(n2.begin(), n2.end());
    const double d_max = stage1.doses.back();
    const auto stage1_set = ContrastSet::from_models(candidates, stage1.doses, stage1.n);

    auto carry = [&](std::size_t m) { return carry_over_contrast(stage1_set.row(m), out.retained_index); };
    auto original = [&](std::size_t m) { return optimal_contrast(candidates[m].at(out.retained_doses), n2v); };

    std::vector<std::vector<double>> rows(m_count);

    bool refit = config.model_policy == ModelPolicy::RefitWithFallbacks;
    if (refit) {
        const auto linear = fit(ModelFamily::Linear, stage1);
        if (linear.model.theta()[1] < 0.0) {
            refit = false;
            out.provenance.assign(m_count, Provenance::NegativeSlopeNoAdapt);
            out.notes.push_back("negative linear trend in stage 1; candidate models not adapted");
        }
    } else {
        out.provenance.assign(m_count, Provenance::NotAdapted);
    }

    if (!refit) {
        for (std::size_t m = 0; m < m_count; ++m) {
            try {
                rows[m] = original(m);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateContrast) throw;
                rows[m] = carry(m);
                out.provenance[m] = Provenance::CarryOver;
                out.notes.push_back(std::string(family_name(candidates[m].family())) +
                                    ": constant profile at retained doses, stage-1 contrast carried over");
            }
        }
        out.stage2_contrasts = ContrastSet::from_rows(rows, out.retained_doses, n2v);
        return out;
    }

    // Refit every candidate to the stage-1 means.
    std::vector<std::optional<DoseResponseModel>> fitted(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        const ModelFamily family = candidates[m].family();
        if (!is_fittable(family)) {
            out.provenance[m] = Provenance::CarryOver;
            out.notes.push_back(std::string(family_name(family)) + ": no fitting routine, stage-1 contrast carried over");
            continue;
        }
        try {
            const auto r = fit(family, stage1, config.bounds_for(family, d_max));
            out.fit_status[m] = r.status;
            if (r.converged()) {
                fitted[m] = r.model;
            } else {
                out.notes.push_back(std::string(family_name(family)) + ": fit " + std::string(fit_status_name(r.status)));
            }
        } catch (const Error& e) {
            if (!e.is_numerical()) throw;
            out.notes.push_back(std::string(family_name(family)) + ": " + e.what());
        }
    }

    auto failed = [&](ModelFamily family) {
        for (std::size_t m = 0; m < m_count; ++m) {
            if (candidates[m].family() == family && is_fittable(family) && !fitted[m]) return true;
        }
        return false;
    };
    const bool both_failed = failed(ModelFamily::Emax) && failed(ModelFamily::Logistic);

    std::optional<std::vector<double>> iso_full;
    auto isotonic = [&]() {
        if (!iso_full) iso_full = isotonic_means(stage1.means, stage1.n);
        std::vector<double> mu;
        for (auto i : out.retained_index) mu.push_back((*iso_full)[i]);
        return optimal_contrast(mu, n2v);
    };

    for (std::size_t m = 0; m < m_count; ++m) {
        if (out.provenance[m] == Provenance::CarryOver) {
            rows[m] = carry(m);
            continue;
        }
        const ModelFamily family = candidates[m].family();
        try {
            if (fitted[m]) {
                out.provenance[m] = Provenance::Refit;
                rows[m] = optimal_contrast(fitted[m]->at(out.retained_doses), n2v);
            } else if (both_failed && family == ModelFamily::Emax) {
                out.provenance[m] = Provenance::CarryOver;
                rows[m] = carry(m);
            } else {
                out.provenance[m] = Provenance::IsotonicFallback;
                rows[m] = isotonic();
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateContrast) throw;
            out.notes.push_back(std::string(family_name(family)) + ": " + std::string(provenance_name(out.provenance[m])) +
                                " contrast is degenerate, stage-1 contrast carried over");
            out.provenance[m] = Provenance::CarryOver;
            rows[m] = carry(m);
        }
    }
    out.stage2_contrasts = ContrastSet::from_rows(rows, out.retained_doses, n2v);
    return out;
}

AdaptationOutcome adapt(const StageSummary& stage1, std::span<const DoseResponseModel> candidates, int n2_total,
                        const AdaptationConfig& config) {
    const auto selection = adapt_doses(stage1, config);
    if (selection.futility_stop) return adapt_models(stage1, candidates, selection, {}, config);
    const auto n2 = allocate(n2_total, selection.retained.size());
    return adapt_models(stage1, candidates, selection, n2, config);
}

}  // namespace adaptpoc
