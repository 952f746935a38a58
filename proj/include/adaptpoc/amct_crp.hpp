#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "adaptpoc/adapt.hpp"
#include "adaptpoc/contrast.hpp"
#include "adaptpoc/model_lib.hpp"
#include "adaptpoc/mvdist.hpp"

namespace adaptpoc {

/// Conditional rejection probability bookkeeping for one trial.
struct CrpState {
    double base_critical = 0.0;      // u* (known variance) or c* (unknown)
    double conditional_error = 0.0;  // A
    Eigen::MatrixXd adapted_cov;     // conditional covariance of the combined statistics, unnormalized
    Eigen::VectorXd adapted_shift;   // conditional means b_m
    std::optional<double> adaptive_critical;  // u~ or c~ (absent when only the decision was computed)
    double q = 0.0;                  // unknown variance only
    /// Upper tail of the adapted conditional law at the observed maximum; the
    /// test rejects iff this is <= A, equivalently max >= the adaptive critical value.
    double tail_at_max = 1.0;
};

struct AmctResult {
    CrpState state;
    std::vector<double> stats;  // Z_m or T_m
    bool reject = false;
    bool futility_stop = false;
};

/// Adaptive multiple contrast test under the conditional rejection
/// probability principle. The base test repeats the stage-1 design in stage 2.
/// Base critical values are cached per (correlation, df, alpha), so one engine
/// per thread serves a whole simulation.
class AmctEngine {
   public:
    explicit AmctEngine(QmcOptions qmc = {});

    MvIntegrator& integrator() { return integrator_; }

    /// u*: equicoordinate 1 - alpha quantile of N(0, R*).
    double base_critical_known(const ContrastSet& stage1_contrasts, double alpha);
    /// c*: equicoordinate 1 - alpha quantile of the t law with 2 nu1 df and R*.
    double base_critical_unknown(const ContrastSet& stage1_contrasts, int nu1, double alpha);

    /// Known sigma. With solve_critical == false the decision is taken by
    /// comparing the adapted tail at max Z with A, skipping the root search.
    AmctResult known_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                              const StageSummary* stage2, const AdaptationOutcome& outcome, double sigma,
                              double alpha, bool solve_critical = true);

    /// Unknown sigma; the conditional error is evaluated at sigma_ref.
    AmctResult unknown_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                                const StageSummary* stage2, const AdaptationOutcome& outcome, double sigma_ref,
                                double alpha, bool solve_critical = true);

    /// Tolerance on the conditional-t integrals.
    double conditional_tol = 1e-3;
    /// Bisection bracket width for c~.
    double bisection_tol = 1e-7;

   private:
    MvIntegrator integrator_;
    std::map<std::vector<double>, double> base_cache_;
};

AmctResult amct_known_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                               const StageSummary* stage2, const AdaptationOutcome& outcome, double sigma,
                               double alpha, std::uint64_t seed);
AmctResult amct_unknown_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                                 const StageSummary* stage2, const AdaptationOutcome& outcome, double sigma_ref,
                                 double alpha, std::uint64_t seed);

}  // namespace adaptpoc
