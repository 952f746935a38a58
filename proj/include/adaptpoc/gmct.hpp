#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "adaptpoc/contrast.hpp"
#include "adaptpoc/model_lib.hpp"
#include "adaptpoc/mvdist.hpp"
#include "adaptpoc/numeric.hpp"

namespace adaptpoc {

enum class CombinationMethod { Tippett, Fisher, InverseNormal };

std::string_view method_name(CombinationMethod method);
std::optional<CombinationMethod> parse_method(std::string_view name);

struct GmctResult {
    std::vector<double> t_stats;
    std::vector<double> raw_p;
    double psi = 0.0;
    double stage_p = 1.0;
    CombinationMethod method = CombinationMethod::Tippett;
};

/// T_m = sum_i c_mi ybar_i / (S sqrt(sum_i c_mi^2 / n_i)), S^2 = ss_within / df.
std::vector<double> contrast_t_stats(const StageSummary& data, const ContrastSet& contrasts);
/// Same with the known sigma in place of S.
std::vector<double> contrast_z_stats(const StageSummary& data, const ContrastSet& contrasts, double sigma);

/// Psi_T = min p, Psi_F = -2 sum log p, Psi_N = sum Phi^-1(1 - p).
double combination_statistic(CombinationMethod method, std::span<const double> raw_p);

/// Monte Carlo null distribution of the Fisher and inverse-normal statistics
/// for central multivariate t (or normal) contrast statistics. The standard
/// normal draws and the chi draws per df are generated once from the seed and
/// reused for every correlation matrix, so p-values are a deterministic
/// function of (seed, draws, inputs) no matter which thread asks.
class NullCalibrator {
   public:
    NullCalibrator(std::uint64_t seed, int draws = 200000, int max_models = 8);
    ~NullCalibrator();
    NullCalibrator(NullCalibrator&&) noexcept;
    NullCalibrator& operator=(NullCalibrator&&) noexcept;

    int draws() const { return draws_; }

    /// (1 + #{Psi_sim >= psi_obs}) / (B + 1). With `reuse`, the sorted null
    /// sample for this (method, corr, df) is kept for later calls.
    double p_value(CombinationMethod method, double psi_obs, const Eigen::MatrixXd& corr, Dof df,
                   bool reuse = false);

   private:
    struct Transform;
    const Transform& transform(CombinationMethod method, Dof df);
    const std::vector<double>& inv_radius(Dof df);
    std::vector<double> simulate(CombinationMethod method, const Eigen::MatrixXd& corr, Dof df);

    std::uint64_t seed_;
    int draws_;
    int width_;
    std::shared_ptr<const std::vector<double>> normals_;
    std::map<std::int64_t, std::vector<double>> inv_radius_;
    std::map<std::pair<int, std::int64_t>, std::unique_ptr<Transform>> transforms_;
    std::map<std::vector<double>, std::vector<double>> sorted_;
};

/// Everything a stage-wise test needs: the multivariate kernel for Tippett
/// and the Monte Carlo calibration for Fisher/inverse normal. One per thread.
class StageTester {
   public:
    explicit StageTester(std::uint64_t seed, int draws = 200000, QmcOptions qmc = {});

    /// `fixed_design` marks correlation matrices that recur across calls (the
    /// stage-1 design in a simulation) so their null samples are cached.
    GmctResult test(std::span<const double> t_stats, const Eigen::MatrixXd& corr, Dof df, CombinationMethod method,
                    bool fixed_design = false);

    MvIntegrator& integrator() { return integrator_; }

    /// Tippett p-values stop refining once their standard error is below
    /// max(abs_tol, tippett_rel_tol * p); zero keeps the absolute tolerance only.
    double tippett_rel_tol = 0.0;

   private:
    MvIntegrator integrator_;
    NullCalibrator calibrator_;
};

GmctResult stage_p_value(std::span<const double> t_stats, const Eigen::MatrixXd& corr, Dof df,
                         CombinationMethod method, std::uint64_t seed);

struct CrossStage {
    double psi = 0.0;
    double overall_p = 1.0;
    bool floored = false;  // an input p-value was raised to the floor
};

/// Equal-weight combination of independent stage p-values; only Fisher and
/// InverseNormal are defined across stages.
CrossStage combine_across(double p1, double p2, CombinationMethod method, double floor = 1e-12);

}  // namespace adaptpoc
