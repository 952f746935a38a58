#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaptpoc {

enum class ModelFamily {
    Emax,
    LinearLog,
    Linear,
    Quadratic,
    Logistic,
    Exponential,
    DoubleLogistic,
    Step,
    TruncatedLogistic,
};

inline constexpr std::array<ModelFamily, 9> kAllFamilies = {
    ModelFamily::Emax,     ModelFamily::LinearLog,   ModelFamily::Linear,
    ModelFamily::Quadratic, ModelFamily::Logistic,   ModelFamily::Exponential,
    ModelFamily::DoubleLogistic, ModelFamily::Step, ModelFamily::TruncatedLogistic,
};

std::size_t arity(ModelFamily family);
std::string_view family_name(ModelFamily family);
std::optional<ModelFamily> parse_family(std::string_view name);
/// Human-readable closed form with symbolic parameters.
std::string_view family_formula(ModelFamily family);

/// A dose-response mean function from the fixed catalog. Parameter layouts:
///
///   Emax              (E0, Emax, ED50)          E0 + Emax d / (ED50 + d)
///   LinearLog         (t0, t1)                  t0 + t1 log(5 d + 1)
///   Linear            (t0, t1)                  t0 + t1 d
///   Quadratic         (t0, t1, t2)              t0 + t1 d + t2 d^2
///   Logistic          (E0, Emax, ED50, delta)   E0 + Emax / (1 + exp((ED50 - d) / delta))
///   Exponential       (E0, E1, delta)           E0 + E1 exp(d / delta)
///   DoubleLogistic    (a1, b1, r1, m1, a2, b2, r2, m2)
///                     [a1 + b1/(1+exp(r1 (m1 - d)))] I(d <= 0.5)
///                   + [a2 + b2/(1+exp(r2 (d - m2)))] I(d > 0.5)
///   Step              (offset, jump, threshold) offset + jump I(d >= threshold)
///   TruncatedLogistic (E0, Emax, ED50, rate)    E0 + Emax / (1 + exp(rate (ED50 - d)))
class DoseResponseModel {
   public:
    DoseResponseModel(ModelFamily family, std::vector<double> theta);

    ModelFamily family() const { return family_; }
    std::span<const double> theta() const { return theta_; }

    double operator()(double dose) const;
    std::vector<double> at(std::span<const double> doses) const;

    std::string describe() const;

   private:
    ModelFamily family_;
    std::vector<double> theta_;
};

inline double evaluate(const DoseResponseModel& model, double dose) { return model(dose); }

/// Per-dose summary statistics of one trial stage.
struct StageSummary {
    std::vector<double> doses;  // strictly increasing, doses[0] == 0
    std::vector<int> n;
    std::vector<double> means;
    double ss_within = 0.0;  // pooled within-group sum of squares

    std::size_t groups() const { return doses.size(); }
    int total() const;
    /// Residual degrees of freedom, sum(n) - k.
    int df() const;
    double pooled_variance() const;

    /// Throws ContractViolation unless the invariants hold.
    void validate() const;

    /// Restriction to a subset of the dose groups (indices into `doses`).
    StageSummary subset(std::span<const std::size_t> index) const;
};

/// Builds a summary from subject responses grouped by dose.
StageSummary summarize(std::span<const double> doses, const std::vector<std::vector<double>>& responses);

struct ParamInterval {
    double lo;
    double hi;
};

/// Box constraints on the nonlinear parameters of a family, in the order they
/// appear in theta (Emax: ED50; Logistic: ED50, delta; Exponential: delta).
struct FitBounds {
    std::vector<ParamInterval> nonlinear;

    static FitBounds defaults(ModelFamily family, double d_max);
};

enum class FitStatus { Converged, BoundaryPinned, Stalled };

std::string_view fit_status_name(FitStatus status);

struct FitResult {
    FitStatus status;
    DoseResponseModel model;  // best parameters found, even on failure
    double objective;         // weighted residual sum of squares of the means
    int iterations;

    bool converged() const { return status == FitStatus::Converged; }
};

bool is_fittable(ModelFamily family);
std::size_t nonlinear_arity(ModelFamily family);

/// Least-squares fit of a family to group means with weights n_i, which gives
/// the same estimate as the subject-level fit of the mean structure.
FitResult fit(ModelFamily family, const StageSummary& data, const FitBounds& bounds);
FitResult fit(ModelFamily family, const StageSummary& data);

/// Weighted nondecreasing least-squares projection (pool adjacent violators).
std::vector<double> isotonic_means(std::span<const double> means, std::span<const int> n);

}  // namespace adaptpoc
