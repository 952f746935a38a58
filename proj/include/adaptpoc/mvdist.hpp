#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "adaptpoc/numeric.hpp"

namespace adaptpoc {

struct QmcOptions {
    std::uint64_t seed = 0x5eed'2b1c'73a4'0001ull;
    double abs_tol = 1e-4;
    int shifts = 8;
    int min_points = 256;
    int max_points = 1 << 18;
    /// When positive, use exactly this many lattice points per shift.
    int fixed_points = 0;
};

struct ProbEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int points = 0;  // lattice points per shift
};

struct TailComparison {
    ProbEstimate first;
    ProbEstimate second;
};

/// Law of X = (shift + sqrt(scale) Y) / sqrt(W / df) with Y ~ N(0, cov) and
/// W ~ chi^2_df independent (W / df == 1 when df is infinite). `cov` is
/// usually a correlation matrix but any positive semidefinite matrix works.
struct EquiProbQuery {
    Eigen::MatrixXd cov;
    Eigen::VectorXd shift;  // empty means zero
    Dof df = Dof::infinite();
    double bound = 0.0;
    double scale = 1.0;
};

/// Cholesky factor of a positive semidefinite matrix with the variables
/// reordered for the sequential conditioning integrator. Rows that are linear
/// combinations of earlier ones carry no diagonal; their constraints are
/// folded into the interval of the last variable they load on.
struct BoxFactor {
    int dim = 0;
    int rank = 0;
    std::vector<int> perm;  // position -> original index
    Eigen::MatrixXd chol;   // dim x rank, rows in permuted order
    std::vector<std::vector<std::pair<int, double>>> rows_at;  // column -> (row, coefficient)
    std::vector<int> null_rows;                                 // rows with zero variance

    /// Throws NumericalDomain if cov is not positive semidefinite. `limits`
    /// guide the variable ordering only.
    static BoxFactor build(const Eigen::MatrixXd& cov, const Eigen::VectorXd& limits);
};

/// Randomized lattice rule integrator for box probabilities of Gaussian and
/// t laws. Holds the random shifts derived from the seed and caches of
/// chi quantiles, so repeated calls with the same df are cheap. One instance
/// per thread; there is no shared state between instances.
class MvIntegrator {
   public:
    explicit MvIntegrator(QmcOptions options = {});

    const QmcOptions& options() const { return options_; }

    /// 1 - P(all X_m <= bound), adaptive in the number of points.
    ProbEstimate upper_tail(const EquiProbQuery& query);
    /// Same with a fixed number of points per shift.
    ProbEstimate upper_tail(const EquiProbQuery& query, int points);
    /// Adaptive upper tail stopping once the standard error is below
    /// max(abs_tol, rel_tol * min(p, 1 - p)).
    ProbEstimate upper_tail_tol(const EquiProbQuery& query, double abs_tol, double rel_tol);
    /// Upper tails of two laws refined together (same point count) until
    /// their difference exceeds z combined standard errors or both standard
    /// errors are below tol. Used when only the sign of the difference matters.
    TailComparison compare_upper_tails(const EquiProbQuery& first, const EquiProbQuery& second, double tol,
                                       double z = 4.0);
    /// Points per shift at which the standard error of the upper tail of
    /// `query` drops below tol (fixed_points when set).
    int points_for(const EquiProbQuery& query, double tol);

    /// Bound b with P(all X_m <= b) = level for the centered law with the
    /// given correlation.
    double equicoordinate_quantile(const Eigen::MatrixXd& corr, Dof df, double level);

    /// Bound at which the upper tail of `query` equals `target`, by bracketing
    /// from [lo, hi] and root-finding with common random numbers. query.bound
    /// (finite) fixes the variable ordering; `points` = 0 picks the point count
    /// adaptively at that bound.
    double solve_bound(const EquiProbQuery& query, double target, double lo, double hi, double x_tol = 1e-6,
                       int points = 0);

    /// 1 - E_W[ P(Y <= bound * sqrt(W / nu_divisor + q) - b) ], Y ~ N(0, cov),
    /// W ~ chi^2_{nu_chisq}. See ConditionalTLaw.
    ProbEstimate conditional_t_orthant(const Eigen::MatrixXd& cov, const Eigen::VectorXd& b, double q,
                                       int nu_chisq, int nu_divisor, double bound, double abs_tol = 1e-3);

    // Low-level pieces, exposed for tests.
    double box_probability_fixed(const BoxFactor& f, const Eigen::VectorXd& limits, int points);
    int points_for_box(const BoxFactor& f, const Eigen::VectorXd& limits, double tol);

   private:
    friend class ConditionalTLaw;
    struct RunState {
        std::vector<double> sum;  // per shift
        int done = 0;
    };
    ProbEstimate run(const BoxFactor& f, const Eigen::VectorXd& base, double bound, Dof df, int points,
                     bool adaptive, double tol, double rel_tol = 0.0);
    void extend(const BoxFactor& f, const Eigen::VectorXd& base, double bound, Dof df, RunState& state, int points);
    ProbEstimate estimate(const RunState& state) const;
    bool exact_case(const BoxFactor& f, Dof df) const;
    double exact_value(const BoxFactor& f, const Eigen::VectorXd& base, double bound, Dof df);
    const std::vector<double>& radial(std::int64_t nu, int shift, int points);
    double lattice(int dim, int shift, std::int64_t j) const;

    QmcOptions options_;
    std::vector<std::vector<double>> shifts_;  // shift -> per-dimension offset
    std::map<std::pair<std::int64_t, int>, std::vector<double>> radial_cache_;
    std::vector<double> y_;
};

/// Law of T = U / sqrt(W / nu_divisor + q) with U ~ N(b, cov) and
/// W ~ chi^2_{nu_chisq}: a t-like vector whose denominator carries a fixed
/// contribution q. The upper tail of max T is an outer integral over w
/// (adaptive Gauss-Kronrod on the chi^2 range with tails below 1e-10) of an
/// inner Gaussian box probability evaluated by lattice rule with the points
/// and variable ordering frozen, so the tail is a smooth deterministic
/// function of the bound.
class ConditionalTLaw {
   public:
    /// `ordering_bound` fixes the variable ordering and, when points == 0, the
    /// bound at which the point count is chosen for abs_tol.
    ConditionalTLaw(MvIntegrator& integrator, Eigen::MatrixXd cov, Eigen::VectorXd b, double q, int nu_chisq,
                    int nu_divisor, double ordering_bound, double abs_tol = 1e-3, int points = 0);

    int points() const { return points_; }
    /// Standard error of the inner box probability at the ordering bound.
    double inner_std_error() const { return inner_se_; }

    double upper_tail(double bound) const;
    /// Bound where upper_tail equals target, by bisection to bracket width
    /// x_tol. Throws NumericalDomain when no bracket is found.
    double solve(double target, double lo, double hi, double x_tol = 1e-7) const;

   private:
    Eigen::VectorXd limits(double bound, double w) const;

    MvIntegrator* integrator_;
    Eigen::MatrixXd cov_;
    Eigen::VectorXd b_;
    double q_;
    int nu_chisq_;
    int nu_divisor_;
    double w_lo_, w_hi_, w_mid_;
    BoxFactor factor_;
    int points_ = 0;
    double inner_se_ = 0.0;
};

ProbEstimate mv_cdf_upper_tail(const EquiProbQuery& query, const QmcOptions& options = {});
double mv_equicoordinate_quantile(const Eigen::MatrixXd& corr, Dof df, double level,
                                  const QmcOptions& options = {});
ProbEstimate conditional_t_orthant(const Eigen::MatrixXd& cov, const Eigen::VectorXd& b, double q, int nu_chisq,
                                   int nu_divisor, double bound, const QmcOptions& options = {},
                                   double abs_tol = 1e-3);

}  // namespace adaptpoc
