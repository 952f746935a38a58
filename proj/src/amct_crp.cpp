#include "adaptpoc/amct_crp.hpp"

#include <algorithm>
#include <cmath>

#include "adaptpoc/errors.hpp"
#include "adaptpoc/random.hpp"

namespace adaptpoc {

namespace {

constexpr double kCriticalLimit = 60.0;

struct StageContrastSums {
    Eigen::VectorXd cy;   // sum_i c_mi ybar_i
    Eigen::VectorXd var;  // sum_i c_mi^2 / n_i
};

StageContrastSums sums(const StageSummary& data, const ContrastSet& contrasts) {
    require(contrasts.groups() == data.groups(), "contrasts do not match the number of dose groups");
    for (std::size_t i = 0; i < data.groups(); ++i) {
        require(contrasts.doses[i] == data.doses[i], "contrast doses differ from the data doses");
    }
    const auto m = static_cast<Eigen::Index>(contrasts.models());
    StageContrastSums s{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
    for (Eigen::Index r = 0; r < m; ++r) {
        for (std::size_t i = 0; i < data.groups(); ++i) {
            const double c = contrasts.coeffs(r, static_cast<Eigen::Index>(i));
            s.cy(r) += c * data.means[i];
            s.var(r) += c * c / data.n[i];
        }
    }
    return s;
}

void check_stage2(const StageSummary& stage2, const AdaptationOutcome& outcome, std::size_t models) {
    stage2.validate();
    require(outcome.stage2_contrasts.has_value(), "adaptation outcome has no stage-2 contrasts");
    require(stage2.doses == outcome.retained_doses, "stage-2 doses differ from the retained doses");
    require(outcome.stage2_contrasts->models() == models, "stage-2 contrasts differ in number from stage 1");
}

// Conditional covariance of the combined statistics given stage 1 (stage-2
// part of the variance over the total variance) and the per-model totals.
Eigen::MatrixXd adapted_cov(const ContrastSet& c2, std::span<const int> n2, const Eigen::VectorXd& den) {
    const auto m = static_cast<Eigen::Index>(c2.models());
    Eigen::MatrixXd cov(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < c2.groups(); ++i) {
                s += c2.coeffs(a, static_cast<Eigen::Index>(i)) * c2.coeffs(b, static_cast<Eigen::Index>(i)) / n2[i];
            }
            cov(a, b) = s / (den(a) * den(b));
        }
    }
    return cov;
}

std::vector<double> cache_key(int kind, std::int64_t df, double alpha, const Eigen::MatrixXd& corr) {
    std::vector<double> key{static_cast<double>(kind), static_cast<double>(df), alpha};
    key.insert(key.end(), corr.data(), corr.data() + corr.size());
    return key;
}

}  // namespace

AmctEngine::AmctEngine(QmcOptions qmc) : integrator_(qmc) {}

double AmctEngine::base_critical_known(const ContrastSet& stage1_contrasts, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    auto key = cache_key(0, 0, alpha, stage1_contrasts.corr);
    if (auto it = base_cache_.find(key); it != base_cache_.end()) return it->second;
    const double u = integrator_.equicoordinate_quantile(stage1_contrasts.corr, Dof::infinite(), 1.0 - alpha);
    base_cache_.emplace(std::move(key), u);
    return u;
}

double AmctEngine::base_critical_unknown(const ContrastSet& stage1_contrasts, int nu1, double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require(nu1 >= 1, "stage-1 degrees of freedom must be positive");
    auto key = cache_key(1, nu1, alpha, stage1_contrasts.corr);
    if (auto it = base_cache_.find(key); it != base_cache_.end()) return it->second;
    const double c = integrator_.equicoordinate_quantile(stage1_contrasts.corr, Dof(2 * nu1), 1.0 - alpha);
    base_cache_.emplace(std::move(key), c);
    return c;
}

AmctResult AmctEngine::known_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                                      const StageSummary* stage2, const AdaptationOutcome& outcome, double sigma,
                                      double alpha, bool solve_critical) {
    stage1.validate();
    require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
    require(stage1_contrasts.n == stage1.n, "stage-1 contrasts were built for different group sizes");
    AmctResult r;
    auto& st = r.state;
    const auto s1 = sums(stage1, stage1_contrasts);
    st.base_critical = base_critical_known(stage1_contrasts, alpha);

    const Eigen::VectorXd base_shift = s1.cy.array() / (sigma * (2.0 * s1.var.array()).sqrt());
    const EquiProbQuery base{stage1_contrasts.corr, base_shift, Dof::infinite(), st.base_critical, 0.5};
    // A and the adaptive critical value share the point count, so an unchanged
    // design reproduces u* up to root-finding tolerance.
    int points = 0;
    if (solve_critical) {
        points = integrator_.points_for(base, integrator_.options().abs_tol / 4.0);
        st.conditional_error = integrator_.upper_tail(base, points).value;
    } else if (outcome.futility_stop) {
        // Diagnostic only.
        st.conditional_error = integrator_.upper_tail_tol(base, integrator_.options().abs_tol, 0.01).value;
    }
    if (outcome.futility_stop) {
        r.futility_stop = true;
        return r;
    }
    require(stage2 != nullptr, "stage-2 data required when the trial continues");
    check_stage2(*stage2, outcome, stage1_contrasts.models());
    const auto& c2 = *outcome.stage2_contrasts;
    const auto s2 = sums(*stage2, c2);
    const Eigen::VectorXd den = (s1.var + s2.var).cwiseSqrt();
    st.adapted_cov = adapted_cov(c2, stage2->n, den);
    st.adapted_shift = s1.cy.array() / (sigma * den.array());
    const Eigen::VectorXd z = (s1.cy + s2.cy).array() / (sigma * den.array());
    r.stats.assign(z.data(), z.data() + z.size());
    const double zmax = z.maxCoeff();

    EquiProbQuery adapted{st.adapted_cov, st.adapted_shift, Dof::infinite(), st.base_critical, 1.0};
    if (solve_critical) {
        st.adaptive_critical = integrator_.solve_bound(adapted, st.conditional_error, 0.0, st.base_critical + 6.0,
                                                       1e-6, points);
        adapted.bound = zmax;
        st.tail_at_max = integrator_.upper_tail(adapted, points).value;
        r.reject = zmax >= *st.adaptive_critical;
    } else {
        // Only the sign of tail(max Z) - A matters: refine both together
        // until it is clear.
        adapted.bound = zmax;
        const auto cmp = integrator_.compare_upper_tails(base, adapted, integrator_.options().abs_tol);
        st.conditional_error = cmp.first.value;
        st.tail_at_max = cmp.second.value;
        r.reject = st.tail_at_max <= st.conditional_error;
    }
    return r;
}

AmctResult AmctEngine::unknown_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                                        const StageSummary* stage2, const AdaptationOutcome& outcome,
                                        double sigma_ref, double alpha, bool solve_critical) {
    stage1.validate();
    require(sigma_ref > 0.0 && std::isfinite(sigma_ref), "reference sigma must be positive");
    require(stage1_contrasts.n == stage1.n, "stage-1 contrasts were built for different group sizes");
    const int nu1 = stage1.df();
    if (nu1 < 1) raise(ErrorCode::DegenerateVariance, "stage 1 has no residual degrees of freedom");
    AmctResult r;
    auto& st = r.state;
    const auto s1 = sums(stage1, stage1_contrasts);
    st.base_critical = base_critical_unknown(stage1_contrasts, nu1, alpha);

    const double s2ref = sigma_ref * sigma_ref;
    const Eigen::VectorXd b_star = s1.cy.array() / (sigma_ref * s1.var.array().sqrt());
    const double q_star = stage1.ss_within / (nu1 * s2ref);
    const ConditionalTLaw base(integrator_, stage1_contrasts.corr, b_star, q_star, nu1, nu1, st.base_critical,
                               conditional_tol);
    st.conditional_error = base.upper_tail(st.base_critical);

    if (outcome.futility_stop) {
        r.futility_stop = true;
        return r;
    }
    require(stage2 != nullptr, "stage-2 data required when the trial continues");
    check_stage2(*stage2, outcome, stage1_contrasts.models());
    const int nu2 = stage2->df();
    if (nu2 < 1) raise(ErrorCode::DegenerateVariance, "stage 2 has no residual degrees of freedom");
    const int nu = nu1 + nu2;
    const auto& c2 = *outcome.stage2_contrasts;
    const auto s2 = sums(*stage2, c2);
    const Eigen::VectorXd den = (s1.var + s2.var).cwiseSqrt();
    st.adapted_cov = adapted_cov(c2, stage2->n, den);
    st.adapted_shift = s1.cy.array() / (sigma_ref * den.array());
    st.q = stage1.ss_within / (nu * s2ref);

    const double pooled = (stage1.ss_within + stage2->ss_within) / nu;
    if (!(pooled > 0.0)) raise(ErrorCode::DegenerateVariance, "pooled two-stage variance is zero");
    const Eigen::VectorXd t = (s1.cy + s2.cy).array() / (std::sqrt(pooled) * den.array());
    r.stats.assign(t.data(), t.data() + t.size());
    const double tmax = t.maxCoeff();

    const ConditionalTLaw adapted(integrator_, st.adapted_cov, st.adapted_shift, st.q, nu2, nu, st.base_critical,
                                  conditional_tol, base.points());
    st.tail_at_max = adapted.upper_tail(tmax);
    if (solve_critical) {
        const double a = st.conditional_error;
        if (a <= 0.0) {
            st.adaptive_critical = kCriticalLimit;
        } else if (a >= 1.0) {
            st.adaptive_critical = -kCriticalLimit;
        } else {
            st.adaptive_critical = adapted.solve(a, st.base_critical - 1.0, st.base_critical + 1.0, bisection_tol);
        }
        r.reject = tmax >= *st.adaptive_critical;
    } else {
        r.reject = st.tail_at_max <= st.conditional_error;
    }
    return r;
}

AmctResult amct_known_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                               const StageSummary* stage2, const AdaptationOutcome& outcome, double sigma,
                               double alpha, std::uint64_t seed) {
    QmcOptions qmc;
    qmc.seed = seed;
    AmctEngine engine(qmc);
    return engine.known_variance(stage1, stage1_contrasts, stage2, outcome, sigma, alpha);
}

AmctResult amct_unknown_variance(const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                                 const StageSummary* stage2, const AdaptationOutcome& outcome, double sigma_ref,
                                 double alpha, std::uint64_t seed) {
    QmcOptions qmc;
    qmc.seed = seed;
    AmctEngine engine(qmc);
    return engine.unknown_variance(stage1, stage1_contrasts, stage2, outcome, sigma_ref, alpha);
}

}  // namespace adaptpoc
