#include "adaptpoc/mvdist.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>

#include "adaptpoc/errors.hpp"
#include "adaptpoc/random.hpp"

namespace adaptpoc {

namespace {

constexpr int kMaxDims = 32;
constexpr double kRankTol = 1e-10;
constexpr double kPsdTol = 1e-8;
constexpr double kChiTail = 1e-10;
constexpr double kSearchLimit = 60.0;

// Richtmyer generators: fractional parts of sqrt(prime), one per dimension.
constexpr std::array<int, kMaxDims + 1> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19,  23,  29,  31,  37,  41,  43,  47,  53, 59,
                                                   61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137};

double frac(double x) { return x - std::floor(x); }

double normal_pdf(double x) { return 0.3989422804014327 * std::exp(-0.5 * x * x); }

// Mass of [lo, hi] under N(0,1) and an inverse-CDF draw inside it, arranged to
// avoid cancellation when the interval sits in the upper tail.
struct Slab {
    double mass;
    bool upper;
    double base;
};

Slab slab(double lo, double hi) {
    if (lo > 0.0) {
        const double ql = norm_sf(lo), qh = norm_sf(hi);
        return {ql - qh, true, ql};
    }
    const double dl = norm_cdf(lo), dh = norm_cdf(hi);
    return {dh - dl, false, dl};
}

double draw(const Slab& s, double u) {
    double y = s.upper ? -norm_quantile(s.base - u * s.mass) : norm_quantile(s.base + u * s.mass);
    return std::clamp(y, -38.0, 38.0);
}

double box_weight(const BoxFactor& f, const double* a, const double* u, double* y) {
    for (int j : f.null_rows) {
        if (a[j] < 0.0) return 0.0;
    }
    double w = 1.0;
    for (int k = 0; k < f.rank; ++k) {
        double lo = -kInf, hi = kInf;
        for (const auto& [j, coef] : f.rows_at[k]) {
            double t = a[j];
            for (int l = 0; l < k; ++l) t -= f.chol(j, l) * y[l];
            const double lim = t / coef;
            if (coef > 0.0) {
                hi = std::min(hi, lim);
            } else {
                lo = std::max(lo, lim);
            }
        }
        if (!(hi > lo)) return 0.0;
        const Slab s = slab(lo, hi);
        w *= s.mass;
        if (!(w > 0.0)) return 0.0;
        if (k + 1 < f.rank) y[k] = draw(s, u[k]);
    }
    return w;
}

}  // namespace

BoxFactor BoxFactor::build(const Eigen::MatrixXd& cov, const Eigen::VectorXd& limits) {
    const auto m = static_cast<int>(cov.rows());
    require(m >= 1 && cov.cols() == m, "covariance must be a nonempty square matrix");
    require(limits.size() == m, "limits must match the covariance dimension");
    require(m <= kMaxDims, "dimension exceeds the integrator limit");
    double scale = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (!std::isfinite(cov(i, j))) raise(ErrorCode::NumericalDomain, "covariance has non-finite entries");
            if (std::abs(cov(i, j) - cov(j, i)) > 1e-9 * (1.0 + std::abs(cov(i, j)))) {
                raise(ErrorCode::NumericalDomain, "covariance is not symmetric");
            }
        }
        if (cov(i, i) < 0.0) raise(ErrorCode::NumericalDomain, "covariance has a negative diagonal entry");
        scale = std::max(scale, cov(i, i));
    }
    const double rank_tol = kRankTol * std::max(scale, 1e-300);
    const double psd_tol = kPsdTol * std::max(scale, 1e-300);

    Eigen::MatrixXd s = cov;
    Eigen::VectorXd a = limits;
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd ybar = Eigen::VectorXd::Zero(m);
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);

    int r = 0;
    for (int k = 0; k < m; ++k) {
        int best = -1;
        double best_p = kInf;
        for (int i = k; i < m; ++i) {
            const double v = s(i, i) - l.row(i).head(k).squaredNorm();
            if (v < -psd_tol) raise(ErrorCode::NumericalDomain, "covariance is not positive semidefinite");
            if (v <= rank_tol) continue;
            const double mean = l.row(i).head(k).dot(ybar.head(k));
            const double p = std::isinf(a(i)) ? (a(i) > 0 ? 1.0 : 0.0) : norm_cdf((a(i) - mean) / std::sqrt(v));
            if (best < 0 || p < best_p) {
                best = i;
                best_p = p;
            }
        }
        if (best < 0) break;
        if (best != k) {
            s.row(k).swap(s.row(best));
            s.col(k).swap(s.col(best));
            l.row(k).swap(l.row(best));
            std::swap(a(k), a(best));
            std::swap(perm[k], perm[best]);
        }
        const double v = s(k, k) - l.row(k).head(k).squaredNorm();
        l(k, k) = std::sqrt(v);
        for (int j = k + 1; j < m; ++j) {
            l(j, k) = (s(j, k) - l.row(j).head(k).dot(l.row(k).head(k))) / l(k, k);
        }
        const double c = (a(k) - l.row(k).head(k).dot(ybar.head(k))) / l(k, k);
        if (std::isfinite(c)) {
            const double pc = norm_cdf(c);
            ybar(k) = pc > 1e-300 ? -normal_pdf(c) / pc : c;
        }
        r = k + 1;
    }

    BoxFactor f;
    f.dim = m;
    f.rank = r;
    f.perm = perm;
    f.chol = l.leftCols(r);
    f.rows_at.assign(r, {});
    for (int j = 0; j < r; ++j) f.rows_at[j].emplace_back(j, l(j, j));
    for (int j = r; j < m; ++j) {
        const double resid = s(j, j) - l.row(j).head(r).squaredNorm();
        if (resid < -psd_tol) raise(ErrorCode::NumericalDomain, "covariance is not positive semidefinite");
        const double sd = std::sqrt(std::max(s(j, j), 0.0));
        int last = -1;
        for (int c = r - 1; c >= 0; --c) {
            if (std::abs(l(j, c)) > 1e-9 * std::max(sd, 1e-300)) {
                last = c;
                break;
            }
        }
        if (last < 0) {
            f.null_rows.push_back(j);
        } else {
            f.rows_at[last].emplace_back(j, l(j, last));
        }
    }
    return f;
}

MvIntegrator::MvIntegrator(QmcOptions options) : options_(options) {
    require(options_.shifts >= 2, "at least two random shifts are needed for an error estimate");
    require(options_.min_points >= 1 && options_.max_points >= options_.min_points, "invalid point budget");
    require(options_.abs_tol > 0.0, "tolerance must be positive");
    shifts_.resize(options_.shifts);
    for (int sh = 0; sh < options_.shifts; ++sh) {
        StreamEngine eng(options_.seed, {mix_stream(0x9a77'1ce5ull, static_cast<std::uint64_t>(sh)), 0});
        shifts_[sh].resize(kMaxDims + 1);
        for (double& v : shifts_[sh]) v = eng.uniform01();
    }
    y_.resize(kMaxDims);
}

double MvIntegrator::lattice(int dim, int shift, std::int64_t j) const {
    static const std::array<double, kMaxDims + 1> alpha = [] {
        std::array<double, kMaxDims + 1> out{};
        for (int d = 0; d <= kMaxDims; ++d) out[d] = frac(std::sqrt(static_cast<double>(kPrimes[d])));
        return out;
    }();
    const double x = frac(static_cast<double>(j) * alpha[dim] + shifts_[shift][dim]);
    return 1.0 - std::abs(2.0 * x - 1.0);
}

const std::vector<double>& MvIntegrator::radial(std::int64_t nu, int shift, int points) {
    auto& cache = radial_cache_[{nu, shift}];
    const auto have = static_cast<int>(cache.size());
    if (have < points) {
        cache.resize(points);
        const double dnu = static_cast<double>(nu);
        for (int j = have; j < points; ++j) {
            const double u = std::clamp(lattice(0, shift, j + 1), 1e-300, 1.0 - 1e-16);
            cache[j] = std::sqrt(chisq_quantile(u, dnu) / dnu);
        }
    }
    return cache;
}

void MvIntegrator::extend(const BoxFactor& f, const Eigen::VectorXd& base, double bound, Dof df, RunState& st,
                          int n) {
    const int m = f.dim;
    const int ns = options_.shifts;
    if (st.sum.empty()) st.sum.assign(ns, 0.0);
    std::array<double, kMaxDims> b{}, a{}, u{};
    for (int i = 0; i < m; ++i) b[i] = base(f.perm[i]);
    const bool t_law = !df.is_infinite();
    const int gdims = std::max(f.rank - 1, 0);
    for (int sh = 0; sh < ns; ++sh) {
        const double* rad = t_law ? radial(df.value(), sh, n).data() : nullptr;
        double acc = 0.0;
        for (int j = st.done + 1; j <= n; ++j) {
            const double s = t_law ? rad[j - 1] : 1.0;
            for (int i = 0; i < m; ++i) a[i] = bound * s - b[i];
            for (int k = 0; k < gdims; ++k) u[k] = lattice(k + 1, sh, j);
            acc += box_weight(f, a.data(), u.data(), y_.data());
        }
        st.sum[sh] += acc;
    }
    st.done = n;
}

ProbEstimate MvIntegrator::estimate(const RunState& st) const {
    const double ns = static_cast<double>(st.sum.size());
    double mean = 0.0;
    for (double v : st.sum) mean += v / st.done;
    mean /= ns;
    double var = 0.0;
    for (double v : st.sum) var += (v / st.done - mean) * (v / st.done - mean);
    return {mean, std::sqrt(var / (ns * (ns - 1.0))), st.done};
}

// A rank-one t law is a one-dimensional integral over the radial variable.
// Null rows make that integrand a step function and are left to the lattice.
bool MvIntegrator::exact_case(const BoxFactor& f, Dof df) const {
    return f.rank <= 1 && (df.is_infinite() || (f.rank == 1 && f.null_rows.empty()));
}

double MvIntegrator::exact_value(const BoxFactor& f, const Eigen::VectorXd& base, double bound, Dof df) {
    std::array<double, kMaxDims> a{}, u{};
    if (df.is_infinite()) {
        for (int i = 0; i < f.dim; ++i) a[i] = bound - base(f.perm[i]);
        return box_weight(f, a.data(), u.data(), y_.data());
    }
    // S = sqrt(X / nu), X ~ chi-square(nu), integrated over the central mass
    const double nu = static_cast<double>(df.value());
    auto at = [&](double s) {
        if (!(s > 0.0)) return 0.0;
        for (int i = 0; i < f.dim; ++i) a[i] = bound * s - base(f.perm[i]);
        return box_weight(f, a.data(), u.data(), y_.data()) * 2.0 * nu * s * chisq_pdf(nu * s * s, nu);
    };
    const double lo = std::sqrt(chisq_quantile(1e-15, nu) / nu);
    const double hi = std::sqrt(chisq_quantile(1.0 - 1e-15, nu) / nu);
    using boost::math::quadrature::gauss_kronrod;
    const double mid = std::sqrt(std::max(nu - 2.0, 0.5) / nu);
    const double v = gauss_kronrod<double, 31>::integrate(at, lo, mid, 12, 1e-12) +
                     gauss_kronrod<double, 31>::integrate(at, mid, hi, 12, 1e-12);
    return std::clamp(v, 0.0, 1.0);
}

ProbEstimate MvIntegrator::run(const BoxFactor& f, const Eigen::VectorXd& base, double bound, Dof df, int points,
                               bool adaptive, double tol, double rel_tol) {
    if (exact_case(f, df)) return {exact_value(f, base, bound, df), 0.0, 0};
    RunState st;
    int n = adaptive ? options_.min_points : points;
    while (true) {
        extend(f, base, bound, df, st, n);
        const auto est = estimate(st);
        const double target = std::max(tol, rel_tol * std::min(est.value, 1.0 - est.value));
        if (!adaptive || est.std_error <= target || n >= options_.max_points) return est;
        n = std::min(2 * n, options_.max_points);
    }
}

namespace {

Eigen::VectorXd shift_or_zero(const EquiProbQuery& q) {
    if (q.shift.size() == 0) return Eigen::VectorXd::Zero(q.cov.rows());
    require(q.shift.size() == q.cov.rows(), "shift must match the covariance dimension");
    for (Eigen::Index i = 0; i < q.shift.size(); ++i) require(std::isfinite(q.shift(i)), "shift must be finite");
    return q.shift;
}

void validate_query(const EquiProbQuery& q) {
    require(q.scale > 0.0 && std::isfinite(q.scale), "scale must be positive");
    require(!std::isnan(q.bound), "bound must not be NaN");
}

BoxFactor factor_for(const EquiProbQuery& q, const Eigen::VectorXd& shift, double bound) {
    const double rep = std::isfinite(bound) ? bound : (bound > 0 ? 1e6 : -1e6);
    return BoxFactor::build(q.scale * q.cov, Eigen::VectorXd::Constant(shift.size(), rep) - shift);
}

ProbEstimate to_tail(ProbEstimate p) {
    p.value = std::clamp(1.0 - p.value, 0.0, 1.0);
    return p;
}

}  // namespace

ProbEstimate MvIntegrator::upper_tail(const EquiProbQuery& query) {
    validate_query(query);
    const auto shift = shift_or_zero(query);
    if (query.bound == kInf) return {0.0, 0.0, 0};
    if (query.bound == -kInf) return {1.0, 0.0, 0};
    const auto f = factor_for(query, shift, query.bound);
    if (options_.fixed_points > 0) return to_tail(run(f, shift, query.bound, query.df, options_.fixed_points, false, 0));
    return to_tail(run(f, shift, query.bound, query.df, 0, true, options_.abs_tol));
}

ProbEstimate MvIntegrator::upper_tail(const EquiProbQuery& query, int points) {
    validate_query(query);
    require(points >= 1, "point count must be positive");
    const auto shift = shift_or_zero(query);
    if (query.bound == kInf) return {0.0, 0.0, 0};
    if (query.bound == -kInf) return {1.0, 0.0, 0};
    const auto f = factor_for(query, shift, query.bound);
    return to_tail(run(f, shift, query.bound, query.df, points, false, 0));
}

ProbEstimate MvIntegrator::upper_tail_tol(const EquiProbQuery& query, double abs_tol, double rel_tol) {
    validate_query(query);
    require(abs_tol > 0.0 && rel_tol >= 0.0, "tolerances must be positive");
    const auto shift = shift_or_zero(query);
    if (query.bound == kInf) return {0.0, 0.0, 0};
    if (query.bound == -kInf) return {1.0, 0.0, 0};
    const auto f = factor_for(query, shift, query.bound);
    if (options_.fixed_points > 0) return to_tail(run(f, shift, query.bound, query.df, options_.fixed_points, false, 0));
    return to_tail(run(f, shift, query.bound, query.df, 0, true, abs_tol, rel_tol));
}

TailComparison MvIntegrator::compare_upper_tails(const EquiProbQuery& first, const EquiProbQuery& second, double tol,
                                                 double z) {
    validate_query(first);
    validate_query(second);
    require(tol > 0.0 && z > 0.0, "tolerances must be positive");
    require(std::isfinite(first.bound) && std::isfinite(second.bound), "bounds must be finite");
    const auto s1 = shift_or_zero(first);
    const auto s2 = shift_or_zero(second);
    const auto f1 = factor_for(first, s1, first.bound);
    const auto f2 = factor_for(second, s2, second.bound);
    const bool exact1 = exact_case(f1, first.df), exact2 = exact_case(f2, second.df);
    RunState r1, r2;
    ProbEstimate e1, e2;
    int n = options_.fixed_points > 0 ? options_.fixed_points : options_.min_points;
    while (true) {
        if (exact1) {
            e1 = {exact_value(f1, s1, first.bound, first.df), 0.0, 0};
        } else {
            extend(f1, s1, first.bound, first.df, r1, n);
            e1 = estimate(r1);
        }
        if (exact2) {
            e2 = {exact_value(f2, s2, second.bound, second.df), 0.0, 0};
        } else {
            extend(f2, s2, second.bound, second.df, r2, n);
            e2 = estimate(r2);
        }
        const double se = std::hypot(e1.std_error, e2.std_error);
        const bool settled = std::abs(e1.value - e2.value) > z * se;
        const bool precise = e1.std_error <= tol && e2.std_error <= tol;
        if (options_.fixed_points > 0 || settled || precise || n >= options_.max_points) break;
        n = std::min(2 * n, options_.max_points);
    }
    return {to_tail(e1), to_tail(e2)};
}

int MvIntegrator::points_for(const EquiProbQuery& query, double tol) {
    validate_query(query);
    require(std::isfinite(query.bound), "bound must be finite");
    require(tol > 0.0, "tolerance must be positive");
    if (options_.fixed_points > 0) return options_.fixed_points;
    const auto shift = shift_or_zero(query);
    const auto f = factor_for(query, shift, query.bound);
    return std::max(run(f, shift, query.bound, query.df, 0, true, tol).points, 1);
}

double MvIntegrator::solve_bound(const EquiProbQuery& query, double target, double lo, double hi, double x_tol,
                                 int points) {
    validate_query(query);
    require(std::isfinite(query.bound), "ordering bound must be finite");
    require(target >= 0.0 && target <= 1.0, "target probability must lie in [0, 1]");
    require(lo < hi, "bracket must be ordered");
    const auto shift = shift_or_zero(query);
    const auto f = factor_for(query, shift, query.bound);
    if (points <= 0) {
        points = options_.fixed_points > 0 ? options_.fixed_points
                                           : run(f, shift, query.bound, query.df, 0, true, options_.abs_tol / 4.0).points;
    }
    auto g = [&](double b) { return (1.0 - run(f, shift, b, query.df, points, false, 0).value) - target; };

    double glo = g(lo), ghi = g(hi);
    for (double step = hi - lo; glo < 0.0 && lo > -kSearchLimit; step *= 2.0) {
        hi = lo;
        ghi = glo;
        lo = std::max(lo - step, -kSearchLimit);
        glo = g(lo);
    }
    for (double step = hi - lo; ghi > 0.0 && hi < kSearchLimit; step *= 2.0) {
        lo = hi;
        glo = ghi;
        hi = std::min(hi + step, kSearchLimit);
        ghi = g(hi);
    }
    if (glo < 0.0) return lo;
    if (ghi > 0.0) return hi;
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                               [x_tol](double x, double y) { return std::abs(y - x) <= x_tol; }, iters);
    return 0.5 * (r.first + r.second);
}

double MvIntegrator::equicoordinate_quantile(const Eigen::MatrixXd& corr, Dof df, double level) {
    require(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    const auto m = static_cast<double>(corr.rows());
    EquiProbQuery q{corr, {}, df, 0.0, 1.0};
    double lo = t_quantile(level, df);
    double hi = t_quantile(1.0 - (1.0 - level) / m, df);
    if (hi - lo < 1e-3) hi = lo + 1e-3;
    q.bound = 0.5 * (lo + hi);
    return solve_bound(q, 1.0 - level, lo, hi);
}

double MvIntegrator::box_probability_fixed(const BoxFactor& f, const Eigen::VectorXd& limits, int points) {
    return run(f, -limits, 0.0, Dof::infinite(), points, false, 0).value;
}

int MvIntegrator::points_for_box(const BoxFactor& f, const Eigen::VectorXd& limits, double tol) {
    if (options_.fixed_points > 0) return options_.fixed_points;
    return std::max(run(f, -limits, 0.0, Dof::infinite(), 0, true, tol).points, 1);
}

ConditionalTLaw::ConditionalTLaw(MvIntegrator& integrator, Eigen::MatrixXd cov, Eigen::VectorXd b, double q,
                                 int nu_chisq, int nu_divisor, double ordering_bound, double abs_tol, int points)
    : integrator_(&integrator), cov_(std::move(cov)), b_(std::move(b)), q_(q), nu_chisq_(nu_chisq),
      nu_divisor_(nu_divisor) {
    require(q_ >= 0.0 && std::isfinite(q_), "q must be finite and nonnegative");
    require(nu_chisq_ >= 1 && nu_divisor_ >= 1, "degrees of freedom must be positive");
    require(cov_.rows() == cov_.cols() && b_.size() == cov_.rows(), "shift must match the covariance dimension");
    for (Eigen::Index i = 0; i < b_.size(); ++i) require(std::isfinite(b_(i)), "conditional shift must be finite");
    require(std::isfinite(ordering_bound), "ordering bound must be finite");
    require(abs_tol > 0.0, "tolerance must be positive");
    w_lo_ = chisq_quantile(kChiTail, nu_chisq_);
    w_hi_ = chisq_quantile(1.0 - kChiTail, nu_chisq_);
    w_mid_ = chisq_quantile(0.5, nu_chisq_);
    const auto lim = limits(ordering_bound, w_mid_);
    factor_ = BoxFactor::build(cov_, lim);
    points_ = points > 0 ? points : integrator.points_for_box(factor_, lim, abs_tol / 4.0);
    const auto est = integrator.run(factor_, -lim, 0.0, Dof::infinite(), points_, false, 0);
    inner_se_ = est.std_error;
}

Eigen::VectorXd ConditionalTLaw::limits(double bound, double w) const {
    const double s = std::sqrt(w / nu_divisor_ + q_);
    return (bound * s) * Eigen::VectorXd::Ones(b_.size()) - b_;
}

double ConditionalTLaw::upper_tail(double bound) const {
    require(!std::isnan(bound), "bound must not be NaN");
    if (bound == kInf) return 0.0;
    if (bound == -kInf) return 1.0;
    auto integrand = [&](double w) {
        return chisq_pdf(w, nu_chisq_) * (1.0 - integrator_->box_probability_fixed(factor_, limits(bound, w), points_));
    };
    const double tail =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, w_lo_, w_hi_, 8, 1e-7);
    return std::clamp(tail, 0.0, 1.0);
}

double ConditionalTLaw::solve(double target, double lo, double hi, double x_tol) const {
    require(lo < hi, "bracket must be ordered");
    require(target > 0.0 && target < 1.0, "target probability must lie in (0, 1)");
    auto g = [&](double c) { return upper_tail(c) - target; };
    double glo = g(lo), ghi = g(hi);
    for (double step = hi - lo; glo < 0.0 && lo > -kSearchLimit; step *= 2.0) {
        hi = lo;
        ghi = glo;
        lo -= step;
        glo = g(lo);
    }
    for (double step = hi - lo; ghi > 0.0 && hi < kSearchLimit; step *= 2.0) {
        lo = hi;
        glo = ghi;
        hi += step;
        ghi = g(hi);
    }
    if (glo < 0.0 || ghi > 0.0) {
        raise(ErrorCode::NumericalDomain, "could not bracket the critical value (target " + std::to_string(target) +
                                              ", tail at bracket ends " + std::to_string(glo + target) + ", " +
                                              std::to_string(ghi + target) + ")");
    }
    while (hi - lo > x_tol) {
        const double c = 0.5 * (lo + hi);
        if (g(c) > 0.0) {
            lo = c;
        } else {
            hi = c;
        }
    }
    return 0.5 * (lo + hi);
}

ProbEstimate MvIntegrator::conditional_t_orthant(const Eigen::MatrixXd& cov, const Eigen::VectorXd& b, double q,
                                                 int nu_chisq, int nu_divisor, double bound, double abs_tol) {
    require(!std::isnan(bound), "bound must not be NaN");
    if (std::isinf(bound)) {
        ConditionalTLaw check(*this, cov, b, q, nu_chisq, nu_divisor, 0.0, abs_tol, 1);
        return {bound > 0 ? 0.0 : 1.0, 0.0, 0};
    }
    ConditionalTLaw law(*this, cov, b, q, nu_chisq, nu_divisor, bound, abs_tol);
    return {law.upper_tail(bound), law.inner_std_error(), law.points()};
}

ProbEstimate mv_cdf_upper_tail(const EquiProbQuery& query, const QmcOptions& options) {
    MvIntegrator integrator(options);
    return integrator.upper_tail(query);
}

double mv_equicoordinate_quantile(const Eigen::MatrixXd& corr, Dof df, double level, const QmcOptions& options) {
    MvIntegrator integrator(options);
    return integrator.equicoordinate_quantile(corr, df, level);
}

ProbEstimate conditional_t_orthant(const Eigen::MatrixXd& cov, const Eigen::VectorXd& b, double q, int nu_chisq,
                                   int nu_divisor, double bound, const QmcOptions& options, double abs_tol) {
    MvIntegrator integrator(options);
    return integrator.conditional_t_orthant(cov, b, q, nu_chisq, nu_divisor, bound, abs_tol);
}

}  // namespace adaptpoc
