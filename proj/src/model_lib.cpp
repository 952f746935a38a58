#include "adaptpoc/model_lib.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "adaptpoc/errors.hpp"

namespace adaptpoc {

std::size_t arity(ModelFamily family) {
    switch (family) {
        case ModelFamily::Emax: return 3;
        case ModelFamily::LinearLog: return 2;
        case ModelFamily::Linear: return 2;
        case ModelFamily::Quadratic: return 3;
        case ModelFamily::Logistic: return 4;
        case ModelFamily::Exponential: return 3;
        case ModelFamily::DoubleLogistic: return 8;
        case ModelFamily::Step: return 3;
        case ModelFamily::TruncatedLogistic: return 4;
    }
    return 0;
}

std::string_view family_name(ModelFamily family) {
    switch (family) {
        case ModelFamily::Emax: return "emax";
        case ModelFamily::LinearLog: return "linearlog";
        case ModelFamily::Linear: return "linear";
        case ModelFamily::Quadratic: return "quadratic";
        case ModelFamily::Logistic: return "logistic";
        case ModelFamily::Exponential: return "exponential";
        case ModelFamily::DoubleLogistic: return "doublelogistic";
        case ModelFamily::Step: return "step";
        case ModelFamily::TruncatedLogistic: return "truncatedlogistic";
    }
    return "unknown";
}

std::optional<ModelFamily> parse_family(std::string_view name) {
    for (auto f : kAllFamilies) {
        if (family_name(f) == name) return f;
    }
    return std::nullopt;
}

std::string_view family_formula(ModelFamily family) {
    switch (family) {
        case ModelFamily::Emax: return "E0 + Emax*d/(ED50 + d)";
        case ModelFamily::LinearLog: return "t0 + t1*log(5*d + 1)";
        case ModelFamily::Linear: return "t0 + t1*d";
        case ModelFamily::Quadratic: return "t0 + t1*d + t2*d^2";
        case ModelFamily::Logistic: return "E0 + Emax/(1 + exp((ED50 - d)/delta))";
        case ModelFamily::Exponential: return "E0 + E1*exp(d/delta)";
        case ModelFamily::DoubleLogistic:
            return "[a1 + b1/(1 + exp(r1*(m1 - d)))]*I(d <= 0.5) + [a2 + b2/(1 + exp(r2*(d - m2)))]*I(d > 0.5)";
        case ModelFamily::Step: return "offset + jump*I(d >= threshold)";
        case ModelFamily::TruncatedLogistic: return "E0 + Emax/(1 + exp(rate*(ED50 - d)))";
    }
    return "";
}

DoseResponseModel::DoseResponseModel(ModelFamily family, std::vector<double> theta)
    : family_(family), theta_(std::move(theta)) {
    if (theta_.size() != arity(family_)) {
        raise(ErrorCode::ContractViolation, "model " + std::string(family_name(family_)) + " expects " +
                                                std::to_string(arity(family_)) + " parameters, got " +
                                                std::to_string(theta_.size()));
    }
    for (double v : theta_) require(std::isfinite(v), "model parameters must be finite");
    switch (family_) {
        case ModelFamily::Emax:
            require(theta_[2] > 0.0, "Emax requires ED50 > 0");
            break;
        case ModelFamily::Logistic:
            require(theta_[2] > 0.0, "Logistic requires ED50 > 0");
            require(theta_[3] > 0.0, "Logistic requires delta > 0");
            break;
        case ModelFamily::Exponential:
            require(theta_[2] > 0.0, "Exponential requires delta > 0");
            break;
        default:
            break;
    }
}

double DoseResponseModel::operator()(double d) const {
    const auto& t = theta_;
    switch (family_) {
        case ModelFamily::Emax: return t[0] + t[1] * d / (t[2] + d);
        case ModelFamily::LinearLog: return t[0] + t[1] * std::log(5.0 * d + 1.0);
        case ModelFamily::Linear: return t[0] + t[1] * d;
        case ModelFamily::Quadratic: return t[0] + t[1] * d + t[2] * d * d;
        case ModelFamily::Logistic: return t[0] + t[1] / (1.0 + std::exp((t[2] - d) / t[3]));
        case ModelFamily::Exponential: return t[0] + t[1] * std::exp(d / t[2]);
        case ModelFamily::DoubleLogistic:
            if (d <= 0.5) return t[0] + t[1] / (1.0 + std::exp(t[2] * (t[3] - d)));
            return t[4] + t[5] / (1.0 + std::exp(t[6] * (d - t[7])));
        case ModelFamily::Step: return t[0] + (d >= t[2] ? t[1] : 0.0);
        case ModelFamily::TruncatedLogistic: return t[0] + t[1] / (1.0 + std::exp(t[3] * (t[2] - d)));
    }
    return 0.0;
}

std::vector<double> DoseResponseModel::at(std::span<const double> doses) const {
    std::vector<double> out(doses.size());
    std::transform(doses.begin(), doses.end(), out.begin(), [this](double d) { return (*this)(d); });
    return out;
}

std::string DoseResponseModel::describe() const {
    std::ostringstream os;
    os << family_name(family_) << "(";
    for (std::size_t i = 0; i < theta_.size(); ++i) os << (i ? ", " : "") << theta_[i];
    os << ")";
    return os.str();
}

int StageSummary::total() const { return std::accumulate(n.begin(), n.end(), 0); }

int StageSummary::df() const { return total() - static_cast<int>(groups()); }

double StageSummary::pooled_variance() const {
    if (df() < 1) raise(ErrorCode::DegenerateVariance, "no residual degrees of freedom");
    return ss_within / df();
}

void StageSummary::validate() const {
    require(!doses.empty(), "stage summary has no dose groups");
    require(n.size() == doses.size() && means.size() == doses.size(), "stage summary vectors differ in length");
    require(doses[0] == 0.0, "first dose group must be placebo (dose 0)");
    for (std::size_t i = 1; i < doses.size(); ++i) require(doses[i] > doses[i - 1], "doses must be strictly increasing");
    for (int ni : n) require(ni >= 1, "group sizes must be positive");
    for (double m : means) require(std::isfinite(m), "group means must be finite");
    require(std::isfinite(ss_within) && ss_within >= 0.0, "within-group sum of squares must be nonnegative");
}

StageSummary StageSummary::subset(std::span<const std::size_t> index) const {
    StageSummary out;
    for (auto i : index) {
        require(i < doses.size(), "subset index out of range");
        out.doses.push_back(doses[i]);
        out.n.push_back(n[i]);
        out.means.push_back(means[i]);
    }
    // The within-group sum of squares of a subset is not recoverable from the
    // pooled value; callers that need it keep the subject-level data.
    out.ss_within = 0.0;
    return out;
}

StageSummary summarize(std::span<const double> doses, const std::vector<std::vector<double>>& responses) {
    require(doses.size() == responses.size(), "one response vector per dose expected");
    StageSummary s;
    s.doses.assign(doses.begin(), doses.end());
    for (const auto& group : responses) {
        require(!group.empty(), "empty dose group");
        double sum = 0.0;
        for (double y : group) sum += y;
        const double mean = sum / static_cast<double>(group.size());
        double ss = 0.0;
        for (double y : group) ss += (y - mean) * (y - mean);
        s.n.push_back(static_cast<int>(group.size()));
        s.means.push_back(mean);
        s.ss_within += ss;
    }
    return s;
}

FitBounds FitBounds::defaults(ModelFamily family, double d_max) {
    require(d_max > 0.0, "d_max must be positive");
    switch (family) {
        case ModelFamily::Emax: return {{{0.001 * d_max, 1.5 * d_max}}};
        case ModelFamily::Logistic: return {{{0.001 * d_max, 1.5 * d_max}, {0.01 * d_max, 1.5 * d_max}}};
        case ModelFamily::Exponential: return {{{0.05 * d_max, 2.0 * d_max}}};
        default: return {};
    }
}

std::string_view fit_status_name(FitStatus status) {
    switch (status) {
        case FitStatus::Converged: return "converged";
        case FitStatus::BoundaryPinned: return "boundary-pinned";
        case FitStatus::Stalled: return "stalled";
    }
    return "unknown";
}

bool is_fittable(ModelFamily family) {
    switch (family) {
        case ModelFamily::Emax:
        case ModelFamily::LinearLog:
        case ModelFamily::Linear:
        case ModelFamily::Quadratic:
        case ModelFamily::Logistic:
        case ModelFamily::Exponential:
            return true;
        default:
            return false;
    }
}

std::size_t nonlinear_arity(ModelFamily family) {
    switch (family) {
        case ModelFamily::Emax: return 1;
        case ModelFamily::Logistic: return 2;
        case ModelFamily::Exponential: return 1;
        default: return 0;
    }
}

namespace {

constexpr int kGridPoints = 50;
constexpr int kMaxIterations = 200;
constexpr double kRelTol = 1e-10;
constexpr double kBoundTol = 1e-6;

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct WeightedData {
    VectorXd d;
    VectorXd y;
    VectorXd sqrt_w;
};

WeightedData weighted(const StageSummary& data) {
    const auto k = static_cast<Eigen::Index>(data.groups());
    WeightedData w{VectorXd(k), VectorXd(k), VectorXd(k)};
    for (Eigen::Index i = 0; i < k; ++i) {
        w.d(i) = data.doses[i];
        w.y(i) = data.means[i];
        w.sqrt_w(i) = std::sqrt(static_cast<double>(data.n[i]));
    }
    return w;
}

/// Weighted least squares y ~ X beta. Returns nullopt when X is rank deficient.
std::optional<VectorXd> weighted_ls(const MatrixXd& x, const WeightedData& w) {
    const MatrixXd xw = w.sqrt_w.asDiagonal() * x;
    const VectorXd yw = w.sqrt_w.cwiseProduct(w.y);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(xw);
    qr.setThreshold(1e-12);
    if (qr.rank() < x.cols()) return std::nullopt;
    return VectorXd(qr.solve(yw));
}

double weighted_sse(const VectorXd& fitted, const WeightedData& w) {
    return (w.sqrt_w.cwiseProduct(w.y - fitted)).squaredNorm();
}

FitResult fit_linear_family(ModelFamily family, const StageSummary& data) {
    const auto w = weighted(data);
    const auto k = w.d.size();
    MatrixXd x(k, static_cast<Eigen::Index>(arity(family)));
    for (Eigen::Index i = 0; i < k; ++i) {
        const double d = w.d(i);
        x(i, 0) = 1.0;
        switch (family) {
            case ModelFamily::Linear: x(i, 1) = d; break;
            case ModelFamily::LinearLog: x(i, 1) = std::log(5.0 * d + 1.0); break;
            case ModelFamily::Quadratic:
                x(i, 1) = d;
                x(i, 2) = d * d;
                break;
            default: break;
        }
    }
    auto beta = weighted_ls(x, w);
    if (!beta) raise(ErrorCode::DegenerateDesign, "design matrix for " + std::string(family_name(family)) + " is rank deficient");
    std::vector<double> theta(beta->data(), beta->data() + beta->size());
    const double sse = weighted_sse(x * *beta, w);
    return {FitStatus::Converged, DoseResponseModel(family, std::move(theta)), sse, 0};
}

// Partially linear families: mu(d) = b0 + b1 * g(d; phi).
double shape(ModelFamily family, double d, const double* phi) {
    switch (family) {
        case ModelFamily::Emax: return d / (phi[0] + d);
        case ModelFamily::Logistic: return 1.0 / (1.0 + std::exp((phi[0] - d) / phi[1]));
        case ModelFamily::Exponential: return std::exp(d / phi[0]);
        default: return 0.0;
    }
}

void shape_gradient(ModelFamily family, double d, const double* phi, double* out) {
    switch (family) {
        case ModelFamily::Emax: {
            const double den = phi[0] + d;
            out[0] = -d / (den * den);
            break;
        }
        case ModelFamily::Logistic: {
            const double g = 1.0 / (1.0 + std::exp((phi[0] - d) / phi[1]));
            const double s = g * (1.0 - g);
            out[0] = -s / phi[1];
            out[1] = s * (phi[0] - d) / (phi[1] * phi[1]);
            break;
        }
        case ModelFamily::Exponential: {
            const double g = std::exp(d / phi[0]);
            out[0] = -d / (phi[0] * phi[0]) * g;
            break;
        }
        default: break;
    }
}

struct Profile {
    double sse;
    double b0;
    double b1;
};

/// Objective minimized over (b0, b1) for fixed nonlinear parameters.
Profile profile(ModelFamily family, const WeightedData& w, const double* phi) {
    const auto k = w.d.size();
    MatrixXd x(k, 2);
    for (Eigen::Index i = 0; i < k; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = shape(family, w.d(i), phi);
    }
    if (auto beta = weighted_ls(x, w)) {
        return {weighted_sse(x * *beta, w), (*beta)(0), (*beta)(1)};
    }
    // Shape is flat on the design: intercept-only fit.
    const double b0 = w.sqrt_w.cwiseProduct(w.sqrt_w).dot(w.y) / w.sqrt_w.squaredNorm();
    return {weighted_sse(VectorXd::Constant(k, b0), w), b0, 0.0};
}

std::vector<double> log_grid(ParamInterval iv) {
    std::vector<double> g(kGridPoints);
    const double a = std::log(iv.lo), b = std::log(iv.hi);
    for (int i = 0; i < kGridPoints; ++i) g[i] = std::exp(a + (b - a) * i / (kGridPoints - 1));
    return g;
}

FitResult fit_nonlinear(ModelFamily family, const StageSummary& data, const FitBounds& bounds) {
    const std::size_t q = nonlinear_arity(family);
    require(bounds.nonlinear.size() == q, "bounds must list one interval per nonlinear parameter");
    for (const auto& iv : bounds.nonlinear) {
        require(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo > 0.0 && iv.lo < iv.hi,
                "nonlinear parameter bounds must be finite, positive and ordered");
    }
    const auto w = weighted(data);
    const auto k = w.d.size();

    // Grid initialization.
    std::vector<std::vector<double>> grids;
    for (const auto& iv : bounds.nonlinear) grids.push_back(log_grid(iv));
    std::vector<double> best_phi(q), phi(q);
    Profile best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    std::vector<int> idx(q, 0);
    while (true) {
        for (std::size_t j = 0; j < q; ++j) phi[j] = grids[j][idx[j]];
        const Profile p = profile(family, w, phi.data());
        if (p.sse < best.sse) {
            best = p;
            best_phi = phi;
        }
        std::size_t j = 0;
        while (j < q && ++idx[j] == kGridPoints) idx[j++] = 0;
        if (j == q) break;
    }

    // Levenberg-Marquardt refinement of (b0, b1, phi) with projection onto the box.
    const auto p = static_cast<Eigen::Index>(2 + q);
    VectorXd theta(p);
    theta << best.b0, best.b1, Eigen::Map<const VectorXd>(best_phi.data(), static_cast<Eigen::Index>(q));

    auto residuals = [&](const VectorXd& th) {
        VectorXd r(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            r(i) = w.sqrt_w(i) * (w.y(i) - th(0) - th(1) * shape(family, w.d(i), th.data() + 2));
        }
        return r;
    };
    auto project = [&](VectorXd& th) {
        for (std::size_t j = 0; j < q; ++j) {
            th(2 + j) = std::clamp(th(2 + j), bounds.nonlinear[j].lo, bounds.nonlinear[j].hi);
        }
    };

    const double scale = w.sqrt_w.cwiseProduct(w.y).squaredNorm() + 1.0;
    double f = residuals(theta).squaredNorm();
    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    std::vector<double> grad_phi(q);
    for (; it < kMaxIterations && !converged; ++it) {
        if (f <= 1e-28 * scale) {
            converged = true;
            break;
        }
        const VectorXd r = residuals(theta);
        MatrixXd jac(k, p);
        for (Eigen::Index i = 0; i < k; ++i) {
            shape_gradient(family, w.d(i), theta.data() + 2, grad_phi.data());
            jac(i, 0) = -w.sqrt_w(i);
            jac(i, 1) = -w.sqrt_w(i) * shape(family, w.d(i), theta.data() + 2);
            for (std::size_t j = 0; j < q; ++j) jac(i, 2 + j) = -w.sqrt_w(i) * theta(1) * grad_phi[j];
        }
        const MatrixXd h = jac.transpose() * jac;
        const VectorXd g = jac.transpose() * r;
        bool accepted = false;
        while (lambda < 1e16) {
            MatrixXd a = h;
            for (Eigen::Index j = 0; j < p; ++j) a(j, j) += lambda * std::max(h(j, j), 1e-12);
            VectorXd cand = theta - a.ldlt().solve(g);
            project(cand);
            const double fc = residuals(cand).squaredNorm();
            if (std::isfinite(fc) && fc < f) {
                const double rel = (f - fc) / std::max(f, 1e-300);
                theta = cand;
                f = fc;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (rel < kRelTol) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        // No descent direction left: a (possibly constrained) stationary point.
        if (!accepted) converged = true;
    }

    std::vector<double> theta_out(theta.data(), theta.data() + theta.size());
    FitStatus status = converged ? FitStatus::Converged : FitStatus::Stalled;
    if (status == FitStatus::Converged) {
        for (std::size_t j = 0; j < q; ++j) {
            const auto& iv = bounds.nonlinear[j];
            if (theta(2 + j) - iv.lo < kBoundTol || iv.hi - theta(2 + j) < kBoundTol) status = FitStatus::BoundaryPinned;
        }
    }
    return {status, DoseResponseModel(family, std::move(theta_out)), f, it};
}

}  // namespace

FitResult fit(ModelFamily family, const StageSummary& data, const FitBounds& bounds) {
    data.validate();
    if (!is_fittable(family)) {
        raise(ErrorCode::ContractViolation, "no fitting routine for family " + std::string(family_name(family)));
    }
    if (data.groups() < arity(family)) {
        raise(ErrorCode::UnderdeterminedFit, std::string(family_name(family)) + " needs at least " +
                                                 std::to_string(arity(family)) + " dose groups");
    }
    if (nonlinear_arity(family) == 0) return fit_linear_family(family, data);
    return fit_nonlinear(family, data, bounds);
}

FitResult fit(ModelFamily family, const StageSummary& data) {
    return fit(family, data, FitBounds::defaults(family, data.doses.back()));
}

std::vector<double> isotonic_means(std::span<const double> means, std::span<const int> n) {
    require(means.size() == n.size(), "means and weights differ in length");
    struct Block {
        double mean;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(means.size());
    for (std::size_t i = 0; i < means.size(); ++i) {
        require(n[i] > 0, "isotonic weights must be positive");
        blocks.push_back({means[i], static_cast<double>(n[i]), 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const double wsum = prev.weight + top.weight;
            prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / wsum;
            prev.weight = wsum;
            prev.count += top.count;
        }
    }
    std::vector<double> out;
    out.reserve(means.size());
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
    return out;
}

}  // namespace adaptpoc
