#include "adaptpoc/gmct.hpp"

#include <algorithm>
#include <cmath>

#include "adaptpoc/errors.hpp"
#include "adaptpoc/random.hpp"

namespace adaptpoc {

std::string_view method_name(CombinationMethod method) {
    switch (method) {
        case CombinationMethod::Tippett: return "tippett";
        case CombinationMethod::Fisher: return "fisher";
        case CombinationMethod::InverseNormal: return "inverse-normal";
    }
    return "unknown";
}

std::optional<CombinationMethod> parse_method(std::string_view name) {
    for (auto m : {CombinationMethod::Tippett, CombinationMethod::Fisher, CombinationMethod::InverseNormal}) {
        if (method_name(m) == name) return m;
    }
    return std::nullopt;
}

namespace {

std::vector<double> contrast_stats(const StageSummary& data, const ContrastSet& contrasts, double scale) {
    require(contrasts.groups() == data.groups(), "contrasts do not match the number of dose groups");
    for (std::size_t i = 0; i < data.groups(); ++i) {
        require(contrasts.doses[i] == data.doses[i], "contrast doses differ from the data doses");
    }
    std::vector<double> t(contrasts.models());
    for (std::size_t m = 0; m < t.size(); ++m) {
        double num = 0.0, var = 0.0;
        for (std::size_t i = 0; i < data.groups(); ++i) {
            const double c = contrasts.coeffs(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i));
            num += c * data.means[i];
            var += c * c / data.n[i];
        }
        t[m] = num / (scale * std::sqrt(var));
    }
    return t;
}

}  // namespace

std::vector<double> contrast_t_stats(const StageSummary& data, const ContrastSet& contrasts) {
    data.validate();
    const double s2 = data.pooled_variance();
    if (!(s2 > 0.0)) raise(ErrorCode::DegenerateVariance, "pooled within-group variance is zero");
    return contrast_stats(data, contrasts, std::sqrt(s2));
}

std::vector<double> contrast_z_stats(const StageSummary& data, const ContrastSet& contrasts, double sigma) {
    data.validate();
    require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
    return contrast_stats(data, contrasts, sigma);
}

double combination_statistic(CombinationMethod method, std::span<const double> raw_p) {
    require(!raw_p.empty(), "no p-values to combine");
    double psi = 0.0;
    switch (method) {
        case CombinationMethod::Tippett:
            psi = *std::min_element(raw_p.begin(), raw_p.end());
            break;
        case CombinationMethod::Fisher:
            for (double p : raw_p) psi -= 2.0 * std::log(std::max(p, 1e-300));
            break;
        case CombinationMethod::InverseNormal:
            for (double p : raw_p) psi -= norm_quantile(p);
            break;
    }
    return psi;
}

namespace {

constexpr double kTableLo = -12.0;
constexpr double kTableHi = 12.0;
constexpr int kTableSteps = 24 * 512;

double exact_transform(CombinationMethod method, double t, Dof df) {
    if (method == CombinationMethod::Fisher) {
        if (df.is_infinite()) return -2.0 * log_norm_sf(t);
        return -2.0 * std::log(std::max(t_sf(t, df), 1e-300));
    }
    if (df.is_infinite()) return t;
    // Phi^-1(1 - p) == -Phi^-1(p); use the smaller tail for accuracy.
    const double p = t_sf(t, df);
    return t > 0 ? -norm_quantile(p) : norm_quantile(t_sf(-t, df));
}

}  // namespace

// Per-observation summand of Psi_F or Psi_N as a function of the t statistic,
// tabulated on a fine grid and linearly interpolated inside it.
struct NullCalibrator::Transform {
    CombinationMethod method;
    Dof df;
    std::vector<double> grid;
    bool identity = false;

    Transform(CombinationMethod m, Dof d) : method(m), df(d) {
        if (method == CombinationMethod::InverseNormal && df.is_infinite()) {
            identity = true;
            return;
        }
        grid.resize(kTableSteps + 1);
        for (int i = 0; i <= kTableSteps; ++i) {
            grid[i] = exact_transform(method, kTableLo + (kTableHi - kTableLo) * i / kTableSteps, df);
        }
    }

    double operator()(double t) const {
        if (identity) return t;
        if (!(t > kTableLo && t < kTableHi)) return exact_transform(method, t, df);
        const double x = (t - kTableLo) * (kTableSteps / (kTableHi - kTableLo));
        const auto i = static_cast<int>(x);
        const double frac = x - i;
        return grid[i] + frac * (grid[i + 1] - grid[i]);
    }
};

NullCalibrator::NullCalibrator(std::uint64_t seed, int draws, int max_models)
    : seed_(seed), draws_(draws), width_(max_models) {
    require(draws >= 1 && max_models >= 1, "calibration sizes must be positive");
    auto z = std::make_shared<std::vector<double>>(static_cast<std::size_t>(draws) * max_models);
    StreamEngine eng(seed_, {mix_stream(0xca1b'0001ull, 0), 0});
    for (double& v : *z) v = norm_quantile(eng.uniform01());
    normals_ = std::move(z);
}

NullCalibrator::~NullCalibrator() = default;
NullCalibrator::NullCalibrator(NullCalibrator&&) noexcept = default;
NullCalibrator& NullCalibrator::operator=(NullCalibrator&&) noexcept = default;

const NullCalibrator::Transform& NullCalibrator::transform(CombinationMethod method, Dof df) {
    auto& slot = transforms_[{static_cast<int>(method), df.value()}];
    if (!slot) slot = std::make_unique<Transform>(method, df);
    return *slot;
}

const std::vector<double>& NullCalibrator::inv_radius(Dof df) {
    auto it = inv_radius_.find(df.value());
    if (it != inv_radius_.end()) return it->second;
    std::vector<double> r(draws_);
    StreamEngine eng(seed_, {mix_stream(0xca1b'0002ull, static_cast<std::uint64_t>(df.value())), 0});
    const double nu = static_cast<double>(df.value());
    for (double& v : r) v = 1.0 / std::sqrt(chisq_quantile(eng.uniform01(), nu) / nu);
    return inv_radius_.emplace(df.value(), std::move(r)).first->second;
}

std::vector<double> NullCalibrator::simulate(CombinationMethod method, const Eigen::MatrixXd& corr, Dof df) {
    const auto m = static_cast<int>(corr.rows());
    require(m >= 1 && corr.cols() == m, "correlation must be square");
    require(m <= width_, "more contrasts than the calibrator was built for");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (eig.info() != Eigen::Success) raise(ErrorCode::NumericalDomain, "eigendecomposition of the correlation failed");
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(top, 1.0)) {
        raise(ErrorCode::NumericalDomain, "correlation matrix is not positive semidefinite");
    }
    const Eigen::MatrixXd root =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();  // corr = root root'
    const Transform& g = transform(method, df);
    const std::vector<double>* inv_r = df.is_infinite() ? nullptr : &inv_radius(df);
    const double* z = normals_->data();
    std::vector<double> psi(draws_);
    for (int b = 0; b < draws_; ++b) {
        const double* zb = z + static_cast<std::size_t>(b) * width_;
        const double scale = inv_r ? (*inv_r)[b] : 1.0;
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            double v = 0.0;
            for (int k = 0; k < m; ++k) v += root(i, k) * zb[k];
            s += g(v * scale);
        }
        psi[b] = s;
    }
    return psi;
}

double NullCalibrator::p_value(CombinationMethod method, double psi_obs, const Eigen::MatrixXd& corr, Dof df,
                               bool reuse) {
    require(method != CombinationMethod::Tippett, "Tippett p-values come from the multivariate t kernel");
    require(!std::isnan(psi_obs), "combination statistic is NaN");
    std::size_t exceed = 0;
    if (reuse) {
        std::vector<double> key{static_cast<double>(method), static_cast<double>(df.value())};
        key.insert(key.end(), corr.data(), corr.data() + corr.size());
        auto it = sorted_.find(key);
        if (it == sorted_.end()) {
            auto sample = simulate(method, corr, df);
            std::sort(sample.begin(), sample.end());
            it = sorted_.emplace(std::move(key), std::move(sample)).first;
        }
        const auto& s = it->second;
        exceed = static_cast<std::size_t>(s.end() - std::lower_bound(s.begin(), s.end(), psi_obs));
    } else {
        const auto sample = simulate(method, corr, df);
        exceed = static_cast<std::size_t>(std::count_if(sample.begin(), sample.end(), [psi_obs](double v) { return v >= psi_obs; }));
    }
    return (1.0 + static_cast<double>(exceed)) / (draws_ + 1.0);
}

StageTester::StageTester(std::uint64_t seed, int draws, QmcOptions qmc)
    : integrator_([&] {
          qmc.seed = mix_stream(seed, 0x7199);
          return qmc;
      }()),
      calibrator_(mix_stream(seed, 0xf15e), draws) {}

GmctResult StageTester::test(std::span<const double> t_stats, const Eigen::MatrixXd& corr, Dof df,
                             CombinationMethod method, bool fixed_design) {
    require(!t_stats.empty(), "no contrast statistics");
    require(static_cast<Eigen::Index>(t_stats.size()) == corr.rows(), "correlation does not match the statistics");
    GmctResult r;
    r.method = method;
    r.t_stats.assign(t_stats.begin(), t_stats.end());
    r.raw_p.resize(t_stats.size());
    for (std::size_t m = 0; m < t_stats.size(); ++m) {
        require(std::isfinite(t_stats[m]), "contrast statistics must be finite");
        r.raw_p[m] = t_sf(t_stats[m], df);
    }
    r.psi = combination_statistic(method, r.raw_p);
    if (method == CombinationMethod::Tippett) {
        const double tmax = *std::max_element(t_stats.begin(), t_stats.end());
        r.stage_p = integrator_
                        .upper_tail_tol(EquiProbQuery{corr, {}, df, tmax, 1.0}, integrator_.options().abs_tol,
                                        tippett_rel_tol)
                        .value;
    } else {
        // Recompute the observed statistic with the same transform family as
        // the null sample, but exactly.
        double psi = 0.0;
        for (double t : t_stats) psi += exact_transform(method, t, df);
        r.psi = psi;
        r.stage_p = calibrator_.p_value(method, psi, corr, df, fixed_design);
    }
    r.stage_p = std::clamp(r.stage_p, 0.0, 1.0);
    return r;
}

GmctResult stage_p_value(std::span<const double> t_stats, const Eigen::MatrixXd& corr, Dof df,
                         CombinationMethod method, std::uint64_t seed) {
    StageTester tester(seed);
    return tester.test(t_stats, corr, df, method);
}

CrossStage combine_across(double p1, double p2, CombinationMethod method, double floor) {
    require(method != CombinationMethod::Tippett, "stages are combined by Fisher or inverse normal");
    require(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0, "p-values must lie in [0, 1]");
    require(floor > 0.0 && floor < 1.0, "p-value floor must lie in (0, 1)");
    CrossStage out;
    if (p1 < floor || p2 < floor) out.floored = true;
    p1 = std::max(p1, floor);
    p2 = std::max(p2, floor);
    if (method == CombinationMethod::Fisher) {
        out.psi = -2.0 * (std::log(p1) + std::log(p2));
        out.overall_p = chisq_sf(out.psi, 4.0);
    } else {
        out.psi = -norm_quantile(p1) - norm_quantile(p2);
        out.overall_p = norm_sf(out.psi / std::sqrt(2.0));
    }
    return out;
}

}  // namespace adaptpoc
