#include "adaptpoc/contrast.hpp"

#include <algorithm>
#include <cmath>

#include "adaptpoc/errors.hpp"

namespace adaptpoc {

std::vector<double> optimal_contrast(std::span<const double> mu0, std::span<const int> n) {
    require(mu0.size() == n.size(), "means and group sizes differ in length");
    require(mu0.size() >= 2, "a contrast needs at least two groups");
    double wsum = 0.0, total = 0.0;
    for (std::size_t i = 0; i < mu0.size(); ++i) {
        require(n[i] > 0, "group sizes must be positive");
        require(std::isfinite(mu0[i]), "postulated means must be finite");
        wsum += n[i] * mu0[i];
        total += n[i];
    }
    const double mbar = wsum / total;
    double scale = 0.0;
    for (double m : mu0) scale = std::max(scale, std::abs(m));
    std::vector<double> c(mu0.size());
    double norm2 = 0.0;
    for (std::size_t i = 0; i < mu0.size(); ++i) {
        c[i] = n[i] * (mu0[i] - mbar);
        norm2 += c[i] * c[i];
    }
    const double norm = std::sqrt(norm2);
    if (!(norm > 1e-12 * std::max(scale, 1.0) * total)) {
        raise(ErrorCode::DegenerateContrast, "postulated means are constant over the doses");
    }
    double direction = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) direction += c[i] * mu0[i];
    const double sign = direction > 0.0 ? 1.0 : -1.0;
    for (double& v : c) v *= sign / norm;
    return c;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& coeffs, std::span<const int> n) {
    require(static_cast<std::size_t>(coeffs.cols()) == n.size(), "contrast length differs from number of groups");
    Eigen::VectorXd inv_n(coeffs.cols());
    for (Eigen::Index i = 0; i < coeffs.cols(); ++i) {
        require(n[i] > 0, "group sizes must be positive");
        inv_n(i) = 1.0 / n[i];
    }
    Eigen::MatrixXd cov = coeffs * inv_n.asDiagonal() * coeffs.transpose();
    Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    for (Eigen::Index m = 0; m < sd.size(); ++m) require(sd(m) > 0.0, "contrast rows must be nonzero");
    Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    for (Eigen::Index m = 0; m < corr.rows(); ++m) {
        corr(m, m) = 1.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double v = std::clamp(0.5 * (corr(m, j) + corr(j, m)), -1.0, 1.0);
            corr(m, j) = corr(j, m) = v;
        }
    }
    return corr;
}

std::vector<double> ContrastSet::row(std::size_t m) const {
    std::vector<double> out(groups());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = coeffs(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i));
    return out;
}

ContrastSet ContrastSet::from_rows(const std::vector<std::vector<double>>& rows, std::vector<double> doses,
                                   std::vector<int> n) {
    require(!rows.empty(), "contrast set needs at least one contrast");
    require(doses.size() == n.size(), "doses and group sizes differ in length");
    ContrastSet s;
    s.coeffs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(doses.size()));
    for (std::size_t m = 0; m < rows.size(); ++m) {
        require(rows[m].size() == doses.size(), "contrast length differs from number of doses");
        for (std::size_t i = 0; i < doses.size(); ++i) s.coeffs(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)) = rows[m][i];
    }
    s.doses = std::move(doses);
    s.n = std::move(n);
    s.corr = correlation_matrix(s.coeffs, s.n);
    return s;
}

ContrastSet ContrastSet::from_models(std::span<const DoseResponseModel> models, std::vector<double> doses,
                                     std::vector<int> n) {
    std::vector<std::vector<double>> rows;
    rows.reserve(models.size());
    for (const auto& model : models) rows.push_back(optimal_contrast(model.at(doses), n));
    return from_rows(rows, std::move(doses), std::move(n));
}

}  // namespace adaptpoc
