#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "adaptpoc/model_lib.hpp"

namespace adaptpoc {

/// Optimal contrast for postulated means mu0 under group sizes n: proportional
/// to n_i (mu0_i - weighted mean), unit Euclidean norm, sum(c * mu0) > 0.
/// Throws DegenerateContrast when mu0 is constant.
std::vector<double> optimal_contrast(std::span<const double> mu0, std::span<const int> n);

/// Correlation of contrast statistics: rows of coeffs are contrasts.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& coeffs, std::span<const int> n);

/// M contrasts over k doses together with their correlation matrix.
struct ContrastSet {
    Eigen::MatrixXd coeffs;  // M x k
    std::vector<double> doses;
    std::vector<int> n;
    Eigen::MatrixXd corr;  // M x M

    std::size_t models() const { return static_cast<std::size_t>(coeffs.rows()); }
    std::size_t groups() const { return doses.size(); }
    std::vector<double> row(std::size_t m) const;

    /// Validates shapes and fills corr.
    static ContrastSet from_rows(const std::vector<std::vector<double>>& rows, std::vector<double> doses,
                                 std::vector<int> n);
    /// Optimal contrasts of each model evaluated at doses.
    static ContrastSet from_models(std::span<const DoseResponseModel> models, std::vector<double> doses,
                                   std::vector<int> n);
};

}  // namespace adaptpoc
