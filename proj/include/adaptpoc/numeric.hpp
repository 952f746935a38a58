#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace adaptpoc {

/// Degrees of freedom of a reference law; infinite means Gaussian.
class Dof {
   public:
    static constexpr Dof infinite() { return Dof(); }
    constexpr explicit Dof(std::int64_t nu) : nu_(nu) {}

    constexpr bool is_infinite() const { return nu_ == 0; }
    constexpr std::int64_t value() const { return nu_; }

    friend constexpr bool operator==(Dof, Dof) = default;

    std::string to_string() const { return is_infinite() ? "inf" : std::to_string(nu_); }

   private:
    constexpr Dof() = default;
    std::int64_t nu_ = 0;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_cdf(double x);
double norm_sf(double x);
double norm_quantile(double p);
/// log of the standard normal upper tail, accurate far into the tail.
double log_norm_sf(double x);

/// Upper tail P(T > t) of Student t (Gaussian when dof is infinite).
double t_sf(double t, Dof dof);
double t_quantile(double p, Dof dof);

double chisq_sf(double x, double df);
double chisq_quantile(double p, double df);
double chisq_pdf(double x, double df);

}  // namespace adaptpoc
