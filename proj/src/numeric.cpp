#include "adaptpoc/numeric.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "adaptpoc/errors.hpp"

namespace adaptpoc {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ContractViolation: return "ContractViolation";
        case ErrorCode::UnderdeterminedFit: return "UnderdeterminedFit";
        case ErrorCode::DegenerateDesign: return "DegenerateDesign";
        case ErrorCode::DegenerateContrast: return "DegenerateContrast";
        case ErrorCode::DegenerateVariance: return "DegenerateVariance";
        case ErrorCode::NumericalDomain: return "NumericalDomain";
        case ErrorCode::DataError: return "DataError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
double norm_quantile(double p) {
    if (p <= 0.0) return -kInf;
    if (p >= 1.0) return kInf;
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -x : x;
}

double log_norm_sf(double x) {
    if (x < 30.0) return std::log(norm_sf(x));
    // Asymptotic series of the Mills ratio.
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(x) - 0.5 * std::log(2.0 * M_PI) + std::log(series);
}

double t_sf(double t, Dof dof) {
    if (dof.is_infinite()) return norm_sf(t);
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    boost::math::students_t dist(static_cast<double>(dof.value()));
    return boost::math::cdf(boost::math::complement(dist, t));
}

double t_quantile(double p, Dof dof) {
    if (dof.is_infinite()) return norm_quantile(p);
    if (p <= 0.0) return -kInf;
    if (p >= 1.0) return kInf;
    boost::math::students_t dist(static_cast<double>(dof.value()));
    return boost::math::quantile(dist, p);
}

double chisq_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, x));
}

double chisq_quantile(double p, double df) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return kInf;
    boost::math::chi_squared dist(df);
    return boost::math::quantile(dist, p);
}

double chisq_pdf(double x, double df) {
    if (x <= 0.0) return 0.0;
    boost::math::chi_squared dist(df);
    return boost::math::pdf(dist, x);
}

}  // namespace adaptpoc
