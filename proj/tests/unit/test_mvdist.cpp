#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "adaptpoc/errors.hpp"
#include "adaptpoc/mvdist.hpp"
#include "adaptpoc/numeric.hpp"
#include "worked_example.hpp"

using namespace adaptpoc;
using Catch::Approx;

namespace {

Eigen::MatrixXd exchangeable(int m, double rho) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Constant(m, m, rho);
    r.diagonal().setOnes();
    return r;
}

Eigen::MatrixXd two_by_two(double rho) {
    Eigen::MatrixXd r(2, 2);
    r << 1, rho, rho, 1;
    return r;
}

}  // namespace

TEST_CASE("univariate normal tail") {
    EquiProbQuery q{Eigen::MatrixXd::Identity(1, 1), {}, Dof::infinite(), 1.645, 1.0};
    CHECK(mv_cdf_upper_tail(q).value == Approx(0.05).margin(2e-4));
    for (double b = -4.0; b <= 4.0; b += 0.25) {
        q.bound = b;
        CHECK(mv_cdf_upper_tail(q).value == Approx(norm_sf(b)).margin(1e-6));
    }
}

TEST_CASE("univariate t tail") {
    MvIntegrator mv;
    for (std::int64_t nu : {3, 12, 115}) {
        for (double b = -4.0; b <= 4.0; b += 0.5) {
            const EquiProbQuery q{Eigen::MatrixXd::Identity(1, 1), {}, Dof(nu), b, 1.0};
            CHECK(mv.upper_tail_tol(q, 1e-7, 0.0).value == Approx(t_sf(b, Dof(nu))).margin(1e-6));
        }
    }
}

TEST_CASE("conditional error of the worked example with the printed shift") {
    const auto rstar = worked::stage1_contrasts().corr;
    Eigen::VectorXd shift(5);
    shift << 1.19, 0.87, 0.42, 2.22, 0.92;
    const EquiProbQuery q{rstar, shift, Dof::infinite(), 1.968, 0.5};
    const auto p = mv_cdf_upper_tail(q);
    CHECK(p.value == Approx(0.64).margin(0.01));
    CHECK(p.std_error <= 1e-4);
}

TEST_CASE("exchangeable trivariate normal against plain Monte Carlo") {
    const auto r = exchangeable(3, 0.5);
    const auto p = mv_cdf_upper_tail({r, {}, Dof::infinite(), 2.0, 1.0});
    const Eigen::MatrixXd l = r.llt().matrixL();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    const int draws = 10000000;
    int hits = 0;
    Eigen::Vector3d e, x;
    for (int i = 0; i < draws; ++i) {
        e << z(rng), z(rng), z(rng);
        x = l * e;
        hits += x.maxCoeff() > 2.0;
    }
    const double mc = double(hits) / draws;
    const double se = std::sqrt(mc * (1 - mc) / draws);
    CHECK(std::abs(p.value - mc) <= 3 * std::hypot(se, p.std_error));
}

TEST_CASE("equicoordinate quantiles") {
    const auto rstar = worked::stage1_contrasts().corr;
    // independent evaluation with scipy at tight tolerance: 1.97049
    const double u = mv_equicoordinate_quantile(rstar, Dof::infinite(), 0.95);
    CHECK(u == Approx(1.968).margin(0.005));
    CHECK(u == Approx(1.97049).margin(2e-3));
    CHECK(mv_equicoordinate_quantile(two_by_two(0.977), Dof(230), 0.95) == Approx(1.732).margin(0.005));
    CHECK(mv_equicoordinate_quantile(Eigen::MatrixXd::Identity(1, 1), Dof::infinite(), 0.95) ==
          Approx(1.6449).margin(1e-3));
}

TEST_CASE("quantile and tail round trip") {
    MvIntegrator mv;
    const auto rstar = worked::stage1_contrasts().corr;
    for (Dof df : {Dof::infinite(), Dof(20)}) {
        for (double level : {0.8, 0.95, 0.99}) {
            const double b = mv.equicoordinate_quantile(rstar, df, level);
            const auto p = mv.upper_tail_tol({rstar, {}, df, b, 1.0}, 1e-5, 0.0);
            CHECK(p.value == Approx(1 - level).margin(1e-3));
        }
    }
}

TEST_CASE("monotone in the bound and in the level") {
    MvIntegrator mv;
    const auto rstar = worked::stage1_contrasts().corr;
    Eigen::VectorXd shift(5);
    shift << 0.3, -0.2, 0.1, 0.5, 0.0;
    for (Dof df : {Dof::infinite(), Dof(15)}) {
        double prev = 1.0;
        for (double b = -1.0; b <= 3.5; b += 0.25) {
            const double p = mv.upper_tail({rstar, shift, df, b, 1.0}, 4096).value;
            CHECK(p <= prev + 2e-4);
            prev = p;
        }
    }
    double prev_q = -kInf;
    for (double level = 0.5; level < 0.995; level += 0.05) {
        const double q = mv.equicoordinate_quantile(rstar, Dof(30), level);
        CHECK(q >= prev_q - 1e-3);
        prev_q = q;
    }
    const Eigen::MatrixXd r2 = two_by_two(0.6);
    Eigen::Vector2d b(0.4, 1.1);
    double prev_c = 1.0;
    for (double bound = 0.0; bound <= 4.0; bound += 0.25) {
        const double p = mv.conditional_t_orthant(r2, b, 0.5, 20, 20, bound).value;
        CHECK(p <= prev_c + 1e-3);
        prev_c = p;
    }
}

TEST_CASE("conditional t orthant for the two-model worked example") {
    const auto c2 = worked::stage1_contrasts(2);
    // stage-1 z statistics of the Emax and linear-log contrasts at sigma 1.478
    Eigen::Vector2d b(1.66783549, 1.22044002);
    const double q = (1.58 * 1.58) / (worked::kSigma * worked::kSigma);
    CHECK(q == Approx(1.143).margin(5e-4));
    // base critical value from the same independent evaluation: 1.73177
    const auto p = conditional_t_orthant(c2.corr, b, q, 115, 115, 1.73177);
    CHECK(p.value == Approx(0.198).margin(0.005));
    CHECK(p.value == Approx(0.194286).margin(2e-3));
}

TEST_CASE("conditional t orthant limits and reductions") {
    const auto rstar = worked::stage1_contrasts(3).corr;
    CHECK(conditional_t_orthant(rstar, Eigen::Vector3d::Zero(), 0.0, 10, 10, 60.0).value == Approx(0.0).margin(1e-9));
    MvIntegrator mv;
    for (int nu : {5, 30}) {
        for (double bound : {0.5, 1.5, 2.5}) {
            const double cond = mv.conditional_t_orthant(rstar, Eigen::Vector3d::Zero(), 0.0, nu, nu, bound, 1e-4).value;
            const double mvt = mv.upper_tail_tol({rstar, {}, Dof(nu), bound, 1.0}, 1e-5, 0.0).value;
            CHECK(cond == Approx(mvt).margin(2e-3));
        }
    }
}

TEST_CASE("deterministic under a fixed seed") {
    const auto rstar = worked::stage1_contrasts().corr;
    const EquiProbQuery q{rstar, {}, Dof(40), 2.1, 1.0};
    QmcOptions a;
    a.seed = 17;
    CHECK(mv_cdf_upper_tail(q, a).value == mv_cdf_upper_tail(q, a).value);
    MvIntegrator one(a), two(a);
    two.upper_tail({rstar, {}, Dof(7), 1.0, 1.0});
    CHECK(one.upper_tail(q).value == two.upper_tail(q).value);
}

TEST_CASE("indefinite matrices are rejected") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1, 1.5, 1.5, 1;
    try {
        mv_cdf_upper_tail({bad, {}, Dof::infinite(), 1.0, 1.0});
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NumericalDomain);
    }
}

TEST_CASE("rank-deficient correlation matches the reduced problem") {
    // R* of the five candidates has rank 4; duplicating a row must not change
    // the tail.
    const auto r = exchangeable(2, 0.3);
    Eigen::MatrixXd dup(3, 3);
    dup << 1, 0.3, 1, 0.3, 1, 0.3, 1, 0.3, 1;
    MvIntegrator mv;
    const double p2 = mv.upper_tail_tol({r, {}, Dof::infinite(), 1.7, 1.0}, 1e-6, 0.0).value;
    const double p3 = mv.upper_tail_tol({dup, {}, Dof::infinite(), 1.7, 1.0}, 1e-6, 0.0).value;
    CHECK(p3 == Approx(p2).margin(5e-5));
}
