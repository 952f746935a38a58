#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "adaptpoc/errors.hpp"
#include "adaptpoc/gmct.hpp"
#include "worked_example.hpp"

using namespace adaptpoc;
using Catch::Approx;

namespace {

// Independent evaluation from the worked-example summary statistics.
const std::vector<double> kT1{1.5601651, 1.14165212, 0.53570708, 2.92530335, 1.20336703};
const std::vector<double> kZ1{1.66783549, 1.22044002, 0.5726774, 3.12718491, 1.28641401};
const std::vector<double> kT2{1.4135973, 2.41259966, 2.08216294, 2.63480531, 2.8537772};

ContrastSet stage2_contrasts() { return *worked::outcome().stage2_contrasts; }

}  // namespace

TEST_CASE("contrast t statistics of the worked example") {
    const auto t1 = contrast_t_stats(worked::stage1(), worked::stage1_contrasts());
    for (int m = 0; m < 5; ++m) CHECK(t1[m] == Approx(kT1[m]).margin(1e-6));
    CHECK(t1[3] == Approx(2.925).margin(5e-4));
    const auto z1 = contrast_z_stats(worked::stage1(), worked::stage1_contrasts(), worked::kSigma);
    for (int m = 0; m < 5; ++m) CHECK(z1[m] == Approx(kZ1[m]).margin(1e-6));
    const auto t2 = contrast_t_stats(worked::stage2(), stage2_contrasts());
    for (int m = 0; m < 5; ++m) CHECK(t2[m] == Approx(kT2[m]).margin(1e-6));
}

TEST_CASE("equal means give zero statistics and scaling contrasts changes nothing") {
    auto s = worked::stage1();
    s.means.assign(5, 0.8);
    for (double t : contrast_t_stats(s, worked::stage1_contrasts())) CHECK(t == Approx(0.0).margin(1e-12));

    const auto cs = worked::stage1_contrasts();
    std::vector<std::vector<double>> doubled;
    for (std::size_t m = 0; m < cs.models(); ++m) {
        auto r = cs.row(m);
        for (auto& v : r) v *= 2;
        doubled.push_back(r);
    }
    const auto c2 = ContrastSet::from_rows(doubled, cs.doses, cs.n);
    const auto a = contrast_t_stats(worked::stage1(), cs);
    const auto b = contrast_t_stats(worked::stage1(), c2);
    for (int m = 0; m < 5; ++m) CHECK(b[m] == Approx(a[m]).epsilon(1e-13));
}

TEST_CASE("zero pooled variance is degenerate") {
    auto s = worked::stage1();
    s.ss_within = 0.0;
    try {
        contrast_t_stats(s, worked::stage1_contrasts());
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateVariance);
    }
}

TEST_CASE("combination statistics") {
    const std::vector<double> p{0.01, 0.2, 0.5};
    CHECK(combination_statistic(CombinationMethod::Tippett, p) == 0.01);
    CHECK(combination_statistic(CombinationMethod::Fisher, p) ==
          Approx(-2 * (std::log(0.01) + std::log(0.2) + std::log(0.5))));
    CHECK(combination_statistic(CombinationMethod::InverseNormal, p) ==
          Approx(norm_quantile(0.99) + norm_quantile(0.8) + 0.0).margin(1e-12));
}

TEST_CASE("stage p-values of the worked example") {
    StageTester tester(1);
    const auto c1 = worked::stage1_contrasts();
    const auto c2 = stage2_contrasts();
    struct Row {
        CombinationMethod method;
        double p1, p2;
    };
    for (const Row& r : {Row{CombinationMethod::Tippett, 0.005, 0.005}, Row{CombinationMethod::Fisher, 0.047, 0.008},
                         Row{CombinationMethod::InverseNormal, 0.06, 0.008}}) {
        CAPTURE(method_name(r.method));
        const auto g1 = tester.test(kT1, c1.corr, Dof(115), r.method);
        const auto g2 = tester.test(kT2, c2.corr, Dof(117), r.method);
        CHECK(g1.stage_p == Approx(r.p1).margin(0.01));
        CHECK(g2.stage_p == Approx(r.p2).margin(0.01));
        CHECK(g1.raw_p.size() == 5);
        for (int m = 0; m < 5; ++m) CHECK(g1.raw_p[m] == Approx(t_sf(kT1[m], Dof(115))).epsilon(1e-12));
    }
}

TEST_CASE("Tippett p-value is the multivariate t tail at the maximum") {
    const auto c1 = worked::stage1_contrasts();
    const auto g = stage_p_value(kT1, c1.corr, Dof(115), CombinationMethod::Tippett, 1);
    MvIntegrator mv;
    const double direct = mv.upper_tail_tol({c1.corr, {}, Dof(115), kT1[3], 1.0}, 1e-5, 0.0).value;
    CHECK(g.stage_p == Approx(direct).margin(3e-4));
    CHECK(g.psi == Approx(t_sf(kT1[3], Dof(115))).epsilon(1e-12));
}

TEST_CASE("one contrast: every combination reproduces the raw p-value") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    StageTester tester(5);
    for (double t : {-0.5, 0.4, 1.3, 2.2}) {
        const double raw = t_sf(t, Dof(40));
        const double se = std::sqrt(raw * (1 - raw) / 200000);
        for (auto m : {CombinationMethod::Tippett, CombinationMethod::Fisher, CombinationMethod::InverseNormal}) {
            const auto g = tester.test(std::vector<double>{t}, one, Dof(40), m);
            CHECK(g.stage_p == Approx(raw).margin(m == CombinationMethod::Tippett ? 1e-6 : 4 * se + 1e-5));
        }
    }
}

TEST_CASE("Monte Carlo calibration is seed-deterministic and bounded") {
    const auto c1 = worked::stage1_contrasts();
    const auto a = stage_p_value(kT1, c1.corr, Dof(115), CombinationMethod::Fisher, 9);
    const auto b = stage_p_value(kT1, c1.corr, Dof(115), CombinationMethod::Fisher, 9);
    CHECK(a.stage_p == b.stage_p);
    NullCalibrator cal(3, 1000);
    CHECK(cal.p_value(CombinationMethod::Fisher, 1e6, c1.corr, Dof(115)) == Approx(1.0 / 1001));
    CHECK(cal.p_value(CombinationMethod::InverseNormal, -1e6, c1.corr, Dof(115)) == 1.0);
}

TEST_CASE("combining stage p-values across stages") {
    struct Row {
        double p1, p2, psi_f, p_f, psi_n, p_n;
    };
    // independent evaluation (scipy chi2/norm)
    for (const Row& r : {Row{0.005, 0.005, 21.193269, 0.00028992, 5.151659, 0.00013486},
                         Row{0.047, 0.008, 15.771843, 0.0033411, 4.083580, 0.0019414},
                         Row{0.06, 0.008, 15.283449, 0.0041480, 3.963689, 0.0025334}}) {
        const auto f = combine_across(r.p1, r.p2, CombinationMethod::Fisher);
        const auto n = combine_across(r.p1, r.p2, CombinationMethod::InverseNormal);
        CHECK(f.psi == Approx(r.psi_f).margin(1e-5));
        CHECK(f.overall_p == Approx(r.p_f).epsilon(1e-4));
        CHECK(n.psi == Approx(r.psi_n).margin(1e-5));
        CHECK(n.overall_p == Approx(r.p_n).epsilon(1e-4));
        CHECK_FALSE(f.floored);
    }
    // printed values for the two Tippett rows
    const auto f = combine_across(0.005, 0.005, CombinationMethod::Fisher);
    CHECK(f.psi == Approx(21.23).margin(0.3));
    CHECK(f.overall_p == Approx(0.0003).margin(0.0002));
    const auto n = combine_across(0.005, 0.005, CombinationMethod::InverseNormal);
    CHECK(n.psi == Approx(5.16).margin(0.05));
    CHECK(n.overall_p == Approx(0.0001).margin(0.0002));
    const auto f2 = combine_across(0.047, 0.008, CombinationMethod::Fisher);
    CHECK(f2.psi == Approx(15.78).margin(0.3));
    CHECK(f2.overall_p == Approx(0.003).margin(0.0005));

    const auto half = combine_across(0.5, 0.5, CombinationMethod::InverseNormal);
    CHECK(half.psi == Approx(0.0).margin(1e-12));
    CHECK(half.overall_p == Approx(0.5).margin(1e-12));
}

TEST_CASE("zero p-values are floored and flagged") {
    const auto f = combine_across(0.0, 0.3, CombinationMethod::Fisher);
    CHECK(f.floored);
    CHECK(std::isfinite(f.psi));
    CHECK(f.psi == Approx(-2 * (std::log(1e-12) + std::log(0.3))));
    CHECK_THROWS_AS(combine_across(0.2, 0.3, CombinationMethod::Tippett), Error);
}

TEST_CASE("Fisher combination of independent uniforms is chi-square with 4 df") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 100000;
    std::vector<double> p(n);
    for (auto& v : p) v = combine_across(1.0 - u(rng), 1.0 - u(rng), CombinationMethod::Fisher).overall_p;
    std::sort(p.begin(), p.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) d = std::max({d, std::abs(p[i] - double(i) / n), std::abs(p[i] - double(i + 1) / n)});
    // 1% critical value of the one-sample Kolmogorov-Smirnov statistic
    CHECK(d < 1.628 / std::sqrt(double(n)));
}
