#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "adaptpoc/amct_crp.hpp"
#include "adaptpoc/errors.hpp"
#include "adaptpoc/simharness.hpp"
#include "worked_example.hpp"

using namespace adaptpoc;
using Catch::Approx;

namespace {

// Independent scipy evaluation of the worked example (tests/oracles).
constexpr double kUStar = 1.9704906170441652;
constexpr double kA = 0.6340993104619788;
constexpr double kUTilde = 2.2619440523284475;
const double kB[5] = {1.31853133, 0.96489719, 0.45270822, 2.47171643, 1.01723153};
const double kZ[5] = {2.20878773, 2.48414653, 1.76415986, 4.13165278, 2.81378307};
const double kRTilde[5][5] = {
    {0.375008, 0.331158, 0.358507, 0.29711, 0.198791},
    {0.331158, 0.374929, 0.368253, 0.369789, 0.324605},
    {0.358507, 0.368253, 0.375091, 0.351315, 0.2834},
    {0.29711, 0.369789, 0.351315, 0.375273, 0.351597},
    {0.198791, 0.324605, 0.2834, 0.351597, 0.374715},
};
const double kRTildePrinted[5][5] = {
    {0.375, 0.331, 0.358, 0.297, 0.199},
    {0.331, 0.375, 0.368, 0.370, 0.325},
    {0.358, 0.368, 0.375, 0.351, 0.283},
    {0.297, 0.370, 0.351, 0.375, 0.352},
    {0.199, 0.325, 0.283, 0.352, 0.375},
};
constexpr double kCStar = 1.7317733769857293;
constexpr double kAt = 0.1942863749980246;
constexpr double kCTilde = 1.7994058708141978;

// Stage 2 repeating the stage-1 design: no adaptation.
AdaptationOutcome unadapted(const ContrastSet& c1) {
    AdaptationOutcome o;
    o.retained_doses = c1.doses;
    o.retained_index = {0, 1, 2, 3, 4};
    o.stage2_contrasts = c1;
    o.provenance.assign(c1.models(), Provenance::NotAdapted);
    o.fit_status.resize(c1.models());
    return o;
}

}  // namespace

TEST_CASE("known variance: worked example") {
    AmctEngine engine;
    const auto s2 = worked::stage2();
    const auto r = engine.known_variance(worked::stage1(), worked::stage1_contrasts(), &s2, worked::outcome(),
                                         worked::kSigma, 0.05);
    const auto& st = r.state;
    CHECK(st.base_critical == Approx(kUStar).margin(2e-3));
    CHECK(st.base_critical == Approx(1.968).margin(0.005));
    CHECK(st.conditional_error == Approx(kA).margin(2e-3));
    CHECK(st.conditional_error == Approx(0.64).margin(0.01));
    for (int a = 0; a < 5; ++a) {
        CHECK(st.adapted_shift(a) == Approx(kB[a]).margin(1e-6));
        CHECK(r.stats[a] == Approx(kZ[a]).margin(1e-6));
        for (int b = 0; b < 5; ++b) {
            CHECK(st.adapted_cov(a, b) == Approx(kRTilde[a][b]).margin(1e-5));
            CHECK(st.adapted_cov(a, b) == Approx(kRTildePrinted[a][b]).margin(0.003));
        }
    }
    REQUIRE(st.adaptive_critical);
    CHECK(*st.adaptive_critical == Approx(kUTilde).margin(3e-3));
    CHECK(*st.adaptive_critical == Approx(2.263).margin(0.005));
    const double printed_z[5] = {2.22, 2.50, 1.78, 4.15, 2.83};
    for (int m = 0; m < 5; ++m) CHECK(r.stats[m] == Approx(printed_z[m]).margin(0.03));
    CHECK(r.reject);
    CHECK(st.tail_at_max <= st.conditional_error);

    // the decision-only path agrees
    const auto fast = engine.known_variance(worked::stage1(), worked::stage1_contrasts(), &s2, worked::outcome(),
                                            worked::kSigma, 0.05, false);
    CHECK(fast.reject);
    CHECK_FALSE(fast.state.adaptive_critical);
}

TEST_CASE("known variance: adapted law at the adaptive critical value carries the conditional error") {
    AmctEngine engine;
    const auto s2 = worked::stage2();
    const auto r = engine.known_variance(worked::stage1(), worked::stage1_contrasts(), &s2, worked::outcome(),
                                         worked::kSigma, 0.05);
    MvIntegrator mv(QmcOptions{.seed = 4242});
    const EquiProbQuery q{r.state.adapted_cov, r.state.adapted_shift, Dof::infinite(), *r.state.adaptive_critical, 1.0};
    CHECK(mv.upper_tail_tol(q, 1e-4, 0.0).value == Approx(r.state.conditional_error).margin(2e-3));
}

TEST_CASE("known variance: without adaptation the critical value is unchanged") {
    AmctEngine engine;
    const auto c1 = worked::stage1_contrasts();
    const StageSummary s2{worked::doses(), std::vector<int>(5, 24), {0.1, 0.2, 0.3, 0.2, 0.1}, 2.0 * 115};
    const auto r = engine.known_variance(worked::stage1(), c1, &s2, unadapted(c1), worked::kSigma, 0.05);
    CHECK(*r.state.adaptive_critical == Approx(r.state.base_critical).margin(1e-5));
}

TEST_CASE("known variance: futility stops before stage 2") {
    AmctEngine engine;
    auto o = worked::outcome();
    o.futility_stop = true;
    o.stage2_contrasts.reset();
    const auto r = engine.known_variance(worked::stage1(), worked::stage1_contrasts(), nullptr, o, worked::kSigma, 0.05);
    CHECK(r.futility_stop);
    CHECK_FALSE(r.reject);
    CHECK(r.stats.empty());
    CHECK(r.state.conditional_error == Approx(kA).margin(0.01));
}

TEST_CASE("unknown variance: two-model worked example") {
    AmctEngine engine;
    const auto s2 = worked::stage2();
    const auto r = engine.unknown_variance(worked::stage1(), worked::stage1_contrasts(2), &s2, worked::outcome(2),
                                           worked::kSigma, 0.05);
    const auto& st = r.state;
    CHECK(st.base_critical == Approx(kCStar).margin(2e-3));
    CHECK(st.base_critical == Approx(1.732).margin(0.005));
    CHECK(st.conditional_error == Approx(kAt).margin(2e-3));
    CHECK(st.conditional_error == Approx(0.198).margin(0.005));
    REQUIRE(st.adaptive_critical);
    CHECK(*st.adaptive_critical == Approx(kCTilde).margin(3e-3));
    CHECK(*st.adaptive_critical == Approx(1.802).margin(0.01));
    CHECK(r.stats[0] == Approx(2.10614291).margin(1e-6));
    CHECK(r.stats[1] == Approx(2.36870547).margin(1e-6));
    CHECK(r.stats[0] == Approx(2.11).margin(0.03));
    CHECK(r.stats[1] == Approx(2.38).margin(0.03));
    CHECK(r.reject);
    CHECK(st.adapted_cov(0, 0) == Approx(0.375).margin(0.003));
    CHECK(st.adapted_cov(1, 1) == Approx(0.375).margin(0.003));
    CHECK(st.adapted_cov(0, 1) == Approx(0.331).margin(0.003));
    CHECK(st.adapted_cov(0, 1) / std::sqrt(st.adapted_cov(0, 0) * st.adapted_cov(1, 1)) == Approx(0.883).margin(0.003));
}

TEST_CASE("unknown variance: without adaptation the critical value is unchanged") {
    AmctEngine engine;
    const auto c1 = worked::stage1_contrasts(2);
    const StageSummary s2{worked::doses(), std::vector<int>(5, 24), {0.1, 0.2, 0.3, 0.2, 0.1}, 2.1 * 115};
    const auto r = engine.unknown_variance(worked::stage1(), c1, &s2, unadapted(c1), worked::kSigma, 0.05);
    CHECK(std::abs(*r.state.adaptive_critical - r.state.base_critical) <= 2 * engine.bisection_tol);
}

TEST_CASE("adaptive critical values decrease as the conditional error grows") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> z;
    AmctEngine engine;
    const auto c1 = worked::stage1_contrasts();
    const auto c12 = worked::stage1_contrasts(2);
    const auto s2 = worked::stage2();
    for (int rep = 0; rep < 4; ++rep) {
        auto s1 = worked::stage1();
        for (auto& m : s1.means) m = 0.3 + 0.3 * z(rng);
        double prev_a = -1, prev_u = INFINITY, prev_at = -1, prev_c = INFINITY;
        for (double alpha : {0.01, 0.025, 0.05, 0.1, 0.2}) {
            const auto k = engine.known_variance(s1, c1, &s2, worked::outcome(), worked::kSigma, alpha);
            CHECK(k.state.conditional_error >= prev_a - 1e-4);
            CHECK(*k.state.adaptive_critical <= prev_u + 1e-4);
            prev_a = k.state.conditional_error;
            prev_u = *k.state.adaptive_critical;
            const auto u = engine.unknown_variance(s1, c12, &s2, worked::outcome(2), worked::kSigma, alpha);
            CHECK(u.state.conditional_error >= prev_at - 1e-3);
            CHECK(*u.state.adaptive_critical <= prev_c + 1e-4);
            prev_at = u.state.conditional_error;
            prev_c = *u.state.adaptive_critical;
        }
    }
}

TEST_CASE("stage 2 must match the adapted design") {
    AmctEngine engine;
    const StageSummary wrong{worked::doses(), std::vector<int>(5, 24), {0, 0, 0, 0, 0.1}, 100.0};
    CHECK_THROWS_AS(engine.known_variance(worked::stage1(), worked::stage1_contrasts(), &wrong, worked::outcome(),
                                          worked::kSigma, 0.05),
                    Error);
}

TEST_CASE("known and unknown variance decisions agree in large samples") {
    // N1 = N2 = 240 under Emax2; the unknown-variance test plugs in the true
    // sigma as its reference value.
    auto sc = make_scenario("emax2", 240, 1000, 3);
    const TrialRunner runner(sc);
    Engines engines(sc.seed, 20000);
    int agree = 0, trials = 0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) {
        const auto data = runner.generate(static_cast<std::uint64_t>(r));
        const auto s1 = summarize(sc.doses, data.stage1);
        std::optional<StageSummary> s2;
        if (!data.outcome.futility_stop) s2 = summarize(data.outcome.retained_doses, data.stage2);
        const auto* p2 = s2 ? &*s2 : nullptr;
        const auto k = engines.amct.known_variance(s1, runner.stage1_contrasts(), p2, data.outcome, sc.sigma, 0.05, false);
        const auto u =
            engines.amct.unknown_variance(s1, runner.stage1_contrasts(), p2, data.outcome, sc.sigma, 0.05, false);
        agree += k.reject == u.reject;
        ++trials;
    }
    CHECK(double(agree) / trials >= 0.95);
}
