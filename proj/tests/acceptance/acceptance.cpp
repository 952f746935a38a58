// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   acceptance [--replications N] [--threads N] [--only 1,2,...]
//
// The defaults (10,000 replicates per scenario) take tens of minutes on one
// core; smaller --replications values are for smoke runs only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "adaptpoc/amct_crp.hpp"
#include "adaptpoc/gmct.hpp"
#include "adaptpoc/mvdist.hpp"
#include "adaptpoc/simharness.hpp"
#include "brute_isotonic.hpp"
#include "worked_example.hpp"

using namespace adaptpoc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

/// Collects individual checks of one criterion.
struct Checks {
    bool ok = true;
    std::vector<std::string> failures;

    void near(const std::string& what, double got, double want, double tol) {
        if (!(std::abs(got - want) <= tol)) {
            ok = false;
            failures.push_back(fmt("%s = %.6g, expected %.6g +/- %g", what.c_str(), got, want, tol));
        }
    }
    void that(const std::string& what, bool cond) {
        if (!cond) {
            ok = false;
            failures.push_back(what);
        }
    }
};

struct Outcome {
    bool pass = false;
    std::string summary;
};

std::map<int, Outcome> results;
std::map<int, std::string> titles{
    {1, "worked example, stage-wise GMCT p-values"},
    {2, "worked example, cross-stage combinations"},
    {3, "worked example, AMCT with known variance"},
    {4, "worked example, AMCT with unknown variance"},
    {5, "null rejection rates at N1 = N2 = 60, 120"},
    {6, "power ordering at N1 = N2 = 120"},
    {7, "invariant suites"},
    {8, "determinism across thread counts"},
};

void report(int id, const Checks& c, const std::string& summary) {
    Outcome o{c.ok, summary};
    for (const auto& f : c.failures) std::cout << "    failed: " << f << '\n';
    results[id] = o;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << titles[id] << ": " << summary
              << std::endl;
}

struct Options {
    int replications = 10000;
    int threads = 0;
    std::set<int> only;
};

// ---------------------------------------------------------------------------

void criterion1() {
    const auto t0 = Clock::now();
    StageTester tester(1);
    const auto c1 = worked::stage1_contrasts();
    const auto c2 = *worked::outcome().stage2_contrasts;
    const auto s1 = worked::stage1();
    const auto s2 = worked::stage2();
    const auto t1 = contrast_t_stats(s1, c1);
    const auto t2 = contrast_t_stats(s2, c2);
    struct Row {
        CombinationMethod m;
        const char* name;
        double p1, p2;
    };
    Checks c;
    std::string summary;
    for (const Row& r : {Row{CombinationMethod::Tippett, "T", 0.005, 0.005}, Row{CombinationMethod::Fisher, "F", 0.047, 0.008},
                         Row{CombinationMethod::InverseNormal, "N", 0.06, 0.008}}) {
        const double p1 = tester.test(t1, c1.corr, Dof(s1.df()), r.m).stage_p;
        const double p2 = tester.test(t2, c2.corr, Dof(s2.df()), r.m).stage_p;
        c.near(fmt("p_%s1", r.name), p1, r.p1, 0.01);
        c.near(fmt("p_%s2", r.name), p2, r.p2, 0.01);
        summary += fmt("p_%s1 %.4f p_%s2 %.4f, ", r.name, p1, r.name, p2);
    }
    const double secs = seconds_since(t0);
    c.that(fmt("runtime %.1f s >= 10 s", secs), secs < 10.0);
    report(1, c, summary + fmt("%.1f s", secs));
}

void criterion2() {
    struct Row {
        const char* within;
        double p1, p2, psi_f, p_f, psi_n, p_n;
    };
    Checks c;
    std::string summary;
    for (const Row& r : {Row{"T", 0.005, 0.005, 21.23, 0.0003, 5.16, 0.0001},
                         Row{"F", 0.047, 0.008, 15.78, 0.003, 4.08, 0.002},
                         Row{"N", 0.06, 0.008, 15.18, 0.004, 3.95, 0.003}}) {
        const auto f = combine_across(r.p1, r.p2, CombinationMethod::Fisher);
        const auto n = combine_across(r.p1, r.p2, CombinationMethod::InverseNormal);
        c.near(fmt("Fisher Psi (%s)", r.within), f.psi, r.psi_f, 0.3);
        c.near(fmt("Fisher p (%s)", r.within), f.overall_p, r.p_f, 0.0005);
        c.near(fmt("inverse-normal Psi (%s)", r.within), n.psi, r.psi_n, 0.05);
        c.near(fmt("inverse-normal p (%s)", r.within), n.overall_p, r.p_n, 0.0005);
        c.that(fmt("reject (%s)", r.within), f.overall_p <= 0.05 && n.overall_p <= 0.05);
        summary += fmt("%s: %.2f/%.4f %.2f/%.4f; ", r.within, f.psi, f.overall_p, n.psi, n.overall_p);
    }
    report(2, c, summary);
}

void criterion3() {
    const auto t0 = Clock::now();
    AmctEngine engine;
    const auto s2 = worked::stage2();
    const auto r = engine.known_variance(worked::stage1(), worked::stage1_contrasts(), &s2, worked::outcome(),
                                         worked::kSigma, 0.05);
    const double secs = seconds_since(t0);
    const double printed_r[5][5] = {
        {0.375, 0.331, 0.358, 0.297, 0.199}, {0.331, 0.375, 0.368, 0.370, 0.325},
        {0.358, 0.368, 0.375, 0.351, 0.283}, {0.297, 0.370, 0.351, 0.375, 0.352},
        {0.199, 0.325, 0.283, 0.352, 0.375},
    };
    const double printed_z[5] = {2.22, 2.50, 1.78, 4.15, 2.83};
    Checks c;
    const auto& st = r.state;
    c.near("u*", st.base_critical, 1.968, 0.005);
    c.near("A", st.conditional_error, 0.64, 0.01);
    double worst = 0;
    for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
            c.near(fmt("R~(%d,%d)", a + 1, b + 1), st.adapted_cov(a, b), printed_r[a][b], 0.003);
            worst = std::max(worst, std::abs(st.adapted_cov(a, b) - printed_r[a][b]));
        }
    }
    c.that("adaptive critical value computed", st.adaptive_critical.has_value());
    const double ut = st.adaptive_critical.value_or(NAN);
    c.near("u~", ut, 2.263, 0.01);
    std::string zs;
    for (int m = 0; m < 5; ++m) {
        c.near(fmt("Z_%d", m + 1), r.stats[m], printed_z[m], 0.03);
        zs += fmt("%s%.3f", m ? " " : "", r.stats[m]);
    }
    c.that("reject", r.reject);
    c.that(fmt("runtime %.1f s >= 30 s", secs), secs < 30.0);
    report(3, c,
           fmt("u* %.4f, A %.4f, max |R~ - printed| %.4f, u~ %.4f, Z (%s), reject %s, %.1f s", st.base_critical,
               st.conditional_error, worst, ut, zs.c_str(), r.reject ? "yes" : "no", secs));
}

void criterion4() {
    const auto t0 = Clock::now();
    AmctEngine engine;
    const auto s2 = worked::stage2();
    const auto r = engine.unknown_variance(worked::stage1(), worked::stage1_contrasts(2), &s2, worked::outcome(2),
                                           worked::kSigma, 0.05);
    const double secs = seconds_since(t0);
    Checks c;
    const auto& st = r.state;
    c.near("c*", st.base_critical, 1.732, 0.005);
    c.near("A", st.conditional_error, 0.198, 0.005);
    const double ct = st.adaptive_critical.value_or(NAN);
    c.near("c~", ct, 1.802, 0.01);
    c.near("T_1", r.stats[0], 2.11, 0.03);
    c.near("T_2", r.stats[1], 2.38, 0.03);
    c.that("reject", r.reject);
    c.that(fmt("runtime %.1f s >= 300 s", secs), secs < 300.0);
    report(4, c,
           fmt("c* %.4f, A %.4f, c~ %.4f, T (%.3f %.3f), reject %s, %.1f s", st.base_critical, st.conditional_error, ct,
               r.stats[0], r.stats[1], r.reject ? "yes" : "no", secs));
}

// ---------------------------------------------------------------------------

std::string report_csv(const SimulationReport& r) {
    std::ostringstream out;
    write_report_csv(r, out);
    return out.str();
}

std::vector<SimulationScenario> null_scenarios(int reps) {
    return {make_scenario("flat", 60, reps, 1), make_scenario("flat", 120, reps, 1)};
}

void criterion5(const Options& opt, SimulationReport& out, double& secs) {
    const auto t0 = Clock::now();
    out = run_study(null_scenarios(opt.replications), opt.threads, true);
    secs = seconds_since(t0);
    Checks c;
    double lo = 1, hi = 0;
    int rows = 0;
    for (const auto& s : out.scenarios) {
        c.that(fmt("%s: %d failed replicates", s.scenario.c_str(), s.failed), s.failed == 0);
        for (const auto& row : s.rows) {
            if (row.method.design == DesignKind::NaivePooled) continue;
            const auto label = s.scenario + " " + row.method.label();
            std::cout << fmt("    %-40s %.4f\n", label.c_str(), row.rate);
            c.that(fmt("%s rate %.4f outside (0.0457, 0.0543)", label.c_str(), row.rate),
                   row.rate > 0.0457 && row.rate < 0.0543);
            lo = std::min(lo, row.rate);
            hi = std::max(hi, row.rate);
            ++rows;
        }
    }
    report(5, c, fmt("%d method rows, rates in [%.4f, %.4f], %d replicates each, %.0f s", rows, lo, hi,
                     opt.replications, secs));
}

void criterion6(const Options& opt) {
    const auto t0 = Clock::now();
    std::vector<SimulationScenario> scs;
    for (const char* truth : {"exponential2", "step", "emax2", "doublelogistic"}) {
        auto sc = make_scenario(truth, 120, opt.replications, 1);
        sc.methods.clear();
        for (bool known : {true, false}) {
            for (auto d : {DesignKind::Adaptive, DesignKind::NonAdaptive}) {
                for (auto t : {TestKind::GmctTippett, TestKind::GmctFisher, TestKind::GmctInverseNormal}) {
                    sc.methods.push_back({t, d, known});
                }
            }
        }
        scs.push_back(sc);
    }
    const auto rep = run_study(scs, opt.threads);
    Checks c;
    std::string summary;
    for (const auto& s : rep.scenarios) {
        const bool strict = s.true_model == "exponential2" || s.true_model == "step";
        double min_gap = INFINITY;
        for (const auto& row : s.rows) {
            if (row.method.design != DesignKind::Adaptive) continue;
            MethodId twin = row.method;
            twin.design = DesignKind::NonAdaptive;
            const auto it = std::find_if(s.rows.begin(), s.rows.end(), [&](const auto& x) { return x.method == twin; });
            const double gap = row.rate - it->rate;
            min_gap = std::min(min_gap, gap);
            std::cout << fmt("    %-16s %-28s adaptive %.4f non-adaptive %.4f\n", s.true_model.c_str(),
                             row.method.label().c_str(), row.rate, it->rate);
            if (strict) {
                c.that(fmt("%s %s: adaptive %.4f not above non-adaptive %.4f", s.true_model.c_str(),
                           row.method.label().c_str(), row.rate, it->rate),
                       gap > 0.0);
            } else {
                c.that(fmt("%s %s: adaptive %.4f more than 0.02 below non-adaptive %.4f", s.true_model.c_str(),
                           row.method.label().c_str(), row.rate, it->rate),
                       gap >= -0.02);
            }
        }
        summary += fmt("%s min(adaptive - non-adaptive) %+.4f; ", s.true_model.c_str(), min_gap);
    }
    report(6, c, summary + fmt("%.0f s", seconds_since(t0)));
}

// ---------------------------------------------------------------------------
// Criterion 7 pieces.

// Largest excess of the empirical CDF over the uniform CDF.
double excess_over_uniform(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d = std::max(d, double(i + 1) / n - p[i]);
    return d;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::string pclud_and_independence(const SimulationReport& null_report, Checks& c) {
    double worst_excess = 0, worst_band = 1, worst_corr = 0;
    for (const auto& s : null_report.scenarios) {
        const auto methods = make_scenario("flat", s.n1, 1, 1).methods;
        for (std::size_t m = 0; m < methods.size(); ++m) {
            if (methods[m].test == TestKind::Amct || methods[m].design != DesignKind::Adaptive) continue;
            std::vector<double> p1, q1, q2;
            for (const auto& t : s.trials) {
                if (t.failed) continue;
                const auto& o = t.outcomes[m];
                p1.push_back(o.p1);
                if (o.p2 >= 0) {
                    q1.push_back(o.p1);
                    q2.push_back(o.p2);
                }
            }
            const auto label = s.scenario + " " + methods[m].label();
            // one-sided use of the 99% Kolmogorov-Smirnov band
            const double band = 1.628 / std::sqrt(double(p1.size()));
            const double excess = excess_over_uniform(p1);
            c.that(fmt("p-clud %s: empirical CDF exceeds uniform by %.4f > %.4f", label.c_str(), excess, band),
                   excess <= band);
            const double r = correlation(q1, q2);
            c.that(fmt("independence %s: corr(p1, p2) = %.4f", label.c_str(), r), std::abs(r) <= 0.03);
            std::cout << fmt("    %-40s max(F - U) %.4f (band %.4f), corr(p1, p2) %+.4f over %zu\n", label.c_str(),
                             excess, band, r, q1.size());
            worst_excess = std::max(worst_excess, excess);
            worst_band = std::min(worst_band, band);
            if (std::abs(r) > std::abs(worst_corr)) worst_corr = r;
        }
    }
    return fmt("p-clud max excess %.4f (band %.4f), max |corr(p1,p2)| %.4f", worst_excess, worst_band,
               std::abs(worst_corr));
}

std::string conditional_error_mean(Checks& c, int draws) {
    // Null stage-1 summaries at N1 = 120: group means N(0, sigma^2 / 24).
    const double sigma = 1.478;
    const auto c1 = worked::stage1_contrasts();
    AmctEngine engine;
    AdaptationOutcome stop;
    stop.futility_stop = true;
    stop.retained_doses = {0.0};
    stop.retained_index = {0};
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> z;
    double sum = 0, sq = 0;
    StageSummary s1 = worked::stage1();
    s1.ss_within = sigma * sigma * s1.df();
    for (int i = 0; i < draws; ++i) {
        for (int g = 0; g < 5; ++g) s1.means[g] = sigma / std::sqrt(24.0) * z(rng);
        const double a = engine.known_variance(s1, c1, nullptr, stop, sigma, 0.05, false).state.conditional_error;
        sum += a;
        sq += a * a;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sq / draws - mean * mean) / draws);
    c.near("mean conditional error", mean, 0.05, 0.003);
    return fmt("mean A %.4f (se %.4f, %d draws)", mean, se, draws);
}

std::string naive_pooling(const SimulationReport& null_report, Checks& c) {
    double best = 0;
    for (const auto& s : null_report.scenarios) {
        for (const auto& row : s.rows) {
            if (row.method.design == DesignKind::NaivePooled) {
                best = std::max(best, row.rate);
                std::cout << fmt("    %-40s %.4f\n", (s.scenario + " " + row.method.label()).c_str(), row.rate);
            }
        }
    }
    c.that(fmt("naive pooling rate %.4f not above 0.06", best), best > 0.06);
    return fmt("naive pooling max rate %.4f", best);
}

std::string pava_oracle(Checks& c) {
    std::mt19937_64 rng(606);
    std::normal_distribution<double> z;
    std::uniform_int_distribution<int> wn(1, 40);
    int cases = 0;
    double worst = 0;
    for (std::size_t k = 1; k <= 6; ++k) {
        for (int rep = 0; rep < 2000; ++rep) {
            std::vector<double> y(k);
            std::vector<int> w(k);
            for (std::size_t i = 0; i < k; ++i) {
                // ties are frequent with rounded data
                y[i] = rep % 2 ? std::round(2 * z(rng)) / 2 : z(rng);
                w[i] = rep % 3 ? wn(rng) : 1;
            }
            const auto got = isotonic_means(y, w);
            const auto want = oracle::brute_isotonic(y, w);
            for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
            ++cases;
        }
    }
    c.that(fmt("isotonic regression differs from exhaustive search by %.3g", worst), worst <= 1e-12);
    return fmt("PAVA vs exhaustive search: %d cases, max diff %.1e", cases, worst);
}

std::string kernels_vs_monte_carlo(Checks& c) {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int draws = 10000000;
    double worst = 0;
    MvIntegrator mv;
    for (int k = 0; k < 20; ++k) {
        const int dim = 2 + k % 4;
        Eigen::MatrixXd f(dim, dim + 1);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j <= dim; ++j) f(i, j) = z(rng);
        }
        Eigen::MatrixXd cov = f * f.transpose();
        const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
        const Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
        Eigen::VectorXd shift(dim);
        for (int i = 0; i < dim; ++i) shift(i) = 0.5 * z(rng);
        const bool gaussian = k % 2 == 0;
        const Dof df = gaussian ? Dof::infinite() : Dof(3 + static_cast<int>(20 * u(rng)));
        const double bound = 1.0 + 1.5 * u(rng);
        const auto est = mv.upper_tail_tol({corr, shift, df, bound, 1.0}, 2e-5, 0.0);

        const Eigen::MatrixXd l = corr.llt().matrixL();
        std::chi_squared_distribution<double> chi(gaussian ? 1.0 : double(df.value()));
        std::mt19937_64 mc_rng(1000 + k);
        Eigen::VectorXd e(dim);
        long hits = 0;
        for (int i = 0; i < draws; ++i) {
            for (int j = 0; j < dim; ++j) e(j) = z(mc_rng);
            const Eigen::VectorXd y = shift + l * e;
            const double s = gaussian ? 1.0 : std::sqrt(chi(mc_rng) / double(df.value()));
            hits += (y / s).maxCoeff() > bound;
        }
        const double p = double(hits) / draws;
        const double se = std::hypot(std::sqrt(p * (1 - p) / draws), est.std_error);
        const double zscore = std::abs(est.value - p) / se;
        worst = std::max(worst, zscore);
        c.that(fmt("case %d (dim %d, df %s): kernel %.6f vs Monte Carlo %.6f, %.2f standard errors", k, dim,
                   df.to_string().c_str(), est.value, p, zscore),
               zscore <= 3.0);
    }
    return fmt("MVN/MVT vs 1e7-draw Monte Carlo: 20 cases, max %.2f standard errors", worst);
}

void criterion7(const SimulationReport* null_report) {
    const auto t0 = Clock::now();
    Checks c;
    std::vector<std::string> parts;
    if (null_report) {
        parts.push_back(pclud_and_independence(*null_report, c));
        parts.push_back(naive_pooling(*null_report, c));
    } else {
        c.that("null simulation (criterion 5) was not run", false);
    }
    parts.push_back(conditional_error_mean(c, 100000));
    parts.push_back(pava_oracle(c));
    parts.push_back(kernels_vs_monte_carlo(c));
    std::string summary;
    for (const auto& p : parts) summary += p + "; ";
    report(7, c, summary + fmt("%.0f s", seconds_since(t0)));
}

void criterion8(const Options& opt, const SimulationReport& first, int first_threads) {
    const auto t0 = Clock::now();
    const int other = first_threads == 1 ? 4 : 1;
    const auto second = run_study(null_scenarios(opt.replications), other);
    const auto a = report_csv(first), b = report_csv(second);
    Checks c;
    c.that("report CSVs differ", a == b);
    report(8, c,
           fmt("%zu-byte CSV identical with %d and %d threads: %s, %.0f s", a.size(), first_threads, other,
               a == b ? "yes" : "no", seconds_since(t0)));
}

Options parse(int argc, char** argv) {
    Options o;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << "missing value for " << a << '\n';
                std::exit(2);
            }
            return argv[++i];
        };
        if (a == "--replications") {
            o.replications = std::stoi(next());
        } else if (a == "--threads") {
            o.threads = std::stoi(next());
        } else if (a == "--only") {
            std::stringstream ss(next());
            for (std::string t; std::getline(ss, t, ',');) o.only.insert(std::stoi(t));
        } else {
            std::cerr << "unknown argument " << a << '\n';
            std::exit(2);
        }
    }
    if (o.threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        o.threads = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const auto opt = parse(argc, argv);
    auto want = [&](int id) { return opt.only.empty() || opt.only.count(id) > 0; };
    const auto t0 = Clock::now();
    auto guarded = [&](int id, const std::function<void()>& f) {
        if (!want(id)) return;
        try {
            f();
        } catch (const std::exception& e) {
            Checks c;
            c.that(std::string("exception: ") + e.what(), false);
            report(id, c, "aborted");
        }
    };

    guarded(1, criterion1);
    guarded(2, criterion2);
    guarded(3, criterion3);
    guarded(4, criterion4);

    std::optional<SimulationReport> null_report;
    if (want(5) || want(7) || want(8)) {
        guarded(5, [&] {
            SimulationReport r;
            double secs = 0;
            criterion5(opt, r, secs);
            null_report = std::move(r);
        });
    }
    guarded(7, [&] { criterion7(null_report ? &*null_report : nullptr); });
    guarded(8, [&] {
        if (!null_report) throw std::runtime_error("criterion 5 simulation missing");
        criterion8(opt, *null_report, opt.threads);
    });
    guarded(6, [&] { criterion6(opt); });

    std::cout << "\nSummary (" << fmt("%.0f s", seconds_since(t0)) << ")\n";
    bool all = true;
    for (const auto& [id, o] : results) {
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << titles[id] << '\n';
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
