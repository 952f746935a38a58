#include "adaptpoc/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

#include "adaptpoc/errors.hpp"
#include "adaptpoc/random.hpp"

namespace adaptpoc {

std::string_view test_name(TestKind test) {
    switch (test) {
        case TestKind::GmctTippett: return "agmct-t";
        case TestKind::GmctFisher: return "agmct-f";
        case TestKind::GmctInverseNormal: return "agmct-n";
        case TestKind::Amct: return "amct";
    }
    return "unknown";
}

std::string_view design_name(DesignKind design) {
    switch (design) {
        case DesignKind::Adaptive: return "adaptive";
        case DesignKind::NonAdaptive: return "non-adaptive";
        case DesignKind::NaivePooled: return "naive-pooled";
    }
    return "unknown";
}

std::string MethodId::label() const {
    return std::string(test_name(test)) + "/" + std::string(design_name(design)) + "/" +
           (known_variance ? "known" : "unknown");
}

std::optional<MethodId> parse_method_id(std::string_view label) {
    for (auto t : {TestKind::GmctTippett, TestKind::GmctFisher, TestKind::GmctInverseNormal, TestKind::Amct}) {
        for (auto d : {DesignKind::Adaptive, DesignKind::NonAdaptive, DesignKind::NaivePooled}) {
            for (bool known : {true, false}) {
                MethodId m{t, d, known};
                if (m.label() == label) return m;
            }
        }
    }
    return std::nullopt;
}

std::optional<CombinationMethod> combination_of(TestKind test) {
    switch (test) {
        case TestKind::GmctTippett: return CombinationMethod::Tippett;
        case TestKind::GmctFisher: return CombinationMethod::Fisher;
        case TestKind::GmctInverseNormal: return CombinationMethod::InverseNormal;
        case TestKind::Amct: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<MethodId> default_methods() {
    std::vector<MethodId> out;
    for (bool known : {true, false}) {
        for (auto d : {DesignKind::Adaptive, DesignKind::NonAdaptive}) {
            for (auto t : {TestKind::GmctTippett, TestKind::GmctFisher, TestKind::GmctInverseNormal}) {
                out.push_back({t, d, known});
            }
        }
    }
    out.push_back({TestKind::Amct, DesignKind::Adaptive, true});
    out.push_back({TestKind::Amct, DesignKind::NonAdaptive, true});
    out.push_back({TestKind::GmctTippett, DesignKind::NaivePooled, true});
    out.push_back({TestKind::GmctTippett, DesignKind::NaivePooled, false});
    return out;
}

std::vector<double> default_doses() { return {0.0, 0.05, 0.2, 0.6, 1.0}; }

std::vector<NamedModel> candidate_catalog() {
    return {
        {"emax", DoseResponseModel(ModelFamily::Emax, {0.2, 0.7, 0.2})},
        {"linearlog", DoseResponseModel(ModelFamily::LinearLog, {0.2, 0.6 / std::log(6.0)})},
        {"linear", DoseResponseModel(ModelFamily::Linear, {0.2, 0.6})},
        {"quadratic", DoseResponseModel(ModelFamily::Quadratic, {0.2, 2.049, -1.749})},
        {"logistic", DoseResponseModel(ModelFamily::Logistic, {0.193, 0.607, 0.4, 0.09})},
    };
}

std::vector<NamedModel> true_model_catalog() {
    return {
        {"flat", DoseResponseModel(ModelFamily::Linear, {0.2, 0.0})},
        {"emax2", DoseResponseModel(ModelFamily::Emax, {0.2, 0.6, 0.1})},
        {"emax3", DoseResponseModel(ModelFamily::Emax, {0.2, 0.55, 0.01})},
        {"exponential1", DoseResponseModel(ModelFamily::Exponential, {0.183, 0.017, 1.0 / (2.0 * std::log(6.0))})},
        {"exponential2", DoseResponseModel(ModelFamily::Exponential, {0.19924, 0.00076, 0.15})},
        {"quadratic2", DoseResponseModel(ModelFamily::Quadratic, {0.2, 2.4, -2.4})},
        {"doublelogistic",
         DoseResponseModel(ModelFamily::DoubleLogistic, {0.198, 0.61, 18.0, 0.3, 0.499, 0.309, 18.0, 0.7})},
        {"step", DoseResponseModel(ModelFamily::Step, {0.2, 0.6, 0.6})},
        {"truncatedlogistic", DoseResponseModel(ModelFamily::TruncatedLogistic, {0.2, 0.682, 0.8, 10.0})},
    };
}

std::optional<DoseResponseModel> find_true_model(std::string_view name) {
    for (auto& m : true_model_catalog()) {
        if (m.name == name) return m.model;
    }
    return std::nullopt;
}

void SimulationScenario::validate() const {
    if (candidates.empty()) raise(ErrorCode::ConfigError, "scenario has no candidate models");
    if (doses.size() < 2 || doses[0] != 0.0) raise(ErrorCode::ConfigError, "doses must start with placebo 0");
    for (std::size_t i = 1; i < doses.size(); ++i) {
        if (!(doses[i] > doses[i - 1])) raise(ErrorCode::ConfigError, "doses must be strictly increasing");
    }
    if (!(sigma >= 0.0 && std::isfinite(sigma))) raise(ErrorCode::ConfigError, "sigma must be nonnegative");
    const auto k = static_cast<int>(doses.size());
    if (n1 < 2 * k) raise(ErrorCode::ConfigError, "stage 1 needs at least two subjects per dose");
    if (n2 < 2 * k) raise(ErrorCode::ConfigError, "stage 2 needs at least two subjects per dose");
    if (!(alpha > 0.0 && alpha < 1.0)) raise(ErrorCode::ConfigError, "alpha must lie in (0, 1)");
    if (methods.empty()) raise(ErrorCode::ConfigError, "scenario has no methods");
    for (const auto& m : methods) {
        if (m.test == TestKind::Amct && m.design == DesignKind::NaivePooled) {
            raise(ErrorCode::ConfigError, "naive pooling is defined for the GMCTs only");
        }
    }
    if (replications < 1) raise(ErrorCode::ConfigError, "replications must be positive");
    if (calibration_draws < 1000) raise(ErrorCode::ConfigError, "calibration draws must be at least 1000");
    if (!(pvalue_rel_tol >= 0.0 && pvalue_rel_tol < 1.0)) raise(ErrorCode::ConfigError, "p-value tolerance must lie in [0, 1)");
    try {
        adaptation.validate();
    } catch (const Error& e) {
        raise(ErrorCode::ConfigError, e.what());
    }
}

SimulationScenario make_scenario(std::string_view true_model, int n_per_stage, int replications, std::uint64_t seed) {
    auto model = find_true_model(true_model);
    if (!model) raise(ErrorCode::ConfigError, "unknown true model '" + std::string(true_model) + "'");
    SimulationScenario s;
    s.name = std::string(true_model) + "-n" + std::to_string(n_per_stage);
    s.true_model_name = std::string(true_model);
    s.true_model = *model;
    for (auto& c : candidate_catalog()) s.candidates.push_back(c.model);
    s.doses = default_doses();
    s.n1 = n_per_stage;
    s.n2 = n_per_stage;
    s.methods = default_methods();
    s.replications = replications;
    s.seed = seed;
    return s;
}

Engines::Engines(std::uint64_t seed, int calibration_draws, double pvalue_rel_tol)
    : tester(mix_stream(seed, 0x7e57), calibration_draws), amct([&] {
          QmcOptions q;
          q.seed = mix_stream(seed, 0xa3c7);
          return q;
      }()) {
    tester.tippett_rel_tol = pvalue_rel_tol;
}

namespace {

std::vector<double> stats_for(const StageSummary& data, const ContrastSet& contrasts, bool known, double sigma) {
    return known ? contrast_z_stats(data, contrasts, sigma) : contrast_t_stats(data, contrasts);
}

Dof dof_for(const StageSummary& data, bool known) { return known ? Dof::infinite() : Dof(data.df()); }

}  // namespace

MethodOutcome evaluate_adaptive(const MethodId& method, const StageSummary& stage1, const ContrastSet& stage1_contrasts,
                                const AdaptationOutcome& outcome, const StageSummary* stage2, double sigma,
                                double alpha, Engines& engines, bool solve_critical) {
    MethodOutcome out;
    out.futility = outcome.futility_stop;
    if (method.test == TestKind::Amct) {
        const auto r = method.known_variance
                           ? engines.amct.known_variance(stage1, stage1_contrasts, stage2, outcome, sigma, alpha,
                                                         solve_critical)
                           : engines.amct.unknown_variance(stage1, stage1_contrasts, stage2, outcome, sigma, alpha,
                                                           solve_critical);
        out.reject = r.reject;
        out.conditional_error = r.state.conditional_error;
        out.critical = r.state.adaptive_critical.value_or(r.state.base_critical);
        if (!r.stats.empty()) out.max_stat = *std::max_element(r.stats.begin(), r.stats.end());
        return out;
    }
    const auto comb = *combination_of(method.test);
    const auto t1 = stats_for(stage1, stage1_contrasts, method.known_variance, sigma);
    out.p1 = engines.tester.test(t1, stage1_contrasts.corr, dof_for(stage1, method.known_variance), comb, true).stage_p;
    if (outcome.futility_stop) return out;
    require(stage2 != nullptr, "stage-2 data required when the trial continues");
    const auto& c2 = *outcome.stage2_contrasts;
    const auto t2 = stats_for(*stage2, c2, method.known_variance, sigma);
    out.p2 = engines.tester.test(t2, c2.corr, dof_for(*stage2, method.known_variance), comb, false).stage_p;
    const auto cross = combine_across(out.p1, out.p2, CombinationMethod::InverseNormal);
    out.overall_p = cross.overall_p;
    out.floored = cross.floored;
    out.reject = out.overall_p <= alpha;
    return out;
}

MethodOutcome evaluate_single_stage(const MethodId& method, const StageSummary& data, const ContrastSet& contrasts,
                                    double sigma, double alpha, Engines& engines, bool fixed_design) {
    MethodOutcome out;
    const auto t = stats_for(data, contrasts, method.known_variance, sigma);
    out.max_stat = *std::max_element(t.begin(), t.end());
    const Dof df = dof_for(data, method.known_variance);
    if (method.test == TestKind::Amct) {
        // Single-stage max-contrast test: compare the maximum with the
        // equicoordinate 1 - alpha quantile.
        out.critical = method.known_variance
                           ? engines.amct.base_critical_known(contrasts, alpha)
                           : engines.amct.integrator().equicoordinate_quantile(contrasts.corr, df, 1.0 - alpha);
        out.reject = out.max_stat >= out.critical;
        return out;
    }
    out.p1 = engines.tester.test(t, contrasts.corr, df, *combination_of(method.test), fixed_design).stage_p;
    out.overall_p = out.p1;
    out.reject = out.p1 <= alpha;
    return out;
}

TrialRunner::TrialRunner(const SimulationScenario& scenario)
    : scenario_(&scenario),
      n1_(allocate(scenario.n1, scenario.doses.size())),
      n_single_(allocate(scenario.n1 + scenario.n2, scenario.doses.size())),
      stage1_contrasts_(ContrastSet::from_models(scenario.candidates, scenario.doses, n1_)),
      single_contrasts_(ContrastSet::from_models(scenario.candidates, scenario.doses, n_single_)),
      engines_(scenario.seed, scenario.calibration_draws, scenario.pvalue_rel_tol) {
    scenario.validate();
}

namespace {

constexpr std::uint64_t kStage1Stream = 1;
constexpr std::uint64_t kStage2Stream = 2;
constexpr std::uint64_t kTopUpStream = 3;

std::vector<double> draw_group(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stage, std::size_t group,
                               int count, double mean, double sigma) {
    StreamEngine eng(seed, {mix_stream(replicate, stage), static_cast<std::uint32_t>(group)});
    std::vector<double> y(static_cast<std::size_t>(std::max(count, 0)));
    for (double& v : y) v = mean + sigma * norm_quantile(eng.uniform01());
    return y;
}

}  // namespace

TrialData TrialRunner::generate(std::uint64_t replicate) const {
    const auto& sc = *scenario_;
    const std::size_t k = sc.doses.size();
    TrialData data;
    for (std::size_t i = 0; i < k; ++i) {
        const double mu = sc.true_model(sc.doses[i]);
        data.stage1.push_back(draw_group(sc.seed, replicate, kStage1Stream, i, n1_[i], mu, sc.sigma));
        data.extra.push_back(draw_group(sc.seed, replicate, kTopUpStream, i, n_single_[i] - n1_[i], mu, sc.sigma));
    }
    const auto s1 = summarize(sc.doses, data.stage1);
    data.outcome = adapt(s1, sc.candidates, sc.n2, sc.adaptation);
    if (!data.outcome.futility_stop) {
        const auto n2 = allocate(sc.n2, data.outcome.k2());
        for (std::size_t j = 0; j < data.outcome.k2(); ++j) {
            const std::size_t i = data.outcome.retained_index[j];
            data.stage2.push_back(
                draw_group(sc.seed, replicate, kStage2Stream, i, n2[j], sc.true_model(sc.doses[i]), sc.sigma));
        }
    }
    return data;
}

TrialResult TrialRunner::run(std::uint64_t replicate) {
    const auto& sc = *scenario_;
    TrialResult r;
    r.replicate = replicate;
    try {
        const auto data = generate(replicate);
        const auto& outcome = data.outcome;
        r.futility_stop = outcome.futility_stop;
        r.k2 = outcome.futility_stop ? 0 : outcome.k2();
        r.provenance = outcome.provenance;

        const auto s1 = summarize(sc.doses, data.stage1);
        std::optional<StageSummary> s2;
        std::optional<StageSummary> pooled;
        std::optional<ContrastSet> pooled_contrasts;
        if (!outcome.futility_stop) {
            s2 = summarize(outcome.retained_doses, data.stage2);
            std::vector<std::vector<double>> groups;
            for (std::size_t j = 0; j < outcome.k2(); ++j) {
                auto g = data.stage1[outcome.retained_index[j]];
                g.insert(g.end(), data.stage2[j].begin(), data.stage2[j].end());
                groups.push_back(std::move(g));
            }
            pooled = summarize(outcome.retained_doses, groups);
            const auto& c2 = *outcome.stage2_contrasts;
            std::vector<std::vector<double>> rows;
            for (std::size_t m = 0; m < c2.models(); ++m) rows.push_back(c2.row(m));
            pooled_contrasts = ContrastSet::from_rows(rows, outcome.retained_doses, pooled->n);
        }
        std::optional<StageSummary> single;
        auto single_summary = [&]() -> const StageSummary& {
            if (!single) {
                std::vector<std::vector<double>> groups = data.stage1;
                for (std::size_t i = 0; i < groups.size(); ++i) {
                    groups[i].insert(groups[i].end(), data.extra[i].begin(), data.extra[i].end());
                }
                single = summarize(sc.doses, groups);
            }
            return *single;
        };

        r.outcomes.reserve(sc.methods.size());
        if (sc.sigma == 0.0) {
            // Noiseless data: every statistic is +-infinity, so a method
            // rejects iff all its contrasts have a positive numerator in each
            // stage it uses.
            auto positive = [](const StageSummary& s, const ContrastSet& c) {
                for (std::size_t m = 0; m < c.models(); ++m) {
                    double num = 0.0;
                    for (std::size_t i = 0; i < s.groups(); ++i) {
                        num += c.coeffs(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)) * s.means[i];
                    }
                    if (!(num > 0.0)) return false;
                }
                return true;
            };
            for (const auto& m : sc.methods) {
                MethodOutcome o;
                o.futility = outcome.futility_stop && m.design != DesignKind::NonAdaptive;
                switch (m.design) {
                    case DesignKind::Adaptive:
                        o.reject = !outcome.futility_stop && positive(s1, stage1_contrasts_) &&
                                   positive(*s2, *outcome.stage2_contrasts);
                        break;
                    case DesignKind::NonAdaptive:
                        o.reject = positive(single_summary(), single_contrasts_);
                        break;
                    case DesignKind::NaivePooled:
                        o.reject = !outcome.futility_stop && positive(*pooled, *pooled_contrasts);
                        break;
                }
                if (o.reject) o.overall_p = 0.0;
                r.outcomes.push_back(o);
            }
            return r;
        }
        for (const auto& m : sc.methods) {
            switch (m.design) {
                case DesignKind::Adaptive:
                    r.outcomes.push_back(evaluate_adaptive(m, s1, stage1_contrasts_, outcome, s2 ? &*s2 : nullptr,
                                                           sc.sigma, sc.alpha, engines_));
                    break;
                case DesignKind::NonAdaptive:
                    r.outcomes.push_back(
                        evaluate_single_stage(m, single_summary(), single_contrasts_, sc.sigma, sc.alpha, engines_, true));
                    break;
                case DesignKind::NaivePooled:
                    if (outcome.futility_stop) {
                        MethodOutcome o;
                        o.futility = true;
                        r.outcomes.push_back(o);
                    } else {
                        // Only a handful of retained-dose patterns occur, so the
                        // calibration for each pooled correlation is cached.
                        r.outcomes.push_back(evaluate_single_stage(m, *pooled, *pooled_contrasts, sc.sigma, sc.alpha,
                                                                   engines_, m.test == TestKind::GmctTippett));
                    }
                    break;
            }
        }
    } catch (const Error& e) {
        if (!e.is_numerical()) throw;
        r = TrialResult{};
        r.replicate = replicate;
        r.failed = true;
        r.error = e.what();
    }
    return r;
}

TrialResult run_trial(const SimulationScenario& scenario, std::uint64_t replicate) {
    TrialRunner runner(scenario);
    return runner.run(replicate);
}

std::pair<double, double> binomial_ci(int successes, int trials, double level) {
    require(trials >= 1 && successes >= 0 && successes <= trials, "invalid binomial counts");
    const double p = static_cast<double>(successes) / trials;
    const double half = norm_quantile(0.5 + level / 2.0) * std::sqrt(p * (1.0 - p) / trials);
    return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

namespace {

ScenarioReport summarize_scenario(const SimulationScenario& sc, std::vector<TrialResult> trials, bool keep) {
    ScenarioReport rep;
    rep.scenario = sc.name;
    rep.true_model = sc.true_model_name;
    rep.n1 = sc.n1;
    rep.n2 = sc.n2;
    rep.replications = sc.replications;
    int ok = 0, futile = 0, continuing = 0;
    double k2_sum = 0.0;
    std::size_t slots = 0, refit = 0, iso = 0, carry = 0, neg = 0;
    for (const auto& t : trials) {
        if (t.failed) {
            ++rep.failed;
            continue;
        }
        ++ok;
        if (t.futility_stop) {
            ++futile;
            continue;
        }
        ++continuing;
        k2_sum += static_cast<double>(t.k2);
        for (auto p : t.provenance) {
            ++slots;
            refit += p == Provenance::Refit;
            iso += p == Provenance::IsotonicFallback;
            carry += p == Provenance::CarryOver;
            neg += p == Provenance::NegativeSlopeNoAdapt;
        }
    }
    if (ok > 0) rep.futility_rate = static_cast<double>(futile) / ok;
    if (continuing > 0) rep.mean_k2 = k2_sum / continuing;
    if (slots > 0) {
        rep.refit_rate = static_cast<double>(refit) / slots;
        rep.isotonic_rate = static_cast<double>(iso) / slots;
        rep.carry_over_rate = static_cast<double>(carry) / slots;
        rep.negative_slope_rate = static_cast<double>(neg) / slots;
    }
    for (std::size_t m = 0; m < sc.methods.size(); ++m) {
        MethodSummary row;
        row.method = sc.methods[m];
        for (const auto& t : trials) {
            if (t.failed) continue;
            ++row.replications;
            row.rejections += t.outcomes[m].reject;
        }
        if (row.replications > 0) {
            row.rate = static_cast<double>(row.rejections) / row.replications;
            std::tie(row.ci_lower, row.ci_upper) = binomial_ci(row.rejections, row.replications);
        }
        rep.rows.push_back(row);
    }
    if (keep) rep.trials = std::move(trials);
    return rep;
}

}  // namespace

SimulationReport run_study(const std::vector<SimulationScenario>& scenarios, int threads, bool keep_trials) {
    require(threads >= 1, "thread count must be positive");
    SimulationReport report;
    for (const auto& sc : scenarios) {
        sc.validate();
        const auto start = std::chrono::steady_clock::now();
        const int reps = sc.replications;
        std::vector<TrialResult> results(static_cast<std::size_t>(reps));
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            try {
                TrialRunner runner(sc);
                for (int i = next.fetch_add(1); i < reps; i = next.fetch_add(1)) {
                    results[static_cast<std::size_t>(i)] = runner.run(static_cast<std::uint64_t>(i));
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(reps);
            }
        };
        const int workers = std::min(threads, reps);
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);

        std::string first;
        for (const auto& t : results) {
            if (t.failed) {
                first = t.error;
                break;
            }
        }
        auto rep = summarize_scenario(sc, std::move(results), keep_trials);
        if (rep.failed * 1000 > reps) {
            raise(ErrorCode::NumericalDomain, "scenario " + sc.name + ": " + std::to_string(rep.failed) + " of " +
                                                  std::to_string(reps) + " replicates failed" +
                                                  (first.empty() ? "" : " (first: " + first + ")"));
        }
        rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.scenarios.push_back(std::move(rep));
    }
    return report;
}

void write_report_csv(const SimulationReport& report, std::ostream& out) {
    out << "scenario,true_model,n1,n2,method,test,design,variance,replications,rejections,rate,ci_lower,ci_upper,"
           "mean_k2,futility_rate,refit_rate,isotonic_rate,carry_over_rate,negative_slope_rate,failed\n";
    char buf[512];
    for (const auto& s : report.scenarios) {
        for (const auto& r : s.rows) {
            const bool adaptive = r.method.design != DesignKind::NonAdaptive;
            std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,%.6f,%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", r.replications,
                          r.rejections, r.rate, r.ci_lower, r.ci_upper, adaptive ? s.mean_k2 : 0.0,
                          adaptive ? s.futility_rate : 0.0, adaptive ? s.refit_rate : 0.0,
                          adaptive ? s.isotonic_rate : 0.0, adaptive ? s.carry_over_rate : 0.0,
                          adaptive ? s.negative_slope_rate : 0.0, s.failed);
            out << s.scenario << ',' << s.true_model << ',' << s.n1 << ',' << s.n2 << ',' << r.method.label() << ','
                << test_name(r.method.test) << ',' << design_name(r.method.design) << ','
                << (r.method.known_variance ? "known" : "unknown") << ',' << buf;
        }
    }
}

}  // namespace adaptpoc
