#include "adaptpoc/cli/commands.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "adaptpoc/amct_crp.hpp"
#include "adaptpoc/errors.hpp"

namespace adaptpoc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

template <typename... Args>
std::string format(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

// Non-applicable values are stored as negative sentinels in MethodOutcome.
json maybe(double v) { return v < 0.0 || !std::isfinite(v) ? json(nullptr) : json(v); }

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row;
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json contrast_rows(const ContrastSet& cs, const std::vector<std::string>& names) {
    json rows = json::array();
    for (std::size_t m = 0; m < cs.models(); ++m) rows.push_back({{"model", names[m]}, {"coefficients", cs.row(m)}});
    return rows;
}

json stage_json(const StageSummary& s, const ContrastSet& cs, const std::vector<std::string>& names,
                const std::optional<double>& sigma) {
    json j{{"doses", s.doses},
           {"n", s.n},
           {"means", s.means},
           {"ss_within", s.ss_within},
           {"df", s.df()},
           {"s", std::sqrt(s.pooled_variance())},
           {"contrasts", contrast_rows(cs, names)},
           {"correlation", mat(cs.corr)},
           {"t_stats", contrast_t_stats(s, cs)}};
    if (sigma) j["z_stats"] = contrast_z_stats(s, cs, *sigma);
    return j;
}

std::vector<bool> variance_modes(VarianceMode mode) {
    switch (mode) {
        case VarianceMode::Known: return {true};
        case VarianceMode::Unknown: return {false};
        case VarianceMode::Both: return {true, false};
    }
    return {false};
}

AdaptationOutcome recorded_outcome(const RecordedDecision& rec, const StageSummary& s1,
                                   const TrialDataset& data, const RunConfig& cfg, std::size_t models) {
    AdaptationOutcome out;
    out.futility_stop = rec.futility_stop;
    if (rec.futility_stop) {
        out.retained_doses = {0.0};
        out.retained_index = {0};
        out.provenance.assign(models, Provenance::NotAdapted);
        out.fit_status.assign(models, std::nullopt);
        out.notes.push_back("recorded interim decision");
        return out;
    }
    for (double d : rec.retained_doses) {
        const auto key = canonical_dose(d);
        std::size_t i = 0;
        while (i < s1.groups() && canonical_dose(s1.doses[i]) != key) ++i;
        if (i == s1.groups()) raise(ErrorCode::ConfigError, "recorded dose " + key + " is not a stage-1 dose");
        out.retained_index.push_back(i);
        out.retained_doses.push_back(s1.doses[i]);
    }
    std::vector<int> n2;
    if (!data.stage2.empty()) {
        if (data.stage2.doses != out.retained_doses) {
            raise(ErrorCode::DataError, "stage-2 doses differ from the recorded interim decision");
        }
        n2 = data.stage2.counts();
    } else {
        n2 = allocate(cfg.design.n2.value_or(s1.total()), out.retained_doses.size());
    }
    out.stage2_contrasts = ContrastSet::from_rows(rec.contrasts, out.retained_doses, n2);
    out.provenance.assign(models, Provenance::NotAdapted);
    out.fit_status.assign(models, std::nullopt);
    out.notes.push_back("recorded interim decision");
    return out;
}

std::string dose_list(const std::vector<double>& doses) {
    std::string s;
    for (std::size_t i = 0; i < doses.size(); ++i) s += (i ? ", " : "") + canonical_dose(doses[i]);
    return s;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        return err->is_numerical() ? kExitNumericalError : kExitInputError;
    }
    return kExitInputError;
}

json outcome_json(const MethodOutcome& o) {
    return {{"reject", o.reject},
            {"futility", o.futility},
            {"p1", maybe(o.p1)},
            {"p2", maybe(o.p2)},
            {"overall_p", maybe(o.overall_p)},
            {"conditional_error", maybe(o.conditional_error)},
            {"critical", o.critical},
            {"max_stat", o.max_stat},
            {"floored", o.floored}};
}

json analyze(const TrialDataset& data, const RunConfig& cfg) {
    const auto candidates = cfg.candidate_models();
    const auto names = cfg.candidate_names();
    const auto& sigma = cfg.design.sigma;
    const auto modes = variance_modes(cfg.method.variance);
    for (bool known : modes) {
        if (!sigma) {
            raise(ErrorCode::ConfigError, known ? "design.sigma is required for known-variance tests"
                                                : "design.sigma (reference sigma) is required for the AMCT");
        }
    }

    const auto s1 = data.stage1.summary();
    s1.validate();
    const auto c1 = ContrastSet::from_models(candidates, s1.doses, s1.n);
    json report;
    report["stage1"] = stage_json(s1, c1, names, sigma);

    // Interim decision.
    const bool has2 = !data.stage2.empty();
    AdaptationOutcome outcome;
    std::string source = "recomputed";
    if (cfg.recorded) {
        source = "recorded";
        outcome = recorded_outcome(*cfg.recorded, s1, data, cfg, candidates.size());
    } else {
        const auto selection = adapt_doses(s1, cfg.adaptation);
        std::vector<double> retained;
        for (auto i : selection.retained) retained.push_back(s1.doses[i]);
        if (selection.futility_stop) {
            outcome = adapt_models(s1, candidates, selection, {}, cfg.adaptation);
        } else {
            std::vector<int> n2;
            if (has2) {
                if (data.stage2.doses != retained) {
                    raise(ErrorCode::DataError, "stage-2 doses (" + dose_list(data.stage2.doses) +
                                                    ") differ from the interim decision (" + dose_list(retained) + ")");
                }
                n2 = data.stage2.counts();
            } else {
                n2 = allocate(cfg.design.n2.value_or(s1.total()), retained.size());
            }
            outcome = adapt_models(s1, candidates, selection, n2, cfg.adaptation);
        }
    }
    if (outcome.futility_stop && has2) raise(ErrorCode::DataError, "stage-2 data present after a futility stop");

    json models = json::array();
    for (std::size_t m = 0; m < candidates.size(); ++m) {
        json e{{"model", names[m]}, {"provenance", std::string(provenance_name(outcome.provenance[m]))}};
        if (outcome.fit_status[m]) e["fit_status"] = std::string(fit_status_name(*outcome.fit_status[m]));
        models.push_back(e);
    }
    json interim{{"source", source},
                 {"futility_stop", outcome.futility_stop},
                 {"retained_doses", outcome.futility_stop ? std::vector<double>{} : outcome.retained_doses},
                 {"models", models},
                 {"notes", outcome.notes}};
    if (outcome.stage2_contrasts) {
        interim["stage2_contrasts"] = contrast_rows(*outcome.stage2_contrasts, names);
        interim["stage2_n"] = outcome.stage2_contrasts->n;
    }
    report["interim"] = interim;

    std::optional<StageSummary> s2;
    if (has2) {
        s2 = data.stage2.summary();
        s2->validate();
        report["stage2"] = stage_json(*s2, *outcome.stage2_contrasts, names, sigma);
    } else {
        report["stage2"] = nullptr;
    }
    const bool decided = has2 || outcome.futility_stop;
    report["status"] = outcome.futility_stop ? "futility" : (has2 ? "final" : "interim");

    Engines engines(cfg.method.seed, cfg.method.calibration_draws, cfg.method.pvalue_rel_tol.value_or(0.0));
    json methods = json::array();
    json decisions = json::object();
    for (bool known : modes) {
        for (auto test : cfg.method.tests) {
            const MethodId id{test, DesignKind::Adaptive, known};
            const double sig = sigma.value_or(1.0);
            json row{{"method", id.label()}};
            if (test == TestKind::Amct) {
                json crp;
                if (decided) {
                    auto o = evaluate_adaptive(id, s1, c1, outcome, s2 ? &*s2 : nullptr, sig, cfg.method.alpha, engines);
                    decisions[id.label()] = outcome_json(o);
                    row["reject"] = o.reject;
                }
                // Diagnostics: conditional error, and the adaptive critical
                // value when the trial continued.
                if (cfg.method.solve_critical || !decided) {
                    AdaptationOutcome diag = outcome;
                    if (!has2) diag.futility_stop = true;
                    const auto r = known ? engines.amct.known_variance(s1, c1, s2 ? &*s2 : nullptr, diag, sig,
                                                                       cfg.method.alpha, true)
                                         : engines.amct.unknown_variance(s1, c1, s2 ? &*s2 : nullptr, diag, sig,
                                                                         cfg.method.alpha, true);
                    crp["base_critical"] = r.state.base_critical;
                    crp["conditional_error"] = r.state.conditional_error;
                    if (r.state.adaptive_critical) {
                        crp["adaptive_critical"] = *r.state.adaptive_critical;
                        crp["stats"] = r.stats;
                        crp["max_stat"] = *std::max_element(r.stats.begin(), r.stats.end());
                        crp["tail_at_max"] = r.state.tail_at_max;
                        crp["adapted_shift"] = vec(r.state.adapted_shift);
                        crp["adapted_cov"] = mat(r.state.adapted_cov);
                        crp["reject_by_critical"] = crp["max_stat"].get<double>() >= *r.state.adaptive_critical;
                    }
                    row["crp"] = crp;
                }
                methods.push_back(row);
                continue;
            }

            const auto comb = *combination_of(test);
            const auto stats1 = known ? contrast_z_stats(s1, c1, sig) : contrast_t_stats(s1, c1);
            const Dof df1 = known ? Dof::infinite() : Dof(s1.df());
            const auto g1 = engines.tester.test(stats1, c1.corr, df1, comb, true);
            row["stage1"] = {{"psi", g1.psi}, {"raw_p", g1.raw_p}, {"p", g1.stage_p}};
            if (has2) {
                const auto& c2 = *outcome.stage2_contrasts;
                const auto stats2 = known ? contrast_z_stats(*s2, c2, sig) : contrast_t_stats(*s2, c2);
                const Dof df2 = known ? Dof::infinite() : Dof(s2->df());
                const auto g2 = engines.tester.test(stats2, c2.corr, df2, comb, false);
                row["stage2"] = {{"psi", g2.psi}, {"raw_p", g2.raw_p}, {"p", g2.stage_p}};
                json overall = json::object();
                for (auto across : {CombinationMethod::Fisher, CombinationMethod::InverseNormal}) {
                    const auto x = combine_across(g1.stage_p, g2.stage_p, across);
                    overall[std::string(method_name(across))] = {{"psi", x.psi}, {"p", x.overall_p}, {"floored", x.floored}};
                }
                row["overall"] = overall;
            }
            if (decided) {
                auto o = evaluate_adaptive(id, s1, c1, outcome, s2 ? &*s2 : nullptr, sig, cfg.method.alpha, engines);
                if (has2 && cfg.method.cross_stage != CombinationMethod::InverseNormal) {
                    const auto x = combine_across(o.p1, o.p2, cfg.method.cross_stage);
                    o.overall_p = x.overall_p;
                    o.floored = x.floored;
                    o.reject = o.overall_p <= cfg.method.alpha;
                }
                decisions[id.label()] = outcome_json(o);
                row["overall_p"] = maybe(o.overall_p);
                row["reject"] = o.reject;
            }
            methods.push_back(row);
        }
    }
    report["alpha"] = cfg.method.alpha;
    report["cross_stage"] = std::string(method_name(cfg.method.cross_stage));
    report["methods"] = methods;
    report["decisions"] = decisions;
    return report;
}

namespace {

std::string fmt_num(const json& v, const char* f = "%.4f") {
    return v.is_number() ? format(f, v.get<double>()) : std::string("-");
}

}  // namespace

std::string render_analysis(const json& r) {
    std::ostringstream o;
    auto stage = [&](const json& st, const char* title) {
        int total = 0;
        for (auto& n : st["n"]) total += n.get<int>();
        o << title << format(": N = %d, df = %d, s = %.4f\n", total, st["df"].get<int>(), st["s"].get<double>());
        o << "  dose        n      mean\n";
        for (std::size_t i = 0; i < st["doses"].size(); ++i) {
            o << format("  %-8s %4d %9.4f\n", canonical_dose(st["doses"][i].get<double>()).c_str(),
                        st["n"][i].get<int>(), st["means"][i].get<double>());
        }
        const bool z = st.contains("z_stats");
        o << format("  %-18s %-40s %8s%s\n", "model", "contrast", "t", z ? "        z" : "");
        for (std::size_t m = 0; m < st["contrasts"].size(); ++m) {
            std::string coef;
            for (auto& c : st["contrasts"][m]["coefficients"]) coef += format("%7.3f", c.get<double>());
            o << format("  %-18s %-40s %8.4f", st["contrasts"][m]["model"].get<std::string>().c_str(), coef.c_str(),
                        st["t_stats"][m].get<double>());
            if (z) o << format(" %8.4f", st["z_stats"][m].get<double>());
            o << '\n';
        }
        o << '\n';
    };
    stage(r["stage1"], "Stage 1");

    const auto& in = r["interim"];
    o << "Interim decision (" << in["source"].get<std::string>() << "): ";
    if (in["futility_stop"].get<bool>()) {
        o << "stop for futility\n";
    } else {
        std::string doses;
        for (auto& d : in["retained_doses"]) doses += (doses.empty() ? "" : ", ") + canonical_dose(d.get<double>());
        o << "continue with doses " << doses << '\n';
        for (std::size_t m = 0; m < in["models"].size(); ++m) {
            const auto& e = in["models"][m];
            std::string coef;
            for (auto& c : in["stage2_contrasts"][m]["coefficients"]) coef += format("%7.3f", c.get<double>());
            o << format("  %-18s %-12s %s\n", e["model"].get<std::string>().c_str(),
                        e["provenance"].get<std::string>().c_str(), coef.c_str());
        }
    }
    for (auto& n : in["notes"]) o << "  note: " << n.get<std::string>() << '\n';
    o << '\n';
    if (!r["stage2"].is_null()) stage(r["stage2"], "Stage 2");

    o << format("Tests (alpha = %g, across stages: %s)\n", r["alpha"].get<double>(),
                r["cross_stage"].get<std::string>().c_str());
    o << format("  %-26s %9s %9s %9s %9s %9s  %s\n", "method", "psi1", "p1", "psi2", "p2", "overall", "reject");
    for (auto& m : r["methods"]) {
        const auto label = m["method"].get<std::string>();
        std::string rej = m.contains("reject") ? (m["reject"].get<bool>() ? "yes" : "no") : "-";
        if (m.contains("stage1")) {
            o << format("  %-26s %9s %9s %9s %9s %9s  %s\n", label.c_str(), fmt_num(m["stage1"]["psi"]).c_str(),
                        fmt_num(m["stage1"]["p"]).c_str(),
                        m.contains("stage2") ? fmt_num(m["stage2"]["psi"]).c_str() : "-",
                        m.contains("stage2") ? fmt_num(m["stage2"]["p"]).c_str() : "-",
                        m.contains("overall_p") ? fmt_num(m["overall_p"], "%.6f").c_str() : "-", rej.c_str());
        } else {
            o << format("  %-26s %9s %9s %9s %9s %9s  %s\n", label.c_str(), "", "", "", "", "", rej.c_str());
            if (m.contains("crp")) {
                const auto& c = m["crp"];
                o << format("    base critical %.4f, conditional error A %.4f", c["base_critical"].get<double>(),
                            c["conditional_error"].get<double>());
                if (c.contains("adaptive_critical")) {
                    o << format(", adaptive critical %.4f, max statistic %.4f", c["adaptive_critical"].get<double>(),
                                c["max_stat"].get<double>());
                }
                o << '\n';
            }
        }
    }
    o << "Status: " << r["status"].get<std::string>() << '\n';
    return o.str();
}

int run_analyze(const fs::path& data_path, const fs::path& config_path, const std::optional<fs::path>& out_dir,
                std::ostream& out, std::ostream& err) {
    try {
        const auto config = load_config(config_path);
        const auto records = read_subjects(data_path);
        const auto data = group_subjects(records, config.design.doses);
        auto report = analyze(data, config);
        report["config_hash"] = config_hash(to_json(config));
        const auto text = render_analysis(report);
        out << text;
        if (out_dir) {
            fs::create_directories(*out_dir);
            std::ofstream(*out_dir / "analysis.json") << report.dump(2) << '\n';
            std::ofstream(*out_dir / "analysis.txt") << text;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

RunConfig simulation_config(const SimulateOptions& opt) {
    RunConfig cfg = opt.config_path ? load_config(*opt.config_path) : RunConfig{};
    if (opt.study_tables) {
        cfg.simulation.true_models.clear();
        for (auto& t : true_model_catalog()) cfg.simulation.true_models.push_back({t.name, t.model});
        cfg.simulation.n_per_stage = {60, 120, 180, 240};
    }
    if (!opt.true_models.empty()) {
        cfg.simulation.true_models.clear();
        for (auto& name : opt.true_models) {
            const auto m = find_true_model(name);
            if (!m) raise(ErrorCode::ConfigError, "unknown true model '" + name + "'");
            cfg.simulation.true_models.push_back({name, *m});
        }
    }
    if (!opt.n_per_stage.empty()) cfg.simulation.n_per_stage = opt.n_per_stage;
    if (opt.seed) cfg.method.seed = *opt.seed;
    if (opt.replications) {
        if (*opt.replications < 1) raise(ErrorCode::ConfigError, "replications must be positive");
        cfg.simulation.replications = *opt.replications;
    }
    if (!cfg.method.pvalue_rel_tol) cfg.method.pvalue_rel_tol = 0.01;
    return cfg;
}

json dump_replicate(const SimulationScenario& sc, const RunConfig& base, std::uint64_t replicate, const fs::path& dir) {
    TrialRunner runner(sc);
    const auto data = runner.generate(replicate);
    const auto result = runner.run(replicate);

    TrialDataset ds;
    ds.stage1 = {sc.doses, data.stage1};
    if (!data.outcome.futility_stop) ds.stage2 = {data.outcome.retained_doses, data.stage2};

    RunConfig cfg = base;
    cfg.design.doses = sc.doses;
    cfg.design.n1 = sc.n1;
    cfg.design.n2 = sc.n2;
    cfg.design.sigma = sc.sigma;
    cfg.adaptation = sc.adaptation;
    cfg.recorded.reset();
    bool any_known = false;
    bool any_unknown = false;
    std::set<TestKind> tests;
    for (auto& m : sc.methods) {
        if (m.design != DesignKind::Adaptive) continue;
        tests.insert(m.test);
        (m.known_variance ? any_known : any_unknown) = true;
    }
    cfg.method.tests.assign(tests.begin(), tests.end());
    cfg.method.variance = any_known && any_unknown ? VarianceMode::Both
                          : any_known              ? VarianceMode::Known
                                                   : VarianceMode::Unknown;
    cfg.method.alpha = sc.alpha;
    cfg.method.cross_stage = CombinationMethod::InverseNormal;
    cfg.method.seed = sc.seed;
    cfg.method.calibration_draws = sc.calibration_draws;
    cfg.method.pvalue_rel_tol = sc.pvalue_rel_tol;
    cfg.method.solve_critical = false;
    cfg.simulation = {};

    json decisions = json::object();
    if (result.failed) raise(ErrorCode::NumericalDomain, "replicate failed: " + result.error);
    for (std::size_t i = 0; i < sc.methods.size(); ++i) {
        if (sc.methods[i].design != DesignKind::Adaptive) continue;
        decisions[sc.methods[i].label()] = outcome_json(result.outcomes[i]);
    }
    json doc{{"scenario", sc.name},
             {"replicate", replicate},
             {"futility_stop", result.futility_stop},
             {"decisions", decisions}};

    fs::create_directories(dir);
    const auto stem = "replicate_" + std::to_string(replicate);
    {
        std::ofstream f(dir / (stem + ".csv"));
        write_subjects(f, ds);
    }
    std::ofstream(dir / (stem + "_config.json")) << to_json(cfg).dump(2) << '\n';
    std::ofstream(dir / (stem + "_decisions.json")) << doc.dump(2) << '\n';
    return doc;
}

std::vector<std::string> write_study_tables(const SimulationReport& report, const fs::path& dir) {
    std::vector<std::string> written;
    auto rate_of = [](const ScenarioReport& s, const MethodId& id) -> std::string {
        for (auto& row : s.rows) {
            if (row.method == id) return format("%.4f", row.rate);
        }
        return "";
    };
    std::vector<const ScenarioReport*> nulls;
    std::map<std::string, std::vector<const ScenarioReport*>> by_model;
    for (auto& s : report.scenarios) {
        if (s.true_model == "flat") {
            nulls.push_back(&s);
        } else {
            by_model[s.true_model].push_back(&s);
        }
    }
    const TestKind gmct[] = {TestKind::GmctTippett, TestKind::GmctFisher, TestKind::GmctInverseNormal};
    if (!nulls.empty()) {
        for (bool known : {true, false}) {
            const std::string name = known ? "table_a1.csv" : "table_a2.csv";
            std::ofstream f(dir / name);
            f << "n_per_stage,design,agmct-t,agmct-f,agmct-n" << (known ? ",amct" : "") << '\n';
            for (auto* s : nulls) {
                for (auto design : {DesignKind::Adaptive, DesignKind::NonAdaptive}) {
                    f << s->n1 << ',' << design_name(design);
                    for (auto t : gmct) f << ',' << rate_of(*s, {t, design, known});
                    if (known) f << ',' << rate_of(*s, {TestKind::Amct, design, true});
                    f << '\n';
                }
            }
            written.push_back(name);
        }
    }
    for (auto& [model, scenarios] : by_model) {
        const std::string name = "power_" + model + ".csv";
        std::ofstream f(dir / name);
        f << "n_per_stage";
        const auto& methods = scenarios.front()->rows;
        for (auto& row : methods) f << ',' << row.method.label();
        f << '\n';
        for (auto* s : scenarios) {
            f << s->n1;
            for (auto& row : methods) f << ',' << rate_of(*s, row.method);
            f << '\n';
        }
        written.push_back(name);
    }
    return written;
}

std::string render_simulation(const SimulationReport& report) {
    std::ostringstream o;
    for (auto& s : report.scenarios) {
        o << format("%s: true model %s, N1 = %d, N2 = %d, %d replicates (%d failed)\n", s.scenario.c_str(),
                    s.true_model.c_str(), s.n1, s.n2, s.replications, s.failed);
        o << format("  mean k2 %.3f, futility %.4f, refit %.4f, isotonic %.4f, carry-over %.4f, negative slope %.4f\n",
                    s.mean_k2, s.futility_rate, s.refit_rate, s.isotonic_rate, s.carry_over_rate,
                    s.negative_slope_rate);
        o << format("  %-32s %8s %19s\n", "method", "rate", "95% CI");
        for (auto& row : s.rows) {
            o << format("  %-32s %8.4f  (%.4f, %.4f)\n", row.method.label().c_str(), row.rate, row.ci_lower,
                        row.ci_upper);
        }
        o << '\n';
    }
    return o.str();
}

json version_info() {
    return {{"adaptpoc", kVersion},
            {"compiler", __VERSION__},
            {"eigen", format("%d.%d.%d", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"boost", format("%d.%d.%d", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100)},
            {"nlohmann_json", format("%d.%d.%d", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                     NLOHMANN_JSON_VERSION_PATCH)}};
}

int run_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        if (opt.threads < 1) raise(ErrorCode::ConfigError, "threads must be positive");
        const auto cfg = simulation_config(opt);
        const auto scenarios = build_scenarios(cfg);
        fs::create_directories(opt.out_dir);
        if (opt.dump_replicate) {
            const auto doc = dump_replicate(scenarios.front(), cfg, *opt.dump_replicate, opt.out_dir);
            out << "wrote replicate " << *opt.dump_replicate << " of " << scenarios.front().name << " to "
                << opt.out_dir.string() << '\n';
            return kExitOk;
        }
        const auto start = std::chrono::steady_clock::now();
        const auto report = run_study(scenarios, opt.threads);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        std::vector<std::string> files{"report.csv", "report.txt", "manifest.json"};
        {
            std::ofstream f(opt.out_dir / "report.csv");
            write_report_csv(report, f);
        }
        const auto text = render_simulation(report);
        std::ofstream(opt.out_dir / "report.txt") << text;
        for (auto& name : write_study_tables(report, opt.out_dir)) files.push_back(name);

        const auto cfg_json = to_json(cfg);
        json scen = json::array();
        for (auto& s : scenarios) scen.push_back(s.name);
        // Wall time and thread count stay out of the files so that reruns
        // are byte-identical.
        json manifest{{"config", cfg_json},
                      {"config_hash", config_hash(cfg_json)},
                      {"seed", cfg.method.seed},
                      {"replications", cfg.simulation.replications},
                      {"scenarios", scen},
                      {"outputs", files},
                      {"versions", version_info()}};
        std::ofstream(opt.out_dir / "manifest.json") << manifest.dump(2) << '\n';
        out << text << format("wall time %.1f s on %d thread(s)\n", wall, opt.threads);
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

int run_models_list(std::ostream& out) {
    out << "Families\n";
    for (auto f : kAllFamilies) {
        out << format("  %-18s %zu  %s\n", std::string(family_name(f)).c_str(), arity(f),
                      std::string(family_formula(f)).c_str());
    }
    out << "\nDefault candidates\n";
    for (auto& m : candidate_catalog()) out << format("  %-18s %s\n", m.name.c_str(), m.model.describe().c_str());
    out << "\nTrue models for simulation\n";
    for (auto& m : true_model_catalog()) out << format("  %-18s %s\n", m.name.c_str(), m.model.describe().c_str());
    return kExitOk;
}

int run_contrasts_show(const std::optional<fs::path>& config_path, std::ostream& out, std::ostream& err) {
    try {
        const RunConfig cfg = config_path ? load_config(*config_path) : RunConfig{};
        const auto doses = cfg.design.doses.empty() ? default_doses() : cfg.design.doses;
        const auto n = allocate(cfg.design.n1.value_or(120), doses.size());
        const auto names = cfg.candidate_names();
        const auto cs = ContrastSet::from_models(cfg.candidate_models(), doses, n);
        out << "doses:";
        for (double d : doses) out << ' ' << canonical_dose(d);
        out << "\nn:    ";
        for (int k : n) out << ' ' << k;
        out << "\n\nOptimal contrasts\n";
        for (std::size_t m = 0; m < cs.models(); ++m) {
            out << format("  %-18s", names[m].c_str());
            for (double c : cs.row(m)) out << format(" %8.4f", c);
            out << '\n';
        }
        out << "\nCorrelation\n";
        for (Eigen::Index r = 0; r < cs.corr.rows(); ++r) {
            out << format("  %-18s", names[static_cast<std::size_t>(r)].c_str());
            for (Eigen::Index c = 0; c < cs.corr.cols(); ++c) out << format(" %7.3f", cs.corr(r, c));
            out << '\n';
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace adaptpoc::cli
