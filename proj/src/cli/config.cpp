#include "adaptpoc/cli/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "adaptpoc/errors.hpp"

namespace adaptpoc::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    raise(ErrorCode::ConfigError, path + ": " + what);
}

// Reads one JSON object, remembering which keys were used so that leftovers
// can be reported as unknown.
class ObjectReader {
   public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) bad(path_, "expected an object");
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) bad(at(it.key()), "unknown key");
        }
    }

   private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

double number(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) bad(path, "expected a finite number");
    return v;
}

std::int64_t integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad(path, "expected an integer");
    return j.get<std::int64_t>();
}

int positive_int(const json& j, const std::string& path) {
    const auto v = integer(j, path);
    if (v < 1 || v > 1'000'000'000) bad(path, "expected a positive integer");
    return static_cast<int>(v);
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) bad(path, "expected a string");
    return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) bad(path, "expected true or false");
    return j.get<bool>();
}

const json& array(const json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected an array");
    return j;
}

std::vector<double> numbers(const json& j, const std::string& path) {
    std::vector<double> out;
    for (std::size_t i = 0; i < array(j, path).size(); ++i) {
        out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

DoseResponseModel model_from(ObjectReader& r, const std::string& path) {
    const json* fam = r.get("family");
    if (!fam) bad(path, "missing 'family'");
    const auto family = parse_family(text(*fam, r.at("family")));
    if (!family) bad(r.at("family"), "unknown model family '" + fam->get<std::string>() + "'");
    const json* th = r.get("theta");
    if (!th) bad(path, "missing 'theta'");
    auto theta = numbers(*th, r.at("theta"));
    if (theta.size() != arity(*family)) {
        bad(r.at("theta"), std::string(family_name(*family)) + " takes " + std::to_string(arity(*family)) +
                               " parameters");
    }
    try {
        return DoseResponseModel(*family, std::move(theta));
    } catch (const Error& e) {
        bad(path, e.what());
    }
}

NamedModel named_model(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    std::string name;
    if (const json* n = r.get("name")) name = text(*n, r.at("name"));
    auto model = model_from(r, path);
    r.finish();
    if (name.empty()) name = std::string(family_name(model.family()));
    return {name, std::move(model)};
}

DesignSection parse_design(const json& j) {
    ObjectReader r(j, "design");
    DesignSection d;
    if (const json* v = r.get("doses")) {
        d.doses = numbers(*v, r.at("doses"));
        if (d.doses.size() < 2) bad(r.at("doses"), "at least two doses are needed");
        if (d.doses[0] != 0.0) bad(r.at("doses"), "the first dose must be placebo (0)");
        for (std::size_t i = 1; i < d.doses.size(); ++i) {
            if (!(d.doses[i] > d.doses[i - 1])) bad(r.at("doses"), "doses must be strictly increasing");
        }
    }
    if (const json* v = r.get("n1")) d.n1 = positive_int(*v, r.at("n1"));
    if (const json* v = r.get("n2")) d.n2 = positive_int(*v, r.at("n2"));
    if (const json* v = r.get("sigma")) {
        d.sigma = number(*v, r.at("sigma"));
        if (!(*d.sigma > 0.0)) bad(r.at("sigma"), "sigma must be positive");
    }
    r.finish();
    return d;
}

AdaptationConfig parse_adaptation(const json& j, std::optional<RecordedDecision>& recorded) {
    ObjectReader r(j, "adaptation");
    AdaptationConfig a;
    if (const json* v = r.get("delta")) {
        a.delta = number(*v, r.at("delta"));
        if (a.delta < 0.0) bad(r.at("delta"), "delta must be nonnegative");
    }
    if (const json* v = r.get("se_rule")) a.se_rule = boolean(*v, r.at("se_rule"));
    if (const json* v = r.get("model_policy")) {
        const auto s = text(*v, r.at("model_policy"));
        if (s == "refit") {
            a.model_policy = ModelPolicy::RefitWithFallbacks;
        } else if (s == "none") {
            a.model_policy = ModelPolicy::NoModelAdaptation;
        } else {
            bad(r.at("model_policy"), "expected 'refit' or 'none'");
        }
    }
    if (const json* v = r.get("bounds")) {
        ObjectReader b(*v, r.at("bounds"));
        for (auto it = v->begin(); it != v->end(); ++it) {
            const auto path = b.at(it.key());
            b.get(it.key());
            const auto family = parse_family(it.key());
            if (!family) bad(path, "unknown model family");
            FitBounds fb;
            for (std::size_t i = 0; i < array(it.value(), path).size(); ++i) {
                const auto ip = path + "[" + std::to_string(i) + "]";
                const auto lohi = numbers(it.value()[i], ip);
                if (lohi.size() != 2 || !(lohi[0] < lohi[1])) bad(ip, "expected [lo, hi] with lo < hi");
                fb.nonlinear.push_back({lohi[0], lohi[1]});
            }
            if (fb.nonlinear.size() != nonlinear_arity(*family)) {
                bad(path, std::string(family_name(*family)) + " has " + std::to_string(nonlinear_arity(*family)) +
                              " nonlinear parameters");
            }
            a.bounds.emplace_back(*family, std::move(fb));
        }
        b.finish();
    }
    if (const json* v = r.get("recorded")) {
        ObjectReader rr(*v, r.at("recorded"));
        RecordedDecision rec;
        if (const json* f = rr.get("futility_stop")) rec.futility_stop = boolean(*f, rr.at("futility_stop"));
        if (const json* d = rr.get("retained_doses")) rec.retained_doses = numbers(*d, rr.at("retained_doses"));
        if (const json* c = rr.get("contrasts")) {
            for (std::size_t i = 0; i < array(*c, rr.at("contrasts")).size(); ++i) {
                rec.contrasts.push_back(numbers((*c)[i], rr.at("contrasts") + "[" + std::to_string(i) + "]"));
            }
        }
        rr.finish();
        if (!rec.futility_stop) {
            if (rec.retained_doses.size() < 2 || rec.retained_doses[0] != 0.0) {
                bad(rr.at("retained_doses"), "need placebo and at least one active dose");
            }
            for (const auto& row : rec.contrasts) {
                if (row.size() != rec.retained_doses.size()) bad(rr.at("contrasts"), "row length differs from doses");
            }
        }
        recorded = std::move(rec);
    }
    r.finish();
    return a;
}

TestKind parse_test(const json& j, const std::string& path) {
    const auto s = text(j, path);
    for (auto t : {TestKind::GmctTippett, TestKind::GmctFisher, TestKind::GmctInverseNormal, TestKind::Amct}) {
        if (test_name(t) == s) return t;
    }
    bad(path, "unknown test '" + s + "' (agmct-t, agmct-f, agmct-n, amct)");
}

MethodSection parse_method(const json& j) {
    ObjectReader r(j, "method");
    MethodSection m;
    if (const json* v = r.get("tests")) {
        m.tests.clear();
        for (std::size_t i = 0; i < array(*v, r.at("tests")).size(); ++i) {
            m.tests.push_back(parse_test((*v)[i], r.at("tests") + "[" + std::to_string(i) + "]"));
        }
        if (m.tests.empty()) bad(r.at("tests"), "at least one test is needed");
    }
    if (const json* v = r.get("variance")) {
        const auto s = text(*v, r.at("variance"));
        if (s == "known") {
            m.variance = VarianceMode::Known;
        } else if (s == "unknown") {
            m.variance = VarianceMode::Unknown;
        } else if (s == "both") {
            m.variance = VarianceMode::Both;
        } else {
            bad(r.at("variance"), "expected 'known', 'unknown' or 'both'");
        }
    }
    if (const json* v = r.get("alpha")) {
        m.alpha = number(*v, r.at("alpha"));
        if (!(m.alpha > 0.0 && m.alpha < 1.0)) bad(r.at("alpha"), "alpha must lie in (0, 1)");
    }
    if (const json* v = r.get("cross_stage")) {
        const auto s = text(*v, r.at("cross_stage"));
        const auto c = adaptpoc::parse_method(s);
        if (!c || *c == CombinationMethod::Tippett) bad(r.at("cross_stage"), "expected 'fisher' or 'inverse-normal'");
        m.cross_stage = *c;
    }
    if (const json* v = r.get("seed")) {
        if (!v->is_number_unsigned()) bad(r.at("seed"), "expected a nonnegative integer");
        m.seed = v->get<std::uint64_t>();
    }
    if (const json* v = r.get("calibration_draws")) {
        m.calibration_draws = positive_int(*v, r.at("calibration_draws"));
        if (m.calibration_draws < 1000) bad(r.at("calibration_draws"), "at least 1000 draws are needed");
    }
    if (const json* v = r.get("pvalue_rel_tol")) {
        m.pvalue_rel_tol = number(*v, r.at("pvalue_rel_tol"));
        if (!(*m.pvalue_rel_tol >= 0.0 && *m.pvalue_rel_tol < 1.0)) bad(r.at("pvalue_rel_tol"), "must lie in [0, 1)");
    }
    if (const json* v = r.get("solve_critical")) m.solve_critical = boolean(*v, r.at("solve_critical"));
    r.finish();
    return m;
}

SimulationSection parse_simulation(const json& j) {
    ObjectReader r(j, "simulation");
    SimulationSection s;
    if (const json* v = r.get("true_models")) {
        for (std::size_t i = 0; i < array(*v, r.at("true_models")).size(); ++i) {
            const auto path = r.at("true_models") + "[" + std::to_string(i) + "]";
            const json& e = (*v)[i];
            if (e.is_string()) {
                const auto name = e.get<std::string>();
                auto model = find_true_model(name);
                if (!model) bad(path, "unknown true model '" + name + "'");
                s.true_models.push_back({name, *model});
            } else {
                auto nm = named_model(e, path);
                s.true_models.push_back({nm.name, nm.model});
            }
        }
    }
    if (const json* v = r.get("n_per_stage")) {
        for (std::size_t i = 0; i < array(*v, r.at("n_per_stage")).size(); ++i) {
            s.n_per_stage.push_back(positive_int((*v)[i], r.at("n_per_stage") + "[" + std::to_string(i) + "]"));
        }
    }
    if (const json* v = r.get("replications")) s.replications = positive_int(*v, r.at("replications"));
    if (const json* v = r.get("methods")) {
        for (std::size_t i = 0; i < array(*v, r.at("methods")).size(); ++i) {
            const auto path = r.at("methods") + "[" + std::to_string(i) + "]";
            const auto label = text((*v)[i], path);
            const auto id = parse_method_id(label);
            if (!id) bad(path, "unknown method '" + label + "'");
            s.methods.push_back(*id);
        }
    }
    r.finish();
    return s;
}

}  // namespace

std::vector<DoseResponseModel> RunConfig::candidate_models() const {
    std::vector<DoseResponseModel> out;
    if (candidates.empty()) {
        for (auto& c : candidate_catalog()) out.push_back(c.model);
    } else {
        for (auto& c : candidates) out.push_back(c.model);
    }
    return out;
}

std::vector<std::string> RunConfig::candidate_names() const {
    std::vector<std::string> out;
    for (auto& c : candidates.empty() ? candidate_catalog() : candidates) out.push_back(c.name);
    return out;
}

RunConfig parse_config(const json& doc) {
    ObjectReader r(doc, "config");
    RunConfig c;
    if (const json* v = r.get("design")) c.design = parse_design(*v);
    if (const json* v = r.get("candidates")) {
        for (std::size_t i = 0; i < array(*v, "candidates").size(); ++i) {
            c.candidates.push_back(named_model((*v)[i], "candidates[" + std::to_string(i) + "]"));
        }
        if (c.candidates.empty()) bad("candidates", "at least one candidate model is needed");
    }
    if (const json* v = r.get("adaptation")) c.adaptation = parse_adaptation(*v, c.recorded);
    if (const json* v = r.get("method")) c.method = parse_method(*v);
    if (const json* v = r.get("simulation")) c.simulation = parse_simulation(*v);
    r.finish();
    if (c.recorded && !c.recorded->futility_stop && c.recorded->contrasts.size() != c.candidate_models().size()) {
        bad("adaptation.recorded.contrasts", "need one row per candidate model");
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::ConfigError, "cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        raise(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

namespace {

json model_json(const std::string& name, const DoseResponseModel& m) {
    const auto th = m.theta();
    return {{"name", name}, {"family", std::string(family_name(m.family()))}, {"theta", std::vector<double>(th.begin(), th.end())}};
}

}  // namespace

std::string variance_mode_name(VarianceMode mode) {
    switch (mode) {
        case VarianceMode::Known: return "known";
        case VarianceMode::Unknown: return "unknown";
        case VarianceMode::Both: return "both";
    }
    return "unknown";
}

std::string_view model_policy_name(ModelPolicy policy) {
    return policy == ModelPolicy::RefitWithFallbacks ? "refit" : "none";
}

json to_json(const RunConfig& c) {
    json design = json::object();
    if (!c.design.doses.empty()) design["doses"] = c.design.doses;
    if (c.design.n1) design["n1"] = *c.design.n1;
    if (c.design.n2) design["n2"] = *c.design.n2;
    if (c.design.sigma) design["sigma"] = *c.design.sigma;

    json candidates = json::array();
    for (auto& nm : c.candidates.empty() ? candidate_catalog() : c.candidates) {
        candidates.push_back(model_json(nm.name, nm.model));
    }

    json adaptation{{"delta", c.adaptation.delta},
                    {"se_rule", c.adaptation.se_rule},
                    {"model_policy", std::string(model_policy_name(c.adaptation.model_policy))}};
    if (!c.adaptation.bounds.empty()) {
        json b = json::object();
        for (auto& [family, fb] : c.adaptation.bounds) {
            json rows = json::array();
            for (auto& iv : fb.nonlinear) rows.push_back({iv.lo, iv.hi});
            b[std::string(family_name(family))] = rows;
        }
        adaptation["bounds"] = b;
    }
    if (c.recorded) {
        adaptation["recorded"] = {{"futility_stop", c.recorded->futility_stop},
                                  {"retained_doses", c.recorded->retained_doses},
                                  {"contrasts", c.recorded->contrasts}};
    }

    json tests = json::array();
    for (auto t : c.method.tests) tests.push_back(std::string(test_name(t)));
    json method{{"tests", tests},
                {"variance", variance_mode_name(c.method.variance)},
                {"alpha", c.method.alpha},
                {"cross_stage", std::string(method_name(c.method.cross_stage))},
                {"seed", c.method.seed},
                {"calibration_draws", c.method.calibration_draws},
                {"solve_critical", c.method.solve_critical}};
    if (c.method.pvalue_rel_tol) method["pvalue_rel_tol"] = *c.method.pvalue_rel_tol;

    json truths = json::array();
    for (auto& t : c.simulation.true_models) {
        if (auto cat = find_true_model(t.name); cat && cat->describe() == t.model.describe()) {
            truths.push_back(t.name);
        } else {
            truths.push_back(model_json(t.name, t.model));
        }
    }
    json methods = json::array();
    for (auto& m : c.simulation.methods) methods.push_back(m.label());
    json simulation{{"true_models", truths},
                    {"n_per_stage", c.simulation.n_per_stage},
                    {"replications", c.simulation.replications},
                    {"methods", methods}};

    return {{"design", design},
            {"candidates", candidates},
            {"adaptation", adaptation},
            {"method", method},
            {"simulation", simulation}};
}

std::vector<SimulationScenario> build_scenarios(const RunConfig& c) {
    if (c.recorded) raise(ErrorCode::ConfigError, "adaptation.recorded applies to analyze only");
    std::vector<TrueModelSpec> truths = c.simulation.true_models;
    if (truths.empty()) truths.push_back({"flat", *find_true_model("flat")});
    std::vector<std::pair<int, int>> sizes;
    for (int n : c.simulation.n_per_stage) sizes.emplace_back(n, n);
    if (sizes.empty()) {
        const int n1 = c.design.n1.value_or(120);
        sizes.emplace_back(n1, c.design.n2.value_or(n1));
    }
    std::vector<SimulationScenario> out;
    for (auto& t : truths) {
        for (auto [n1, n2] : sizes) {
            SimulationScenario s;
            s.name = t.name + "-n" + std::to_string(n1);
            if (n2 != n1) s.name += "-" + std::to_string(n2);
            s.true_model_name = t.name;
            s.true_model = t.model;
            s.candidates = c.candidate_models();
            s.doses = c.design.doses.empty() ? default_doses() : c.design.doses;
            s.sigma = c.design.sigma.value_or(1.478);
            s.n1 = n1;
            s.n2 = n2;
            s.alpha = c.method.alpha;
            s.methods = c.simulation.methods.empty() ? default_methods() : c.simulation.methods;
            s.adaptation = c.adaptation;
            s.replications = c.simulation.replications;
            s.seed = c.method.seed;
            s.calibration_draws = c.method.calibration_draws;
            s.pvalue_rel_tol = c.method.pvalue_rel_tol.value_or(0.01);
            s.validate();
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::string config_hash(const json& doc) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : doc.dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace adaptpoc::cli
