#include "adaptpoc/cli/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "adaptpoc/errors.hpp"

namespace adaptpoc::cli {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view s, const std::string& what) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || first == last || !std::isfinite(v)) {
        raise(ErrorCode::DataError, what + ": '" + std::string(s) + "' is not a finite number");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string canonical_dose(std::string_view text) {
    std::string_view s = trim(text);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) raise(ErrorCode::DataError, "empty dose");
    if (s.find_first_of("eE") != std::string_view::npos) {
        return canonical_dose(parse_double(s, "dose"));
    }
    std::string intpart;
    std::string frac;
    bool dot = false;
    for (char ch : s) {
        if (ch == '.') {
            if (dot) raise(ErrorCode::DataError, "malformed dose '" + std::string(text) + "'");
            dot = true;
        } else if (ch >= '0' && ch <= '9') {
            (dot ? frac : intpart) += ch;
        } else {
            raise(ErrorCode::DataError, "malformed dose '" + std::string(text) + "'");
        }
    }
    if (intpart.empty() && frac.empty()) raise(ErrorCode::DataError, "malformed dose '" + std::string(text) + "'");
    const auto nz = intpart.find_first_not_of('0');
    intpart = nz == std::string::npos ? "0" : intpart.substr(nz);
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    return frac.empty() ? intpart : intpart + "." + frac;
}

std::string canonical_dose(double dose) {
    if (!(dose >= 0.0) || !std::isfinite(dose)) raise(ErrorCode::DataError, "doses must be finite and nonnegative");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, dose, std::chars_format::fixed);
    if (ec != std::errc()) raise(ErrorCode::DataError, "dose cannot be formatted");
    return canonical_dose(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

std::vector<SubjectRecord> read_subjects(std::istream& in) {
    std::vector<SubjectRecord> out;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto f = split(t);
        const std::string where = "line " + std::to_string(lineno);
        if (!header) {
            if (f.size() != 3 || f[0] != "stage" || f[1] != "dose" || f[2] != "response") {
                raise(ErrorCode::DataError, where + ": expected the header 'stage,dose,response'");
            }
            header = true;
            continue;
        }
        if (f.size() != 3) raise(ErrorCode::DataError, where + ": expected 3 fields");
        SubjectRecord r;
        r.line = lineno;
        if (f[0] == "1") {
            r.stage = 1;
        } else if (f[0] == "2") {
            r.stage = 2;
        } else {
            raise(ErrorCode::DataError, where + ": stage must be 1 or 2");
        }
        try {
            r.dose_key = canonical_dose(f[1]);
        } catch (const Error& e) {
            raise(ErrorCode::DataError, where + ": " + e.what());
        }
        r.dose = parse_double(f[1], where + " dose");
        r.response = parse_double(f[2], where + " response");
        out.push_back(std::move(r));
    }
    if (!header) raise(ErrorCode::DataError, "data file is empty");
    if (out.empty()) raise(ErrorCode::DataError, "data file has no subjects");
    return out;
}

std::vector<SubjectRecord> read_subjects(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::DataError, "cannot open data file " + path.string());
    return read_subjects(in);
}

std::vector<int> StageData::counts() const {
    std::vector<int> n;
    for (const auto& g : responses) n.push_back(static_cast<int>(g.size()));
    return n;
}

StageSummary StageData::summary() const { return summarize(doses, responses); }

TrialDataset group_subjects(const std::vector<SubjectRecord>& records, std::span<const double> design_doses) {
    std::vector<double> doses(design_doses.begin(), design_doses.end());
    if (doses.empty()) {
        std::map<double, bool> seen;
        for (const auto& r : records) {
            if (r.stage == 1) seen[r.dose] = true;
        }
        for (auto& [d, _] : seen) doses.push_back(d);
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < doses.size(); ++i) index.emplace(canonical_dose(doses[i]), i);
    if (doses.empty() || doses[0] != 0.0) raise(ErrorCode::DataError, "no placebo (dose 0) group");

    TrialDataset out;
    out.stage1.doses = doses;
    out.stage1.responses.resize(doses.size());
    std::vector<std::vector<double>> stage2(doses.size());
    for (const auto& r : records) {
        auto it = index.find(r.dose_key);
        if (it == index.end()) {
            raise(ErrorCode::DataError, "line " + std::to_string(r.line) + ": dose " + r.dose_key +
                                            (r.stage == 1 ? " is not a design dose" : " was not used in stage 1"));
        }
        (r.stage == 1 ? out.stage1.responses : stage2)[it->second].push_back(r.response);
    }
    if (out.stage1.responses[0].empty()) raise(ErrorCode::DataError, "no placebo (dose 0) group in stage 1");
    for (std::size_t i = 0; i < doses.size(); ++i) {
        if (out.stage1.responses[i].empty()) {
            raise(ErrorCode::DataError, "stage 1 has no subjects at dose " + canonical_dose(doses[i]));
        }
    }
    for (std::size_t i = 0; i < doses.size(); ++i) {
        if (stage2[i].empty()) continue;
        out.stage2.doses.push_back(doses[i]);
        out.stage2.responses.push_back(std::move(stage2[i]));
    }
    if (!out.stage2.empty() && out.stage2.doses[0] != 0.0) {
        raise(ErrorCode::DataError, "no placebo (dose 0) group in stage 2");
    }
    return out;
}

void write_subjects(std::ostream& out, const TrialDataset& data) {
    out << "stage,dose,response\n";
    char buf[64];
    auto write_stage = [&](int stage, const StageData& s) {
        for (std::size_t i = 0; i < s.doses.size(); ++i) {
            const auto dose = canonical_dose(s.doses[i]);
            for (double y : s.responses[i]) {
                std::snprintf(buf, sizeof buf, "%.17g", y);
                out << stage << ',' << dose << ',' << buf << '\n';
            }
        }
    };
    write_stage(1, data.stage1);
    write_stage(2, data.stage2);
}

}  // namespace adaptpoc::cli
