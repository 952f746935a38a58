#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptpoc/model_lib.hpp"

namespace adaptpoc::cli {

struct SubjectRecord {
    int stage = 1;
    std::string dose_key;  // canonical decimal text
    double dose = 0.0;
    double response = 0.0;
    int line = 0;
};

/// Canonical decimal text of a dose: no sign, exponent, leading zeros or
/// trailing fractional zeros ("0.50" -> "0.5", "1.0" -> "1", ".2" -> "0.2").
/// Text with an exponent is first converted to its shortest round-trip
/// form. Throws DataError on anything that is not a nonnegative number.
std::string canonical_dose(std::string_view text);
/// Shortest round-trip text of a double, canonicalized.
std::string canonical_dose(double dose);

/// Parses `stage,dose,response` CSV. Throws DataError with the line number on
/// malformed input.
std::vector<SubjectRecord> read_subjects(std::istream& in);
std::vector<SubjectRecord> read_subjects(const std::filesystem::path& path);

/// Subject responses grouped by dose, in file order within each group.
struct StageData {
    std::vector<double> doses;
    std::vector<std::vector<double>> responses;

    bool empty() const { return doses.empty(); }
    std::vector<int> counts() const;
    StageSummary summary() const;
};

struct TrialDataset {
    StageData stage1;
    StageData stage2;  // empty for an interim (stage-1 only) analysis
};

/// Groups records by matching canonical dose text against `design_doses`
/// (stage-1 doses inferred from the data when empty). Throws DataError when
/// placebo is missing, a design dose has no stage-1 subjects, or a stage-2
/// dose was not used in stage 1.
TrialDataset group_subjects(const std::vector<SubjectRecord>& records, std::span<const double> design_doses);

/// Writes the header and one row per subject; responses with 17 significant
/// digits so that reading the file back reproduces them exactly.
void write_subjects(std::ostream& out, const TrialDataset& data);

}  // namespace adaptpoc::cli
