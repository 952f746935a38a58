#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adaptpoc {

enum class ErrorCode {
    ContractViolation,
    UnderdeterminedFit,
    DegenerateDesign,
    DegenerateContrast,
    DegenerateVariance,
    NumericalDomain,
    DataError,
    ConfigError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// True for failures of the statistical computation itself (as opposed to
    /// malformed input files or misuse of the API).
    bool is_numerical() const noexcept {
        switch (code_) {
            case ErrorCode::UnderdeterminedFit:
            case ErrorCode::DegenerateDesign:
            case ErrorCode::DegenerateContrast:
            case ErrorCode::DegenerateVariance:
            case ErrorCode::NumericalDomain:
                return true;
            default:
                return false;
        }
    }

   private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const char* what) {
    if (!condition) throw Error(ErrorCode::ContractViolation, what);
}

}  // namespace adaptpoc
