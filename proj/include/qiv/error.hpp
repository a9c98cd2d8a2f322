#pragma once

#include <stdexcept>
#include <string>

namespace qiv {

/// Failure category; maps one-to-one onto the CLI exit codes.
enum class ErrorCategory {
    Validation = 2,
    Numerical = 3,
    Io = 4,
};

/// Every library failure is raised as a qiv::Error carrying a stable,
/// machine-readable kind such as "ZeroVarianceColumn".
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string kind, const std::string& detail)
        : std::runtime_error(kind + ": " + detail),
          category_(category),
          kind_(std::move(kind)) {}

    ErrorCategory category() const noexcept { return category_; }
    const std::string& kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
    std::string kind_;
};

inline Error validation_error(std::string kind, const std::string& detail) {
    return Error(ErrorCategory::Validation, std::move(kind), detail);
}

inline Error numerical_error(std::string kind, const std::string& detail) {
    return Error(ErrorCategory::Numerical, std::move(kind), detail);
}

inline Error io_error(std::string kind, const std::string& detail) {
    return Error(ErrorCategory::Io, std::move(kind), detail);
}

}  // namespace qiv
