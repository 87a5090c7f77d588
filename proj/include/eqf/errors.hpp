#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eqf {

enum class ErrorKind {
    NonSkewInput,
    SingularInput,
    NotARotation,
    NotUnitVector,
    NotPositiveDefinite,
    MissingPsi,
    MissingRho,
    NotNormalChart,
    SingularN,
    LostPositivity,
    NonFiniteEvaluation,
    AntipodeOutOfChart,
    NotTangent,
    SingularInnovationCovariance,
    InvalidConfig,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonSkewInput: return "NonSkewInput";
        case ErrorKind::SingularInput: return "SingularInput";
        case ErrorKind::NotARotation: return "NotARotation";
        case ErrorKind::NotUnitVector: return "NotUnitVector";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::MissingPsi: return "MissingPsi";
        case ErrorKind::MissingRho: return "MissingRho";
        case ErrorKind::NotNormalChart: return "NotNormalChart";
        case ErrorKind::SingularN: return "SingularN";
        case ErrorKind::LostPositivity: return "LostPositivity";
        case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
        case ErrorKind::AntipodeOutOfChart: return "AntipodeOutOfChart";
        case ErrorKind::NotTangent: return "NotTangent";
        case ErrorKind::SingularInnovationCovariance: return "SingularInnovationCovariance";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace eqf
