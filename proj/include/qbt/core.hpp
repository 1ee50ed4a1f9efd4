#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace qbt {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Error categories. The CLI maps each category to its own exit code.
enum class ErrorCode {
    DimensionMismatch,
    SingularPencil,
    AsymmetricQuadraticForm,
    InvalidParams,
    InvalidGrid,
    GridMismatch,
    InconsistentInitialState,
    UnstableProperPart,
    IndefiniteMatrix,
    NothingObservable,
    SignalTooRough,
    SolverFailure,
    ParseError,
    IoError,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::SingularPencil: return "SingularPencil";
        case ErrorCode::AsymmetricQuadraticForm: return "AsymmetricQuadraticForm";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::InvalidGrid: return "InvalidGrid";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::InconsistentInitialState: return "InconsistentInitialState";
        case ErrorCode::UnstableProperPart: return "UnstableProperPart";
        case ErrorCode::IndefiniteMatrix: return "IndefiniteMatrix";
        case ErrorCode::NothingObservable: return "NothingObservable";
        case ErrorCode::SignalTooRough: return "SignalTooRough";
        case ErrorCode::SolverFailure: return "SolverFailure";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Non-fatal conditions attached to results.
enum class Warning {
    IllConditionedTransform,
    UnstableReducedProperPart,
    StructureDeviation,
    NoDecayTail,
};

inline const char* to_string(Warning w) {
    switch (w) {
        case Warning::IllConditionedTransform: return "IllConditionedTransform";
        case Warning::UnstableReducedProperPart: return "UnstableReducedProperPart";
        case Warning::StructureDeviation: return "StructureDeviation";
        case Warning::NoDecayTail: return "NoDecayTail";
    }
    return "Unknown";
}

namespace detail {

inline void require(bool ok, ErrorCode code, const std::string& msg) {
    if (!ok) throw Error(code, msg);
}

inline Mat sym(const Mat& X) { return 0.5 * (X + X.transpose()); }

/// ||X||_F / max(||Y||_F, tiny), used for relative residuals.
inline double rel(double num, double den) { return den > 0 ? num / den : num; }

}  // namespace detail
}  // namespace qbt
