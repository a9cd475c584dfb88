#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ivrepro {

enum class ErrorCode {
    // pipeline_core
    IoError,
    InvalidStudyId,
    StageFailed,
    ResumePrereqMissing,
    InterpreterMissing,
    Timeout,
    NonZeroExit,
    ValidationError,
    DatasetNotFound,
    // acquisition
    NoRepositoryUrl,
    MetadataIncomplete,
    RetrievalFailed,
    // script_parser
    NoSpecificationsFound,
    ParseFailure,
    MarkerNotFound,
    UnresolvedMacro,
    // janitor
    EsampleSourceNotFound,
    AnchorAmbiguous,
    AnchorNotFound,
    // name_resolver
    PanelRequired,
    DegenerateFactor,
    NotAnExpression,
    UnresolvedOperand,
    // estimator
    UnresolvedTerm,
    EmptySample,
    ConditionParseError,
    NonConvergence,
    RankDeficient,
    WeakRankInstrument,
    // diagnostics
    SingularVcov,
    TooManyDegenerateReplicates,
    FBelowTableFloor,
    ZeroVariance,
    // reporter
    NoSpecs,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace ivrepro
