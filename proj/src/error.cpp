#include "ivrepro/error.hpp"

namespace ivrepro {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidStudyId: return "InvalidStudyId";
        case ErrorCode::StageFailed: return "StageFailed";
        case ErrorCode::ResumePrereqMissing: return "ResumePrereqMissing";
        case ErrorCode::InterpreterMissing: return "InterpreterMissing";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::NonZeroExit: return "NonZeroExit";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::DatasetNotFound: return "DatasetNotFound";
        case ErrorCode::NoRepositoryUrl: return "NoRepositoryUrl";
        case ErrorCode::MetadataIncomplete: return "MetadataIncomplete";
        case ErrorCode::RetrievalFailed: return "RetrievalFailed";
        case ErrorCode::NoSpecificationsFound: return "NoSpecificationsFound";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::MarkerNotFound: return "MarkerNotFound";
        case ErrorCode::UnresolvedMacro: return "UnresolvedMacro";
        case ErrorCode::EsampleSourceNotFound: return "EsampleSourceNotFound";
        case ErrorCode::AnchorAmbiguous: return "AnchorAmbiguous";
        case ErrorCode::AnchorNotFound: return "AnchorNotFound";
        case ErrorCode::PanelRequired: return "PanelRequired";
        case ErrorCode::DegenerateFactor: return "DegenerateFactor";
        case ErrorCode::NotAnExpression: return "NotAnExpression";
        case ErrorCode::UnresolvedOperand: return "UnresolvedOperand";
        case ErrorCode::UnresolvedTerm: return "UnresolvedTerm";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::ConditionParseError: return "ConditionParseError";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::WeakRankInstrument: return "WeakRankInstrument";
        case ErrorCode::SingularVcov: return "SingularVcov";
        case ErrorCode::TooManyDegenerateReplicates: return "TooManyDegenerateReplicates";
        case ErrorCode::FBelowTableFloor: return "FBelowTableFloor";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::NoSpecs: return "NoSpecs";
    }
    return "Unknown";
}

}  // namespace ivrepro
