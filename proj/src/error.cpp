// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/error.hpp"

namespace toxpipe {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownCharacter: return "UnknownCharacter";
    case ErrorCode::UnclosedRing: return "UnclosedRing";
    case ErrorCode::UnmatchedBranch: return "UnmatchedBranch";
    case ErrorCode::ValenceViolation: return "ValenceViolation";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::InvalidBond: return "InvalidBond";
    case ErrorCode::EmptyMolecule: return "EmptyMolecule";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::LayoutOverlap: return "LayoutOverlap";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::OddSpatialDim: return "OddSpatialDim";
    case ErrorCode::NoRecordedGraph: return "NoRecordedGraph";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UntrainedHead: return "UntrainedHead";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::SingleClassLabel: return "SingleClassLabel";
    case ErrorCode::UntrainedLabel: return "UntrainedLabel";
    case ErrorCode::NoVoters: return "NoVoters";
    case ErrorCode::TooFewRuns: return "TooFewRuns";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::MissingSmilesColumn: return "MissingSmilesColumn";
    case ErrorCode::NoAssayColumns: return "NoAssayColumns";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::BadFractions: return "BadFractions";
    case ErrorCode::NoEvaluableRecords: return "NoEvaluableRecords";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::BundleCorrupt: return "BundleCorrupt";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(detail.empty() ? std::string(error_code_name(code))
                                        : std::string(error_code_name(code)) + ": " + detail),
      code_(code) {}

void raise(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace toxpipe
