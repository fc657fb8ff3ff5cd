// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace toxpipe {

enum class ErrorCode {
    // chem-parse
    EmptyInput,
    UnknownCharacter,
    UnclosedRing,
    UnmatchedBranch,
    ValenceViolation,
    UnknownElement,
    InvalidBond,
    // fingerprint
    EmptyMolecule,
    LengthMismatch,
    // depict
    LayoutOverlap,
    DegenerateExtent,
    // tensor-nn
    ShapeMismatch,
    DegenerateBatch,
    OddSpatialDim,
    NoRecordedGraph,
    EmptyDataset,
    // explain
    UntrainedHead,
    InvalidLabel,
    DimMismatch,
    // ensemble
    SingleClassLabel,
    UntrainedLabel,
    NoVoters,
    TooFewRuns,
    BadWeights,
    // pipeline
    MissingSmilesColumn,
    NoAssayColumns,
    MalformedRow,
    BadFractions,
    NoEvaluableRecords,
    ParseFailure,
    BundleCorrupt,
    ChecksumMismatch,
    VersionUnsupported,
    TruncatedFile,
    Io,
    BadConfig,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library. `code()` identifies the failure kind; `what()` carries
/// the human-readable detail (positions, digits, line numbers).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& detail = {});

}  // namespace toxpipe
