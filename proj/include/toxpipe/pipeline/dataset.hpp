// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "toxpipe/chem/smiles.hpp"
#include "toxpipe/ensemble/matrix.hpp"
#include "toxpipe/error.hpp"

namespace toxpipe::pipeline {

inline constexpr std::size_t kAssayCount = 12;

/// Frozen assay order; every label vector follows it.
inline constexpr std::array<std::string_view, kAssayCount> kAssays{
    "NR-AR",   "NR-AR-LBD", "NR-AhR",   "NR-ER",  "NR-ER-LBD", "NR-PPAR-gamma",
    "NR-Aromatase", "SR-ARE", "SR-ATAD5", "SR-HSE", "SR-MMP",    "SR-p53",
};

std::optional<std::size_t> assay_index(std::string_view name) noexcept;

using LabelVector = std::array<std::int8_t, kAssayCount>;  // 1, 0 or ensemble::kMissing

struct DatasetRecord {
    std::string smiles;
    LabelVector labels{};
    std::size_t line = 0;  // 1-based line in the source file
    chem::Molecule molecule;

    std::size_t labelled_count() const noexcept;
};

struct QuarantinedRow {
    std::size_t line = 0;
    std::string smiles;
    ErrorCode code = ErrorCode::ParseFailure;
    std::string reason;
};

struct Dataset {
    std::vector<DatasetRecord> records;
    std::vector<QuarantinedRow> quarantine;
    std::size_t rows_in = 0;
    /// Which assays had a column in the header.
    std::array<bool, kAssayCount> assay_present{};
};

/// Reads a header with a `smiles` column plus any subset of the assay columns (other columns are
/// ignored). Empty cells are missing; 0/1 (also 0.0/1.0) are labels. Rows whose SMILES fails to
/// parse, or that carry no label at all, are quarantined with the reason.
/// Throws MissingSmilesColumn, NoAssayColumns, MalformedRow (with the line number).
Dataset read_tox21_csv(std::istream& in);
Dataset load_tox21_csv(const std::filesystem::path& path);

ensemble::LabelMatrix label_matrix(const std::vector<DatasetRecord>& records);

std::vector<DatasetRecord> select_records(const std::vector<DatasetRecord>& records,
                                          const std::vector<std::size_t>& indices);

/// FNV-1a over SMILES and labels, in record order.
std::uint64_t dataset_hash(const std::vector<DatasetRecord>& records);

// ---------------------------------------------------------------------------
// Splitting

struct SplitFractions {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
    bool operator==(const SplitFractions&) const = default;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Part sizes by the largest-remainder rule (ties to the earlier part).
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& fractions);

/// Iterative stratification over the positive labels after a seeded shuffle: the rarest
/// remaining label is placed first, each example going to the part that still wants most of
/// that label. Part sizes are exact. Index lists come back sorted. Throws BadFractions.
Split stratified_split(const ensemble::LabelMatrix& labels, std::uint64_t seed, const SplitFractions& fractions = {});

}  // namespace toxpipe::pipeline
