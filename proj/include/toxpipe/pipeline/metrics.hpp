// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

namespace toxpipe::pipeline {

/// Mann-Whitney statistic with average ranks for ties. NaN unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct AssayMetrics {
    std::string assay;
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;
    double auc = 0.0;
    std::size_t support = 0;
};

/// Metrics over the evaluable entries (label >= 0) of one assay. Throws NoEvaluableRecords.
AssayMetrics assay_metrics(const std::string& assay, std::span<const double> scores, std::span<const int> verdicts,
                           std::span<const int> labels);

struct EvaluationReport {
    std::vector<AssayMetrics> assays;  // assays without evaluable records are omitted
    AssayMetrics macro;                // unweighted mean over the assays listed (NaN AUCs skipped)
    std::size_t excluded_records = 0;  // could not be depicted
};

EvaluationReport summarize(std::vector<AssayMetrics> assays);

/// "assay,accuracy,balanced_accuracy,auc,support" with one row per assay plus "macro".
std::string metrics_csv(const EvaluationReport& report);

}  // namespace toxpipe::pipeline
