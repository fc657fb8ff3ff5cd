// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/pipeline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "toxpipe/error.hpp"

namespace toxpipe::pipeline {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            rank[order[k]] = avg;
        }
        i = j + 1;
    }
    double pos = 0;
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i]) {
            pos += 1;
            rank_sum += rank[i];
        }
    }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0 || neg == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

AssayMetrics assay_metrics(const std::string& assay, std::span<const double> scores, std::span<const int> verdicts,
                           std::span<const int> labels) {
    std::vector<double> s;
    std::vector<int> y;
    std::size_t correct = 0;
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t pos = 0;
    std::size_t neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) {
            continue;
        }
        s.push_back(scores[i]);
        y.push_back(labels[i]);
        const bool hit = verdicts[i] == labels[i];
        correct += hit ? 1 : 0;
        if (labels[i]) {
            ++pos;
            tp += hit ? 1 : 0;
        } else {
            ++neg;
            tn += hit ? 1 : 0;
        }
    }
    if (y.empty()) {
        raise(ErrorCode::NoEvaluableRecords, assay);
    }
    AssayMetrics m;
    m.assay = assay;
    m.support = y.size();
    m.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
    double recall_sum = 0.0;
    int recalls = 0;
    if (pos) {
        recall_sum += static_cast<double>(tp) / static_cast<double>(pos);
        ++recalls;
    }
    if (neg) {
        recall_sum += static_cast<double>(tn) / static_cast<double>(neg);
        ++recalls;
    }
    m.balanced_accuracy = recall_sum / recalls;
    m.auc = roc_auc(s, y);
    return m;
}

EvaluationReport summarize(std::vector<AssayMetrics> assays) {
    EvaluationReport r;
    r.assays = std::move(assays);
    r.macro.assay = "macro";
    if (r.assays.empty()) {
        r.macro.auc = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    double auc_sum = 0.0;
    std::size_t auc_n = 0;
    for (const auto& m : r.assays) {
        r.macro.accuracy += m.accuracy;
        r.macro.balanced_accuracy += m.balanced_accuracy;
        r.macro.support += m.support;
        if (!std::isnan(m.auc)) {
            auc_sum += m.auc;
            ++auc_n;
        }
    }
    const auto k = static_cast<double>(r.assays.size());
    r.macro.accuracy /= k;
    r.macro.balanced_accuracy /= k;
    r.macro.auc = auc_n ? auc_sum / static_cast<double>(auc_n) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

std::string metrics_csv(const EvaluationReport& report) {
    std::string out = "assay,accuracy,balanced_accuracy,auc,support\n";
    char buf[160];
    auto row = [&](const AssayMetrics& m) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%zu\n", m.assay.c_str(), m.accuracy, m.balanced_accuracy,
                      m.auc, m.support);
        out += buf;
    };
    for (const auto& m : report.assays) {
        row(m);
    }
    row(report.macro);
    return out;
}

}  // namespace toxpipe::pipeline
