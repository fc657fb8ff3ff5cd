// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/ensemble/matrix.hpp"

#include <cmath>

#include "toxpipe/ensemble/tree.hpp"
#include "toxpipe/error.hpp"

namespace toxpipe::ensemble {

void FeatureMatrix::append(std::span<const double> values) {
    if (rows == 0 && cols == 0) {
        cols = values.size();
    }
    if (values.size() != cols) {
        raise(ErrorCode::DimMismatch, "row of " + std::to_string(values.size()) + " features, expected " +
                                          std::to_string(cols));
    }
    data.insert(data.end(), values.begin(), values.end());
    ++rows;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
    FeatureMatrix out(indices.size(), cols);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto src = row(indices[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

Standardizer Standardizer::fit(const FeatureMatrix& x) {
    Standardizer s;
    s.mean.assign(x.cols, 0.0);
    s.scale.assign(x.cols, 1.0);
    if (x.rows == 0) {
        return s;
    }
    for (std::size_t j = 0; j < x.cols; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            sum += x(i, j);
        }
        const double mu = sum / static_cast<double>(x.rows);
        double ss = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double d = x(i, j) - mu;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(x.rows));
        s.mean[j] = mu;
        s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
    if (row.size() != mean.size()) {
        raise(ErrorCode::DimMismatch, "feature vector of length " + std::to_string(row.size()) + ", expected " +
                                          std::to_string(mean.size()));
    }
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
        out[j] = (row[j] - mean[j]) / scale[j];
    }
    return out;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& x) const {
    FeatureMatrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto z = apply(x.row(i));
        std::copy(z.begin(), z.end(), out.row(i).begin());
    }
    return out;
}

double DecisionTree::predict(std::span<const double> x) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
        const TreeNode& n = nodes[at];
        at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[at].value;
}

std::size_t DecisionTree::depth() const {
    if (nodes.empty()) {
        return 0;
    }
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [at, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (!nodes[at].is_leaf()) {
            stack.emplace_back(static_cast<std::size_t>(nodes[at].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes[at].right), d + 1);
        }
    }
    return best;
}

}  // namespace toxpipe::ensemble
