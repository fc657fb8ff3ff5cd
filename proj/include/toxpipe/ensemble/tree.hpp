// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace toxpipe::ensemble {

/// Internal nodes send x[feature] <= threshold left. Leaves have feature == -1 and carry `value`.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // root at 0
    std::size_t max_depth = 0;    // 0 = unlimited

    double predict(std::span<const double> x) const;
    /// Edges on the longest root-to-leaf path.
    std::size_t depth() const;
    bool operator==(const DecisionTree&) const = default;
};

}  // namespace toxpipe::ensemble
