// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace toxpipe::ensemble {

/// Row-major dense sample matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }

    void append(std::span<const double> values);
    FeatureMatrix select(std::span<const std::size_t> indices) const;

    bool operator==(const FeatureMatrix&) const = default;
};

/// Per-row tri-state labels: 1 active, 0 inactive, -1 missing.
struct LabelMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int8_t> data;

    LabelMatrix() = default;
    LabelMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, -1) {}

    std::int8_t operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::int8_t& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

inline constexpr std::int8_t kMissing = -1;

/// Per-column z-score using population statistics of the fitting data. Columns with no spread
/// keep a unit divisor.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const FeatureMatrix& x);
    std::vector<double> apply(std::span<const double> row) const;
    FeatureMatrix apply(const FeatureMatrix& x) const;

    bool operator==(const Standardizer&) const = default;
};

}  // namespace toxpipe::ensemble
