// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "toxpipe/ensemble/matrix.hpp"
#include "toxpipe/ensemble/tree.hpp"

namespace toxpipe::ensemble {

// Each fit takes binary labels (0/1) aligned with the rows of x and throws SingleClassLabel
// unless both classes have at least two samples.

void require_two_classes(std::span<const int> y);

// ---------------------------------------------------------------------------
// Linear SVM

struct SvmParams {
    double lambda = 1e-3;  // L2 strength
    std::size_t epochs = 30;
    /// Weight each class by n / (2 n_class) in the hinge term.
    bool balanced = true;
    /// Share of rows held out for the logistic calibration fit.
    double calibration_fraction = 0.2;
    std::uint64_t seed = 0;
};

/// P(y = 1 | f) = 1 / (1 + exp(a f + b))
struct PlattScale {
    double a = -1.0;
    double b = 0.0;

    double operator()(double decision) const;
    bool operator==(const PlattScale&) const = default;
};

/// Fits the logistic map on (decision, label) pairs with Newton's method and smoothed targets.
PlattScale fit_platt(std::span<const double> decisions, std::span<const int> y);

struct LinearSvm {
    std::vector<double> weights;
    double bias = 0.0;
    PlattScale platt;

    double decision(std::span<const double> x) const;
    double probability(std::span<const double> x) const { return platt(decision(x)); }
    int vote(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : 0; }
    bool operator==(const LinearSvm&) const = default;
};

/// Regularized hinge loss by epoch-wise stochastic subgradient steps (step 1 / (lambda t)) over a
/// seeded permutation; the bias rides along as a constant feature.
LinearSvm fit_linear_svm(const FeatureMatrix& x, std::span<const int> y, const SvmParams& params = {});

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
    std::size_t n_trees = 200;
    std::size_t max_depth = 12;  // 0 = unlimited
    /// Candidate features per split; defaults to floor(sqrt(D)), at least 1.
    std::optional<std::size_t> max_features;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct RandomForest {
    std::vector<DecisionTree> trees;  // leaves hold 0/1 votes

    /// Fraction of trees voting positive.
    double probability(std::span<const double> x) const;
    int vote(std::span<const double> x) const { return probability(x) > 0.5 ? 1 : 0; }
    bool operator==(const RandomForest&) const = default;
};

/// One Gini classification tree over the given sample indices (duplicates allowed). A node
/// becomes a majority leaf when pure, at max depth, or when no candidate feature varies.
DecisionTree fit_gini_tree(const FeatureMatrix& x, std::span<const int> y, std::span<const std::size_t> samples,
                           std::size_t max_depth, std::size_t max_features, std::uint64_t seed);

RandomForest fit_random_forest(const FeatureMatrix& x, std::span<const int> y, const ForestParams& params = {});

// ---------------------------------------------------------------------------
// Gradient boosting

struct GbmParams {
    std::size_t n_rounds = 200;
    std::size_t max_depth = 4;
    double learning_rate = 0.1;
    double lambda = 1.0;
    /// Initial log-odds; the training positive rate's logit when unset.
    std::optional<double> base_score;
};

struct GradientBoosting {
    std::vector<DecisionTree> trees;  // leaves hold Newton weights
    double learning_rate = 0.1;
    double base_score = 0.0;

    double margin(std::span<const double> x) const;
    double probability(std::span<const double> x) const;
    int vote(std::span<const double> x) const { return probability(x) >= 0.5 ? 1 : 0; }
    bool operator==(const GradientBoosting&) const = default;
};

struct GbmTrace {
    std::vector<double> log_loss;  // training loss after each round, starting with round 0
};

/// Newton boosting on logistic loss: exact greedy splits maximizing the second-order gain,
/// leaf weights -G / (H + lambda).
GradientBoosting fit_gbm(const FeatureMatrix& x, std::span<const int> y, const GbmParams& params = {},
                         GbmTrace* trace = nullptr);

double sigmoid(double z) noexcept;

}  // namespace toxpipe::ensemble
