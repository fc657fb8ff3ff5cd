// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toxpipe/ensemble/classifiers.hpp"
#include "toxpipe/ensemble/matrix.hpp"

namespace toxpipe::ensemble {

enum class Classifier : std::size_t { Svm = 0, Forest = 1, Gbm = 2 };
inline constexpr std::size_t kClassifierCount = 3;
const char* classifier_name(Classifier c) noexcept;

/// Result when an even number of voters split evenly.
inline constexpr int kTieVote = 0;

/// Mode of the votes. With an even count a tie returns `tie_break`. Throws NoVoters when empty.
int majority_vote(std::span<const int> votes, int tie_break = kTieVote);

/// Population standard deviation per dimension across runs, averaged, subtracted from 1 and
/// clamped to [0, 1]. Throws TooFewRuns for fewer than 2 runs, DimMismatch for ragged runs.
double trust_densenet(std::span<const std::vector<double>> runs);

/// Convex combination of the voted-class probabilities. Weights must be non-negative and sum
/// to 1 (within 1e-9) or BadWeights is thrown.
double trust_ml(std::span<const double> probabilities, std::span<const double> alpha);

/// weight * densenet + (1 - weight) * ml, clamped.
double global_confidence(double densenet, double ml, double weight = 0.5);

struct EnsembleParams {
    SvmParams svm;
    ForestParams forest;
    GbmParams gbm;
    std::array<double, kClassifierCount> alpha{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::uint64_t seed = 0;
};

/// The three one-vs-rest classifiers of a single label; absent entries were not trainable.
struct LabelModels {
    std::optional<LinearSvm> svm;
    std::optional<RandomForest> forest;
    std::optional<GradientBoosting> gbm;
    std::string skip_reason;

    bool any() const noexcept { return svm || forest || gbm; }
    bool operator==(const LabelModels&) const = default;
};

struct LabelPrediction {
    std::array<std::optional<double>, kClassifierCount> probability;
    std::array<std::optional<int>, kClassifierCount> vote;
    bool trained = false;
    int verdict = 0;
    /// Mean positive probability across available classifiers.
    double mean_probability = 0.0;
    /// Weighted agreement of the available classifiers with the verdict.
    double trust = 0.0;
};

class EnsembleModel {
public:
    /// Fits per label on the rows where that label is present. Features are z-scored with
    /// statistics from all rows first. Labels with fewer than 2 samples of either class are kept
    /// untrained, with the reason recorded.
    static EnsembleModel fit(const FeatureMatrix& x, const LabelMatrix& y, const EnsembleParams& params = {});

    std::size_t label_count() const noexcept { return labels.size(); }
    std::size_t feature_dim() const noexcept { return scaler.mean.size(); }

    /// 3 x labels probabilities for standardized input. Throws UntrainedLabel if any classifier
    /// is missing for any label.
    std::array<std::vector<double>, kClassifierCount> predict_proba(std::span<const double> raw) const;

    /// Probability of one classifier for one label; throws UntrainedLabel when absent.
    double probability(Classifier c, std::size_t label, std::span<const double> raw) const;

    /// Per-label votes, verdict and trust, tolerating untrained classifiers.
    std::vector<LabelPrediction> predict(std::span<const double> raw) const;

    Standardizer scaler;
    std::vector<LabelModels> labels;
    std::array<double, kClassifierCount> alpha{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

    bool operator==(const EnsembleModel&) const = default;

private:
    LabelPrediction predict_label(std::size_t label, std::span<const double> z) const;
};

}  // namespace toxpipe::ensemble
