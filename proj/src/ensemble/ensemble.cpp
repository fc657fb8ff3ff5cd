// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/ensemble/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "toxpipe/error.hpp"
#include "toxpipe/parallel.hpp"
#include "toxpipe/random.hpp"

namespace toxpipe::ensemble {

const char* classifier_name(Classifier c) noexcept {
    switch (c) {
    case Classifier::Svm: return "svm";
    case Classifier::Forest: return "random_forest";
    case Classifier::Gbm: return "gbm";
    }
    return "?";
}

int majority_vote(std::span<const int> votes, int tie_break) {
    if (votes.empty()) {
        raise(ErrorCode::NoVoters, "no classifier available");
    }
    std::size_t ones = 0;
    for (int v : votes) {
        ones += v ? 1 : 0;
    }
    const std::size_t zeros = votes.size() - ones;
    if (ones == zeros) {
        return tie_break;
    }
    return ones > zeros ? 1 : 0;
}

double trust_densenet(std::span<const std::vector<double>> runs) {
    if (runs.size() < 2) {
        raise(ErrorCode::TooFewRuns, std::to_string(runs.size()) + " runs; need at least 2");
    }
    const std::size_t d = runs.front().size();
    for (const auto& r : runs) {
        if (r.size() != d) {
            raise(ErrorCode::DimMismatch, "runs differ in length");
        }
    }
    if (d == 0) {
        return 1.0;
    }
    const auto r = static_cast<double>(runs.size());
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& run : runs) {
            mean += run[j];
        }
        mean /= r;
        double ss = 0.0;
        for (const auto& run : runs) {
            ss += (run[j] - mean) * (run[j] - mean);
        }
        total += std::sqrt(ss / r);
    }
    return std::clamp(1.0 - total / static_cast<double>(d), 0.0, 1.0);
}

double trust_ml(std::span<const double> probabilities, std::span<const double> alpha) {
    if (probabilities.size() != alpha.size() || alpha.empty()) {
        raise(ErrorCode::BadWeights, "need one weight per probability");
    }
    double sum = 0.0;
    for (double a : alpha) {
        if (!(a >= 0.0)) {
            raise(ErrorCode::BadWeights, "weights must be non-negative");
        }
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        raise(ErrorCode::BadWeights, "weights sum to " + std::to_string(sum));
    }
    double out = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out += alpha[i] * probabilities[i];
    }
    return std::clamp(out, 0.0, 1.0);
}

double global_confidence(double densenet, double ml, double weight) {
    weight = std::clamp(weight, 0.0, 1.0);
    return std::clamp(weight * densenet + (1.0 - weight) * ml, 0.0, 1.0);
}

EnsembleModel EnsembleModel::fit(const FeatureMatrix& x, const LabelMatrix& y, const EnsembleParams& params) {
    if (x.rows != y.rows) {
        raise(ErrorCode::DimMismatch, std::to_string(x.rows) + " feature rows vs " + std::to_string(y.rows) +
                                          " label rows");
    }
    double alpha_sum = 0.0;
    for (double a : params.alpha) {
        if (!(a >= 0.0)) {
            raise(ErrorCode::BadWeights, "ensemble weights must be non-negative");
        }
        alpha_sum += a;
    }
    if (std::abs(alpha_sum - 1.0) > 1e-9) {
        raise(ErrorCode::BadWeights, "ensemble weights must sum to 1");
    }
    EnsembleModel model;
    model.alpha = params.alpha;
    model.scaler = Standardizer::fit(x);
    const FeatureMatrix z = model.scaler.apply(x);
    model.labels.resize(y.cols);

    parallel_for(y.cols, [&](std::size_t label) {
        std::vector<std::size_t> rows;
        std::vector<int> target;
        for (std::size_t i = 0; i < y.rows; ++i) {
            if (y(i, label) != kMissing) {
                rows.push_back(i);
                target.push_back(y(i, label) ? 1 : 0);
            }
        }
        LabelModels& out = model.labels[label];
        try {
            require_two_classes(target);
        } catch (const Error& e) {
            out.skip_reason = e.what();
            return;
        }
        const FeatureMatrix sub = z.select(rows);
        const std::uint64_t label_seed = splitmix64(params.seed ^ (0x1000 + label));
        SvmParams svm = params.svm;
        svm.seed ^= label_seed;
        ForestParams forest = params.forest;
        forest.seed ^= label_seed;
        out.svm = fit_linear_svm(sub, target, svm);
        out.forest = fit_random_forest(sub, target, forest);
        out.gbm = fit_gbm(sub, target, params.gbm);
    });
    return model;
}

namespace {

std::optional<double> classifier_probability(const LabelModels& m, Classifier c, std::span<const double> z) {
    switch (c) {
    case Classifier::Svm:
        if (m.svm) {
            return m.svm->probability(z);
        }
        break;
    case Classifier::Forest:
        if (m.forest) {
            return m.forest->probability(z);
        }
        break;
    case Classifier::Gbm:
        if (m.gbm) {
            return m.gbm->probability(z);
        }
        break;
    }
    return std::nullopt;
}

std::optional<int> classifier_vote(const LabelModels& m, Classifier c, std::span<const double> z) {
    switch (c) {
    case Classifier::Svm:
        if (m.svm) {
            return m.svm->vote(z);
        }
        break;
    case Classifier::Forest:
        if (m.forest) {
            return m.forest->vote(z);
        }
        break;
    case Classifier::Gbm:
        if (m.gbm) {
            return m.gbm->vote(z);
        }
        break;
    }
    return std::nullopt;
}

}  // namespace

double EnsembleModel::probability(Classifier c, std::size_t label, std::span<const double> raw) const {
    if (label >= labels.size()) {
        raise(ErrorCode::UntrainedLabel, "label " + std::to_string(label) + " out of range");
    }
    const auto z = scaler.apply(raw);
    const auto p = classifier_probability(labels[label], c, z);
    if (!p) {
        raise(ErrorCode::UntrainedLabel, std::string(classifier_name(c)) + " not trained for label " +
                                             std::to_string(label));
    }
    return *p;
}

std::array<std::vector<double>, kClassifierCount> EnsembleModel::predict_proba(std::span<const double> raw) const {
    const auto z = scaler.apply(raw);
    std::array<std::vector<double>, kClassifierCount> out;
    for (std::size_t c = 0; c < kClassifierCount; ++c) {
        out[c].resize(labels.size());
        for (std::size_t label = 0; label < labels.size(); ++label) {
            const auto p = classifier_probability(labels[label], static_cast<Classifier>(c), z);
            if (!p) {
                raise(ErrorCode::UntrainedLabel, std::string(classifier_name(static_cast<Classifier>(c))) +
                                                     " not trained for label " + std::to_string(label));
            }
            out[c][label] = *p;
        }
    }
    return out;
}

LabelPrediction EnsembleModel::predict_label(std::size_t label, std::span<const double> z) const {
    LabelPrediction out;
    const LabelModels& m = labels[label];
    std::vector<int> votes;
    double psum = 0.0;
    for (std::size_t c = 0; c < kClassifierCount; ++c) {
        out.probability[c] = classifier_probability(m, static_cast<Classifier>(c), z);
        out.vote[c] = classifier_vote(m, static_cast<Classifier>(c), z);
        if (out.vote[c]) {
            votes.push_back(*out.vote[c]);
            psum += *out.probability[c];
        }
    }
    if (votes.empty()) {
        return out;
    }
    out.trained = true;
    out.verdict = majority_vote(votes);
    out.mean_probability = psum / static_cast<double>(votes.size());
    // weights renormalized over the classifiers that exist
    std::vector<double> p;
    std::vector<double> a;
    double asum = 0.0;
    for (std::size_t c = 0; c < kClassifierCount; ++c) {
        if (out.probability[c]) {
            p.push_back(out.verdict ? *out.probability[c] : 1.0 - *out.probability[c]);
            a.push_back(alpha[c]);
            asum += alpha[c];
        }
    }
    if (asum <= 0.0) {
        std::fill(a.begin(), a.end(), 1.0 / static_cast<double>(a.size()));
    } else {
        for (double& v : a) {
            v /= asum;
        }
        // absorb rounding so the weights pass the exact-sum check
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < a.size(); ++i) {
            s += a[i];
        }
        a.back() = 1.0 - s;
    }
    out.trust = trust_ml(p, a);
    return out;
}

std::vector<LabelPrediction> EnsembleModel::predict(std::span<const double> raw) const {
    const auto z = scaler.apply(raw);
    std::vector<LabelPrediction> out;
    out.reserve(labels.size());
    for (std::size_t label = 0; label < labels.size(); ++label) {
        out.push_back(predict_label(label, z));
    }
    return out;
}

}  // namespace toxpipe::ensemble
