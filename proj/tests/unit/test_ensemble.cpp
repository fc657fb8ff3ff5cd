// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "support/oracles.hpp"
#include "toxpipe/ensemble/classifiers.hpp"
#include "toxpipe/ensemble/ensemble.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/random.hpp"

using namespace toxpipe;
using namespace toxpipe::ensemble;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

// Two Gaussian blobs centred at -shift and +shift on every feature.
void blobs(std::size_t n, std::size_t d, double shift, std::uint64_t seed, FeatureMatrix& x, std::vector<int>& y) {
    Rng rng(seed);
    x = FeatureMatrix(n, d);
    y.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        for (std::size_t j = 0; j < d; ++j) {
            x(i, j) = rng.normal() + (y[i] ? shift : -shift);
        }
    }
}

}  // namespace

TEST_CASE("majority vote") {
    for (int m = 0; m < 8; ++m) {
        const std::vector<int> v{m & 1, (m >> 1) & 1, (m >> 2) & 1};
        CHECK(majority_vote(v) == oracle::vote_of_three(v[0], v[1], v[2]));
    }
    CHECK(majority_vote(std::vector<int>{1}) == 1);
    CHECK(majority_vote(std::vector<int>{0, 1}) == kTieVote);
    CHECK(majority_vote(std::vector<int>{1, 0}, 1) == 1);
    CHECK(majority_vote(std::vector<int>{1, 1, 0, 0}) == kTieVote);
    CHECK(code_of([] { majority_vote(std::vector<int>{}); }) == ErrorCode::NoVoters);
}

TEST_CASE("trust scores") {
    const std::vector<std::vector<double>> same{{0.2, 0.4}, {0.2, 0.4}, {0.2, 0.4}};
    CHECK(trust_densenet(same) == 1.0);
    const std::vector<std::vector<double>> spread{{0.0, 0.0}, {1.0, 1.0}};
    CHECK(trust_densenet(spread) == doctest::Approx(0.5));
    const std::vector<std::vector<double>> wild{{-5.0}, {5.0}};
    CHECK(trust_densenet(wild) == 0.0);
    CHECK(code_of([&] { trust_densenet(std::span(same.data(), 1)); }) == ErrorCode::TooFewRuns);
    const std::vector<std::vector<double>> ragged{{1.0}, {1.0, 2.0}};
    CHECK(code_of([&] { trust_densenet(ragged); }) == ErrorCode::DimMismatch);

    const std::vector<double> p{0.9, 0.6, 0.3};
    const std::vector<double> third{1.0 / 3, 1.0 / 3, 1.0 / 3};
    CHECK(trust_ml(p, third) == doctest::Approx(0.6));
    CHECK(trust_ml(p, std::vector<double>{1.0, 0.0, 0.0}) == 0.9);
    CHECK(code_of([&] { trust_ml(p, std::vector<double>{0.5, 0.5, 0.5}); }) == ErrorCode::BadWeights);
    CHECK(code_of([&] { trust_ml(p, std::vector<double>{1.5, -0.5, 0.0}); }) == ErrorCode::BadWeights);
    CHECK(code_of([&] { trust_ml(p, std::vector<double>{0.5, 0.5}); }) == ErrorCode::BadWeights);

    CHECK(global_confidence(0.8, 0.4) == doctest::Approx(0.6));
    CHECK(global_confidence(0.8, 0.4, 1.0) == 0.8);
    CHECK(global_confidence(0.8, 0.4, 0.0) == 0.4);
}

TEST_CASE("two-class requirement") {
    FeatureMatrix x(4, 1);
    CHECK(code_of([&] { fit_linear_svm(x, std::vector<int>{0, 0, 0, 1}); }) == ErrorCode::SingleClassLabel);
    CHECK(code_of([&] { fit_random_forest(x, std::vector<int>{1, 1, 1, 1}); }) == ErrorCode::SingleClassLabel);
    CHECK(code_of([&] { fit_gbm(x, std::vector<int>{0, 1, 1, 1}); }) == ErrorCode::SingleClassLabel);
    CHECK_NOTHROW(require_two_classes(std::vector<int>{0, 1, 0, 1}));
}

TEST_CASE("gini tree: root split is optimal") {
    Rng rng(11);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 6 + rng.below(20);
        const std::size_t d = 1 + rng.below(4);
        FeatureMatrix x(n, d);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(i % 2);
            for (std::size_t j = 0; j < d; ++j) x(i, j) = static_cast<double>(rng.below(6));
        }
        rng.shuffle(y.begin(), y.end());
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        const auto tree = fit_gini_tree(x, y, all, 1, d, 3);
        const double best = oracle::best_gini_split(x, y);
        if (tree.nodes.front().is_leaf()) {
            // no feature varies
            CHECK(std::isinf(best));
            continue;
        }
        const auto& root = tree.nodes.front();
        CHECK(oracle::split_impurity(x, y, static_cast<std::size_t>(root.feature), root.threshold) ==
              doctest::Approx(best).epsilon(1e-12));
        CHECK(tree.depth() == 1);
    }
}

TEST_CASE("gini tree: depth limit and purity") {
    FeatureMatrix x;
    std::vector<int> y;
    blobs(60, 3, 0.3, 5, x, y);
    std::vector<std::size_t> all(60);
    std::iota(all.begin(), all.end(), 0);
    const auto deep = fit_gini_tree(x, y, all, 0, 3, 1);
    for (std::size_t i = 0; i < 60; ++i) CHECK(deep.predict(x.row(i)) == y[i]);
    CHECK(fit_gini_tree(x, y, all, 2, 3, 1).depth() <= 2);
}

TEST_CASE("random forest: probabilities, votes and determinism") {
    FeatureMatrix x;
    std::vector<int> y;
    blobs(80, 4, 1.5, 6, x, y);
    ForestParams params;
    params.n_trees = 25;
    params.seed = 4;
    const auto a = fit_random_forest(x, y, params);
    const auto b = fit_random_forest(x, y, params);
    CHECK(a == b);
    CHECK(a.trees.size() == 25);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 80; ++i) {
        const double p = a.probability(x.row(i));
        CHECK(std::abs(p * 25 - std::round(p * 25)) < 1e-9);
        CHECK(a.vote(x.row(i)) == (p > 0.5 ? 1 : 0));
        correct += a.vote(x.row(i)) == y[i];
    }
    CHECK(correct >= 76);
    params.seed = 5;
    CHECK_FALSE(fit_random_forest(x, y, params) == a);
}

TEST_CASE("gradient boosting: one stump by hand") {
    FeatureMatrix x(4, 1);
    x(2, 0) = 1.0;
    x(3, 0) = 1.0;
    const std::vector<int> y{0, 0, 1, 1};
    GbmParams params;
    params.n_rounds = 1;
    params.max_depth = 1;
    params.learning_rate = 0.1;
    params.lambda = 1.0;
    params.base_score = 0.0;
    GbmTrace trace;
    const auto model = fit_gbm(x, y, params, &trace);
    // left leaf: g = 0.5 twice, h = 0.25 twice, weight -1 / (0.5 + 1)
    CHECK(model.margin(x.row(0)) == doctest::Approx(-0.1 * 2.0 / 3.0).epsilon(1e-12));
    CHECK(model.margin(x.row(3)) == doctest::Approx(0.1 * 2.0 / 3.0).epsilon(1e-12));
    CHECK(model.probability(x.row(3)) == doctest::Approx(1.0 / (1.0 + std::exp(-0.2 / 3.0))));
    CHECK(model.vote(x.row(3)) == 1);
    CHECK(model.vote(x.row(0)) == 0);
    REQUIRE(trace.log_loss.size() == 2);
    CHECK(trace.log_loss[0] == doctest::Approx(std::log(2.0)));
    CHECK(trace.log_loss[1] < trace.log_loss[0]);

    // default base score is the logit of the positive rate
    FeatureMatrix x3(5, 1);
    const auto prior = fit_gbm(x3, std::vector<int>{1, 1, 1, 0, 0}, GbmParams{.n_rounds = 0});
    CHECK(prior.base_score == doctest::Approx(std::log(1.5)));
    CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("gradient boosting: loss falls on separable data") {
    FeatureMatrix x;
    std::vector<int> y;
    blobs(60, 2, 1.0, 8, x, y);
    GbmTrace trace;
    const auto model = fit_gbm(x, y, GbmParams{.n_rounds = 30, .max_depth = 3}, &trace);
    CHECK(trace.log_loss.size() == 31);
    for (std::size_t r = 1; r < trace.log_loss.size(); ++r) CHECK(trace.log_loss[r] <= trace.log_loss[r - 1] + 1e-12);
    CHECK(model.trees.size() == 30);
    for (const auto& t : model.trees) CHECK(t.depth() <= 3);
}

TEST_CASE("linear svm and platt scaling") {
    FeatureMatrix x;
    std::vector<int> y;
    blobs(100, 3, 2.0, 9, x, y);
    SvmParams params;
    params.seed = 2;
    const auto svm = fit_linear_svm(x, y, params);
    CHECK(svm == fit_linear_svm(x, y, params));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(svm.vote(x.row(i)) == (svm.decision(x.row(i)) >= 0.0 ? 1 : 0));
        correct += svm.vote(x.row(i)) == y[i];
    }
    CHECK(correct >= 97);
    // calibrated probability rises with the decision value
    CHECK(svm.platt.a < 0.0);
    CHECK(svm.platt(2.0) > svm.platt(0.0));
    CHECK(svm.platt(0.0) > svm.platt(-2.0));

    const PlattScale p{-2.0, 0.5};
    CHECK(p(1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.5))));
    const std::vector<double> dec{-2, -1, -0.5, 0.5, 1, 2};
    const std::vector<int> lab{0, 0, 0, 1, 1, 1};
    const auto fit = fit_platt(dec, lab);
    CHECK(fit(2.0) > 0.5);
    CHECK(fit(-2.0) < 0.5);
    // symmetric data gives a symmetric map
    CHECK(fit.b == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("standardizer") {
    FeatureMatrix x(3, 2);
    x(0, 0) = 1;
    x(1, 0) = 2;
    x(2, 0) = 3;
    for (std::size_t i = 0; i < 3; ++i) x(i, 1) = 7;
    const auto s = Standardizer::fit(x);
    CHECK(s.mean[0] == 2.0);
    CHECK(s.scale[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(s.scale[1] == 1.0);
    const auto z = s.apply(x);
    CHECK(z(0, 1) == 0.0);
    CHECK(z(2, 0) == doctest::Approx(std::sqrt(1.5)));
}

TEST_CASE("ensemble model: per-label fits with gaps") {
    FeatureMatrix x;
    std::vector<int> y0;
    blobs(60, 3, 1.5, 10, x, y0);
    LabelMatrix y(60, 3);
    for (std::size_t i = 0; i < 60; ++i) {
        y(i, 0) = static_cast<std::int8_t>(y0[i]);
        y(i, 1) = i < 40 ? static_cast<std::int8_t>(1 - y0[i]) : kMissing;
        y(i, 2) = i == 0 ? 1 : kMissing;  // a single positive: untrainable
    }
    EnsembleParams params;
    params.forest.n_trees = 15;
    params.gbm.n_rounds = 15;
    params.seed = 3;
    const auto model = EnsembleModel::fit(x, y, params);
    CHECK(model.label_count() == 3);
    CHECK(model.feature_dim() == 3);
    CHECK(model.labels[0].any());
    CHECK(model.labels[1].any());
    CHECK_FALSE(model.labels[2].any());
    CHECK_FALSE(model.labels[2].skip_reason.empty());
    CHECK(model == EnsembleModel::fit(x, y, params));

    const auto preds = model.predict(x.row(1));
    CHECK(preds[0].trained);
    CHECK(preds[0].verdict == 1);
    CHECK(preds[1].verdict == 0);
    CHECK_FALSE(preds[2].trained);
    for (std::size_t a = 0; a < 2; ++a) {
        int v[3];
        double mean = 0.0;
        double agree = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            REQUIRE(preds[a].probability[c].has_value());
            v[c] = *preds[a].vote[c];
            mean += *preds[a].probability[c] / 3.0;
        }
        const int verdict = oracle::vote_of_three(v[0], v[1], v[2]);
        CHECK(preds[a].verdict == verdict);
        for (std::size_t c = 0; c < 3; ++c) {
            const double p = *preds[a].probability[c];
            agree += (verdict ? p : 1.0 - p) / 3.0;
        }
        CHECK(preds[a].mean_probability == doctest::Approx(mean).epsilon(1e-12));
        CHECK(preds[a].trust == doctest::Approx(agree).epsilon(1e-12));
    }
    CHECK(model.probability(Classifier::Forest, 0, x.row(1)) == *preds[0].probability[1]);
    CHECK(code_of([&] { model.predict_proba(x.row(1)); }) == ErrorCode::UntrainedLabel);
    CHECK(code_of([&] { model.probability(Classifier::Svm, 2, x.row(1)); }) == ErrorCode::UntrainedLabel);

    params.alpha = {0.5, 0.5, 0.5};
    CHECK(code_of([&] { EnsembleModel::fit(x, y, params); }) == ErrorCode::BadWeights);
    CHECK(code_of([&] { EnsembleModel::fit(x, LabelMatrix(5, 3), EnsembleParams{}); }) == ErrorCode::DimMismatch);
}

TEST_CASE("auc oracle sanity") {
    CHECK(oracle::pairwise_auc({0.1, 0.9}, {0, 1}) == 1.0);
    CHECK(oracle::pairwise_auc({0.5, 0.5}, {0, 1}) == 0.5);
}
