// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/ensemble/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "toxpipe/error.hpp"
#include "toxpipe/random.hpp"

namespace toxpipe::ensemble {

double sigmoid(double z) noexcept {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void require_two_classes(std::span<const int> y) {
    std::size_t pos = 0;
    std::size_t neg = 0;
    for (int v : y) {
        (v ? pos : neg) += 1;
    }
    if (pos < 2 || neg < 2) {
        raise(ErrorCode::SingleClassLabel, std::to_string(pos) + " positive and " + std::to_string(neg) +
                                               " negative samples; need at least 2 of each");
    }
}

namespace {

void check_rows(const FeatureMatrix& x, std::span<const int> y) {
    if (x.rows != y.size()) {
        raise(ErrorCode::DimMismatch, std::to_string(x.rows) + " rows but " + std::to_string(y.size()) + " labels");
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// SVM

double PlattScale::operator()(double decision) const {
    // 1 / (1 + exp(a f + b)) == sigmoid(-(a f + b))
    return sigmoid(-(a * decision + b));
}

PlattScale fit_platt(std::span<const double> decisions, std::span<const int> y) {
    const std::size_t n = decisions.size();
    double prior1 = 0;
    for (int v : y) {
        prior1 += v ? 1 : 0;
    }
    const double prior0 = static_cast<double>(n) - prior1;
    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = y[i] ? hi : lo;
    }
    auto objective = [&](double a, double b) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = decisions[i] * a + b;
            f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
        }
        return f;
    };
    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    double fval = objective(a, b);
    constexpr double kSigma = 1e-12;
    for (int iter = 0; iter < 100; ++iter) {
        double h11 = kSigma;
        double h22 = kSigma;
        double h21 = 0.0;
        double g1 = 0.0;
        double g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = decisions[i] * a + b;
            double p;
            double q;
            if (z >= 0) {
                const double e = std::exp(-z);
                p = e / (1.0 + e);
                q = 1.0 / (1.0 + e);
            } else {
                const double e = std::exp(z);
                p = 1.0 / (1.0 + e);
                q = e / (1.0 + e);
            }
            const double d2 = p * q;
            h11 += decisions[i] * decisions[i] * d2;
            h22 += d2;
            h21 += decisions[i] * d2;
            const double d1 = t[i] - p;
            g1 += decisions[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) {
            break;
        }
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        bool moved = false;
        while (step >= 1e-10) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nf = objective(na, nb);
            if (nf < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if (!moved) {
            break;
        }
    }
    return {a, b};
}

double LinearSvm::decision(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        raise(ErrorCode::DimMismatch, "svm expects " + std::to_string(weights.size()) + " features");
    }
    return dot(weights, x) + bias;
}

LinearSvm fit_linear_svm(const FeatureMatrix& x, std::span<const int> y, const SvmParams& params) {
    check_rows(x, y);
    require_two_classes(y);
    Rng rng(params.seed);

    // stratified calibration hold-out
    std::vector<std::size_t> fit_rows;
    std::vector<std::size_t> calib_rows;
    for (int cls : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == cls) {
                members.push_back(i);
            }
        }
        rng.shuffle(members.begin(), members.end());
        std::size_t held = 0;
        if (params.calibration_fraction > 0.0) {
            held = static_cast<std::size_t>(std::lround(params.calibration_fraction * static_cast<double>(members.size())));
            held = std::clamp<std::size_t>(held, 1, members.size() - 1);
        }
        calib_rows.insert(calib_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(held));
        fit_rows.insert(fit_rows.end(), members.begin() + static_cast<std::ptrdiff_t>(held), members.end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(calib_rows.begin(), calib_rows.end());

    double pos = 0;
    for (std::size_t i : fit_rows) {
        pos += y[i] ? 1 : 0;
    }
    const double nfit = static_cast<double>(fit_rows.size());
    const double w_pos = params.balanced ? nfit / (2.0 * pos) : 1.0;
    const double w_neg = params.balanced ? nfit / (2.0 * (nfit - pos)) : 1.0;

    const std::size_t d = x.cols;
    std::vector<double> w(d + 1, 0.0);  // last entry multiplies a constant 1
    std::vector<double> avg(d + 1, 0.0);
    const double lambda = params.lambda;
    std::size_t t = 0;
    std::vector<std::size_t> order = fit_rows;
    const std::size_t epochs = std::max<std::size_t>(1, params.epochs);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        const bool last = epoch + 1 == epochs;
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const auto row = x.row(i);
            const double label = y[i] ? 1.0 : -1.0;
            const double margin = label * (dot(std::span<const double>(w.data(), d), row) + w[d]);
            const double shrink = 1.0 - eta * lambda;
            for (double& v : w) {
                v *= shrink;
            }
            if (margin < 1.0) {
                const double step = eta * label * (y[i] ? w_pos : w_neg);
                for (std::size_t j = 0; j < d; ++j) {
                    w[j] += step * row[j];
                }
                w[d] += step;
            }
            if (last) {
                for (std::size_t j = 0; j <= d; ++j) {
                    avg[j] += w[j];
                }
            }
        }
    }
    LinearSvm model;
    model.weights.assign(avg.begin(), avg.begin() + static_cast<std::ptrdiff_t>(d));
    for (double& v : model.weights) {
        v /= static_cast<double>(order.size());
    }
    model.bias = avg[d] / static_cast<double>(order.size());

    const auto& cal = calib_rows.empty() ? fit_rows : calib_rows;
    std::vector<double> decisions;
    std::vector<int> labels;
    for (std::size_t i : cal) {
        decisions.push_back(model.decision(x.row(i)));
        labels.push_back(y[i]);
    }
    model.platt = fit_platt(decisions, labels);
    return model;
}

// ---------------------------------------------------------------------------
// Random forest

double RandomForest::probability(std::span<const double> x) const {
    if (trees.empty()) {
        return 0.0;
    }
    double votes = 0.0;
    for (const auto& tree : trees) {
        votes += tree.predict(x);
    }
    return votes / static_cast<double>(trees.size());
}

DecisionTree fit_gini_tree(const FeatureMatrix& x, std::span<const int> y, std::span<const std::size_t> samples,
                           std::size_t max_depth, std::size_t max_features, std::uint64_t seed) {
    Rng rng(seed);
    DecisionTree tree;
    tree.max_depth = max_depth;
    const std::size_t d = x.cols;
    max_features = std::clamp<std::size_t>(max_features, 1, std::max<std::size_t>(d, 1));
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), std::size_t{0});

    struct Pending {
        std::size_t node;
        std::vector<std::size_t> rows;
        std::size_t depth;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack;
    stack.push_back({0, std::vector<std::size_t>(samples.begin(), samples.end()), 0});
    std::vector<std::pair<double, int>> column;

    while (!stack.empty()) {
        Pending job = std::move(stack.back());
        stack.pop_back();
        const std::size_t n = job.rows.size();
        std::size_t pos = 0;
        for (std::size_t r : job.rows) {
            pos += y[r] ? 1 : 0;
        }
        auto make_leaf = [&] {
            tree.nodes[job.node].feature = -1;
            tree.nodes[job.node].value = 2 * pos > n ? 1.0 : 0.0;
        };
        if (pos == 0 || pos == n || n < 2 || (max_depth > 0 && job.depth >= max_depth)) {
            make_leaf();
            continue;
        }

        // candidate features in a fresh random order; the first max_features are the sample,
        // later ones are consulted only while nothing splittable has been found
        for (std::size_t k = 0; k + 1 < d; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.below(d - k));
            std::swap(features[k], features[j]);
        }
        double best_impurity = std::numeric_limits<double>::infinity();
        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            if (k >= max_features && best_feature >= 0) {
                break;
            }
            const std::size_t f = features[k];
            column.clear();
            for (std::size_t r : job.rows) {
                column.emplace_back(x(r, f), y[r]);
            }
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (column.front().first == column.back().first) {
                continue;
            }
            double left_pos = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_pos += column[i].second;
                if (column[i].first == column[i + 1].first) {
                    continue;
                }
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(n) - nl;
                const double right_pos = static_cast<double>(pos) - left_pos;
                const double pl = left_pos / nl;
                const double pr = right_pos / nr;
                const double impurity = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
                if (impurity < best_impurity) {
                    best_impurity = impurity;
                    best_feature = static_cast<std::int32_t>(f);
                    double mid = 0.5 * (column[i].first + column[i + 1].first);
                    if (mid >= column[i + 1].first) {
                        mid = column[i].first;
                    }
                    best_threshold = mid;
                }
            }
        }
        if (best_feature < 0) {
            make_leaf();
            continue;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t r : job.rows) {
            (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
        }
        const auto li = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& node = tree.nodes[job.node];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = li;
        node.right = li + 1;
        stack.push_back({static_cast<std::size_t>(li + 1), std::move(right), job.depth + 1});
        stack.push_back({static_cast<std::size_t>(li), std::move(left), job.depth + 1});
    }
    return tree;
}

RandomForest fit_random_forest(const FeatureMatrix& x, std::span<const int> y, const ForestParams& params) {
    check_rows(x, y);
    require_two_classes(y);
    const std::size_t n = x.rows;
    const std::size_t mtry =
        params.max_features.value_or(std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols)))));
    RandomForest forest;
    forest.trees.reserve(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        const std::uint64_t tree_seed = splitmix64(params.seed ^ splitmix64(t + 1));
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            Rng rng(tree_seed ^ 0x5bd1e995ULL);
            for (auto& r : rows) {
                r = static_cast<std::size_t>(rng.below(n));
            }
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        forest.trees.push_back(fit_gini_tree(x, y, rows, params.max_depth, mtry, tree_seed));
    }
    return forest;
}

// ---------------------------------------------------------------------------
// Gradient boosting

double GradientBoosting::margin(std::span<const double> x) const {
    double m = base_score;
    for (const auto& tree : trees) {
        m += learning_rate * tree.predict(x);
    }
    return m;
}

double GradientBoosting::probability(std::span<const double> x) const { return sigmoid(margin(x)); }

namespace {

/// Level-wise exact greedy regression tree on (gradient, hessian) pairs using presorted columns.
DecisionTree fit_newton_tree(const FeatureMatrix& x, const std::vector<std::vector<std::size_t>>& sorted,
                             const std::vector<double>& g, const std::vector<double>& h, std::size_t max_depth,
                             double lambda) {
    const std::size_t n = x.rows;
    DecisionTree tree;
    tree.max_depth = max_depth;
    tree.nodes.emplace_back();
    std::vector<std::int32_t> node_of(n, 0);
    std::vector<std::size_t> frontier{0};
    std::vector<double> node_g(1, 0.0);
    std::vector<double> node_h(1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        node_g[0] += g[i];
        node_h[0] += h[i];
    }
    auto score = [lambda](double gs, double hs) { return gs * gs / (hs + lambda); };

    for (std::size_t depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
        const std::size_t count = tree.nodes.size();
        std::vector<double> best_gain(count, 0.0);
        std::vector<std::int32_t> best_feature(count, -1);
        std::vector<double> best_threshold(count, 0.0);
        std::vector<double> gl(count);
        std::vector<double> hl(count);
        std::vector<double> last(count);
        std::vector<char> seen(count);
        std::vector<char> active(count, 0);
        for (std::size_t k : frontier) {
            active[k] = 1;
        }
        for (std::size_t f = 0; f < x.cols; ++f) {
            std::fill(gl.begin(), gl.end(), 0.0);
            std::fill(hl.begin(), hl.end(), 0.0);
            std::fill(seen.begin(), seen.end(), 0);
            for (std::size_t i : sorted[f]) {
                const auto k = static_cast<std::size_t>(node_of[i]);
                if (!active[k]) {
                    continue;
                }
                const double v = x(i, f);
                if (seen[k] && v != last[k]) {
                    const double gain = score(gl[k], hl[k]) + score(node_g[k] - gl[k], node_h[k] - hl[k]) -
                                        score(node_g[k], node_h[k]);
                    if (gain > best_gain[k]) {
                        best_gain[k] = gain;
                        best_feature[k] = static_cast<std::int32_t>(f);
                        double mid = 0.5 * (last[k] + v);
                        if (mid >= v) {
                            mid = last[k];
                        }
                        best_threshold[k] = mid;
                    }
                }
                gl[k] += g[i];
                hl[k] += h[i];
                last[k] = v;
                seen[k] = 1;
            }
        }
        std::vector<std::size_t> next;
        for (std::size_t k : frontier) {
            if (best_feature[k] < 0) {
                continue;
            }
            const auto li = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            node_g.resize(tree.nodes.size(), 0.0);
            node_h.resize(tree.nodes.size(), 0.0);
            tree.nodes[k].feature = best_feature[k];
            tree.nodes[k].threshold = best_threshold[k];
            tree.nodes[k].left = li;
            tree.nodes[k].right = li + 1;
            next.push_back(static_cast<std::size_t>(li));
            next.push_back(static_cast<std::size_t>(li + 1));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const TreeNode& parent = tree.nodes[static_cast<std::size_t>(node_of[i])];
            if (parent.is_leaf()) {
                continue;
            }
            node_of[i] = x(i, static_cast<std::size_t>(parent.feature)) <= parent.threshold ? parent.left : parent.right;
            node_g[static_cast<std::size_t>(node_of[i])] += g[i];
            node_h[static_cast<std::size_t>(node_of[i])] += h[i];
        }
        frontier = std::move(next);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        if (tree.nodes[k].is_leaf()) {
            tree.nodes[k].value = -node_g[k] / (node_h[k] + lambda);
        }
    }
    return tree;
}

double log_loss(const std::vector<double>& margins, std::span<const int> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
        const double z = margins[i];
        // -[y log p + (1 - y) log(1 - p)] with p = sigmoid(z)
        s += std::max(z, 0.0) - z * y[i] + std::log1p(std::exp(-std::abs(z)));
    }
    return s / static_cast<double>(margins.size());
}

}  // namespace

GradientBoosting fit_gbm(const FeatureMatrix& x, std::span<const int> y, const GbmParams& params, GbmTrace* trace) {
    check_rows(x, y);
    require_two_classes(y);
    const std::size_t n = x.rows;
    GradientBoosting model;
    model.learning_rate = params.learning_rate;
    if (params.base_score) {
        model.base_score = *params.base_score;
    } else {
        const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
        model.base_score = std::log(pos / (static_cast<double>(n) - pos));
    }
    std::vector<std::vector<std::size_t>> sorted(x.cols, std::vector<std::size_t>(n));
    for (std::size_t f = 0; f < x.cols; ++f) {
        std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }
    std::vector<double> margins(n, model.base_score);
    std::vector<double> g(n);
    std::vector<double> h(n);
    if (trace) {
        trace->log_loss = {log_loss(margins, y)};
    }
    for (std::size_t round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margins[i]);
            g[i] = p - y[i];
            h[i] = std::max(p * (1.0 - p), 1e-16);
        }
        model.trees.push_back(fit_newton_tree(x, sorted, g, h, params.max_depth, params.lambda));
        for (std::size_t i = 0; i < n; ++i) {
            margins[i] += params.learning_rate * model.trees.back().predict(x.row(i));
        }
        if (trace) {
            trace->log_loss.push_back(log_loss(margins, y));
        }
    }
    return model;
}

}  // namespace toxpipe::ensemble
