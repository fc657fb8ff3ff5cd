// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "support/nn_fixtures.hpp"
#include "support/oracles.hpp"
#include "toxpipe/depict/raster.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/nn/densenet.hpp"
#include "toxpipe/nn/ops.hpp"

using namespace toxpipe;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

Var<double> constant(Tensor<double> t) { return Var<double>::leaf(std::move(t), false); }

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor<double> t(Shape{2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK(nn::shape_string(t.shape()) == "(2, 3)");
    CHECK_THROWS_AS(Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3}), Error);
    CHECK_THROWS_AS(t.reshape(Shape{4}), Error);
    t.reshape(Shape{3, 2});
    CHECK(t.dim(0) == 3);
    CHECK(t.cast<float>()[5] == 1.5f);
}

TEST_CASE("conv2d: identity and box kernels") {
    Rng rng(1);
    const auto x = oracle::random_tensor(Shape{1, 1, 5, 5}, rng);
    const auto y = nn::conv2d(constant(x), constant(Tensor<double>(Shape{1, 1, 1, 1}, 1.0)), 1, 0);
    CHECK(y.value() == x);

    const auto box = nn::conv2d(constant(Tensor<double>(Shape{1, 1, 6, 6}, 2.0)),
                                constant(Tensor<double>(Shape{1, 1, 3, 3}, 1.0)), 1, 1);
    for (std::size_t i = 1; i < 5; ++i)
        for (std::size_t j = 1; j < 5; ++j) CHECK(box.value().at(0, 0, i, j) == 18.0);
    CHECK(box.value().at(0, 0, 0, 0) == 8.0);
}

TEST_CASE("conv2d: matches the loop oracle") {
    Rng rng(2);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(4), h = 3 + rng.below(10), w = 3 + rng.below(10);
        const std::size_t o = 1 + rng.below(4), k = 1 + 2 * rng.below(std::min<std::size_t>(3, (std::min(h, w) + 1) / 2));
        const std::size_t stride = 1 + rng.below(2), pad = rng.below(3);
        const auto x = oracle::random_tensor(Shape{n, c, h, w}, rng);
        const auto wt = oracle::random_tensor(Shape{o, c, k, k}, rng);
        const auto y = nn::conv2d(constant(x), constant(wt), stride, pad);
        CHECK(max_abs_diff(y.value(), oracle::conv_loop(x, wt, stride, pad)) <= 1e-12);
    }
    // single precision
    const auto x = oracle::random_tensor(Shape{2, 3, 9, 9}, rng);
    const auto wt = oracle::random_tensor(Shape{4, 3, 3, 3}, rng);
    const auto yf = nn::conv2d(Var<float>::leaf(x.cast<float>()), Var<float>::leaf(wt.cast<float>()), 2, 1);
    CHECK(max_abs_diff(yf.value().cast<double>(), oracle::conv_loop(x, wt, 2, 1)) <= 1e-5);
}

TEST_CASE("conv2d: errors") {
    const auto x = constant(Tensor<double>(Shape{1, 2, 4, 4}));
    CHECK(code_of([&] { nn::conv2d(x, constant(Tensor<double>(Shape{1, 3, 3, 3})), 1, 1); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { nn::conv2d(x, constant(Tensor<double>(Shape{1, 2, 2, 2})), 1, 1); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { nn::conv2d(constant(Tensor<double>(Shape{2, 4, 4})), constant(Tensor<double>(Shape{1, 2, 1, 1})), 1, 0); }) ==
          ErrorCode::ShapeMismatch);
}

TEST_CASE("batch norm: training statistics") {
    Rng rng(3);
    const auto x = oracle::random_tensor(Shape{4, 3, 5, 5}, rng, 3.0);
    nn::BatchNormState<double> state(3);
    const auto y = nn::batch_norm(constant(x), constant(Tensor<double>(Shape{3}, 1.0)),
                                  constant(Tensor<double>(Shape{3}, 0.0)), state, true);
    CHECK(max_abs_diff(y.value(), oracle::batch_norm_two_pass(x, 1e-5)) <= 1e-10);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t i = 0; i < 25; ++i) mean += y.value().at(n, c, i / 5, i % 5);
        mean /= 100.0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t i = 0; i < 25; ++i) var += std::pow(y.value().at(n, c, i / 5, i % 5) - mean, 2);
        var /= 100.0;
        CHECK(std::abs(mean) <= 1e-6);
        CHECK(std::abs(var - 1.0) <= 1e-4);
    }
    // running estimates moved by momentum 0.1 toward the batch statistics
    double batch_mean = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 25; ++i) batch_mean += x.at(n, 0, i / 5, i % 5);
    batch_mean /= 100.0;
    CHECK(state.running_mean[0] == doctest::Approx(0.1 * batch_mean).epsilon(1e-12));
}

TEST_CASE("batch norm: constant input gives beta; inference uses running stats") {
    nn::BatchNormState<double> state(2);
    Tensor<double> x(Shape{2, 2, 3, 3}, 4.0);
    Tensor<double> beta(Shape{2});
    beta[0] = 0.25;
    beta[1] = -1.0;
    const auto y = nn::batch_norm(constant(x), constant(Tensor<double>(Shape{2}, 2.0)), constant(beta), state, true);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(y.value()[i] == 0.25);
        CHECK(y.value()[9 + i] == -1.0);
    }
    nn::BatchNormState<double> fresh(2);
    const auto z = nn::batch_norm(constant(x), constant(Tensor<double>(Shape{2}, 1.0)),
                                  constant(Tensor<double>(Shape{2}, 0.0)), fresh, false);
    CHECK(z.value()[0] == doctest::Approx(4.0 / std::sqrt(1.0 + 1e-5)));
    CHECK(fresh.running_mean[0] == 0.0);
}

TEST_CASE("batch norm: errors") {
    nn::BatchNormState<double> state(1);
    const auto one = constant(Tensor<double>(Shape{1}, 1.0));
    CHECK(code_of([&] { nn::batch_norm(constant(Tensor<double>(Shape{1, 1, 1, 1})), one, one, state, true); }) ==
          ErrorCode::DegenerateBatch);
    CHECK(code_of([&] { nn::batch_norm(constant(Tensor<double>(Shape{2, 2, 2, 2})), one, one, state, true); }) ==
          ErrorCode::ShapeMismatch);
}

TEST_CASE("pooling") {
    Tensor<double> m(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    CHECK(nn::avg_pool2(constant(m)).value()[0] == 2.5);
    CHECK(nn::global_avg_pool(constant(m)).value()[0] == 2.5);
    CHECK(nn::global_avg_pool(constant(Tensor<double>(Shape{2, 3, 4, 5}, 0.7))).value()[5] == doctest::Approx(0.7));
    CHECK(code_of([&] { nn::avg_pool2(constant(Tensor<double>(Shape{1, 1, 3, 4}))); }) == ErrorCode::OddSpatialDim);

    Rng rng(4);
    const auto x = oracle::random_tensor(Shape{3, 5, 7, 6}, rng);
    const auto g = nn::global_avg_pool(constant(x));
    const auto ref = oracle::gap_flat(x);
    CHECK(g.shape() == Shape{3, 5});
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(std::abs(g.value()[i] - ref[i]) <= 1e-12);
    }

    Tensor<double> mp(Shape{1, 1, 3, 3}, std::vector<double>{1, 5, 2, 0, 3, 9, 4, 8, 7});
    const auto p = nn::max_pool(constant(mp), 3, 2, 1);
    CHECK(p.shape() == Shape{1, 1, 2, 2});
    CHECK(p.value()[0] == 5.0);
    CHECK(p.value()[3] == 9.0);
}

TEST_CASE("dense block: channel bookkeeping and manual composition") {
    Rng rng(5);
    auto empty = fixtures::dense_block(16, 0, 8, 32, rng);
    const auto x16 = constant(oracle::random_tensor(Shape{2, 16, 4, 4}, rng));
    CHECK(empty.forward(x16, true).value() == x16.value());

    auto four = fixtures::dense_block(16, 4, 8, 32, rng);
    CHECK(four.forward(x16, true).shape() == Shape{2, 48, 4, 4});

    auto block = fixtures::dense_block(3, 2, 2, 4, rng);
    auto copy = block;
    const auto x = constant(oracle::random_tensor(Shape{2, 3, 5, 5}, rng));
    const auto out = block.forward(x, true);
    const auto h1 = copy.layers[0].forward(x, true);
    const auto cat1 = nn::concat_channels(std::vector<Var<double>>{x, h1});
    const auto h2 = copy.layers[1].forward(cat1, true);
    const auto manual = nn::concat_channels(std::vector<Var<double>>{x, h1, h2});
    CHECK(max_abs_diff(out.value(), manual.value()) <= 1e-12);
}

TEST_CASE("transition: compression and averaging") {
    Rng rng(6);
    nn::NetworkConfig cfg;
    CHECK(cfg.compressed(48) == 24);
    CHECK(cfg.compressed(7) == 4);

    // theta = 1 with an identity 1x1 conv and a unit-variance-free constant map
    nn::Transition<double> t{fixtures::norm_layer(2, rng), {}};
    Tensor<double> eye(Shape{2, 2, 1, 1});
    eye[0] = 1.0;
    eye[3] = 1.0;
    t.conv = {constant(eye), 1, 0};
    t.norm.gamma = constant(Tensor<double>(Shape{2}, 1.0));
    t.norm.beta = constant(Tensor<double>(Shape{2}, 0.75));
    const auto y = t.forward(constant(Tensor<double>(Shape{2, 2, 4, 4}, 3.0)), true);
    CHECK(y.shape() == Shape{2, 2, 2, 2});
    for (double v : y.value().values()) {
        CHECK(v == doctest::Approx(0.75));
    }

    auto t48 = fixtures::transition(48, cfg.compressed(48), rng);
    CHECK(t48.forward(constant(oracle::random_tensor(Shape{2, 48, 4, 4}, rng)), true).shape() == Shape{2, 24, 2, 2});
    CHECK(code_of([&] { t48.forward(constant(oracle::random_tensor(Shape{2, 48, 5, 4}, rng)), true); }) ==
          ErrorCode::OddSpatialDim);
}

TEST_CASE("network: feature dimension from bookkeeping") {
    const auto cfg = nn::NetworkConfig::desk();
    std::size_t channels = cfg.stem_channels;
    for (std::size_t b = 0; b < cfg.block_layers.size(); ++b) {
        channels += cfg.block_layers[b] * cfg.growth_rate;
        if (b + 1 < cfg.block_layers.size()) {
            channels = static_cast<std::size_t>(std::ceil(cfg.compression * static_cast<double>(channels)));
        }
    }
    CHECK(cfg.feature_dim() == channels);
    CHECK(cfg.feature_dim() == 40);
    CHECK(nn::NetworkConfig::full_scale().feature_dim() == 1024);

    auto small = cfg;
    small.input_size = 32;
    const auto net = nn::DenseNet<float>::initialize(small, 1);
    const auto white = depict::StructImage(32, 32);
    const auto f = net.extract(white);
    CHECK(f.size() == cfg.feature_dim());
    CHECK(f == net.extract(white));
    CHECK_THROWS_AS(net.extract(depict::StructImage(64, 64)), Error);
}

TEST_CASE("backward: simple chains and errors") {
    Rng rng(7);
    const auto x = oracle::random_tensor(Shape{1, 1, 4, 4}, rng);
    auto k = Var<double>::leaf(Tensor<double>(Shape{1, 1, 1, 1}, 1.0), true);
    nn::backward(nn::sum(nn::conv2d(constant(x), k, 1, 0)));
    double total = 0.0;
    for (double v : x.values()) total += v;
    CHECK(k.grad()[0] == doctest::Approx(total).epsilon(1e-12));

    auto w = fixtures::param(Shape{2, 1, 3, 3}, rng);
    const auto out = nn::conv2d(constant(x), w, 1, 1);
    const Tensor<double> zeros(out.shape());
    nn::backward(out, &zeros);
    for (double g : w.grad().values()) CHECK(g == 0.0);

    CHECK(code_of([&] { nn::backward(nn::sum(constant(x))); }) == ErrorCode::NoRecordedGraph);
    {
        nn::NoGradGuard guard;
        const auto y = nn::sum(nn::conv2d(constant(x), w, 1, 1));
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(nn::grad_enabled());
}

TEST_CASE("finite differences per layer type") {
    Rng rng(8);
    const auto input = constant(fixtures::random_input(2, 3, 6, 6, rng));
    // project outputs onto a fixed random direction so every element matters
    auto probe = [&rng](const Shape& s) { return oracle::random_tensor(s, rng); };

    SUBCASE("conv") {
        auto w = fixtures::param(Shape{4, 3, 3, 3}, rng);
        const auto dir = probe(Shape{2, 4, 3, 3});
        const auto r = oracle::finite_difference([&] { return nn::weighted_sum(nn::conv2d(input, w, 2, 1), dir); }, {&w}, 30, rng);
        CHECK(r.worst <= 1e-4);
    }
    SUBCASE("batch norm") {
        auto bn = fixtures::norm_layer(3, rng);
        const auto dir = probe(Shape{2, 3, 6, 6});
        auto x = Var<double>::leaf(input.value(), true);
        const auto r = oracle::finite_difference([&] { return nn::weighted_sum(bn.forward(x, true), dir); },
                                                 {&bn.gamma, &bn.beta, &x}, 20, rng);
        CHECK(r.worst <= 1e-4);
    }
    SUBCASE("relu, pooling and head") {
        auto x = Var<double>::leaf(input.value(), true);
        const auto d1 = probe(Shape{2, 3, 6, 6});
        auto r = oracle::finite_difference([&] { return nn::weighted_sum(nn::relu(x), d1); }, {&x}, 30, rng);
        CHECK(r.worst <= 1e-4);
        const auto d2 = probe(Shape{2, 3, 3, 3});
        r = oracle::finite_difference([&] { return nn::weighted_sum(nn::max_pool(x, 3, 2, 1), d2); }, {&x}, 30, rng);
        CHECK(r.worst <= 1e-4);
        const auto d3 = probe(Shape{2, 3});
        r = oracle::finite_difference([&] { return nn::weighted_sum(nn::global_avg_pool(x), d3); }, {&x}, 30, rng);
        CHECK(r.worst <= 1e-4);
        auto w = fixtures::param(Shape{5, 3}, rng);
        auto b = fixtures::param(Shape{5}, rng);
        const auto feats = constant(oracle::random_tensor(Shape{2, 3}, rng));
        Tensor<double> targets(Shape{2, 5});
        Tensor<double> mask(Shape{2, 5}, 1.0);
        for (std::size_t i = 0; i < 10; ++i) {
            targets[i] = static_cast<double>(rng.below(2));
        }
        mask[3] = 0.0;
        r = oracle::finite_difference(
            [&] { return nn::masked_bce_with_logits(nn::linear(feats, w, b), targets, mask); }, {&w, &b}, 20, rng);
        CHECK(r.worst <= 1e-4);
    }
    SUBCASE("dense layer and transition") {
        auto layer = fixtures::dense_layer(3, 2, 4, rng);
        const auto d1 = probe(Shape{2, 2, 6, 6});
        auto r = oracle::finite_difference([&] { return nn::weighted_sum(layer.forward(input, true), d1); },
                                           fixtures::layer_params(layer), 20, rng);
        CHECK(r.worst <= 1e-4);
        auto t = fixtures::transition(3, 2, rng);
        const auto d2 = probe(Shape{2, 2, 3, 3});
        r = oracle::finite_difference([&] { return nn::weighted_sum(t.forward(input, true), d2); },
                                      {&t.norm.gamma, &t.norm.beta, &t.conv.kernels}, 20, rng);
        CHECK(r.worst <= 1e-4);
    }
}

TEST_CASE("masked loss: empty mask gives zero and no gradient") {
    auto logits = Var<double>::leaf(Tensor<double>(Shape{2, 3}, 0.3), true);
    const auto loss = nn::masked_bce_with_logits(logits, Tensor<double>(Shape{2, 3}), Tensor<double>(Shape{2, 3}));
    CHECK(loss.value()[0] == 0.0);
    CHECK_FALSE(loss.requires_grad());
    Tensor<double> mask(Shape{2, 3});
    mask[0] = 1.0;
    const auto one = nn::masked_bce_with_logits(logits, Tensor<double>(Shape{2, 3}), mask);
    CHECK(one.value()[0] == doctest::Approx(std::log1p(std::exp(0.3))));
}

namespace {

std::vector<depict::StructImage> tiny_images() {
    std::vector<depict::StructImage> images;
    for (const char* s : {"C", "c1ccccc1", "CCO", "ClCCl"}) {
        images.push_back(depict::render_smiles(s, 32));
    }
    return images;
}

nn::NetworkConfig training_config() {
    auto cfg = nn::NetworkConfig::desk();
    cfg.block_layers = {1, 1, 1, 1};
    cfg.input_size = 32;
    return cfg;
}

}  // namespace

TEST_CASE("train: masked labels leave parameters alone") {
    const auto images = tiny_images();
    std::vector<nn::TrainSample> samples;
    for (const auto& img : images) {
        samples.push_back({&img, std::vector<float>(12, 1.0f), std::vector<std::uint8_t>(12, 0)});
    }
    auto net = nn::DenseNet<float>::initialize(training_config(), 3);
    std::vector<Tensor<float>> before;
    for (auto* p : net.parameters()) before.push_back(p->value());
    nn::TrainHyper hyper;
    hyper.epochs = 1;
    hyper.batch_size = 2;
    nn::train(net, samples, hyper);
    const auto after = net.parameters();
    for (std::size_t i = 0; i < after.size(); ++i) {
        CHECK(after[i]->value() == before[i]);
    }
    CHECK_THROWS_AS(nn::train(net, std::span<const nn::TrainSample>{}, hyper), Error);
}

TEST_CASE("train: seeded runs agree and features separate molecules") {
    const auto images = tiny_images();
    std::vector<nn::TrainSample> samples;
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::vector<float> labels(12, 0.0f);
        labels[0] = static_cast<float>(i % 2);
        samples.push_back({&images[i], labels, std::vector<std::uint8_t>(12, 1)});
    }
    nn::TrainHyper hyper;
    hyper.epochs = 2;
    hyper.batch_size = 2;
    hyper.seed = 9;
    auto a = nn::DenseNet<float>::initialize(training_config(), 3);
    auto b = nn::DenseNet<float>::initialize(training_config(), 3);
    const auto ha = nn::train(a, samples, hyper);
    const auto hb = nn::train(b, samples, hyper);
    CHECK(a.checksum() == b.checksum());
    CHECK(ha.loss_history == hb.loss_history);
    CHECK(ha.loss_history.size() == 2);
    CHECK(a.extract(images[0]) != a.extract(images[1]));
}

TEST_CASE("network: detached copy and precision cast") {
    auto net = nn::DenseNet<double>::initialize(fixtures::tiny_config(), 4);
    const auto copy = net.detached();
    CHECK(copy.checksum() == net.checksum());
    for (auto* p : const_cast<nn::DenseNet<double>&>(copy).parameters()) {
        CHECK_FALSE(p->requires_grad());
    }
    const auto f = net.cast<float>();
    CHECK(f.feature_dim() == net.feature_dim());
    net.drop_head();
    CHECK_FALSE(net.has_head());
}
