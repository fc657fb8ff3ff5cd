// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support/nn_fixtures.hpp"
#include "toxpipe/depict/raster.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/explain/gradcam.hpp"

using namespace toxpipe;

namespace {

nn::DenseNet<double> tiny_net(std::uint64_t seed) {
    auto cfg = fixtures::tiny_config();
    cfg.input_size = 32;
    return nn::DenseNet<double>::initialize(cfg, seed);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("gradcam: zero head gives an all-zero map") {
    auto net = tiny_net(1);
    net.head.weight = nn::Var<double>::leaf(nn::Tensor<double>(net.head.weight.shape()), false);
    const auto img = depict::render_smiles("c1ccccc1O", 32);
    const auto map = explain::gradcam(net, img, 1);
    CHECK(map.source_layer == explain::kGradCamLayer);
    for (double v : map.values) CHECK(v == 0.0);
}

TEST_CASE("gradcam: normalization, weights and map against the trace") {
    for (std::uint64_t seed = 2; seed < 8; ++seed) {
        auto net = tiny_net(seed);
        const auto img = depict::render_smiles("Clc1ccc(Br)cc1", 32);
        for (std::size_t label = 0; label < 3; ++label) {
            explain::GradCamTrace trace;
            const auto map = explain::gradcam(net, img, label, &trace);
            const std::size_t channels = trace.activations.dim(0);
            const std::size_t hw = trace.activations.dim(1) * trace.activations.dim(2);
            REQUIRE(map.values.size() == hw);

            // the head is affine on pooled maps, so d logit / d A[c, i] = W[label, c] / hw
            const auto& w = net.head.weight.value();
            std::vector<double> weights(channels);
            for (std::size_t c = 0; c < channels; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < hw; ++i) {
                    CHECK(std::abs(trace.gradients[c * hw + i] - w[label * channels + c] / hw) <= 1e-12);
                    s += trace.gradients[c * hw + i];
                }
                weights[c] = s / static_cast<double>(hw);
                CHECK(std::abs(weights[c] - trace.channel_weights[c]) <= 1e-10);
            }
            std::vector<double> raw(hw);
            for (std::size_t i = 0; i < hw; ++i) {
                double v = 0.0;
                for (std::size_t c = 0; c < channels; ++c) v += weights[c] * trace.activations[c * hw + i];
                raw[i] = std::max(v, 0.0);
            }
            const double peak = *std::max_element(raw.begin(), raw.end());
            if (peak > 0.0) {
                CHECK(map.max_value() == 1.0);
                for (std::size_t i = 0; i < hw; ++i) CHECK(std::abs(map.values[i] - raw[i] / peak) <= 1e-10);
            } else {
                CHECK(map.max_value() == 0.0);
            }
            for (double v : map.values) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_CASE("gradcam: the network is left untouched and calls repeat") {
    auto net = tiny_net(9);
    const auto before = net.checksum();
    const auto img = depict::render_smiles("CCN", 32);
    const auto a = explain::gradcam(net, img, 0);
    const auto b = explain::gradcam(net, img, 0);
    CHECK(a.values == b.values);
    CHECK(net.checksum() == before);
    CHECK(explain::gradcam(net.cast<float>(), img, 0).values.size() == a.values.size());
}

TEST_CASE("gradcam: errors") {
    auto net = tiny_net(3);
    const auto img = depict::render_smiles("C", 32);
    CHECK(code_of([&] { explain::gradcam(net, img, 3); }) == ErrorCode::InvalidLabel);
    CHECK(code_of([&] { explain::gradcam(net, depict::render_smiles("C", 64), 0); }) == ErrorCode::ShapeMismatch);
    net.drop_head();
    CHECK(code_of([&] { explain::gradcam(net, img, 0); }) == ErrorCode::UntrainedHead);
}

TEST_CASE("overlay: alpha endpoints and a hand case") {
    const auto img = depict::render_smiles("CCO", 32);
    explain::Heatmap zero{32, 32, std::vector<double>(32 * 32, 0.0), "x"};
    const auto same = explain::overlay(zero, img, 0.0);
    CHECK(same.pixels == img.pixels);
    const auto blue = explain::overlay(zero, img, 1.0);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) CHECK(blue.at(x, y) == depict::Rgb{0, 0, 255});

    depict::StructImage tiny(2, 2);
    tiny.put(0, 0, {0, 0, 0});
    tiny.put(1, 0, {200, 100, 50});
    explain::Heatmap h{2, 2, {1.0, 0.0, 0.5, 1.0}, "x"};
    const auto out = explain::overlay(h, tiny, 0.5);
    CHECK(out.at(0, 0) == depict::Rgb{128, 0, 0});    // 0.5 * red, .5 rounds away from zero
    CHECK(out.at(1, 0) == depict::Rgb{100, 50, 153});  // (200, 100, 50) / 2 + blue / 2
    CHECK(out.at(0, 1) == depict::Rgb{192, 128, 192}); // white / 2 + heat (128, 0, 128) / 2
    CHECK(out.at(1, 1) == depict::Rgb{255, 128, 128});

    CHECK(code_of([&] { explain::overlay(h, img, 0.5); }) == ErrorCode::DimMismatch);
}

TEST_CASE("upsample: constants, corners and range") {
    explain::Heatmap c{3, 3, std::vector<double>(9, 0.4), "x"};
    for (double v : explain::upsample(c, 17, 11).values) CHECK(v == doctest::Approx(0.4));

    explain::Heatmap h{2, 2, {0.0, 1.0, 0.0, 1.0}, "x"};
    const auto up = explain::upsample(h, 8, 8);
    CHECK(up.at(0, 0) == 0.0);  // clamped to the corner sample
    CHECK(up.at(7, 7) == 1.0);
    for (std::size_t x = 1; x < 8; ++x) CHECK(up.at(x, 3) >= up.at(x - 1, 3));
    const auto same = explain::upsample(h, 2, 2);
    CHECK(same.values == h.values);
    CHECK(code_of([&] { explain::upsample(h, 0, 4); }) == ErrorCode::DimMismatch);
}
