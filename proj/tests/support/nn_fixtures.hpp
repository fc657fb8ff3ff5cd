// SPDX-License-Identifier: Apache-2.0
//
// Small random layers and networks in double precision for gradient and shape checks.

#pragma once

#include <vector>

#include "support/oracles.hpp"
#include "toxpipe/nn/densenet.hpp"

namespace toxpipe::fixtures {

using nn::Shape;
using nn::Var;

inline Var<double> param(Shape shape, Rng& rng, double scale = 0.5) {
    return Var<double>::leaf(oracle::random_tensor(std::move(shape), rng, scale), true);
}

/// Random gamma around 1 and beta around 0 so the affine part is exercised.
inline nn::BatchNormLayer<double> norm_layer(std::size_t channels, Rng& rng) {
    nn::Tensor<double> gamma(Shape{channels});
    nn::Tensor<double> beta(Shape{channels});
    for (std::size_t c = 0; c < channels; ++c) {
        gamma[c] = 1.0 + 0.2 * rng.normal();
        beta[c] = 0.1 * rng.normal();
    }
    return {Var<double>::leaf(gamma, true), Var<double>::leaf(beta, true), nn::BatchNormState<double>(channels)};
}

inline nn::DenseLayer<double> dense_layer(std::size_t in, std::size_t growth, std::size_t bottleneck, Rng& rng) {
    nn::DenseLayer<double> layer;
    layer.norm1 = norm_layer(in, rng);
    layer.conv1 = {param(Shape{bottleneck, in, 1, 1}, rng), 1, 0};
    layer.norm2 = norm_layer(bottleneck, rng);
    layer.conv2 = {param(Shape{growth, bottleneck, 3, 3}, rng), 1, 1};
    return layer;
}

inline nn::DenseBlock<double> dense_block(std::size_t in, std::size_t layers, std::size_t growth,
                                          std::size_t bottleneck, Rng& rng) {
    nn::DenseBlock<double> block;
    for (std::size_t l = 0; l < layers; ++l) {
        block.layers.push_back(dense_layer(in + l * growth, growth, bottleneck, rng));
    }
    return block;
}

inline nn::Transition<double> transition(std::size_t in, std::size_t out, Rng& rng) {
    return {norm_layer(in, rng), {param(Shape{out, in, 1, 1}, rng), 1, 0}};
}

inline std::vector<Var<double>*> layer_params(nn::DenseLayer<double>& l) {
    return {&l.norm1.gamma, &l.norm1.beta, &l.conv1.kernels, &l.norm2.gamma, &l.norm2.beta, &l.conv2.kernels};
}

/// A network small enough for exhaustive finite differences.
inline nn::NetworkConfig tiny_config() {
    nn::NetworkConfig c;
    c.block_layers = {1, 1};
    c.growth_rate = 2;
    c.stem_channels = 4;
    c.bottleneck_factor = 2;
    c.num_outputs = 3;
    c.input_size = 16;
    return c;
}

/// Random image-like input with values in a realistic standardized range.
inline nn::Tensor<double> random_input(std::size_t n, std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
    return oracle::random_tensor(Shape{n, c, h, w}, rng, 1.0);
}

}  // namespace toxpipe::fixtures
