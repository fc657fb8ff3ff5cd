// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "toxpipe/depict/raster.hpp"
#include "toxpipe/nn/ops.hpp"
#include "toxpipe/nn/tensor.hpp"

namespace toxpipe::nn {

struct NetworkConfig {
    std::vector<std::size_t> block_layers{2, 2, 4, 2};
    std::size_t growth_rate = 8;
    std::size_t stem_channels = 16;
    double compression = 0.5;
    /// 1x1 bottleneck width as a multiple of the growth rate.
    std::size_t bottleneck_factor = 4;
    std::size_t num_outputs = 12;
    std::size_t input_size = 224;

    std::size_t bottleneck_width() const noexcept { return bottleneck_factor * growth_rate; }
    /// Channels leaving the last block (and so the pooled feature length).
    std::size_t feature_dim() const;
    /// Channels after a transition that receives `channels`.
    std::size_t compressed(std::size_t channels) const;

    static NetworkConfig desk() { return {}; }
    static NetworkConfig full_scale() {
        NetworkConfig c;
        c.block_layers = {6, 12, 24, 16};
        c.growth_rate = 32;
        c.stem_channels = 64;
        return c;
    }

    bool operator==(const NetworkConfig&) const = default;
};

template <typename T>
struct ConvLayer {
    Var<T> kernels;  // (out, in, kh, kw)
    std::size_t stride = 1;
    std::size_t padding = 0;

    Var<T> forward(const Var<T>& x) const { return conv2d(x, kernels, stride, padding); }
};

template <typename T>
struct BatchNormLayer {
    Var<T> gamma;
    Var<T> beta;
    BatchNormState<T> state;

    Var<T> forward(const Var<T>& x, bool training) {
        return batch_norm(x, gamma, beta, state, training);
    }
};

/// BN -> ReLU -> 1x1 conv -> BN -> ReLU -> 3x3 conv producing `growth` new channels.
template <typename T>
struct DenseLayer {
    BatchNormLayer<T> norm1;
    ConvLayer<T> conv1;
    BatchNormLayer<T> norm2;
    ConvLayer<T> conv2;

    Var<T> forward(const Var<T>& x, bool training) {
        auto h = conv1.forward(relu(norm1.forward(x, training)));
        return conv2.forward(relu(norm2.forward(h, training)));
    }
};

template <typename T>
struct DenseBlock {
    std::vector<DenseLayer<T>> layers;

    /// Each layer sees the concatenation of the block input and all earlier layer outputs.
    Var<T> forward(const Var<T>& x, bool training) {
        std::vector<Var<T>> features{x};
        for (auto& layer : layers) {
            features.push_back(layer.forward(concat_channels(features), training));
        }
        return concat_channels(features);
    }
};

/// BN -> ReLU -> 1x1 conv -> 2x2 average pool.
template <typename T>
struct Transition {
    BatchNormLayer<T> norm;
    ConvLayer<T> conv;

    Var<T> forward(const Var<T>& x, bool training) {
        return avg_pool2(conv.forward(relu(norm.forward(x, training))));
    }
};

template <typename T>
struct AffineHead {
    Var<T> weight;  // (outputs, D)
    Var<T> bias;    // (outputs)

    bool present() const noexcept { return weight.valid() && bias.valid(); }
};

template <typename T>
struct ForwardPass {
    Var<T> maps;      // final BN + ReLU output, (N, D, h, w)
    Var<T> features;  // pooled, (N, D)
    Var<T> logits;    // (N, outputs); invalid when the head was not applied
};

/// Maps 8-bit RGB to (p / 255 - 0.5) / 0.25 in NCHW layout.
template <typename T>
Tensor<T> images_to_tensor(std::span<const depict::StructImage* const> images);

template <typename T>
Tensor<T> image_to_tensor(const depict::StructImage& image) {
    const depict::StructImage* p = &image;
    return images_to_tensor<T>(std::span<const depict::StructImage* const>(&p, 1));
}

template <typename T>
class DenseNet {
public:
    DenseNet() = default;

    /// He-normal convolution kernels, unit BN scale, zero shifts, small uniform head.
    static DenseNet initialize(const NetworkConfig& config, std::uint64_t seed);

    const NetworkConfig& config() const noexcept { return config_; }
    std::size_t feature_dim() const noexcept { return config_.feature_dim(); }

    ForwardPass<T> forward(const Var<T>& input, bool training, bool with_head = true);

    /// Pooled features for one image with running statistics and no graph. Does not mutate the
    /// network, so concurrent calls are safe.
    std::vector<T> extract(const depict::StructImage& image) const;
    /// Same for a batch; row i belongs to images[i].
    std::vector<std::vector<T>> extract(std::span<const depict::StructImage* const> images) const;

    std::vector<Var<T>*> parameters();
    /// Running means and variances, in a fixed order (for serialization).
    std::vector<Tensor<T>*> buffers();
    std::vector<const Tensor<T>*> buffers() const;

    bool has_head() const noexcept { return head.present(); }
    void drop_head() { head = AffineHead<T>{}; }

    /// Independent copy whose parameters are fresh leaves with no gradient requirement.
    DenseNet detached() const;

    /// Converts every parameter and buffer to another precision.
    template <typename U>
    DenseNet<U> cast() const;

    /// FNV-1a over the raw bytes of parameters then buffers.
    std::uint64_t checksum() const;

    ConvLayer<T> stem_conv;
    BatchNormLayer<T> stem_norm;
    std::vector<DenseBlock<T>> blocks;
    std::vector<Transition<T>> transitions;
    BatchNormLayer<T> final_norm;
    AffineHead<T> head;

private:
    NetworkConfig config_;

    template <typename U>
    friend class DenseNet;
};

struct TrainSample {
    const depict::StructImage* image = nullptr;
    std::vector<float> labels;        // one per output
    std::vector<std::uint8_t> mask;   // 1 = label present
};

struct TrainHyper {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

struct TrainResult {
    /// Mean masked loss per epoch, weighted by the labelled entries of each batch.
    std::vector<double> loss_history;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Mini-batch SGD with momentum on masked binary cross-entropy through the head. Throws
/// EmptyDataset when there are no samples.
TrainResult train(DenseNet<float>& net, std::span<const TrainSample> data, const TrainHyper& hyper,
                  const EpochCallback& on_epoch = {});

}  // namespace toxpipe::nn
