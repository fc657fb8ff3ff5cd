// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/nn/densenet.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "toxpipe/random.hpp"

namespace toxpipe::nn {

std::size_t NetworkConfig::compressed(std::size_t channels) const {
    return static_cast<std::size_t>(std::ceil(compression * static_cast<double>(channels) - 1e-9));
}

std::size_t NetworkConfig::feature_dim() const {
    std::size_t c = stem_channels;
    for (std::size_t i = 0; i < block_layers.size(); ++i) {
        c += block_layers[i] * growth_rate;
        if (i + 1 < block_layers.size()) {
            c = compressed(c);
        }
    }
    return c;
}

template <typename T>
Tensor<T> images_to_tensor(std::span<const depict::StructImage* const> images) {
    if (images.empty()) {
        raise(ErrorCode::ShapeMismatch, "no images");
    }
    const auto h = static_cast<std::size_t>(images.front()->height);
    const auto w = static_cast<std::size_t>(images.front()->width);
    Tensor<T> out(Shape{images.size(), 3, h, w});
    for (std::size_t n = 0; n < images.size(); ++n) {
        const auto& img = *images[n];
        if (static_cast<std::size_t>(img.height) != h || static_cast<std::size_t>(img.width) != w) {
            raise(ErrorCode::ShapeMismatch, "images in a batch must share one size");
        }
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const std::uint8_t* px = img.pixels.data() + (y * w + x) * 3;
                for (std::size_t c = 0; c < 3; ++c) {
                    out.at(n, c, y, x) = static_cast<T>((px[c] / 255.0 - 0.5) / 0.25);
                }
            }
        }
    }
    return out;
}

namespace {

template <typename T>
ConvLayer<T> make_conv(Rng& rng, std::size_t out, std::size_t in, std::size_t k, std::size_t stride,
                       std::size_t padding) {
    Tensor<T> w(Shape{out, in, k, k});
    const double sd = std::sqrt(2.0 / static_cast<double>(in * k * k));
    for (auto& v : w.values()) {
        v = static_cast<T>(sd * rng.normal());
    }
    return {Var<T>::leaf(std::move(w), true), stride, padding};
}

template <typename T>
BatchNormLayer<T> make_norm(std::size_t channels) {
    return {Var<T>::leaf(Tensor<T>(Shape{channels}, T{1}), true), Var<T>::leaf(Tensor<T>(Shape{channels}), true),
            BatchNormState<T>(channels)};
}

template <typename T>
Var<T> fresh_leaf(const Var<T>& v) {
    return Var<T>::leaf(v.value(), false);
}

template <typename U, typename T>
Var<U> cast_leaf(const Var<T>& v) {
    return Var<U>::leaf(v.value().template cast<U>(), v.requires_grad());
}

template <typename U, typename T>
ConvLayer<U> cast_conv(const ConvLayer<T>& c) {
    return {cast_leaf<U>(c.kernels), c.stride, c.padding};
}

template <typename U, typename T>
BatchNormLayer<U> cast_norm(const BatchNormLayer<T>& n) {
    BatchNormLayer<U> out{cast_leaf<U>(n.gamma), cast_leaf<U>(n.beta), BatchNormState<U>(0)};
    out.state.running_mean = n.state.running_mean.template cast<U>();
    out.state.running_var = n.state.running_var.template cast<U>();
    out.state.epsilon = static_cast<U>(n.state.epsilon);
    out.state.momentum = static_cast<U>(n.state.momentum);
    return out;
}

}  // namespace

template <typename T>
DenseNet<T> DenseNet<T>::initialize(const NetworkConfig& config, std::uint64_t seed) {
    if (config.block_layers.empty() || config.growth_rate == 0 || config.stem_channels == 0 ||
        !(config.compression > 0.0 && config.compression <= 1.0) || config.num_outputs == 0) {
        raise(ErrorCode::ShapeMismatch, "invalid network configuration");
    }
    Rng rng(seed);
    DenseNet net;
    net.config_ = config;
    net.stem_conv = make_conv<T>(rng, config.stem_channels, 3, 7, 2, 3);
    net.stem_norm = make_norm<T>(config.stem_channels);
    std::size_t c = config.stem_channels;
    const std::size_t bw = config.bottleneck_width();
    for (std::size_t b = 0; b < config.block_layers.size(); ++b) {
        DenseBlock<T> block;
        for (std::size_t l = 0; l < config.block_layers[b]; ++l) {
            const std::size_t in = c + l * config.growth_rate;
            block.layers.push_back({make_norm<T>(in), make_conv<T>(rng, bw, in, 1, 1, 0), make_norm<T>(bw),
                                    make_conv<T>(rng, config.growth_rate, bw, 3, 1, 1)});
        }
        net.blocks.push_back(std::move(block));
        c += config.block_layers[b] * config.growth_rate;
        if (b + 1 < config.block_layers.size()) {
            const std::size_t out = config.compressed(c);
            net.transitions.push_back({make_norm<T>(c), make_conv<T>(rng, out, c, 1, 1, 0)});
            c = out;
        }
    }
    net.final_norm = make_norm<T>(c);
    Tensor<T> w(Shape{config.num_outputs, c});
    const double bound = 1.0 / std::sqrt(static_cast<double>(c));
    for (auto& v : w.values()) {
        v = static_cast<T>(rng.uniform(-bound, bound));
    }
    net.head = {Var<T>::leaf(std::move(w), true), Var<T>::leaf(Tensor<T>(Shape{config.num_outputs}), true)};
    return net;
}

template <typename T>
ForwardPass<T> DenseNet<T>::forward(const Var<T>& input, bool training, bool with_head) {
    const Shape& s = input.shape();
    if (s.size() != 4 || s[1] != 3) {
        raise(ErrorCode::ShapeMismatch, "network input must be (N, 3, H, W), got " + shape_string(s));
    }
    Var<T> h = max_pool(relu(stem_norm.forward(stem_conv.forward(input), training)), 3, 2, 1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        h = blocks[b].forward(h, training);
        if (b < transitions.size()) {
            h = transitions[b].forward(h, training);
        }
    }
    ForwardPass<T> out;
    out.maps = relu(final_norm.forward(h, training));
    out.features = global_avg_pool(out.maps);
    if (with_head) {
        if (!head.present()) {
            raise(ErrorCode::UntrainedHead, "network has no classification head");
        }
        out.logits = linear(out.features, head.weight, head.bias);
    }
    return out;
}

template <typename T>
std::vector<std::vector<T>> DenseNet<T>::extract(std::span<const depict::StructImage* const> images) const {
    for (const auto* img : images) {
        if (static_cast<std::size_t>(img->width) != config_.input_size ||
            static_cast<std::size_t>(img->height) != config_.input_size) {
            raise(ErrorCode::ShapeMismatch, "image is " + std::to_string(img->width) + "x" +
                                                std::to_string(img->height) + ", network expects " +
                                                std::to_string(config_.input_size));
        }
    }
    NoGradGuard guard;
    DenseNet copy = *this;  // shares parameter storage; inference mode leaves the copy's stats alone
    const auto pass = copy.forward(Var<T>::leaf(images_to_tensor<T>(images)), false, false);
    const Tensor<T>& f = pass.features.value();
    const std::size_t d = f.dim(1);
    std::vector<std::vector<T>> rows(images.size());
    for (std::size_t n = 0; n < rows.size(); ++n) {
        rows[n].assign(f.data() + n * d, f.data() + (n + 1) * d);
    }
    return rows;
}

template <typename T>
std::vector<T> DenseNet<T>::extract(const depict::StructImage& image) const {
    const depict::StructImage* p = &image;
    return extract(std::span<const depict::StructImage* const>(&p, 1)).front();
}

template <typename T>
std::vector<Var<T>*> DenseNet<T>::parameters() {
    std::vector<Var<T>*> out;
    auto add_norm = [&](BatchNormLayer<T>& n) {
        out.push_back(&n.gamma);
        out.push_back(&n.beta);
    };
    out.push_back(&stem_conv.kernels);
    add_norm(stem_norm);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (auto& layer : blocks[b].layers) {
            add_norm(layer.norm1);
            out.push_back(&layer.conv1.kernels);
            add_norm(layer.norm2);
            out.push_back(&layer.conv2.kernels);
        }
        if (b < transitions.size()) {
            add_norm(transitions[b].norm);
            out.push_back(&transitions[b].conv.kernels);
        }
    }
    add_norm(final_norm);
    if (head.present()) {
        out.push_back(&head.weight);
        out.push_back(&head.bias);
    }
    return out;
}

template <typename T>
std::vector<const Tensor<T>*> DenseNet<T>::buffers() const {
    std::vector<const Tensor<T>*> out;
    auto add = [&](const BatchNormLayer<T>& n) {
        out.push_back(&n.state.running_mean);
        out.push_back(&n.state.running_var);
    };
    add(stem_norm);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (const auto& layer : blocks[b].layers) {
            add(layer.norm1);
            add(layer.norm2);
        }
        if (b < transitions.size()) {
            add(transitions[b].norm);
        }
    }
    add(final_norm);
    return out;
}

template <typename T>
std::vector<Tensor<T>*> DenseNet<T>::buffers() {
    const auto& self = *this;
    std::vector<Tensor<T>*> out;
    for (const auto* t : self.buffers()) {
        out.push_back(const_cast<Tensor<T>*>(t));
    }
    return out;
}

template <typename T>
DenseNet<T> DenseNet<T>::detached() const {
    DenseNet out = *this;
    for (auto* p : out.parameters()) {
        *p = fresh_leaf(*p);
    }
    return out;
}

template <typename T>
template <typename U>
DenseNet<U> DenseNet<T>::cast() const {
    DenseNet<U> out;
    out.config_ = config_;
    out.stem_conv = cast_conv<U>(stem_conv);
    out.stem_norm = cast_norm<U>(stem_norm);
    for (const auto& block : blocks) {
        DenseBlock<U> nb;
        for (const auto& l : block.layers) {
            nb.layers.push_back({cast_norm<U>(l.norm1), cast_conv<U>(l.conv1), cast_norm<U>(l.norm2),
                                 cast_conv<U>(l.conv2)});
        }
        out.blocks.push_back(std::move(nb));
    }
    for (const auto& t : transitions) {
        out.transitions.push_back({cast_norm<U>(t.norm), cast_conv<U>(t.conv)});
    }
    out.final_norm = cast_norm<U>(final_norm);
    if (head.present()) {
        out.head = {cast_leaf<U>(head.weight), cast_leaf<U>(head.bias)};
    }
    return out;
}

template <typename T>
std::uint64_t DenseNet<T>::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const Tensor<T>& t) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
        for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
            h = (h ^ bytes[i]) * 0x100000001b3ULL;
        }
    };
    for (auto* p : const_cast<DenseNet&>(*this).parameters()) {
        mix(p->value());
    }
    for (const auto* b : buffers()) {
        mix(*b);
    }
    return h;
}

template class DenseNet<float>;
template class DenseNet<double>;
template DenseNet<double> DenseNet<float>::cast<double>() const;
template DenseNet<float> DenseNet<double>::cast<float>() const;
template DenseNet<float> DenseNet<float>::cast<float>() const;
template DenseNet<double> DenseNet<double>::cast<double>() const;
template Tensor<float> images_to_tensor<float>(std::span<const depict::StructImage* const>);
template Tensor<double> images_to_tensor<double>(std::span<const depict::StructImage* const>);

TrainResult train(DenseNet<float>& net, std::span<const TrainSample> data, const TrainHyper& hyper,
                  const EpochCallback& on_epoch) {
    if (data.empty()) {
        raise(ErrorCode::EmptyDataset, "no training samples");
    }
    if (!net.has_head()) {
        raise(ErrorCode::UntrainedHead, "training needs a classification head");
    }
    const std::size_t outputs = net.config().num_outputs;
    for (const auto& s : data) {
        if (!s.image || s.labels.size() != outputs || s.mask.size() != outputs) {
            raise(ErrorCode::ShapeMismatch, "training sample does not provide " + std::to_string(outputs) + " labels");
        }
    }
    const std::size_t batch = std::max<std::size_t>(1, hyper.batch_size);
    auto params = net.parameters();
    std::vector<Tensor<float>> velocity;
    for (auto* p : params) {
        velocity.emplace_back(p->shape());
    }
    const auto lr = static_cast<float>(hyper.learning_rate);
    const auto mu = static_cast<float>(hyper.momentum);

    Rng rng(hyper.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    TrainResult result;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        std::size_t label_count = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const std::size_t b = end - start;
            std::vector<const depict::StructImage*> images;
            Tensor<float> targets(Shape{b, outputs});
            Tensor<float> mask(Shape{b, outputs});
            std::size_t count = 0;
            for (std::size_t i = 0; i < b; ++i) {
                const TrainSample& s = data[order[start + i]];
                images.push_back(s.image);
                for (std::size_t k = 0; k < outputs; ++k) {
                    targets[i * outputs + k] = s.labels[k];
                    mask[i * outputs + k] = s.mask[k] ? 1.0f : 0.0f;
                    count += s.mask[k] ? 1 : 0;
                }
            }
            for (auto* p : params) {
                p->zero_grad();
            }
            const auto pass = net.forward(Var<float>::leaf(images_to_tensor<float>(images)), true, true);
            const auto loss = masked_bce_with_logits(pass.logits, targets, mask);
            if (count == 0) {
                continue;
            }
            loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(count);
            label_count += count;
            backward(loss);
            for (std::size_t k = 0; k < params.size(); ++k) {
                const Tensor<float>& g = params[k]->grad();
                Tensor<float>& v = velocity[k];
                Tensor<float>& w = params[k]->mutable_value();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    v[i] = mu * v[i] + (g.empty() ? 0.0f : g[i]);
                    w[i] -= lr * v[i];
                }
            }
        }
        for (auto* p : params) {
            p->zero_grad();
        }
        const double epoch_loss = label_count ? loss_sum / static_cast<double>(label_count) : 0.0;
        result.loss_history.push_back(epoch_loss);
        if (on_epoch) {
            on_epoch(epoch, epoch_loss);
        }
    }
    return result;
}

}  // namespace toxpipe::nn
