// SPDX-License-Identifier: Apache-2.0

#include "toxpipe/explain/gradcam.hpp"

#include <algorithm>
#include <cmath>

namespace toxpipe::explain {

double Heatmap::max_value() const {
    double m = 0.0;
    for (double v : values) {
        m = std::max(m, v);
    }
    return m;
}

template <typename T>
Heatmap gradcam(const nn::DenseNet<T>& net, const depict::StructImage& image, std::size_t label_index,
                GradCamTrace* trace) {
    if (!net.has_head()) {
        raise(ErrorCode::UntrainedHead, "grad-cam needs the classification head");
    }
    if (label_index >= net.config().num_outputs) {
        raise(ErrorCode::InvalidLabel, "label index " + std::to_string(label_index) + " out of range");
    }
    if (static_cast<std::size_t>(image.width) != net.config().input_size ||
        static_cast<std::size_t>(image.height) != net.config().input_size) {
        raise(ErrorCode::ShapeMismatch, "image does not match the network input size");
    }
    // private parameter copies so concurrent calls never touch shared gradient buffers
    auto local = net.detached();
    auto input = nn::Var<T>::leaf(nn::image_to_tensor<T>(image), true);
    const auto pass = local.forward(input, false, true);
    const auto score = nn::select_column(pass.logits, label_index);
    nn::backward(score);

    const nn::Tensor<T>& maps = pass.maps.value();
    const std::size_t channels = maps.dim(1);
    const std::size_t h = maps.dim(2);
    const std::size_t w = maps.dim(3);
    const std::size_t hw = h * w;
    nn::Tensor<T> grads = pass.maps.grad();
    if (grads.empty()) {
        grads = nn::Tensor<T>(maps.shape());
    }

    std::vector<double> alpha(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            s += grads[c * hw + i];
        }
        alpha[c] = s / static_cast<double>(hw);
    }

    Heatmap out{w, h, std::vector<double>(hw, 0.0), kGradCamLayer};
    for (std::size_t i = 0; i < hw; ++i) {
        double v = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            v += alpha[c] * maps[c * hw + i];
        }
        out.values[i] = std::max(v, 0.0);
    }
    const double peak = out.max_value();
    if (peak > 0.0) {
        for (double& v : out.values) {
            v /= peak;
        }
    }

    if (trace) {
        trace->activations = maps.template cast<double>();
        trace->activations.reshape({channels, h, w});
        trace->gradients = grads.template cast<double>();
        trace->gradients.reshape({channels, h, w});
        trace->channel_weights = alpha;
        trace->logit = static_cast<double>(score.value()[0]);
    }
    return out;
}

template Heatmap gradcam<float>(const nn::DenseNet<float>&, const depict::StructImage&, std::size_t, GradCamTrace*);
template Heatmap gradcam<double>(const nn::DenseNet<double>&, const depict::StructImage&, std::size_t,
                                 GradCamTrace*);

Heatmap upsample(const Heatmap& h, std::size_t width, std::size_t height) {
    if (h.width == 0 || h.height == 0 || width == 0 || height == 0) {
        raise(ErrorCode::DimMismatch, "cannot resize an empty heatmap");
    }
    Heatmap out{width, height, std::vector<double>(width * height), h.source_layer};
    const double sx = static_cast<double>(h.width) / static_cast<double>(width);
    const double sy = static_cast<double>(h.height) / static_cast<double>(height);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h.height - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h.height - 1);
        const double ty = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(h.width - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, h.width - 1);
            const double tx = fx - static_cast<double>(x0);
            const double top = (1 - tx) * h.at(x0, y0) + tx * h.at(x1, y0);
            const double bottom = (1 - tx) * h.at(x0, y1) + tx * h.at(x1, y1);
            out.values[y * width + x] = (1 - ty) * top + ty * bottom;
        }
    }
    return out;
}

depict::Rgb heat_color(double v) noexcept {
    v = std::clamp(v, 0.0, 1.0);
    return {static_cast<std::uint8_t>(std::lround(255.0 * v)), 0,
            static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - v)))};
}

depict::StructImage overlay(const Heatmap& h, const depict::StructImage& image, double alpha) {
    if (h.width != static_cast<std::size_t>(image.width) || h.height != static_cast<std::size_t>(image.height)) {
        raise(ErrorCode::DimMismatch, "heatmap " + std::to_string(h.width) + "x" + std::to_string(h.height) +
                                          " vs image " + std::to_string(image.width) + "x" +
                                          std::to_string(image.height));
    }
    alpha = std::clamp(alpha, 0.0, 1.0);
    depict::StructImage out = image;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const auto base = image.at(x, y);
            const auto heat = heat_color(h.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)));
            depict::Rgb px;
            for (std::size_t c = 0; c < 3; ++c) {
                px[c] = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * base[c] + alpha * heat[c]));
            }
            out.put(x, y, px);
        }
    }
    return out;
}

}  // namespace toxpipe::explain
