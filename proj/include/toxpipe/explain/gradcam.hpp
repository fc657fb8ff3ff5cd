// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "toxpipe/depict/raster.hpp"
#include "toxpipe/nn/densenet.hpp"

namespace toxpipe::explain {

/// Row-major saliency values in [0, 1].
struct Heatmap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;
    std::string source_layer;

    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
    double max_value() const;
};

/// Everything computed on the way to the map, kept for inspection.
struct GradCamTrace {
    nn::Tensor<double> activations;  // (C, h, w) target-layer maps
    nn::Tensor<double> gradients;    // d logit / d activations, same shape
    std::vector<double> channel_weights;
    double logit = 0.0;
};

inline constexpr const char* kGradCamLayer = "final_norm_relu";

/// Class activation map for one label: channel weights are the spatial mean of the logit's
/// gradient w.r.t. the final BN+ReLU maps; the weighted sum is rectified and divided by its max.
/// The result is at feature-map resolution; see upsample().
template <typename T>
Heatmap gradcam(const nn::DenseNet<T>& net, const depict::StructImage& image, std::size_t label_index,
                GradCamTrace* trace = nullptr);

/// Bilinear resize (pixel-centre aligned, edge clamped).
Heatmap upsample(const Heatmap& h, std::size_t width, std::size_t height);

/// Blue (0) to red (1) ramp.
depict::Rgb heat_color(double v) noexcept;

/// pixel = (1 - alpha) * image + alpha * heat_color(h), rounded to nearest. Throws DimMismatch
/// when the heatmap and image sizes differ.
depict::StructImage overlay(const Heatmap& h, const depict::StructImage& image, double alpha);

}  // namespace toxpipe::explain
