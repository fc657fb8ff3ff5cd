// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "toxpipe/ensemble/ensemble.hpp"
#include "toxpipe/nn/densenet.hpp"
#include "toxpipe/pipeline/dataset.hpp"

namespace toxpipe::pipeline {

struct PipelineConfig {
    PipelineConfig() { reseed(0); }

    std::uint64_t seed = 0;
    unsigned threads = 1;
    nn::NetworkConfig network;
    nn::TrainHyper training;
    ensemble::EnsembleParams ensemble;
    SplitFractions fractions;
    /// Augmented renderings per molecule for the feature-stability trust score.
    std::size_t augment_runs = 8;
    /// Share of the global confidence given to the feature-stability score.
    double confidence_weight = 0.5;
    unsigned fingerprint_radius = 2;
    std::size_t fingerprint_bits = 2048;

    /// Propagates `seed` into every stochastic component.
    void reseed(std::uint64_t s);
};

/// key = value lines; '#' starts a comment; blank lines ignored. Unknown keys and unparsable
/// values throw BadConfig with the line number. Keys:
///   seed threads image_size block_layers (comma list) growth_rate stem_channels compression
///   bottleneck_factor epochs batch_size learning_rate momentum svm_lambda svm_epochs
///   svm_calibration_fraction rf_trees rf_depth rf_max_features gbm_rounds gbm_depth
///   gbm_learning_rate gbm_lambda alpha (three comma-separated weights) train_fraction
///   validation_fraction test_fraction augment_runs confidence_weight fingerprint_radius
///   fingerprint_bits
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// The same keys, one per line, parseable by parse_config.
std::string format_config(const PipelineConfig& config);

}  // namespace toxpipe::pipeline
