// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "toxpipe/ensemble/ensemble.hpp"
#include "toxpipe/nn/densenet.hpp"
#include "toxpipe/pipeline/dataset.hpp"

namespace toxpipe::pipeline {

inline constexpr std::uint32_t kBundleVersion = 1;

struct TrainingMetadata {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::uint64_t dataset_hash = 0;
    std::size_t train_records = 0;
    std::size_t excluded_records = 0;
    std::vector<double> loss_history;
    SplitFractions fractions;
    std::size_t augment_runs = 8;
    double confidence_weight = 0.5;

    bool operator==(const TrainingMetadata&) const = default;
};

/// Everything needed to predict: the extractor (with its training head, kept for explanations),
/// the ensemble with its feature scaler, and how it was trained.
struct ModelBundle {
    std::uint32_t format_version = kBundleVersion;
    nn::DenseNet<float> network;
    ensemble::EnsembleModel ensemble;
    TrainingMetadata meta;
};

/// Little-endian: "TOXB", u32 version, then sections {u32 tag, u64 length, payload}, then a
/// u64 FNV-1a checksum of every preceding byte.
std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle);

/// Throws TruncatedFile, VersionUnsupported (bad magic or version), ChecksumMismatch, or
/// BundleCorrupt for payloads that do not describe a consistent model.
ModelBundle deserialize_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

/// The trailing checksum the serialized form would carry.
std::uint64_t bundle_checksum(const ModelBundle& bundle);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

}  // namespace toxpipe::pipeline
