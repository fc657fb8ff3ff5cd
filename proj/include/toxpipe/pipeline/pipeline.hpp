// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "toxpipe/depict/raster.hpp"
#include "toxpipe/ensemble/ensemble.hpp"
#include "toxpipe/pipeline/bundle.hpp"
#include "toxpipe/pipeline/config.hpp"
#include "toxpipe/pipeline/dataset.hpp"
#include "toxpipe/pipeline/metrics.hpp"

namespace toxpipe::pipeline {

using Logger = std::function<void(const std::string&)>;

/// Depictions of the records that could be drawn; `kept[i]` is the record behind `images[i]`.
struct RenderedSet {
    std::vector<depict::StructImage> images;
    std::vector<std::size_t> kept;
    std::vector<QuarantinedRow> failed;
};

RenderedSet render_records(const std::vector<DatasetRecord>& records, std::size_t size);

/// Pooled extractor features, one row per image, computed in fixed-size batches.
ensemble::FeatureMatrix extract_features(const nn::DenseNet<float>& net,
                                         const std::vector<depict::StructImage>& images);

/// Renders, trains the extractor end to end through its temporary head, extracts features for
/// the training records and fits the ensemble on them.
ModelBundle train_model(const std::vector<DatasetRecord>& train, const PipelineConfig& config,
                        const Logger& log = {});

struct ScoredSet {
    std::vector<std::size_t> kept;  // record indices that could be depicted
    std::vector<std::vector<ensemble::LabelPrediction>> predictions;
};

ScoredSet score_records(const ModelBundle& bundle, const std::vector<DatasetRecord>& records);

/// Per-assay metrics over the ensemble's mean positive probability and majority verdict.
EvaluationReport evaluate_model(const ModelBundle& bundle, const std::vector<DatasetRecord>& records);

struct AssayReport {
    std::string assay;
    bool trained = false;
    int verdict = 0;
    /// Mean positive probability of the available classifiers.
    double probability = 0.0;
    std::array<std::optional<double>, ensemble::kClassifierCount> classifier_probability;
    double trust_ml = 0.0;
    double global_confidence = 0.0;
    std::string heatmap;
};

struct PredictionReport {
    std::string smiles;
    std::vector<AssayReport> assays;
    double trust_densenet = 0.0;
    /// Mean of the per-assay values over trained assays.
    double trust_ml = 0.0;
    double global_confidence = 0.0;
};

struct PredictOptions {
    bool explain = false;
    std::optional<std::size_t> augment_runs;  // bundle default when unset
    std::uint64_t seed = 0;
    std::filesystem::path heatmap_dir = ".";
    double overlay_alpha = 0.5;
    /// Explain only this assay when set.
    std::optional<std::size_t> explain_label;
};

/// Throws ParseFailure (wrapping the parser's message) for bad SMILES.
PredictionReport predict_report(const ModelBundle& bundle, const std::string& smiles, const PredictOptions& options = {});

/// Grad-CAM for one assay, upsampled and blended over the molecule's rendering.
depict::StructImage explain_overlay(const ModelBundle& bundle, const std::string& smiles, std::size_t assay,
                                    double alpha = 0.5);

/// One "key: value" per line.
std::string format_report_text(const PredictionReport& report);
/// Single-line JSON object.
std::string format_report_line(const PredictionReport& report);

/// File name stem derived from the SMILES text (16 hex digits).
std::string content_hash(std::string_view smiles);

// ---------------------------------------------------------------------------
// Fingerprint + random forest reference model

struct FingerprintBaseline {
    unsigned radius = 2;
    std::size_t nbits = 2048;
    std::array<std::optional<ensemble::RandomForest>, kAssayCount> forests;
};

ensemble::FeatureMatrix fingerprint_features(const std::vector<DatasetRecord>& records, unsigned radius,
                                             std::size_t nbits);

FingerprintBaseline fit_fingerprint_baseline(const std::vector<DatasetRecord>& train, const PipelineConfig& config);

/// Positive-class probability per record and assay (NaN where the assay was untrainable).
std::vector<std::array<double, kAssayCount>> baseline_scores(const FingerprintBaseline& model,
                                                             const std::vector<DatasetRecord>& records);

EvaluationReport evaluate_baseline(const FingerprintBaseline& model, const std::vector<DatasetRecord>& records);

}  // namespace toxpipe::pipeline
